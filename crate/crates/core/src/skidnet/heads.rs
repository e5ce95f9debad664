use rand::Rng;
use skid_autograd::{Graph, ParamId, ParamStore, Tensor, Var};

use super::config::{DownstreamConfig, HeadKind, SkidConfig};
use super::encoder::{Encoder, EncoderTaps};
use super::layers::{Conv3Unit, Dense};
use crate::error::{Result, SkidError};
use crate::framekit::{canonical_patches, Frame, Raster, PATCH_SIDE};

/// Stacks slot `s` of every sample into one [B, 1, 64, 64] tensor per slot.
pub fn patch_batch<P: AsRef<[Raster]>>(samples: &[P], n_patches: usize) -> Result<Vec<Tensor>> {
    let b = samples.len();
    if b == 0 {
        return Err(SkidError::InvalidArgument("empty batch".into()));
    }
    let area = PATCH_SIDE * PATCH_SIDE;
    let mut slots = vec![Vec::with_capacity(b * area); n_patches];
    for s in samples {
        let s = s.as_ref();
        if s.len() != n_patches {
            return Err(SkidError::Mismatch(format!(
                "sample has {} patches, expected {n_patches}",
                s.len()
            )));
        }
        for (slot, p) in slots.iter_mut().zip(s) {
            if p.height() != PATCH_SIDE || p.width() != PATCH_SIDE {
                return Err(SkidError::Mismatch(format!(
                    "patch is {}x{}, expected {PATCH_SIDE}x{PATCH_SIDE}",
                    p.height(),
                    p.width()
                )));
            }
            slot.extend_from_slice(p.data());
        }
    }
    slots
        .into_iter()
        .map(|d| Ok(Tensor::from_vec(&[b, 1, PATCH_SIDE, PATCH_SIDE], d)?))
        .collect()
}

/// Encoder, global average pooling, a hidden dense layer and a K-way
/// classifier. Also used with 54 classes for the geometric baseline.
#[derive(Debug, Clone)]
pub struct PretextModel {
    encoder: Encoder,
    fc1: Dense,
    fc2: Dense,
}

impl PretextModel {
    pub fn build<R: Rng + ?Sized>(cfg: &SkidConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        let encoder = Encoder::build(cfg, store, rng)?;
        let c = cfg.feature_channels();
        let fc1 = Dense::declare(store, rng, "head.fc1", c, cfg.fc_hidden, true);
        let fc2 = Dense::declare(store, rng, "head.fc2", cfg.fc_hidden, cfg.n_classes, false);
        Ok(PretextModel { encoder, fc1, fc2 })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn config(&self) -> &SkidConfig {
        self.encoder.config()
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, patches: &[Var]) -> Result<(Var, EncoderTaps)> {
        let taps = self.encoder.forward(g, store, patches)?;
        let pooled = g.global_avg_pool(taps.output())?;
        let h = self.fc1.forward(g, store, pooled)?;
        let logits = self.fc2.forward(g, store, h)?;
        Ok((logits, taps))
    }

    /// Logits [B, K] for a batch of patch sets, without gradients.
    pub fn logits<P: AsRef<[Raster]>>(&self, store: &ParamStore, samples: &[P]) -> Result<Tensor> {
        let mut g = Graph::new();
        let inputs: Vec<Var> = patch_batch(samples, self.config().n_patches)?
            .into_iter()
            .map(|t| g.input(t))
            .collect();
        let (logits, _) = self.forward(&mut g, store, &inputs)?;
        Ok(g.value(logits).clone())
    }
}

#[derive(Debug, Clone)]
struct LstmLayer {
    w: ParamId,
    b: ParamId,
    hidden: usize,
    pad: usize,
}

#[derive(Debug, Clone)]
enum TemporalHead {
    ConvLstm(Vec<LstmLayer>),
    Cnn3d(Vec<Conv3Unit>),
}

/// Frozen (by default) encoder applied per frame, followed by a temporal
/// head and a sigmoid classifier with one output per label.
#[derive(Debug, Clone)]
pub struct DownstreamModel {
    encoder: Encoder,
    cfg: DownstreamConfig,
    head: TemporalHead,
    fc: Dense,
    head_ids: Vec<ParamId>,
}

impl DownstreamModel {
    pub fn build<R: Rng + ?Sized>(
        skid: &SkidConfig,
        cfg: &DownstreamConfig,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let encoder = Encoder::build(skid, store, rng)?;
        let c = skid.feature_channels();
        if let Some(expected) = cfg.expected_feature_channels {
            if expected != c {
                return Err(SkidError::Construction {
                    block: "downstream head".into(),
                    msg: format!("expects {expected} feature channels, encoder emits {c}"),
                });
            }
        }
        let mut head_ids = Vec::new();
        let (head, width) = match cfg.head {
            HeadKind::ConvLstm => {
                let hd = cfg.convlstm_channels;
                let k = cfg.convlstm_kernel;
                let mut layers = Vec::new();
                let mut cin = c;
                for l in 0..cfg.convlstm_layers {
                    // Glorot-uniform gates, forget-gate bias 1
                    let fans = ((cin + hd) * k * k + 4 * hd * k * k) as f64;
                    let w = store.add_uniform(format!("clf.lstm{l}.w"), &[4 * hd, cin + hd, k, k], (6.0 / fans).sqrt(), rng);
                    let mut bias = vec![0.0; 4 * hd];
                    bias[hd..2 * hd].fill(1.0);
                    let b = store.add(format!("clf.lstm{l}.b"), Tensor::from_vec(&[4 * hd], bias)?);
                    head_ids.extend([w, b]);
                    layers.push(LstmLayer {
                        w,
                        b,
                        hidden: hd,
                        pad: k / 2,
                    });
                    cin = hd;
                }
                (TemporalHead::ConvLstm(layers), hd)
            }
            HeadKind::Cnn3d => {
                let mut units = Vec::new();
                let mut cin = c;
                for l in 0..cfg.cnn3d_layers {
                    let u = Conv3Unit::declare(store, rng, &format!("clf.conv3d{l}"), cin, cfg.cnn3d_channels);
                    head_ids.extend([u.w, u.b]);
                    units.push(u);
                    cin = cfg.cnn3d_channels;
                }
                (TemporalHead::Cnn3d(units), cfg.cnn3d_channels)
            }
        };
        let fc = Dense::declare(store, rng, "clf.fc", width, cfg.n_labels, false);
        head_ids.extend([fc.w, fc.b]);
        encoder.set_frozen(store, cfg.encoder_frozen);
        Ok(DownstreamModel {
            encoder,
            cfg: cfg.clone(),
            head,
            fc,
            head_ids,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn config(&self) -> &DownstreamConfig {
        &self.cfg
    }

    pub fn head_param_ids(&self) -> &[ParamId] {
        &self.head_ids
    }

    /// Encoder features [C, h, w] for each frame, computed without gradients.
    pub fn encode_frames(&self, store: &ParamStore, frames: &[Frame]) -> Result<Vec<Tensor>> {
        const CHUNK: usize = 8;
        let n = self.encoder.config().n_patches;
        let mut out = Vec::with_capacity(frames.len());
        for chunk in frames.chunks(CHUNK) {
            let sets = chunk
                .iter()
                .map(|f| canonical_patches(f, n))
                .collect::<Result<Vec<_>>>()?;
            let mut g = Graph::new();
            let inputs: Vec<Var> = patch_batch(&sets, n)?.into_iter().map(|t| g.input(t)).collect();
            let taps = self.encoder.forward(&mut g, store, &inputs)?;
            out.extend(split_batch(g.value(taps.output()))?);
        }
        Ok(out)
    }

    /// Logits [B, L] from a time-ordered sequence of [B, C, h, w] maps.
    pub fn head_logits(&self, g: &mut Graph, store: &ParamStore, seq: &[Var]) -> Result<Var> {
        if seq.is_empty() {
            return Err(SkidError::InvalidArgument("empty frame sequence".into()));
        }
        let last = match &self.head {
            TemporalHead::ConvLstm(layers) => {
                let mut xs = seq.to_vec();
                for layer in layers {
                    xs = convlstm_layer(g, store, layer, &xs)?;
                }
                *xs.last().expect("non-empty sequence")
            }
            TemporalHead::Cnn3d(units) => {
                let mut parts = Vec::with_capacity(seq.len());
                for &x in seq {
                    let s = g.shape(x).to_vec();
                    parts.push(g.reshape(x, &[s[0], s[1], 1, s[2], s[3]])?);
                }
                let mut v = g.concat(&parts, 2)?;
                for u in units {
                    v = u.forward(g, store, v)?;
                }
                v
            }
        };
        let pooled = g.global_avg_pool(last)?;
        self.fc.forward(g, store, pooled)
    }

    /// Full pass from raw frames of one clip: the frames form the encoder
    /// batch and are then fed to the head in order. Returns logits [1, L].
    /// Inputs track gradients so encoder activations can be differentiated
    /// even while the encoder is frozen.
    pub fn forward_clip(&self, g: &mut Graph, store: &ParamStore, frames: &[Frame]) -> Result<(Var, EncoderTaps)> {
        let n = self.encoder.config().n_patches;
        let sets = frames
            .iter()
            .map(|f| canonical_patches(f, n))
            .collect::<Result<Vec<_>>>()?;
        let inputs: Vec<Var> = patch_batch(&sets, n)?.into_iter().map(|t| g.input_with_grad(t)).collect();
        let taps = self.encoder.forward(g, store, &inputs)?;
        let out = taps.output();
        let seq = (0..frames.len())
            .map(|t| g.slice(out, 0, t, 1))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok((self.head_logits(g, store, &seq)?, taps))
    }

    /// Sigmoid outputs for a batch of clips given cached features
    /// (`clips[b][t]` is [C, h, w]; every clip has the same length).
    pub fn predict_features(&self, store: &ParamStore, clips: &[Vec<&Tensor>]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let seq = feature_sequence(&mut g, clips)?;
        let logits = self.head_logits(&mut g, store, &seq)?;
        let l = self.cfg.n_labels;
        Ok(g
            .value(logits)
            .data()
            .chunks(l)
            .map(|row| row.iter().map(|&z| sigmoid(z)).collect())
            .collect())
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Graph inputs `seq[t]` of shape [B, C, h, w] from per-clip feature lists.
pub fn feature_sequence(g: &mut Graph, clips: &[Vec<&Tensor>]) -> Result<Vec<Var>> {
    let t_len = clips.first().map(|c| c.len()).unwrap_or(0);
    if t_len == 0 || clips.iter().any(|c| c.len() != t_len) {
        return Err(SkidError::Mismatch("clips must be non-empty and equally long".into()));
    }
    let mut seq = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let items: Vec<Tensor> = clips.iter().map(|c| c[t].clone()).collect();
        seq.push(g.input(Tensor::stack(&items)?));
    }
    Ok(seq)
}

fn split_batch(t: &Tensor) -> Result<Vec<Tensor>> {
    let s = t.shape();
    let per: usize = s[1..].iter().product();
    t.data()
        .chunks(per)
        .map(|c| Ok(Tensor::from_vec(&s[1..], c.to_vec())?))
        .collect()
}

fn convlstm_layer(g: &mut Graph, store: &ParamStore, layer: &LstmLayer, xs: &[Var]) -> Result<Vec<Var>> {
    let s = g.shape(xs[0]).to_vec();
    let hd = layer.hidden;
    let state = [s[0], hd, s[2], s[3]];
    let mut h = g.input(Tensor::zeros(&state));
    let mut c = g.input(Tensor::zeros(&state));
    let w = g.param(store, layer.w)?;
    let b = g.param(store, layer.b)?;
    let mut hs = Vec::with_capacity(xs.len());
    for &x in xs {
        let xh = g.concat(&[x, h], 1)?;
        let z = g.conv2d(xh, w, Some(b), 1, layer.pad)?;
        let zi = g.slice(z, 1, 0, hd)?;
        let zf = g.slice(z, 1, hd, hd)?;
        let zg = g.slice(z, 1, 2 * hd, hd)?;
        let zo = g.slice(z, 1, 3 * hd, hd)?;
        let i = g.sigmoid(zi);
        let f = g.sigmoid(zf);
        let gg = g.tanh(zg);
        let o = g.sigmoid(zo);
        let fc = g.mul(f, c)?;
        let ig = g.mul(i, gg)?;
        c = g.add(fc, ig)?;
        let tc = g.tanh(c);
        h = g.mul(o, tc)?;
        hs.push(h);
    }
    Ok(hs)
}

/// Builds a downstream model with the 3-D convolutional head.
pub fn build_cnn3d_head<R: Rng + ?Sized>(
    skid: &SkidConfig,
    cfg: &DownstreamConfig,
    store: &mut ParamStore,
    rng: &mut R,
) -> Result<DownstreamModel> {
    DownstreamModel::build(skid, &cfg.clone().with_head(HeadKind::Cnn3d), store, rng)
}
