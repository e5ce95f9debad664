//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use rand::Rng;
use skid_autograd::{Graph, ParamId, ParamStore, Var};
use skid_core::framekit::{Frame, Raster, PATCH_SIDE};
use skid_core::rng::seeded;
use skid_core::skidnet::{patch_batch, DownstreamConfig, HeadKind, PretextModel, SkidConfig};
use skid_core::Plane;

fn conv(cin: usize, cout: usize, k: usize) -> usize {
    cout * cin * k * k + cout
}

fn dense(i: usize, o: usize) -> usize {
    i * o + o
}

/// Encoder parameter count from the layer table, written out by hand.
pub fn audit_encoder(c: &SkidConfig) -> usize {
    let f = c.branch_block_filters;
    let branches = c.n_patches * (conv(1, f, 3) + 3 * conv(f, f, 3));
    let reduce = conv(c.n_patches * f, c.onebyone_filters, 1);
    if !c.has_blocks() {
        return branches + reduce;
    }
    let skip = |ch: usize, mid: usize| conv(ch, mid, 3) + conv(mid, ch, 3);
    let dimred = |cin: usize, out: usize| conv(cin, out / 2, 3) + conv(out / 2, out / 2, 3) + conv(cin, out / 2, 1);
    branches
        + reduce
        + skip(c.onebyone_filters, c.skip1_first_conv)
        + dimred(c.skip1_out, c.dimred1_out)
        + skip(c.dimred1_out, c.skip2_first_conv)
        + dimred(c.skip2_out, c.dimred2_out)
}

pub fn audit_pretext(c: &SkidConfig) -> usize {
    let feat = if c.has_blocks() { c.dimred2_out } else { c.onebyone_filters };
    audit_encoder(c) + dense(feat, c.fc_hidden) + dense(c.fc_hidden, c.n_classes)
}

/// Trainable head parameters of the downstream model.
pub fn audit_head(c: &SkidConfig, d: &DownstreamConfig) -> usize {
    let feat = if c.has_blocks() { c.dimred2_out } else { c.onebyone_filters };
    let (mut n, mut cin) = (0, feat);
    match d.head {
        HeadKind::ConvLstm => {
            let (h, k) = (d.convlstm_channels, d.convlstm_kernel);
            for _ in 0..d.convlstm_layers {
                n += 4 * h * (cin + h) * k * k + 4 * h;
                cin = h;
            }
        }
        HeadKind::Cnn3d => {
            for _ in 0..d.cnn3d_layers {
                n += d.cnn3d_channels * cin * 27 + d.cnn3d_channels;
                cin = d.cnn3d_channels;
            }
        }
    }
    n + dense(cin, d.n_labels)
}

/// Every filter count set to 8.
pub fn tiny_config() -> SkidConfig {
    SkidConfig {
        branch_block_filters: 8,
        onebyone_filters: 8,
        skip1_first_conv: 8,
        skip1_out: 8,
        dimred1_out: 8,
        skip2_first_conv: 8,
        skip2_out: 8,
        dimred2_out: 8,
        fc_hidden: 8,
        ..SkidConfig::miniature()
    }
}

pub struct GradSample {
    pub name: String,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradSample {
    pub fn rel_err(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(1e-6);
        (self.analytic - self.numeric).abs() / scale
    }
}

/// Central differences of the pretext cross-entropy on `n_params` randomly
/// chosen scalar parameters with a non-negligible analytic gradient.
pub fn pretext_gradcheck(cfg: &SkidConfig, n_params: usize, seed: u64) -> Vec<GradSample> {
    let mut rng = seeded(seed);
    let mut store = ParamStore::new();
    let model = PretextModel::build(cfg, &mut store, &mut rng).unwrap();
    let samples: Vec<Vec<Raster>> = (0..2)
        .map(|_| {
            (0..cfg.n_patches)
                .map(|_| {
                    let px = (0..PATCH_SIDE * PATCH_SIDE).map(|_| rng.random::<f64>()).collect();
                    Raster::from_vec(PATCH_SIDE, PATCH_SIDE, px).unwrap()
                })
                .collect()
        })
        .collect();
    let labels = [1usize, cfg.n_classes - 1];
    let inputs = patch_batch(&samples, cfg.n_patches).unwrap();
    let loss_of = |store: &ParamStore, g: &mut Graph| -> Var {
        let xs: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
        let (logits, _) = model.forward(g, store, &xs).unwrap();
        g.softmax_cross_entropy(logits, &labels).unwrap()
    };
    let mut g = Graph::new();
    let loss = loss_of(&store, &mut g);
    let grads = g.backward(loss).unwrap();

    let ids: Vec<ParamId> = store.ids().collect();
    // small enough that early-layer ReLU and max-pool switches are rarely crossed
    let h = 1e-6;
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < n_params && tries < 100 * n_params {
        tries += 1;
        let id = ids[rng.random_range(0..ids.len())];
        let k = rng.random_range(0..store.param(id).numel());
        let analytic = grads.param(id).map_or(0.0, |t| t.data()[k]);
        if analytic.abs() < 1e-5 {
            continue;
        }
        let orig = store.value(id).unwrap().data()[k];
        let mut eval = |v: f64| {
            store.value_mut(id).unwrap().data_mut()[k] = v;
            let mut g = Graph::new();
            let l = loss_of(&store, &mut g);
            g.value(l).item()
        };
        let numeric = (eval(orig + h) - eval(orig - h)) / (2.0 * h);
        store.value_mut(id).unwrap().data_mut()[k] = orig;
        out.push(GradSample {
            name: format!("{}[{k}]", store.param(id).name),
            analytic,
            numeric,
        });
    }
    out
}

pub fn random_frame(side: usize, seed: u64) -> Frame {
    let mut rng = seeded(seed);
    let r = Raster::from_vec(side, side, (0..side * side).map(|_| rng.random::<f64>()).collect()).unwrap();
    Frame::new(r, Plane::Sagittal).unwrap()
}

/// Frame whose partition cell `i` has constant intensity `i / n`.
pub fn staircase(side: usize, n: usize) -> Frame {
    let g = (n as f64).sqrt() as usize;
    let cell = side / g;
    let r = Raster::from_fn(side, side, |y, x| {
        let (cy, cx) = ((y / cell).min(g - 1), (x / cell).min(g - 1));
        (cy * g + cx) as f64 / n as f64
    });
    Frame::new(r, Plane::Coronal).unwrap()
}
