use skid_autograd::{Graph, ParamStore, Var};

use crate::error::{invalid, Result};
use crate::framekit::{canonical_patches, center_origin, Frame, Raster, PATCH_SIDE};
use crate::skidnet::{patch_batch, BlockId, DownstreamModel, PretextModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    /// Layer-resolution map after the ReLU, before normalization.
    pub raw: Raster,
    /// Frame-resolution map scaled so its maximum is 1 (all zero if flagged).
    pub values: Raster,
    pub target: usize,
    pub layer: BlockId,
    pub all_zero: bool,
}

/// ReLU(Σ_c mean(∂y/∂A_c)·A_c) for every batch item of `activation`
/// ([B, C, h, w]); `target` must be a scalar.
pub fn cam_grids(g: &Graph, target: Var, activation: Var) -> Result<Vec<Raster>> {
    let grads = g.backward_retaining(target, &[activation])?;
    let a = g.value(activation);
    let s = a.shape().to_vec();
    if s.len() != 4 {
        return Err(invalid(format!("activation {s:?} is not [B, C, h, w]")));
    }
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    let hw = h * w;
    let zero = vec![0.0; a.numel()];
    let gv = grads.var(activation).map(|t| t.data()).unwrap_or(&zero);
    let mut out = Vec::with_capacity(b);
    for n in 0..b {
        let mut m = vec![0.0; hw];
        for ch in 0..c {
            let off = (n * c + ch) * hw;
            let alpha = gv[off..off + hw].iter().sum::<f64>() / hw as f64;
            if alpha == 0.0 {
                continue;
            }
            for (mi, &ai) in m.iter_mut().zip(&a.data()[off..off + hw]) {
                *mi += alpha * ai;
            }
        }
        m.iter_mut().for_each(|v| *v = v.max(0.0));
        out.push(Raster::from_vec(h, w, m)?);
    }
    Ok(out)
}

fn normalize(r: &Raster) -> (Raster, bool) {
    let max = r.max();
    if max > 0.0 {
        (Raster::from_vec(r.height(), r.width(), r.data().iter().map(|v| v / max).collect()).expect("same size"), false)
    } else {
        (Raster::new(r.height(), r.width()), true)
    }
}

/// Bilinear upsampling to `side`×`side`, then max-normalization.
pub fn to_frame_map(raw: Raster, side: usize, target: usize, layer: BlockId) -> SaliencyMap {
    let up = raw.resize_bilinear(side, side);
    let (values, all_zero) = normalize(&up);
    SaliencyMap {
        raw,
        values,
        target,
        layer,
        all_zero,
    }
}

fn scalar_logit(g: &mut Graph, logits: Var, row: usize, target: usize) -> Result<Var> {
    let k = g.shape(logits)[1];
    if target >= k {
        return Err(invalid(format!("target class {target} >= {k} outputs")));
    }
    let r = g.slice(logits, 0, row, 1)?;
    let v = g.slice(r, 1, target, 1)?;
    Ok(g.sum(v))
}

/// Frame-level map for the concat layer: each branch's slice of channels
/// only sees its own patch, so its map is placed over that patch's crop.
fn mosaic(g: &Graph, target: Var, act: Var, n_patches: usize, side: usize) -> Result<Raster> {
    let grads = g.backward_retaining(target, &[act])?;
    let a = g.value(act);
    let s = a.shape().to_vec();
    let (c, h, w) = (s[1], s[2], s[3]);
    let per = c / n_patches;
    let hw = h * w;
    let zero = vec![0.0; a.numel()];
    let gv = grads.var(act).map(|t| t.data()).unwrap_or(&zero);
    let grid = (n_patches as f64).sqrt().round() as usize;
    let cell = side / grid;
    let o = center_origin(cell);
    let mut frame = Raster::new(side, side);
    for p in 0..n_patches {
        let mut m = vec![0.0; hw];
        for ch in p * per..(p + 1) * per {
            let off = ch * hw;
            let alpha = gv[off..off + hw].iter().sum::<f64>() / hw as f64;
            for (mi, &ai) in m.iter_mut().zip(&a.data()[off..off + hw]) {
                *mi += alpha * ai;
            }
        }
        m.iter_mut().for_each(|v| *v = v.max(0.0));
        let up = Raster::from_vec(h, w, m)?.resize_bilinear(PATCH_SIDE, PATCH_SIDE);
        let (r0, c0) = ((p / grid) * cell + o, (p % grid) * cell + o);
        for y in 0..PATCH_SIDE {
            for x in 0..PATCH_SIDE {
                frame.set(r0 + y, c0 + x, up.get(y, x));
            }
        }
    }
    Ok(frame)
}

/// Grad-CAM of a pretext or geometric model on one frame, fed as its
/// canonical (identity-order, centre-cropped) patches.
pub fn gradcam_frame(
    model: &PretextModel,
    store: &ParamStore,
    frame: &Frame,
    target: usize,
    layer: BlockId,
) -> Result<SaliencyMap> {
    let n = model.config().n_patches;
    let patches = canonical_patches(frame, n)?;
    gradcam_patches(model, store, &patches, frame.side(), target, layer)
}

/// As [`gradcam_frame`] for an arbitrary patch set.
pub fn gradcam_patches(
    model: &PretextModel,
    store: &ParamStore,
    patches: &[Raster],
    side: usize,
    target: usize,
    layer: BlockId,
) -> Result<SaliencyMap> {
    let n = model.config().n_patches;
    let mut g = Graph::new();
    let inputs: Vec<Var> = patch_batch(&[patches.to_vec()], n)?
        .into_iter()
        .map(|t| g.input_with_grad(t))
        .collect();
    let (logits, taps) = model.forward(&mut g, store, &inputs)?;
    let y = scalar_logit(&mut g, logits, 0, target)?;
    let act = taps.get(layer);
    if layer == BlockId::Concat {
        let up = mosaic(&g, y, act, n, side)?;
        let (values, all_zero) = normalize(&up);
        let raw = cam_grids(&g, y, act)?.remove(0);
        return Ok(SaliencyMap {
            raw,
            values,
            target,
            layer,
            all_zero,
        });
    }
    let raw = cam_grids(&g, y, act)?.remove(0);
    Ok(to_frame_map(raw, side, target, layer))
}

/// One map per frame of a clip: the clip-level pre-sigmoid logit is
/// differentiated with respect to each frame's activation.
pub fn gradcam_clip(
    model: &DownstreamModel,
    store: &ParamStore,
    frames: &[Frame],
    target: usize,
    layer: BlockId,
) -> Result<Vec<SaliencyMap>> {
    let side = frames.first().map(|f| f.side()).ok_or_else(|| invalid("no frames"))?;
    let mut g = Graph::new();
    let (logits, taps) = model.forward_clip(&mut g, store, frames)?;
    let y = scalar_logit(&mut g, logits, 0, target)?;
    let grids = cam_grids(&g, y, taps.get(layer))?;
    Ok(grids.into_iter().map(|r| to_frame_map(r, side, target, layer)).collect())
}
