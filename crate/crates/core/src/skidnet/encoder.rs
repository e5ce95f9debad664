use rand::Rng;
use skid_autograd::{Graph, ParamId, ParamStore, Var};

use super::config::SkidConfig;
use super::layers::ConvUnit;
use super::BlockId;
use crate::error::{Result, SkidError};
use crate::framekit::PATCH_SIDE;

/// Residual unit `y = x + scale·conv2(relu(conv1(x)))`. Nothing follows the
/// sum, so the output is affine in `scale`.
#[derive(Debug, Clone)]
pub struct SkipBlock {
    conv1: ConvUnit,
    conv2: ConvUnit,
    scale: f64,
}

impl SkipBlock {
    pub fn declare<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        channels: usize,
        first_conv: usize,
        scale: f64,
    ) -> Self {
        SkipBlock {
            conv1: ConvUnit::declare(store, rng, &format!("{name}.conv1"), channels, first_conv, 3, 1, true),
            conv2: ConvUnit::declare(store, rng, &format!("{name}.conv2"), first_conv, channels, 3, 1, false),
            scale,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn set_scale(&mut self, scale: f64) {
        self.scale = scale;
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let r = self.conv1.forward(g, store, x)?;
        let r = self.conv2.forward(g, store, r)?;
        let r = g.scale(r, self.scale);
        Ok(g.add(x, r)?)
    }

    fn ids(&self) -> Vec<ParamId> {
        [self.conv1.ids(), self.conv2.ids()].concat()
    }
}

/// Halves the spatial size. Upper branch: 3×3 stride 1 then 3×3 stride 2,
/// lower branch: 2×2 average pooling then 1×1; each branch has half the
/// output channels and ends in ReLU.
#[derive(Debug, Clone)]
pub struct DimRedBlock {
    name: String,
    up1: ConvUnit,
    up2: ConvUnit,
    low: ConvUnit,
}

impl DimRedBlock {
    pub fn declare<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        cin: usize,
        out: usize,
    ) -> Result<Self> {
        if out == 0 || out % 2 != 0 {
            return Err(SkidError::Construction {
                block: name.to_string(),
                msg: format!("output channels {out} must be even"),
            });
        }
        let half = out / 2;
        Ok(DimRedBlock {
            name: name.to_string(),
            up1: ConvUnit::declare(store, rng, &format!("{name}.up1"), cin, half, 3, 1, true),
            up2: ConvUnit::declare(store, rng, &format!("{name}.up2"), half, half, 3, 2, true),
            low: ConvUnit::declare(store, rng, &format!("{name}.low"), cin, half, 1, 1, true),
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let s = g.shape(x);
        if s.len() != 4 || s[2] % 2 != 0 || s[3] % 2 != 0 {
            return Err(SkidError::Construction {
                block: self.name.clone(),
                msg: format!("input {s:?} must have even spatial dims"),
            });
        }
        let up = self.up1.forward(g, store, x)?;
        let up = self.up2.forward(g, store, up)?;
        let low = g.avg_pool2(x)?;
        let low = self.low.forward(g, store, low)?;
        Ok(g.concat(&[up, low], 1)?)
    }

    fn ids(&self) -> Vec<ParamId> {
        [self.up1.ids(), self.up2.ids(), self.low.ids()].concat()
    }
}

#[derive(Debug, Clone)]
struct Blocks {
    skip1: SkipBlock,
    dimred1: DimRedBlock,
    skip2: SkipBlock,
    dimred2: DimRedBlock,
}

/// Intermediate maps of one encoder pass, all [B, C, H, W].
#[derive(Debug, Clone, Copy)]
pub struct EncoderTaps {
    pub concat: Var,
    pub trunk: Var,
    pub skip1: Var,
    pub dimred1: Var,
    pub skip2: Var,
    pub dimred2: Var,
}

impl EncoderTaps {
    pub fn get(&self, id: BlockId) -> Var {
        match id {
            BlockId::Concat => self.concat,
            BlockId::Trunk => self.trunk,
            BlockId::Skip1 => self.skip1,
            BlockId::DimRed1 => self.dimred1,
            BlockId::Skip2 => self.skip2,
            BlockId::DimRed2 => self.dimred2,
        }
    }

    pub fn output(&self) -> Var {
        self.dimred2
    }
}

/// Nine (or N) unshared patch branches, a 1×1 merge, then two Skip /
/// Dimension Reduction pairs.
#[derive(Debug, Clone)]
pub struct Encoder {
    cfg: SkidConfig,
    branches: Vec<[ConvUnit; 4]>,
    reduce: ConvUnit,
    blocks: Option<Blocks>,
    ids: Vec<ParamId>,
}

impl Encoder {
    pub fn build<R: Rng + ?Sized>(cfg: &SkidConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        cfg.shape_ladder()?;
        let f = cfg.branch_block_filters;
        let branches: Vec<[ConvUnit; 4]> = (0..cfg.n_patches)
            .map(|i| {
                let n = |j: usize| format!("enc.branch{i}.conv{j}");
                [
                    ConvUnit::declare(store, rng, &n(0), 1, f, 3, 1, true),
                    ConvUnit::declare(store, rng, &n(1), f, f, 3, 1, true),
                    ConvUnit::declare(store, rng, &n(2), f, f, 3, 1, true),
                    ConvUnit::declare(store, rng, &n(3), f, f, 3, 1, true),
                ]
            })
            .collect();
        let reduce = ConvUnit::declare(
            store,
            rng,
            "enc.reduce",
            cfg.n_patches * f,
            cfg.onebyone_filters,
            1,
            1,
            true,
        );
        let blocks = if cfg.has_blocks() {
            let s = cfg.skip_scale;
            Some(Blocks {
                skip1: SkipBlock::declare(store, rng, "enc.skip1", cfg.onebyone_filters, cfg.skip1_first_conv, s),
                dimred1: DimRedBlock::declare(store, rng, "enc.dimred1", cfg.skip1_out, cfg.dimred1_out)?,
                skip2: SkipBlock::declare(store, rng, "enc.skip2", cfg.dimred1_out, cfg.skip2_first_conv, s),
                dimred2: DimRedBlock::declare(store, rng, "enc.dimred2", cfg.skip2_out, cfg.dimred2_out)?,
            })
        } else {
            None
        };
        let mut ids: Vec<ParamId> = branches.iter().flat_map(|b| b.iter().flat_map(|u| u.ids())).collect();
        ids.extend(reduce.ids());
        if let Some(b) = &blocks {
            ids.extend(b.skip1.ids());
            ids.extend(b.dimred1.ids());
            ids.extend(b.skip2.ids());
            ids.extend(b.dimred2.ids());
        }
        Ok(Encoder {
            cfg: cfg.clone(),
            branches,
            reduce,
            blocks,
            ids,
        })
    }

    pub fn config(&self) -> &SkidConfig {
        &self.cfg
    }

    pub fn param_ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn set_frozen(&self, store: &mut ParamStore, frozen: bool) {
        for &id in &self.ids {
            store.set_frozen(id, frozen);
        }
    }

    pub fn param_count(&self, store: &ParamStore) -> usize {
        self.ids.iter().map(|&id| store.param(id).numel()).sum()
    }

    /// `patches[s]` is slot `s` for the whole batch, shape [B, 1, 64, 64].
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, patches: &[Var]) -> Result<EncoderTaps> {
        if patches.len() != self.cfg.n_patches {
            return Err(SkidError::Mismatch(format!(
                "encoder expects {} patches, got {}",
                self.cfg.n_patches,
                patches.len()
            )));
        }
        let mut outs = Vec::with_capacity(patches.len());
        for (units, &p) in self.branches.iter().zip(patches) {
            let s = g.shape(p);
            if s.len() != 4 || s[1] != 1 || s[2] != PATCH_SIDE || s[3] != PATCH_SIDE {
                return Err(SkidError::Mismatch(format!(
                    "patch input {s:?}, expected [B, 1, {PATCH_SIDE}, {PATCH_SIDE}]"
                )));
            }
            let mut x = units[0].forward(g, store, p)?;
            x = units[1].forward(g, store, x)?;
            x = g.max_pool2(x)?;
            x = units[2].forward(g, store, x)?;
            x = units[3].forward(g, store, x)?;
            x = g.max_pool2(x)?;
            outs.push(x);
        }
        let concat = g.concat(&outs, 1)?;
        let trunk = self.reduce.forward(g, store, concat)?;
        Ok(match &self.blocks {
            Some(b) => {
                let skip1 = b.skip1.forward(g, store, trunk)?;
                let dimred1 = b.dimred1.forward(g, store, skip1)?;
                let skip2 = b.skip2.forward(g, store, dimred1)?;
                let dimred2 = b.dimred2.forward(g, store, skip2)?;
                EncoderTaps {
                    concat,
                    trunk,
                    skip1,
                    dimred1,
                    skip2,
                    dimred2,
                }
            }
            None => {
                let dimred1 = g.avg_pool2(trunk)?;
                let dimred2 = g.avg_pool2(dimred1)?;
                EncoderTaps {
                    concat,
                    trunk,
                    skip1: trunk,
                    dimred1,
                    skip2: dimred1,
                    dimred2,
                }
            }
        })
    }
}

/// Declares an encoder with the blocks removed.
pub fn build_noblocks_encoder<R: Rng + ?Sized>(
    cfg: &SkidConfig,
    store: &mut ParamStore,
    rng: &mut R,
) -> Result<Encoder> {
    Encoder::build(&cfg.clone().without_blocks(), store, rng)
}
