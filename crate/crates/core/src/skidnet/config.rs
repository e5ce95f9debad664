use serde::{Deserialize, Serialize};

use crate::arrangements::perfect_square_root;
use crate::error::{Result, SkidError};
use crate::framekit::PATCH_SIDE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    V1,
    V2,
    V3,
    /// Skip blocks replaced by identity, Dimension Reduction blocks by 2×2
    /// average pooling.
    NoBlocks,
    Custom,
}

/// Filter counts and head sizes of one encoder variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkidConfig {
    pub variant: Variant,
    pub n_patches: usize,
    pub branch_block_filters: usize,
    pub onebyone_filters: usize,
    pub skip1_first_conv: usize,
    pub skip1_out: usize,
    pub dimred1_out: usize,
    pub skip2_first_conv: usize,
    pub skip2_out: usize,
    pub dimred2_out: usize,
    pub skip_scale: f64,
    pub fc_hidden: usize,
    pub n_classes: usize,
}

impl SkidConfig {
    #[allow(clippy::too_many_arguments)]
    fn table(
        variant: Variant,
        skip1_first_conv: usize,
        skip1_out: usize,
        dimred1_out: usize,
        skip2_first_conv: usize,
        skip2_out: usize,
        dimred2_out: usize,
    ) -> Self {
        SkidConfig {
            variant,
            n_patches: 9,
            branch_block_filters: 256,
            onebyone_filters: 1024,
            skip1_first_conv,
            skip1_out,
            dimred1_out,
            skip2_first_conv,
            skip2_out,
            dimred2_out,
            skip_scale: 0.25,
            fc_hidden: 1024,
            n_classes: 1000,
        }
    }

    pub fn v1() -> Self {
        Self::table(Variant::V1, 512, 1024, 1024, 512, 1024, 4096)
    }

    pub fn v2() -> Self {
        Self::table(Variant::V2, 512, 1024, 2048, 1024, 2048, 4096)
    }

    pub fn v3() -> Self {
        Self::table(Variant::V3, 1024, 1024, 2048, 2048, 2048, 4096)
    }

    /// v3 trunk without Skip / Dimension Reduction blocks.
    pub fn noblocks() -> Self {
        SkidConfig {
            variant: Variant::NoBlocks,
            ..Self::v3()
        }
    }

    /// Desk-scale configuration with the v3 topology and small widths.
    pub fn miniature() -> Self {
        SkidConfig {
            variant: Variant::Custom,
            n_patches: 9,
            branch_block_filters: 8,
            onebyone_filters: 16,
            skip1_first_conv: 8,
            skip1_out: 16,
            dimred1_out: 32,
            skip2_first_conv: 16,
            skip2_out: 32,
            dimred2_out: 64,
            skip_scale: 0.25,
            fc_hidden: 32,
            n_classes: 10,
        }
    }

    pub fn with_classes(mut self, n_classes: usize) -> Self {
        self.n_classes = n_classes;
        self
    }

    pub fn without_blocks(mut self) -> Self {
        self.variant = Variant::NoBlocks;
        self
    }

    pub fn has_blocks(&self) -> bool {
        self.variant != Variant::NoBlocks
    }

    /// Channel count of the final feature map.
    pub fn feature_channels(&self) -> usize {
        if self.has_blocks() {
            self.dimred2_out
        } else {
            self.onebyone_filters
        }
    }

    pub fn grid_side(&self) -> usize {
        perfect_square_root(self.n_patches).unwrap_or(0)
    }

    /// Checks the channel arithmetic; the error names the offending block.
    pub fn validate(&self) -> Result<()> {
        let fail = |block: &str, msg: String| {
            Err(SkidError::Construction {
                block: block.to_string(),
                msg,
            })
        };
        if self.n_patches == 0 || perfect_square_root(self.n_patches).is_none() {
            return fail("branches", format!("n_patches={} is not a perfect square", self.n_patches));
        }
        for (name, v) in [
            ("convolutional block", self.branch_block_filters),
            ("1x1 conv", self.onebyone_filters),
            ("fc hidden", self.fc_hidden),
            ("classifier", self.n_classes),
        ] {
            if v == 0 {
                return fail(name, "width must be positive".into());
            }
        }
        if !self.skip_scale.is_finite() {
            return fail("skip1", "skip scale must be finite".into());
        }
        if !self.has_blocks() {
            return Ok(());
        }
        if self.skip1_first_conv == 0 || self.skip2_first_conv == 0 {
            return fail("skip", "first conv width must be positive".into());
        }
        if self.skip1_out != self.onebyone_filters {
            return fail(
                "skip1",
                format!(
                    "output {} must equal its input channels {}",
                    self.skip1_out, self.onebyone_filters
                ),
            );
        }
        if self.dimred1_out == 0 || self.dimred1_out % 2 != 0 {
            return fail("dimred1", format!("output {} must be even (two branches)", self.dimred1_out));
        }
        if self.skip2_out != self.dimred1_out {
            return fail(
                "skip2",
                format!(
                    "output {} must equal its input channels {}",
                    self.skip2_out, self.dimred1_out
                ),
            );
        }
        if self.dimred2_out == 0 || self.dimred2_out % 2 != 0 {
            return fail("dimred2", format!("output {} must be even (two branches)", self.dimred2_out));
        }
        Ok(())
    }

    /// (block, [height, width, channels]) after each stage for 64×64 patches,
    /// derived from the configuration alone.
    pub fn shape_ladder(&self) -> Result<Vec<(super::BlockId, [usize; 3])>> {
        use super::BlockId::*;
        self.validate()?;
        // two conv blocks, each ending in 2x2 max pooling
        let mut side = PATCH_SIDE;
        for _ in 0..2 {
            if side % 2 != 0 {
                return Err(SkidError::Construction {
                    block: "convolutional block".into(),
                    msg: format!("odd side {side} before pooling"),
                });
            }
            side /= 2;
        }
        let mut ladder = vec![
            (Concat, [side, side, self.n_patches * self.branch_block_filters]),
            (Trunk, [side, side, self.onebyone_filters]),
        ];
        let mut ch = self.onebyone_filters;
        for (skip, dimred, out) in [
            (Skip1, DimRed1, self.dimred1_out),
            (Skip2, DimRed2, self.dimred2_out),
        ] {
            ladder.push((skip, [side, side, ch]));
            if side % 2 != 0 {
                return Err(SkidError::Construction {
                    block: dimred.to_string(),
                    msg: format!("odd spatial dims {side}x{side}"),
                });
            }
            side /= 2;
            if self.has_blocks() {
                ch = out;
            }
            ladder.push((dimred, [side, side, ch]));
        }
        Ok(ladder)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    ConvLstm,
    Cnn3d,
}

/// Temporal classifier over per-frame encoder maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DownstreamConfig {
    pub head: HeadKind,
    pub convlstm_channels: usize,
    pub convlstm_layers: usize,
    pub convlstm_kernel: usize,
    pub cnn3d_channels: usize,
    pub cnn3d_layers: usize,
    pub n_labels: usize,
    pub encoder_frozen: bool,
    /// When set, the encoder's feature width must match.
    pub expected_feature_channels: Option<usize>,
}

impl Default for DownstreamConfig {
    fn default() -> Self {
        DownstreamConfig {
            head: HeadKind::ConvLstm,
            convlstm_channels: 512,
            convlstm_layers: 2,
            convlstm_kernel: 3,
            cnn3d_channels: 512,
            cnn3d_layers: 2,
            n_labels: 3,
            encoder_frozen: true,
            expected_feature_channels: None,
        }
    }
}

impl DownstreamConfig {
    pub fn miniature() -> Self {
        DownstreamConfig {
            convlstm_channels: 16,
            cnn3d_channels: 16,
            ..Default::default()
        }
    }

    pub fn with_head(mut self, head: HeadKind) -> Self {
        self.head = head;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| {
            Err(SkidError::Construction {
                block: "downstream head".into(),
                msg: msg.into(),
            })
        };
        if self.n_labels == 0 {
            return bad("n_labels must be positive");
        }
        match self.head {
            HeadKind::ConvLstm => {
                if self.convlstm_layers == 0 || self.convlstm_channels == 0 {
                    return bad("ConvLSTM needs at least one layer with positive width");
                }
                if self.convlstm_kernel % 2 == 0 {
                    return bad("ConvLSTM kernel must be odd for same padding");
                }
            }
            HeadKind::Cnn3d => {
                if self.cnn3d_layers == 0 || self.cnn3d_channels == 0 {
                    return bad("3D CNN needs at least one layer with positive width");
                }
            }
        }
        Ok(())
    }
}
