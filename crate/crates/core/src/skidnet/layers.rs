use rand::Rng;
use skid_autograd::{Graph, ParamId, ParamStore, Var};

use crate::error::Result;

/// Convolution with bias and optional ReLU. Same padding, square kernel.
#[derive(Debug, Clone)]
pub(crate) struct ConvUnit {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad: usize,
    pub relu: bool,
}

impl ConvUnit {
    #[allow(clippy::too_many_arguments)]
    pub fn declare<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        relu: bool,
    ) -> Self {
        let w = store.add_he_uniform(format!("{name}.w"), &[cout, cin, k, k], cin * k * k, rng);
        let b = store.add_zeros(format!("{name}.b"), &[cout]);
        ConvUnit {
            w,
            b,
            stride,
            pad: k / 2,
            relu,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w)?;
        let b = g.param(store, self.b)?;
        let y = g.conv2d(x, w, Some(b), self.stride, self.pad)?;
        Ok(if self.relu { g.relu(y) } else { y })
    }

    pub fn ids(&self) -> [ParamId; 2] {
        [self.w, self.b]
    }
}

/// 3×3×3 convolution over [B, C, T, H, W] with ReLU.
#[derive(Debug, Clone)]
pub(crate) struct Conv3Unit {
    pub w: ParamId,
    pub b: ParamId,
}

impl Conv3Unit {
    pub fn declare<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
    ) -> Self {
        let w = store.add_he_uniform(format!("{name}.w"), &[cout, cin, 3, 3, 3], cin * 27, rng);
        let b = store.add_zeros(format!("{name}.b"), &[cout]);
        Conv3Unit { w, b }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w)?;
        let b = g.param(store, self.b)?;
        let y = g.conv3d(x, w, Some(b), 1)?;
        Ok(g.relu(y))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub relu: bool,
}

impl Dense {
    pub fn declare<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        input: usize,
        output: usize,
        relu: bool,
    ) -> Self {
        let w = store.add_he_uniform(format!("{name}.w"), &[output, input], input, rng);
        let b = store.add_zeros(format!("{name}.b"), &[output]);
        Dense { w, b, relu }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let w = g.param(store, self.w)?;
        let b = g.param(store, self.b)?;
        let y = g.linear(x, w, Some(b))?;
        Ok(if self.relu { g.relu(y) } else { y })
    }
}
