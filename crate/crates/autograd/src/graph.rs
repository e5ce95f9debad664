//! Define-by-run computation graph. Every op evaluates eagerly and records
//! enough to run its adjoint in [`Graph::backward`].

use std::collections::HashMap;

use crate::conv::{self, ConvGeom};
use crate::error::{shape_err, AutogradError, Result};
use crate::linalg::gemm;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Conv {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    AvgPool2(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Concat {
        xs: Vec<Var>,
        axis: usize,
    },
    Slice {
        x: Var,
        axis: usize,
        start: usize,
    },
    Reshape(Var),
    GlobalAvgPool(Var),
    Sum(Var),
    Mean(Var),
    SoftmaxCe {
        logits: Var,
        probs: Vec<f64>,
        labels: Vec<usize>,
    },
    BceLogits {
        logits: Var,
        targets: Vec<f64>,
        pos_weights: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients from one backward pass: every parameter that received one, plus
/// any intermediate values the caller asked to keep.
#[derive(Debug, Default)]
pub struct Gradients {
    params: HashMap<ParamId, Tensor>,
    retained: HashMap<Var, Tensor>,
}

impl Gradients {
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(&id)
    }

    pub fn var(&self, v: Var) -> Option<&Tensor> {
        self.retained.get(&v)
    }

    pub fn params(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.params.iter().map(|(k, v)| (*k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Splits `shape` around `axis` into (outer, axis length, inner).
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// A constant input; no gradient flows into it.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// An input whose gradient is tracked, so everything computed from it can
    /// be differentiated even when all parameters are frozen.
    pub fn input_with_grad(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        let value = store.value(id)?.clone();
        Ok(self.push(value, Op::Param(id), !store.is_frozen(id)))
    }

    /// 2-D convolution. `x`: [B, C, H, W], `w`: [Co, C, kh, kw], `b`: [Co].
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] {
            return Err(shape_err(
                "conv2d",
                format!("input {xs:?} incompatible with weight {ws:?}"),
            ));
        }
        let geom = ConvGeom::new(
            xs[1],
            ws[0],
            [1, xs[2], xs[3]],
            [1, ws[2], ws[3]],
            [1, stride, stride],
            [0, pad, pad],
        )?;
        let out_shape = [xs[0], ws[0], geom.out_dims[1], geom.out_dims[2]];
        self.conv_common(x, w, b, geom, &out_shape)
    }

    /// 3-D convolution with unit stride. `x`: [B, C, D, H, W],
    /// `w`: [Co, C, kd, kh, kw].
    pub fn conv3d(&mut self, x: Var, w: Var, b: Option<Var>, pad: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 5 || ws.len() != 5 || xs[1] != ws[1] {
            return Err(shape_err(
                "conv3d",
                format!("input {xs:?} incompatible with weight {ws:?}"),
            ));
        }
        let geom = ConvGeom::new(
            xs[1],
            ws[0],
            [xs[2], xs[3], xs[4]],
            [ws[2], ws[3], ws[4]],
            [1, 1, 1],
            [pad, pad, pad],
        )?;
        let [d, h, w_] = geom.out_dims;
        let out_shape = [xs[0], ws[0], d, h, w_];
        self.conv_common(x, w, b, geom, &out_shape)
    }

    fn conv_common(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
        out_shape: &[usize],
    ) -> Result<Var> {
        if let Some(b) = b {
            if self.shape(b) != [geom.cout] {
                return Err(shape_err(
                    "conv",
                    format!("bias shape {:?}, expected [{}]", self.shape(b), geom.cout),
                ));
            }
        }
        let batch = self.shape(x)[0];
        let out = conv::forward(
            self.value(x).data(),
            batch,
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            &geom,
        );
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        let value = Tensor::from_vec(out_shape, out)?;
        Ok(self.push(value, Op::Conv { x, w, b, geom }, rg))
    }

    fn pool_dims(&self, x: Var, op: &'static str) -> Result<(usize, usize, usize)> {
        let s = self.shape(x);
        if s.len() < 3 {
            return Err(shape_err(op, format!("need rank >= 3, got {s:?}")));
        }
        let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
        if h % 2 != 0 || w % 2 != 0 {
            return Err(shape_err(op, format!("odd spatial dims {h}x{w}")));
        }
        Ok((s[..s.len() - 2].iter().product(), h, w))
    }

    fn pooled_shape(&self, x: Var) -> Vec<usize> {
        let mut s = self.shape(x).to_vec();
        let n = s.len();
        s[n - 2] /= 2;
        s[n - 1] /= 2;
        s
    }

    /// 2×2 max pooling, stride 2, over the last two axes.
    pub fn max_pool2(&mut self, x: Var) -> Result<Var> {
        let (outer, h, w) = self.pool_dims(x, "max_pool2")?;
        let (ho, wo) = (h / 2, w / 2);
        let xv = self.value(x).data();
        let mut out = vec![0.0; outer * ho * wo];
        let mut argmax = vec![0usize; out.len()];
        for o in 0..outer {
            let base = o * h * w;
            for y in 0..ho {
                for x_ in 0..wo {
                    let cand = [
                        base + 2 * y * w + 2 * x_,
                        base + 2 * y * w + 2 * x_ + 1,
                        base + (2 * y + 1) * w + 2 * x_,
                        base + (2 * y + 1) * w + 2 * x_ + 1,
                    ];
                    let mut best = cand[0];
                    for &c in &cand[1..] {
                        if xv[c] > xv[best] {
                            best = c;
                        }
                    }
                    let oi = (o * ho + y) * wo + x_;
                    out[oi] = xv[best];
                    argmax[oi] = best;
                }
            }
        }
        let value = Tensor::from_vec(&self.pooled_shape(x), out)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::MaxPool2 { x, argmax }, rg))
    }

    /// 2×2 average pooling, stride 2, over the last two axes.
    pub fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        let (outer, h, w) = self.pool_dims(x, "avg_pool2")?;
        let (ho, wo) = (h / 2, w / 2);
        let xv = self.value(x).data();
        let mut out = vec![0.0; outer * ho * wo];
        for o in 0..outer {
            let base = o * h * w;
            for y in 0..ho {
                for x_ in 0..wo {
                    let s = xv[base + 2 * y * w + 2 * x_]
                        + xv[base + 2 * y * w + 2 * x_ + 1]
                        + xv[base + (2 * y + 1) * w + 2 * x_]
                        + xv[base + (2 * y + 1) * w + 2 * x_ + 1];
                    out[(o * ho + y) * wo + x_] = 0.25 * s;
                }
            }
        }
        let value = Tensor::from_vec(&self.pooled_shape(x), out)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::AvgPool2(x), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        let rg = self.rg(x);
        self.push(value, Op::Relu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        let rg = self.rg(x);
        self.push(value, Op::Sigmoid(x), rg)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).map(f64::tanh);
        let rg = self.rg(x);
        self.push(value, Op::Tanh(x), rg)
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let mut value = self.value(a).clone();
        for (v, w) in value.data_mut().iter_mut().zip(self.value(b).data()) {
            *v *= w;
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let value = self.value(x).map(|v| v * s);
        let rg = self.rg(x);
        self.push(value, Op::Scale(x, s), rg)
    }

    /// `x · wᵀ + b` with `x`: [B, In], `w`: [Out, In], `b`: [Out].
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(shape_err("linear", format!("input {xs:?}, weight {ws:?}")));
        }
        if let Some(b) = b {
            if self.shape(b) != [ws[0]] {
                return Err(shape_err("linear", format!("bias {:?}", self.shape(b))));
            }
        }
        let (bsz, inn, out) = (xs[0], xs[1], ws[0]);
        let mut y = vec![0.0; bsz * out];
        gemm(
            bsz,
            inn,
            out,
            self.value(x).data(),
            false,
            self.value(w).data(),
            true,
            0.0,
            &mut y,
        );
        if let Some(b) = b {
            let bv = self.value(b).data();
            for row in y.chunks_mut(out) {
                row.iter_mut().zip(bv).for_each(|(v, c)| *v += c);
            }
        }
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        let value = Tensor::from_vec(&[bsz, out], y)?;
        Ok(self.push(value, Op::Linear { x, w, b }, rg))
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = *xs.first().ok_or_else(|| shape_err("concat", "no inputs"))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(shape_err("concat", format!("axis {axis} out of range")));
        }
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            if s.len() != base.len()
                || s.iter()
                    .zip(&base)
                    .enumerate()
                    .any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(shape_err("concat", format!("{s:?} vs {base:?} on axis {axis}")));
            }
            total += s[axis];
        }
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let (outer, _, inner) = split_axis(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let mid = self.shape(v)[axis];
                let d = self.value(v).data();
                out.extend_from_slice(&d[o * mid * inner..(o + 1) * mid * inner]);
            }
        }
        let rg = xs.iter().any(|&v| self.rg(v));
        let value = Tensor::from_vec(&out_shape, out)?;
        Ok(self.push(
            value,
            Op::Concat {
                xs: xs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if axis >= s.len() || start + len > s[axis] {
            return Err(shape_err(
                "slice",
                format!("[{start}, {}) on axis {axis} of {s:?}", start + len),
            ));
        }
        let (outer, mid, inner) = split_axis(&s, axis);
        let d = self.value(x).data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let off = (o * mid + start) * inner;
            out.extend_from_slice(&d[off..off + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        let value = Tensor::from_vec(&shape, out)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Slice { x, axis, start }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Mean over every axis after the first two: [B, C, ...] -> [B, C].
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() < 3 {
            return Err(shape_err("global_avg_pool", format!("rank {} < 3", s.len())));
        }
        let spatial: usize = s[2..].iter().product();
        let out: Vec<f64> = self
            .value(x)
            .data()
            .chunks(spatial)
            .map(|c| c.iter().sum::<f64>() / spatial as f64)
            .collect();
        let value = Tensor::from_vec(&s[..2], out)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::GlobalAvgPool(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).data().iter().sum());
        let rg = self.rg(x);
        self.push(value, Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let value = Tensor::scalar(t.data().iter().sum::<f64>() / t.numel().max(1) as f64);
        let rg = self.rg(x);
        self.push(value, Op::Mean(x), rg)
    }

    /// Mean categorical cross-entropy of `logits` [B, K] against class labels.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(shape_err(
                "softmax_cross_entropy",
                format!("logits {s:?} with {} labels", labels.len()),
            ));
        }
        let (b, k) = (s[0], s[1]);
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(AutogradError::InvalidArgument(format!(
                "label {bad} outside [0, {k})"
            )));
        }
        let z = self.value(logits).data();
        let mut probs = vec![0.0; b * k];
        let mut loss = 0.0;
        for i in 0..b {
            let row = &z[i * k..(i + 1) * k];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - m).exp()).sum();
            let lse = m + sum.ln();
            for j in 0..k {
                probs[i * k + j] = (row[j] - lse).exp();
            }
            loss += lse - row[labels[i]];
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss / b as f64),
            Op::SoftmaxCe {
                logits,
                probs,
                labels: labels.to_vec(),
            },
            rg,
        ))
    }

    /// Weighted binary cross-entropy on logits [B, L], averaged over batch and
    /// labels: `w_j·t·softplus(-z) + (1-t)·softplus(z)`. Equal to the
    /// probability-space form with `p = sigmoid(z)`, without its clamping.
    pub fn weighted_bce_with_logits(
        &mut self,
        logits: Var,
        targets: &Tensor,
        pos_weights: &[f64],
    ) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || targets.shape() != s.as_slice() || pos_weights.len() != s[1] {
            return Err(shape_err(
                "weighted_bce_with_logits",
                format!(
                    "logits {s:?}, targets {:?}, {} weights",
                    targets.shape(),
                    pos_weights.len()
                ),
            ));
        }
        let l = s[1];
        let z = self.value(logits).data();
        let mut loss = 0.0;
        for (i, (&zi, &t)) in z.iter().zip(targets.data()).enumerate() {
            loss += pos_weights[i % l] * t * softplus(-zi) + (1.0 - t) * softplus(zi);
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss / z.len() as f64),
            Op::BceLogits {
                logits,
                targets: targets.data().to_vec(),
                pos_weights: pos_weights.to_vec(),
            },
            rg,
        ))
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.backward_retaining(loss, &[])
    }

    /// Reverse pass from a scalar `loss`. Gradients of the vars in `retain`
    /// are kept in the result; other intermediates are dropped as soon as they
    /// have been propagated.
    pub fn backward_retaining(&self, loss: Var, retain: &[Var]) -> Result<Gradients> {
        let ls = self.value(loss);
        if ls.numel() != 1 {
            return Err(AutogradError::NonScalarLoss(ls.shape().to_vec()));
        }
        let mut out = Gradients::default();
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(ls.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if retain.contains(&Var(i)) {
                out.retained.insert(Var(i), g.clone());
            }
            self.propagate(i, g, &mut grads, &mut out)?;
        }
        Ok(out)
    }

    fn acc(&self, grads: &mut [Option<Tensor>], v: Var, t: Tensor) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot => *slot = Some(t),
        }
    }

    fn propagate(
        &self,
        i: usize,
        g: Tensor,
        grads: &mut [Option<Tensor>],
        out: &mut Gradients,
    ) -> Result<()> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => match out.params.get_mut(id) {
                Some(existing) => existing.add_assign(&g),
                None => {
                    out.params.insert(*id, g);
                }
            },
            Op::Conv { x, w, b, geom } => {
                let xv = self.value(*x);
                let cg = conv::backward(
                    xv.data(),
                    xv.shape()[0],
                    self.value(*w).data(),
                    g.data(),
                    geom,
                    self.rg(*x),
                    self.rg(*w),
                );
                if let Some(dx) = cg.dx {
                    self.acc(grads, *x, Tensor::from_vec(xv.shape(), dx)?);
                }
                if let Some(dw) = cg.dw {
                    self.acc(grads, *w, Tensor::from_vec(self.shape(*w), dw)?);
                }
                if let Some(b) = b {
                    self.acc(grads, *b, Tensor::from_vec(&[geom.cout], cg.db)?);
                }
            }
            Op::MaxPool2 { x, argmax } => {
                let mut dx = Tensor::zeros(self.shape(*x));
                let d = dx.data_mut();
                for (&src, &gv) in argmax.iter().zip(g.data()) {
                    d[src] += gv;
                }
                self.acc(grads, *x, dx);
            }
            Op::AvgPool2(x) => {
                let s = self.shape(*x);
                let (h, w) = (s[s.len() - 2], s[s.len() - 1]);
                let (ho, wo) = (h / 2, w / 2);
                let mut dx = Tensor::zeros(s);
                let d = dx.data_mut();
                for (oi, &gv) in g.data().iter().enumerate() {
                    let o = oi / (ho * wo);
                    let y = (oi / wo) % ho;
                    let x_ = oi % wo;
                    let base = o * h * w;
                    let q = 0.25 * gv;
                    d[base + 2 * y * w + 2 * x_] += q;
                    d[base + 2 * y * w + 2 * x_ + 1] += q;
                    d[base + (2 * y + 1) * w + 2 * x_] += q;
                    d[base + (2 * y + 1) * w + 2 * x_ + 1] += q;
                }
                self.acc(grads, *x, dx);
            }
            Op::Relu(x) => {
                let mut dx = g;
                for (d, &xv) in dx.data_mut().iter_mut().zip(self.value(*x).data()) {
                    if xv <= 0.0 {
                        *d = 0.0;
                    }
                }
                self.acc(grads, *x, dx);
            }
            Op::Sigmoid(x) => {
                let mut dx = g;
                for (d, &y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                    *d *= y * (1.0 - y);
                }
                self.acc(grads, *x, dx);
            }
            Op::Tanh(x) => {
                let mut dx = g;
                for (d, &y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                    *d *= 1.0 - y * y;
                }
                self.acc(grads, *x, dx);
            }
            Op::Add(a, b) => {
                if self.rg(*a) {
                    self.acc(grads, *a, g.clone());
                }
                self.acc(grads, *b, g);
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let mut da = g.clone();
                    for (d, &bv) in da.data_mut().iter_mut().zip(self.value(*b).data()) {
                        *d *= bv;
                    }
                    self.acc(grads, *a, da);
                }
                if self.rg(*b) {
                    let mut db = g;
                    for (d, &av) in db.data_mut().iter_mut().zip(self.value(*a).data()) {
                        *d *= av;
                    }
                    self.acc(grads, *b, db);
                }
            }
            Op::Scale(x, s) => {
                let s = *s;
                self.acc(grads, *x, g.map(|v| v * s));
            }
            Op::Linear { x, w, b } => {
                let xs = self.shape(*x);
                let (bsz, inn) = (xs[0], xs[1]);
                let out_n = self.shape(*w)[0];
                if self.rg(*x) {
                    let mut dx = vec![0.0; bsz * inn];
                    gemm(bsz, out_n, inn, g.data(), false, self.value(*w).data(), false, 0.0, &mut dx);
                    self.acc(grads, *x, Tensor::from_vec(xs, dx)?);
                }
                if self.rg(*w) {
                    let mut dw = vec![0.0; out_n * inn];
                    gemm(out_n, bsz, inn, g.data(), true, self.value(*x).data(), false, 0.0, &mut dw);
                    self.acc(grads, *w, Tensor::from_vec(&[out_n, inn], dw)?);
                }
                if let Some(b) = b {
                    let mut db = vec![0.0; out_n];
                    for row in g.data().chunks(out_n) {
                        db.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                    }
                    self.acc(grads, *b, Tensor::from_vec(&[out_n], db)?);
                }
            }
            Op::Concat { xs, axis } => {
                let (outer, total, inner) = split_axis(node.value.shape(), *axis);
                let gd = g.data();
                let mut offset = 0;
                for &v in xs {
                    let mid = self.shape(v)[*axis];
                    if self.rg(v) {
                        let mut part = Vec::with_capacity(outer * mid * inner);
                        for o in 0..outer {
                            let off = (o * total + offset) * inner;
                            part.extend_from_slice(&gd[off..off + mid * inner]);
                        }
                        self.acc(grads, v, Tensor::from_vec(self.shape(v), part)?);
                    }
                    offset += mid;
                }
            }
            Op::Slice { x, axis, start } => {
                let xs = self.shape(*x);
                let (outer, mid, inner) = split_axis(xs, *axis);
                let len = node.value.shape()[*axis];
                let mut dx = Tensor::zeros(xs);
                let d = dx.data_mut();
                for (o, chunk) in g.data().chunks(len * inner).enumerate().take(outer) {
                    let off = (o * mid + start) * inner;
                    d[off..off + len * inner].copy_from_slice(chunk);
                }
                self.acc(grads, *x, dx);
            }
            Op::Reshape(x) => {
                let shape = self.shape(*x).to_vec();
                self.acc(grads, *x, g.reshape(&shape)?);
            }
            Op::GlobalAvgPool(x) => {
                let xs = self.shape(*x);
                let spatial: usize = xs[2..].iter().product();
                let mut dx = Vec::with_capacity(xs.iter().product());
                for &gv in g.data() {
                    let v = gv / spatial as f64;
                    dx.extend(std::iter::repeat_n(v, spatial));
                }
                self.acc(grads, *x, Tensor::from_vec(xs, dx)?);
            }
            Op::Sum(x) => {
                let gv = g.item();
                self.acc(grads, *x, Tensor::full(self.shape(*x), gv));
            }
            Op::Mean(x) => {
                let n = self.value(*x).numel().max(1) as f64;
                let gv = g.item() / n;
                self.acc(grads, *x, Tensor::full(self.shape(*x), gv));
            }
            Op::SoftmaxCe {
                logits,
                probs,
                labels,
            } => {
                let s = self.shape(*logits);
                let (b, k) = (s[0], s[1]);
                let scale = g.item() / b as f64;
                let mut d = probs.clone();
                for (i, &l) in labels.iter().enumerate() {
                    d[i * k + l] -= 1.0;
                }
                d.iter_mut().for_each(|v| *v *= scale);
                self.acc(grads, *logits, Tensor::from_vec(s, d)?);
            }
            Op::BceLogits {
                logits,
                targets,
                pos_weights,
            } => {
                let s = self.shape(*logits);
                let l = s[1];
                let z = self.value(*logits).data();
                let scale = g.item() / z.len() as f64;
                let d = z
                    .iter()
                    .zip(targets)
                    .enumerate()
                    .map(|(i, (&zi, &t))| {
                        scale * (-pos_weights[i % l] * t * sigmoid(-zi) + (1.0 - t) * sigmoid(zi))
                    })
                    .collect();
                self.acc(grads, *logits, Tensor::from_vec(s, d)?);
            }
        }
        Ok(())
    }
}
