//! im2col convolution kernels over (depth, height, width) volumes. 2-D
//! convolution is the depth-1 special case.

use crate::error::{shape_err, Result};
use crate::exec;
use crate::linalg::gemm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub cout: usize,
    pub in_dims: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
    pub out_dims: [usize; 3],
}

impl ConvGeom {
    pub fn new(
        cin: usize,
        cout: usize,
        in_dims: [usize; 3],
        kernel: [usize; 3],
        stride: [usize; 3],
        pad: [usize; 3],
    ) -> Result<Self> {
        let mut out_dims = [0; 3];
        for a in 0..3 {
            let span = in_dims[a] + 2 * pad[a];
            if stride[a] == 0 || kernel[a] == 0 || span < kernel[a] {
                return Err(shape_err(
                    "conv",
                    format!(
                        "kernel {kernel:?} stride {stride:?} pad {pad:?} does not fit input {in_dims:?}"
                    ),
                ));
            }
            out_dims[a] = (span - kernel[a]) / stride[a] + 1;
        }
        Ok(ConvGeom {
            cin,
            cout,
            in_dims,
            kernel,
            stride,
            pad,
            out_dims,
        })
    }

    pub fn krows(&self) -> usize {
        self.cin * self.kernel.iter().product::<usize>()
    }

    pub fn ncols(&self) -> usize {
        self.out_dims.iter().product()
    }

    pub fn in_len(&self) -> usize {
        self.cin * self.in_dims.iter().product::<usize>()
    }

    pub fn out_len(&self) -> usize {
        self.cout * self.ncols()
    }

    fn pointwise(&self) -> bool {
        self.kernel == [1, 1, 1] && self.stride == [1, 1, 1] && self.pad == [0, 0, 0]
    }
}

#[inline]
fn src_index(o: usize, stride: usize, k: usize, pad: usize, len: usize) -> Option<usize> {
    let v = (o * stride + k) as isize - pad as isize;
    (v >= 0 && (v as usize) < len).then_some(v as usize)
}

fn im2col(x: &[f64], g: &ConvGeom, col: &mut [f64]) {
    let [id, ih, iw] = g.in_dims;
    let [od, oh, ow] = g.out_dims;
    let [kd, kh, kw] = g.kernel;
    let n = g.ncols();
    let mut row = 0;
    for c in 0..g.cin {
        for dz in 0..kd {
            for dy in 0..kh {
                for dx in 0..kw {
                    let dst = &mut col[row * n..(row + 1) * n];
                    let mut idx = 0;
                    for oz in 0..od {
                        let z = src_index(oz, g.stride[0], dz, g.pad[0], id);
                        for oy in 0..oh {
                            let y = src_index(oy, g.stride[1], dy, g.pad[1], ih);
                            match (z, y) {
                                (Some(z), Some(y)) => {
                                    let base = ((c * id + z) * ih + y) * iw;
                                    for ox in 0..ow {
                                        dst[idx] = match src_index(ox, g.stride[2], dx, g.pad[2], iw)
                                        {
                                            Some(x_) => x[base + x_],
                                            None => 0.0,
                                        };
                                        idx += 1;
                                    }
                                }
                                _ => {
                                    dst[idx..idx + ow].fill(0.0);
                                    idx += ow;
                                }
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

fn col2im(col: &[f64], g: &ConvGeom, dx_out: &mut [f64]) {
    let [id, ih, iw] = g.in_dims;
    let [od, oh, ow] = g.out_dims;
    let [kd, kh, kw] = g.kernel;
    let n = g.ncols();
    let mut row = 0;
    for c in 0..g.cin {
        for dz in 0..kd {
            for dy in 0..kh {
                for dx in 0..kw {
                    let src = &col[row * n..(row + 1) * n];
                    let mut idx = 0;
                    for oz in 0..od {
                        let z = src_index(oz, g.stride[0], dz, g.pad[0], id);
                        for oy in 0..oh {
                            let y = src_index(oy, g.stride[1], dy, g.pad[1], ih);
                            if let (Some(z), Some(y)) = (z, y) {
                                let base = ((c * id + z) * ih + y) * iw;
                                for ox in 0..ow {
                                    if let Some(x_) = src_index(ox, g.stride[2], dx, g.pad[2], iw) {
                                        dx_out[base + x_] += src[idx + ox];
                                    }
                                }
                            }
                            idx += ow;
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

pub(crate) fn forward(
    x: &[f64],
    batch: usize,
    w: &[f64],
    bias: Option<&[f64]>,
    g: &ConvGeom,
) -> Vec<f64> {
    let (in_len, out_len, n, kr) = (g.in_len(), g.out_len(), g.ncols(), g.krows());
    let mut out = vec![0.0; batch * out_len];
    exec::for_each_chunk_mut(&mut out, out_len, |b, ob| {
        let xb = &x[b * in_len..(b + 1) * in_len];
        if g.pointwise() {
            gemm(g.cout, g.cin, n, w, false, xb, false, 0.0, ob);
        } else {
            let mut col = vec![0.0; kr * n];
            im2col(xb, g, &mut col);
            gemm(g.cout, kr, n, w, false, &col, false, 0.0, ob);
        }
        if let Some(bias) = bias {
            for (co, row) in ob.chunks_mut(n).enumerate() {
                let bv = bias[co];
                row.iter_mut().for_each(|v| *v += bv);
            }
        }
    });
    out
}

pub(crate) struct ConvGrads {
    pub dx: Option<Vec<f64>>,
    pub dw: Option<Vec<f64>>,
    pub db: Vec<f64>,
}

pub(crate) fn backward(
    x: &[f64],
    batch: usize,
    w: &[f64],
    dy: &[f64],
    g: &ConvGeom,
    need_dx: bool,
    need_dw: bool,
) -> ConvGrads {
    let (in_len, out_len, n, kr) = (g.in_len(), g.out_len(), g.ncols(), g.krows());

    let mut db = vec![0.0; g.cout];
    for b in 0..batch {
        for (co, row) in dy[b * out_len..(b + 1) * out_len].chunks(n).enumerate() {
            db[co] += row.iter().sum::<f64>();
        }
    }

    let dx = need_dx.then(|| {
        let mut dx = vec![0.0; batch * in_len];
        exec::for_each_chunk_mut(&mut dx, in_len, |b, dxb| {
            let dyb = &dy[b * out_len..(b + 1) * out_len];
            if g.pointwise() {
                gemm(g.cin, g.cout, n, w, true, dyb, false, 0.0, dxb);
            } else {
                let mut dcol = vec![0.0; kr * n];
                gemm(kr, g.cout, n, w, true, dyb, false, 0.0, &mut dcol);
                col2im(&dcol, g, dxb);
            }
        });
        dx
    });

    let dw = need_dw.then(|| {
        let groups = exec::workers().min(batch).max(1);
        let per = batch.div_ceil(groups);
        let partials = exec::map_indexed(groups, |gi| {
            let mut acc = vec![0.0; g.cout * kr];
            let mut col = if g.pointwise() {
                Vec::new()
            } else {
                vec![0.0; kr * n]
            };
            for b in gi * per..((gi + 1) * per).min(batch) {
                let dyb = &dy[b * out_len..(b + 1) * out_len];
                let xb = &x[b * in_len..(b + 1) * in_len];
                let cols: &[f64] = if g.pointwise() {
                    xb
                } else {
                    im2col(xb, g, &mut col);
                    &col
                };
                gemm(g.cout, n, kr, dyb, false, cols, true, 1.0, &mut acc);
            }
            acc
        });
        let mut it = partials.into_iter();
        let mut total = it.next().unwrap_or_else(|| vec![0.0; g.cout * kr]);
        for p in it {
            total.iter_mut().zip(&p).for_each(|(a, b)| *a += b);
        }
        total
    });

    ConvGrads { dx, dw, db }
}
