//! Minimal reverse-mode autodiff over dense f64 tensors: convolutions (2-D and
//! 3-D, via im2col and a blocked gemm), pooling, pointwise activations, linear
//! layers and the two classification losses the SKID models train with.

mod conv;
mod error;
pub mod exec;
mod graph;
mod linalg;
mod optim;
mod params;
mod tensor;

pub use error::{AutogradError, Result};
pub use graph::{Gradients, Graph, Var};
pub use optim::RmsProp;
pub use params::{Param, ParamId, ParamStore};
pub use tensor::Tensor;
