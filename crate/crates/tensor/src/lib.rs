//! Minimal dense tensors with an eager reverse-mode tape.
//!
//! The op set is deliberately small: matmul, elementwise arithmetic with
//! leading-batch expansion, relu/gelu/abs, softmax, layer norm, reshape,
//! permute/transpose, concat, sum/mean, slice and an `im2col` unfold for
//! convolutions. Training runs in `f32`; gradient checks run the same code
//! in `f64` (see [`finite_diff_check`]).
//!
//! ```
//! use igo_tensor::{Graph, Tensor};
//!
//! let mut g = Graph::<f64>::new();
//! let x = g.param(Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
//! let sq = g.mul(x, x).unwrap();
//! let loss = g.sum_all(sq);
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(x).unwrap(), &[2.0, 4.0, 6.0]);
//! ```

pub mod checkpoint;
mod error;
mod gradcheck;
mod graph;
mod params;
mod scalar;
mod tensor;

pub use error::{Result, TensorError};
pub use gradcheck::{finite_diff_check, GradCheck};
pub use graph::{Graph, Var};
pub use params::ParamStore;
pub use scalar::Scalar;
pub use tensor::Tensor;
