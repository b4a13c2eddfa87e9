use igo_tensor::{Scalar, Tensor};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::PeKind;
use crate::error::{RegressorError, Result};

pub const LEARNED_PE_STD: f64 = 0.02;

/// `[count, dim]` table indexed by token position.
///
/// Sinusoidal tables interleave `sin(pos·ω_i)` (even slots) and
/// `cos(pos·ω_i)` (odd slots) with `ω_i = 10000^(−2i/dim)`. Learned tables
/// are initial values for a trainable parameter.
pub fn positional_encoding<T: Scalar>(
    kind: PeKind,
    count: usize,
    dim: usize,
    rng: &mut impl Rng,
) -> Result<Tensor<T>> {
    match kind {
        PeKind::None => Ok(Tensor::zeros(vec![count, dim])),
        PeKind::Sinusoidal => {
            if dim % 2 != 0 {
                return Err(RegressorError::OddDim(dim));
            }
            Ok(Tensor::from_fn(vec![count, dim], |idx| {
                let (pos, slot) = (idx / dim, idx % dim);
                let i = (slot / 2) as f64;
                let angle = pos as f64 * 10000f64.powf(-2.0 * i / dim as f64);
                T::from_f64_lossy(if slot % 2 == 0 { angle.sin() } else { angle.cos() })
            }))
        }
        PeKind::Learned => {
            let normal = Normal::new(0.0, LEARNED_PE_STD).expect("valid std");
            Ok(Tensor::from_fn(vec![count, dim], |_| {
                T::from_f64_lossy(normal.sample(rng))
            }))
        }
    }
}
