use serde::{Deserialize, Serialize};

use super::basis::BSplineBasis1D;
use crate::error::{Error, Result};

/// Tensor-product B-spline basis on `[0, 1]^d`.
///
/// `φ(x_1, …, x_d) = B(x_1) ⊗ ⋯ ⊗ B(x_d)` with `u ⊗ v = vec(u vᵀ)`, so the
/// first axis varies fastest: index `i_1 + K_1·(i_2 + K_2·(i_3 + …))`. For a
/// basis built as `[axes of X, axes of Z]` the entry for `(k_X, k_Z)` sits at
/// `k_Z·K_X + k_X`, which is the block layout [`super::projection_pi`] expects.
/// This ordering is part of the public contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorBasis {
    axes: Vec<BSplineBasis1D>,
}

impl TensorBasis {
    pub fn new(axes: Vec<BSplineBasis1D>) -> Self {
        TensorBasis { axes }
    }

    /// `d` copies of the same univariate basis.
    pub fn uniform(order: usize, interior_knots: usize, d: usize) -> Result<Self> {
        let axis = BSplineBasis1D::new(order, interior_knots)?;
        Ok(TensorBasis {
            axes: vec![axis; d],
        })
    }

    pub fn axes(&self) -> &[BSplineBasis1D] {
        &self.axes
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    /// Total dimension, the product of the per-axis dimensions (1 when `d = 0`).
    pub fn dim(&self) -> usize {
        self.axes.iter().map(BSplineBasis1D::dim).product()
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.axes.len() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, basis has {} axes",
                point.len(),
                self.axes.len()
            )));
        }
        let per_axis = self
            .axes
            .iter()
            .zip(point)
            .map(|(a, x)| a.evaluate(*x))
            .collect::<Result<Vec<_>>>()?;
        Ok(kron_first_fastest(&per_axis))
    }

    pub(crate) fn evaluate_unchecked(&self, point: &[f64]) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self
            .axes
            .iter()
            .zip(point)
            .map(|(a, x)| a.evaluate_unchecked(*x))
            .collect();
        kron_first_fastest(&per_axis)
    }
}

/// `v_1 ⊗ v_2 ⊗ ⋯` with `u ⊗ v := vec(u vᵀ)`.
fn kron_first_fastest(factors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for v in factors {
        let mut next = Vec::with_capacity(out.len() * v.len());
        for vj in v {
            next.extend(out.iter().map(|u| u * vj));
        }
        out = next;
    }
    out
}

pub fn tensor_vector(basis: &TensorBasis, point: &[f64]) -> Result<Vec<f64>> {
    basis.evaluate(point)
}
