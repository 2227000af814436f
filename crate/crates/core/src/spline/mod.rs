//! B-spline bases, tensor-product bases, the `Π` projection and spline
//! series regression.

mod basis;
mod features;
mod projection;
mod rescale;
mod tensor;

pub use basis::{basis_vector, BSplineBasis1D};
pub use features::{SplineFeatures, SplineLayout, UnitScaling};
pub use projection::{block_means, ones_kron, projection_pi};
pub use rescale::{rescale_to_unit, UnitMap};
pub use tensor::{tensor_vector, TensorBasis};

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::regress::{self, FittedModel};

/// Least-squares regression of `y` on the tensor basis evaluated at
/// `points`, which must lie in the unit cube. No separate intercept is fitted
/// since the basis is a partition of unity; the coefficient vector is indexed
/// like [`TensorBasis::evaluate`].
pub fn spline_regress(points: &DMatrix<f64>, y: &DVector<f64>, tb: &TensorBasis) -> Result<FittedModel> {
    regress::fit_spline_features(SplineFeatures::tensor(tb.clone()), points, y, false)
}
