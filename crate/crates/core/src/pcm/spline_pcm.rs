use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::algorithm::{residual_product_statistic, SplitDiagnostics, TestResult};
use super::config::{check_alpha, require_z};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{label, RngStream};
use crate::spline::{ones_kron, spline_regress, BSplineBasis1D, SplineFeatures, TensorBasis, UnitMap};
use crate::split::folds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplinePcmConfig {
    /// Order `r` of the projection basis; the `Z`-regressions on the
    /// statistic folds use order `2r − 1`.
    pub order: usize,
    /// Assumed smoothness `s` driving the default knot counts; defaults to `r`.
    pub smoothness: Option<f64>,
    /// Interior knots per `X` axis; default from [`default_interior_knots`].
    pub knots_x: Option<usize>,
    /// Interior knots per `Z` axis.
    pub knots_z: Option<usize>,
    pub alpha: f64,
    pub seed: RngStream,
}

impl Default for SplinePcmConfig {
    fn default() -> Self {
        SplinePcmConfig {
            order: 2,
            smoothness: None,
            knots_x: None,
            knots_z: None,
            alpha: 0.05,
            seed: RngStream::new(0),
        }
    }
}

/// Interior knots per axis so that each axis carries about
/// `n^{2/(4s+d)}` basis functions: `max(0, round(n^{2/(4s+d)}) − r)`.
pub fn default_interior_knots(n: usize, order: usize, smoothness: f64, d: usize) -> usize {
    let per_axis = (n as f64).powf(2.0 / (4.0 * smoothness + d as f64)).round() as usize;
    per_axis.saturating_sub(order)
}

/// `β_XZ − 1 ⊗ β_Z`: tensor coefficients of the projection once the fit of
/// `ĝ` on `Z` alone has been removed.
pub fn spline_projection_coefficients(beta_xz: &[f64], beta_z: &[f64], kx: usize) -> Result<Vec<f64>> {
    if kx == 0 || beta_xz.len() != kx * beta_z.len() {
        return Err(Error::invalid(format!(
            "tensor coefficients ({}) do not match K_X·K_Z = {}·{}",
            beta_xz.len(),
            kx,
            beta_z.len()
        )));
    }
    Ok(beta_xz.iter().zip(ones_kron(beta_z, kx)).map(|(a, b)| a - b).collect())
}

fn ensure_fits(what: &str, k: usize, fold: usize) -> Result<()> {
    if k >= fold {
        return Err(Error::config(format!(
            "{what} has {k} basis functions but the fold has only {fold} rows; use fewer interior knots"
        )));
    }
    Ok(())
}

/// Four-fold spline test. Covariates are min–max rescaled onto the unit
/// cube; `D2` learns the tensor-spline projection, `D3` and `D4` fit the
/// `Z`-regressions of the projection and of `Y` with order `2r − 1`, and `D1`
/// carries the statistic. No variance weighting and no sign step.
pub fn spline_pcm(data: &Dataset, config: &SplinePcmConfig) -> Result<TestResult> {
    check_alpha(config.alpha)?;
    require_z(data)?;
    if config.order == 0 {
        return Err(Error::config("spline order must be at least 1"));
    }
    let n = data.n();
    if n < 8 {
        return Err(Error::config(format!("spline PCM needs at least 8 observations, got {n}")));
    }
    let (dx, dz) = (data.dx(), data.dz());
    let r = config.order;
    let s = config.smoothness.unwrap_or(r as f64);
    let auto = default_interior_knots(n, r, s, dx + dz);
    let nx = config.knots_x.unwrap_or(auto);
    let nz = config.knots_z.unwrap_or(auto);

    let bx = BSplineBasis1D::new(r, nx)?;
    let bz = BSplineBasis1D::new(r, nz)?;
    let bpsi = BSplineBasis1D::new(2 * r - 1, nz)?;
    let mut phi_axes = vec![bx.clone(); dx];
    phi_axes.extend(std::iter::repeat_n(bz.clone(), dz));
    let phi = TensorBasis::new(phi_axes);
    let phi_z = TensorBasis::new(vec![bz; dz]);
    let psi = TensorBasis::new(vec![bpsi; dz]);
    let kx = bx.dim().pow(dx as u32);

    let fold_idx = folds(n, 4, config.seed.derive(label::SPLITS))?;
    let smallest = fold_idx.iter().map(Vec::len).min().unwrap();
    ensure_fits("the projection basis", phi.dim(), smallest)?;
    ensure_fits("the Z basis", psi.dim(), smallest)?;

    let covariates = UnitMap::fit(&data.xz()).apply(&data.xz());
    let rows = |idx: &[usize]| covariates.select_rows(idx);
    let zrows = |idx: &[usize]| covariates.select_rows(idx).columns(dx, dz).into_owned();
    let y = |idx: &[usize]| data.y().select_rows(idx);
    let (d1, d2, d3, d4) = (&fold_idx[0], &fold_idx[1], &fold_idx[2], &fold_idx[3]);

    let g_fit = spline_regress(&rows(d2), &y(d2), &phi)?;
    let mz_fit = spline_regress(&zrows(d2), g_fit.fitted_values(), &phi_z)?;
    let beta = spline_projection_coefficients(
        g_fit.coefficients().unwrap().as_slice(),
        mz_fit.coefficients().unwrap().as_slice(),
        kx,
    )?;
    let beta = DVector::from_vec(beta);
    let features = SplineFeatures::tensor(phi);
    let f_on = |pts: &DMatrix<f64>| -> Result<DVector<f64>> { Ok(features.expand(pts)? * &beta) };

    let y2 = y(d2);
    let f2 = f_on(&rows(d2))?;
    let rho_hat = (&y2 - mz_fit.fitted_values()).dot(&f2) / d2.len() as f64;

    let mf_fit = spline_regress(&zrows(d3), &f_on(&rows(d3))?, &psi)?;
    let m_fit = spline_regress(&zrows(d4), &y(d4), &psi)?;
    let z1 = zrows(d1);
    let f1 = f_on(&rows(d1))?;
    let l: Vec<f64> = (y(d1) - m_fit.predict(&z1)?)
        .component_mul(&(f1 - mf_fit.predict(&z1)?))
        .iter()
        .copied()
        .collect();
    let parts = residual_product_statistic(&l);
    let diag = SplitDiagnostics {
        statistic: parts.statistic,
        rho_hat,
        c_hat: 0.0,
        denominator: parts.sd,
        mean_product: parts.mean,
        degenerate: parts.degenerate,
        n_projection: d2.len(),
        n_statistic: d1.len(),
        vhat_floored: false,
        gtilde_fallback: false,
    };
    Ok(TestResult::one_sided("spline-pcm", parts.statistic, config.alpha, vec![diag]))
}
