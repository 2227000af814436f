//! Comparator tests: the generalised covariance measure, a sample-splitting
//! variance-explained test, and a heteroscedasticity-robust Wald test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{hstack, Dataset};
use crate::error::{Error, Result};
use crate::pcm::residual_product_statistic;
use crate::regress::{fit, fit_ols, RegressorSpec};
use crate::rng::{label, RngStream};
use crate::split::split;
use crate::stats::{chi2_sf, normal_quantile, normal_sf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub method: String,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn require_z(data: &Dataset) -> Result<()> {
    if data.dz() == 0 {
        return Err(Error::config("no conditioning variables: Z must have at least one column"));
    }
    Ok(())
}

/// Generalised covariance measure: the studentized mean of
/// `(X − x̂(Z))(Y − ŷ(Z))` with a two-sided normal p-value.
pub fn gcm_test(
    data: &Dataset,
    reg_x_on_z: &RegressorSpec,
    reg_y_on_z: &RegressorSpec,
    alpha: f64,
    seed: RngStream,
) -> Result<BaselineResult> {
    check_alpha(alpha)?;
    if data.dx() != 1 {
        return Err(Error::Unsupported(format!(
            "gcm supports univariate X, got {} columns",
            data.dx()
        )));
    }
    require_z(data)?;
    let stream = seed.derive(label::FITS);
    let x = data.x().column(0).into_owned();
    let fx = fit(reg_x_on_z, data.z(), &x, stream.derive_str("x"))?;
    let fy = fit(reg_y_on_z, data.z(), data.y(), stream.derive_str("y"))?;
    let r: Vec<f64> = (x - fx.fitted_values())
        .component_mul(&(data.y() - fy.fitted_values()))
        .iter()
        .copied()
        .collect();
    let t = residual_product_statistic(&r).statistic;
    let p_value = (2.0 * normal_sf(t.abs())).min(1.0);
    Ok(BaselineResult {
        method: "gcm".into(),
        statistic: t,
        p_value,
        reject: p_value < alpha,
    })
}

/// In-sample variance explained by `fitted` and the plug-in influence values
/// `[2(y−f)(f−μ) + (f−μ)²]/σ² − τ(y−μ)²/σ⁴` with `τ = mean((f−μ)²)`.
/// Returns `(v̂, η̂)`; both are 0 when `y` has no variance.
fn explained_and_eta(y: &DVector<f64>, fitted: &DVector<f64>) -> (f64, f64) {
    let n = y.len() as f64;
    let mu = y.mean();
    let var = y.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return (0.0, 0.0);
    }
    let mse = (y - fitted).norm_squared() / n;
    let tau = fitted.iter().map(|f| (f - mu).powi(2)).sum::<f64>() / n;
    let eta = y
        .iter()
        .zip(fitted.iter())
        .map(|(yi, fi)| {
            let phi = (2.0 * (yi - fi) * (fi - mu) + (fi - mu).powi(2)) / var - tau * (yi - mu).powi(2) / (var * var);
            phi * phi
        })
        .sum::<f64>()
        / n;
    ((var - mse) / var, eta)
}

/// Sample-splitting test comparing the variance of `Y` explained by
/// `(X, Z)` on one half with that explained by `Z` alone on the other:
/// `T_W = (v̂₁ − v̂₂) / √(η̂₁/n₁ + η̂₂/n₂)`, one-sided.
pub fn williamson_test(
    data: &Dataset,
    reg_g: &RegressorSpec,
    reg_m: &RegressorSpec,
    alpha: f64,
    seed: RngStream,
) -> Result<BaselineResult> {
    check_alpha(alpha)?;
    require_z(data)?;
    if data.n() < 4 {
        return Err(Error::config(format!(
            "williamson test needs at least 4 observations, got {}",
            data.n()
        )));
    }
    let (i1, i2) = split(data.n(), seed.derive(label::SPLITS).derive(0))?;
    let d1 = data.subset(&i1);
    let d2 = data.subset(&i2);
    let stream = seed.derive(label::FITS);
    let g = fit(reg_g, &d1.xz(), d1.y(), stream.derive_str("g"))?;
    let m = fit(reg_m, d2.z(), d2.y(), stream.derive_str("m"))?;
    let (v1, eta1) = explained_and_eta(d1.y(), g.fitted_values());
    let (v2, eta2) = explained_and_eta(d2.y(), m.fitted_values());
    let num = v1 - v2;
    let den = (eta1 / d1.n() as f64 + eta2 / d2.n() as f64).sqrt();
    let statistic = if num == 0.0 {
        0.0
    } else if den == 0.0 {
        num.signum() * f64::INFINITY
    } else {
        num / den
    };
    Ok(BaselineResult {
        method: "williamson".into(),
        statistic,
        p_value: normal_sf(statistic),
        reject: statistic > normal_quantile(1.0 - alpha),
    })
}

/// Wald test of the `X` block in the OLS fit of `Y` on `(1, X, Z)` with the
/// HC0 sandwich covariance, referred to `χ²_{d_X}`.
pub fn robust_wald_test(data: &Dataset, alpha: f64) -> Result<BaselineResult> {
    check_alpha(alpha)?;
    let n = data.n();
    let dx = data.dx();
    let design = hstack(&DMatrix::from_element(n, 1, 1.0), &data.xz());
    let p = design.ncols();
    if n < p {
        return Err(Error::SingularCovariance(format!(
            "{n} observations cannot identify {p} coefficients"
        )));
    }
    let xtx = design.transpose() * &design;
    let Some(xtx_inv) = xtx.clone().try_inverse().filter(|_| full_rank(&design)) else {
        return Err(Error::SingularCovariance("design of (1, X, Z) is rank deficient".into()));
    };
    let ols = fit_ols(&data.xz(), data.y())?;
    let coef = ols.coefficients().unwrap();
    let beta_x = coef.rows(0, dx).into_owned();
    let resid = data.y() - ols.fitted_values();

    let scale = data.y().norm().max(f64::MIN_POSITIVE);
    if resid.norm() <= 1e-12 * scale {
        let statistic = if beta_x.iter().all(|b| *b == 0.0) { 0.0 } else { f64::INFINITY };
        return Ok(wald_result(statistic, dx, alpha));
    }
    let mut meat = DMatrix::zeros(p, p);
    for (i, e) in resid.iter().enumerate() {
        let row = design.row(i);
        meat += row.transpose() * row * (e * e);
    }
    let cov = &xtx_inv * meat * &xtx_inv;
    let v_xx = cov.view((1, 1), (dx, dx)).into_owned();
    let Some(chol) = v_xx.cholesky() else {
        return Err(Error::SingularCovariance("robust covariance of the X block is singular".into()));
    };
    let statistic = beta_x.dot(&chol.solve(&beta_x));
    Ok(wald_result(statistic, dx, alpha))
}

fn full_rank(design: &DMatrix<f64>) -> bool {
    let sv = design.singular_values();
    let smax = sv.max();
    let tol = smax * design.nrows().max(design.ncols()) as f64 * f64::EPSILON;
    smax > 0.0 && sv.iter().all(|s| *s > tol)
}

fn wald_result(statistic: f64, df: usize, alpha: f64) -> BaselineResult {
    let p_value = chi2_sf(statistic, df);
    BaselineResult {
        method: "wald".into(),
        statistic,
        p_value,
        reject: p_value < alpha,
    }
}
