use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) const MAX_SWEEPS: usize = 10_000;
pub(crate) const COEF_TOL: f64 = 1e-8;
const CV_FOLDS: usize = 5;
const GRID_LEN: usize = 50;
const GRID_RATIO: f64 = 1e-3;
const SCALE_TOL: f64 = 1e-8;
const MAX_SCALE_ITERS: usize = 1000;

/// Design with every non-constant column centred and scaled to unit
/// population variance.
#[derive(Debug, Clone)]
pub(crate) struct Standardized {
    pub xs: DMatrix<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub active: Vec<bool>,
    pub y_mean: f64,
    pub yc: DVector<f64>,
    /// Stopping threshold on the largest coefficient update, in units of the
    /// response standard deviation.
    pub tol: f64,
}

impl Standardized {
    pub fn new(design: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let n = design.nrows() as f64;
        let mut xs = design.clone();
        let p = xs.ncols();
        let mut means = vec![0.0; p];
        let mut scales = vec![1.0; p];
        let mut active = vec![true; p];
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            if col.iter().all(|v| *v == col[0]) {
                col.fill(0.0);
                active[j] = false;
                continue;
            }
            means[j] = col.mean();
            col.add_scalar_mut(-means[j]);
            let sd = (col.norm_squared() / n).sqrt();
            scales[j] = sd;
            col /= sd;
        }
        let y_mean = if y.iter().all(|v| *v == y[0]) { y[0] } else { y.mean() };
        let yc = y.add_scalar(-y_mean);
        let sd_y = (yc.norm_squared() / n).sqrt();
        let tol = COEF_TOL * if sd_y > 0.0 { sd_y } else { 1.0 };
        Standardized {
            xs,
            means,
            scales,
            active,
            y_mean,
            yc,
            tol,
        }
    }

    pub fn n(&self) -> usize {
        self.xs.nrows()
    }

    /// Map standardized coefficients back to the original columns.
    pub fn unstandardize(&self, beta: &DVector<f64>) -> (DVector<f64>, f64) {
        let coef = DVector::from_iterator(
            beta.len(),
            (0..beta.len()).map(|j| if self.active[j] { beta[j] / self.scales[j] } else { 0.0 }),
        );
        let shift: f64 = coef.iter().zip(&self.means).map(|(b, m)| b * m).sum();
        (coef, self.y_mean - shift)
    }

    pub fn residual(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.yc - &self.xs * beta
    }
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CdOutcome {
    pub sweeps: usize,
    pub converged: bool,
}

/// Cyclic coordinate descent for `(1/2n)‖y − Xβ‖² + λ Σ_{penalized} |β_j|`
/// on a standardized design, warm-started from `beta`.
pub(crate) fn coordinate_descent(
    st: &Standardized,
    lambda: f64,
    penalized: &[bool],
    beta: &mut DVector<f64>,
) -> CdOutcome {
    let n = st.n() as f64;
    let mut r = st.residual(beta);
    for sweep in 1..=MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for j in 0..beta.len() {
            if !st.active[j] {
                continue;
            }
            let col = st.xs.column(j);
            let z = col.dot(&r) / n + beta[j];
            let new = if penalized[j] { soft_threshold(z, lambda) } else { z };
            let delta = new - beta[j];
            if delta != 0.0 {
                r.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < st.tol {
            return CdOutcome {
                sweeps: sweep,
                converged: true,
            };
        }
    }
    CdOutcome {
        sweeps: MAX_SWEEPS,
        converged: false,
    }
}

pub(crate) fn penalized_mask(p: usize, unpenalized: &[usize]) -> Result<Vec<bool>> {
    if let Some(bad) = unpenalized.iter().find(|&&j| j >= p) {
        return Err(Error::invalid(format!(
            "unpenalized column {bad} out of range for {p} predictors"
        )));
    }
    Ok((0..p).map(|j| !unpenalized.contains(&j)).collect())
}

/// Smallest λ at which every penalized coefficient is zero.
pub(crate) fn lambda_max(st: &Standardized, penalized: &[bool]) -> f64 {
    let p = st.xs.ncols();
    let mut beta = DVector::zeros(p);
    coordinate_descent(st, f64::INFINITY, penalized, &mut beta);
    let r = st.residual(&beta);
    let n = st.n() as f64;
    (0..p)
        .filter(|&j| penalized[j] && st.active[j])
        .map(|j| (st.xs.column(j).dot(&r) / n).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn lambda_grid(lmax: f64) -> Vec<f64> {
    (0..GRID_LEN)
        .map(|k| lmax * GRID_RATIO.powf(k as f64 / (GRID_LEN - 1) as f64))
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct LassoSolution {
    pub coef: DVector<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub sweeps: usize,
    pub converged: bool,
}

pub(crate) fn lasso_fixed(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    unpenalized: &[usize],
) -> Result<LassoSolution> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lasso penalty must be nonnegative, got {lambda}")));
    }
    let penalized = penalized_mask(design.ncols(), unpenalized)?;
    let st = Standardized::new(design, y);
    let mut beta = DVector::zeros(design.ncols());
    let out = coordinate_descent(&st, lambda, &penalized, &mut beta);
    let (coef, intercept) = st.unstandardize(&beta);
    Ok(LassoSolution {
        coef,
        intercept,
        lambda,
        sweeps: out.sweeps,
        converged: out.converged,
    })
}

/// Five-fold cross-validation (fold of row `i` is `i mod 5`) over a 50-point
/// log grid from `λ_max` down to `λ_max·10⁻³`, then a full-data refit along
/// the same path.
pub(crate) fn lasso_cv(design: &DMatrix<f64>, y: &DVector<f64>, unpenalized: &[usize]) -> Result<LassoSolution> {
    let (n, p) = design.shape();
    if n < 2 * CV_FOLDS {
        return Err(Error::config(format!(
            "lasso:cv needs at least {} observations, got {n}",
            2 * CV_FOLDS
        )));
    }
    let penalized = penalized_mask(p, unpenalized)?;
    let st = Standardized::new(design, y);
    let lmax = lambda_max(&st, &penalized);
    if lmax == 0.0 {
        return lasso_fixed(design, y, 0.0, unpenalized);
    }
    let grid = lambda_grid(lmax);

    let mut cv_err = vec![0.0; grid.len()];
    for fold in 0..CV_FOLDS {
        let train: Vec<usize> = (0..n).filter(|i| i % CV_FOLDS != fold).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % CV_FOLDS == fold).collect();
        let xt = design.select_rows(&train);
        let yt = y.select_rows(&train);
        let xv = design.select_rows(&test);
        let yv = y.select_rows(&test);
        let sft = Standardized::new(&xt, &yt);
        let mut beta = DVector::zeros(p);
        for (k, lam) in grid.iter().enumerate() {
            coordinate_descent(&sft, *lam, &penalized, &mut beta);
            let (coef, b0) = sft.unstandardize(&beta);
            let pred = (&xv * coef).add_scalar(b0);
            cv_err[k] += (&yv - pred).norm_squared();
        }
    }
    let best = cv_err
        .iter()
        .enumerate()
        .fold(0, |best, (k, e)| if *e < cv_err[best] { k } else { best });

    let mut beta = DVector::zeros(p);
    let mut sweeps = 0;
    let mut converged = true;
    for lam in &grid[..=best] {
        let out = coordinate_descent(&st, *lam, &penalized, &mut beta);
        sweeps += out.sweeps;
        converged = out.converged;
    }
    let (coef, intercept) = st.unstandardize(&beta);
    Ok(LassoSolution {
        coef,
        intercept,
        lambda: grid[best],
        sweeps,
        converged,
    })
}

/// Default square-root lasso penalty `c_sq·√(ln p / n)`.
pub fn default_sqrt_lambda(c_sq: f64, p: usize, n: usize) -> f64 {
    if p <= 1 || n == 0 {
        return 0.0;
    }
    c_sq * ((p as f64).ln() / n as f64).sqrt()
}

#[derive(Debug, Clone)]
pub(crate) struct SqrtLassoSolution {
    pub coef: DVector<f64>,
    pub intercept: f64,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Square-root lasso `min √(mean r²) + λ_sq‖β‖₁` by the scaled-lasso
/// iteration: solve a lasso at `λ = λ_sq·σ`, then set `σ = ‖r‖/√n`.
pub(crate) fn sqrt_lasso(design: &DMatrix<f64>, y: &DVector<f64>, lambda_sq: f64) -> Result<SqrtLassoSolution> {
    if !(lambda_sq >= 0.0) {
        return Err(Error::invalid(format!(
            "square-root lasso penalty must be nonnegative, got {lambda_sq}"
        )));
    }
    let n = design.nrows();
    if n < 2 {
        return Err(Error::invalid("square-root lasso needs at least 2 observations"));
    }
    let p = design.ncols();
    let penalized = vec![true; p];
    let st = Standardized::new(design, y);
    let sigma0 = (st.yc.norm_squared() / n as f64).sqrt();
    let mut sigma = sigma0;
    let mut beta = DVector::zeros(p);
    let mut iterations = 0;
    let mut converged = false;
    let mut cd_ok = true;
    while iterations < MAX_SCALE_ITERS {
        iterations += 1;
        cd_ok = coordinate_descent(&st, lambda_sq * sigma, &penalized, &mut beta).converged;
        let next = (st.residual(&beta).norm_squared() / n as f64).sqrt();
        let change = (next - sigma).abs();
        sigma = next;
        if change < SCALE_TOL * sigma0 || sigma == 0.0 {
            converged = true;
            break;
        }
    }
    let (coef, intercept) = st.unstandardize(&beta);
    Ok(SqrtLassoSolution {
        coef,
        intercept,
        sigma,
        iterations,
        converged: converged && cd_ok,
    })
}
