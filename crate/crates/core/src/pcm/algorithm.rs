use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{GtildeMode, PcmConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regress::{fit, FittedModel};
use crate::rng::{label, RngStream};
use crate::split::{multi_split, split};
use crate::stats::{normal_quantile, normal_sf, studentized_mean};

/// Lower bound applied to the variance weight before dividing by it.
const VHAT_FLOOR: f64 = 1e-12;

/// Per-split quantities of the single-split statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDiagnostics {
    pub statistic: f64,
    pub rho_hat: f64,
    pub c_hat: f64,
    /// Standard deviation (divisor `n`) of the residual products.
    pub denominator: f64,
    pub mean_product: f64,
    /// All residual products were equal, so the statistic is 0 by `0/0 := 0`.
    pub degenerate: bool,
    pub n_projection: usize,
    pub n_statistic: usize,
    /// Some variance weight fell below `1e-12` and was floored.
    pub vhat_floored: bool,
    /// `ZeroZComponents` was requested but the engine is not decomposable.
    pub gtilde_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: String,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub per_split: Vec<SplitDiagnostics>,
    pub degenerate: bool,
}

impl TestResult {
    /// One-sided decision: reject when `statistic > z_{1−α}`, `p = 1 − Φ(statistic)`.
    pub(crate) fn one_sided(method: &str, statistic: f64, alpha: f64, per_split: Vec<SplitDiagnostics>) -> Self {
        TestResult {
            method: method.to_string(),
            statistic,
            p_value: normal_sf(statistic),
            reject: statistic > normal_quantile(1.0 - alpha),
            degenerate: per_split.iter().any(|s| s.degenerate),
            per_split,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticParts {
    pub statistic: f64,
    pub mean: f64,
    pub sd: f64,
    pub degenerate: bool,
}

/// `T = √n · mean(L) / sd(L)` with the divisor-`n` standard deviation and
/// `T = 0` when all `L_i` coincide.
pub fn residual_product_statistic(l: &[f64]) -> StatisticParts {
    let degenerate = l.iter().all(|x| *x == l[0]);
    let (statistic, sd) = studentized_mean(l);
    StatisticParts {
        statistic,
        mean: if l.is_empty() { 0.0 } else { l.iter().sum::<f64>() / l.len() as f64 },
        sd,
        degenerate,
    }
}

/// Signed estimate `ĥ = sgn(ρ̂)(g̃ − m̃)` of `E(Y|X,Z) − E(Y|Z)`.
#[derive(Debug, Clone)]
pub struct HatH {
    pub g_hat: FittedModel,
    pub m_tilde: FittedModel,
    pub rho_hat: f64,
    /// `sgn(ρ̂)` with `sgn(0) = 0`.
    pub sign: f64,
    /// `g̃` drops the `Z`-only terms of `ĝ`.
    pub dropped_z: bool,
    pub gtilde_fallback: bool,
    dx: usize,
}

impl HatH {
    fn g_tilde(&self, data: &Dataset) -> Result<DVector<f64>> {
        let xz = data.xz();
        if self.dropped_z {
            let z_cols: Vec<usize> = (self.dx..xz.ncols()).collect();
            if let Some(v) = self.g_hat.predict_dropping(&xz, &z_cols)? {
                return Ok(v);
            }
        }
        self.g_hat.predict(&xz)
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<DVector<f64>> {
        if self.sign == 0.0 {
            return Ok(DVector::zeros(data.n()));
        }
        let gt = self.g_tilde(data)?;
        let mt = self.m_tilde.predict(data.z())?;
        Ok((gt - mt) * self.sign)
    }
}

/// Variance weight `v̂`.
#[derive(Debug, Clone)]
pub enum VarianceFn {
    Unit,
    Fitted { v_tilde: FittedModel, c_hat: f64 },
}

impl VarianceFn {
    pub fn c_hat(&self) -> f64 {
        match self {
            VarianceFn::Unit => 0.0,
            VarianceFn::Fitted { c_hat, .. } => *c_hat,
        }
    }

    /// `max(ṽ, 0) + ĉ`, floored at `1e-12`; the flag reports whether the floor bit.
    pub fn evaluate(&self, data: &Dataset) -> Result<(DVector<f64>, bool)> {
        match self {
            VarianceFn::Unit => Ok((DVector::from_element(data.n(), 1.0), false)),
            VarianceFn::Fitted { v_tilde, c_hat } => {
                let mut floored = false;
                let v = v_tilde.predict(&data.xz())?.map(|t| {
                    let v = t.max(0.0) + c_hat;
                    if v < VHAT_FLOOR {
                        floored = true;
                        VHAT_FLOOR
                    } else {
                        v
                    }
                });
                Ok((v, floored))
            }
        }
    }
}

/// `f̂ = ĥ / v̂`.
#[derive(Debug, Clone)]
pub struct ProjectionFn {
    pub h: HatH,
    pub v: VarianceFn,
}

impl ProjectionFn {
    pub fn evaluate(&self, data: &Dataset) -> Result<(DVector<f64>, bool)> {
        let h = self.h.evaluate(data)?;
        let (v, floored) = self.v.evaluate(data)?;
        Ok((h.component_div(&v), floored))
    }
}

/// Fit `ĝ`, build `g̃` and `m̃` on `d2`, and fix the sign of `ĥ` from
/// `ρ̂ = mean((Y − ĝ + g̃ − m̃)(g̃ − m̃))`.
pub fn form_hhat(d2: &Dataset, config: &PcmConfig, stream: RngStream) -> Result<HatH> {
    let xz = d2.xz();
    let g_hat = fit(&config.reg_g, &xz, d2.y(), stream.derive_str("g"))?;
    let mut dropped_z = false;
    let mut gtilde_fallback = false;
    let g_tilde = match config.gtilde_mode {
        GtildeMode::Full => g_hat.fitted_values().clone(),
        GtildeMode::ZeroZComponents => {
            let z_cols: Vec<usize> = (d2.dx()..xz.ncols()).collect();
            match g_hat.predict_dropping(&xz, &z_cols)? {
                Some(v) => {
                    dropped_z = true;
                    v
                }
                None => {
                    gtilde_fallback = true;
                    g_hat.fitted_values().clone()
                }
            }
        }
    };
    let m_tilde = fit(&config.reg_mf, d2.z(), &g_tilde, stream.derive_str("mtilde"))?;
    let h_tilde = &g_tilde - m_tilde.fitted_values();
    let adjusted = d2.y() - g_hat.fitted_values() + &h_tilde;
    let rho_hat = adjusted.dot(&h_tilde) / d2.n() as f64;
    let sign = if rho_hat > 0.0 {
        1.0
    } else if rho_hat < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(HatH {
        g_hat,
        m_tilde,
        rho_hat,
        sign,
        dropped_z,
        gtilde_fallback,
        dx: d2.dx(),
    })
}

/// Smallest `c ≥ 0` with `a(c) = mean(r_i / (max(ṽ_i, 0) + c)) ≤ 1`.
///
/// Returns 0 when `a(0) ≤ 1` (including `a(0) = 0`); otherwise bisects the
/// strictly decreasing `a` to `|a(ĉ) − 1| ≤ 1e-10`.
pub fn solve_chat(resid_sq: &[f64], vtilde: &[f64]) -> Result<f64> {
    if resid_sq.len() != vtilde.len() || resid_sq.is_empty() {
        return Err(Error::invalid(format!(
            "squared residuals ({}) and variance fit ({}) must have equal nonzero length",
            resid_sq.len(),
            vtilde.len()
        )));
    }
    if resid_sq.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::invalid("squared residuals must be nonnegative"));
    }
    let n = resid_sq.len() as f64;
    let a = |c: f64| -> f64 {
        resid_sq
            .iter()
            .zip(vtilde)
            .map(|(r, v)| {
                if *r == 0.0 {
                    0.0
                } else {
                    r / (v.max(0.0) + c)
                }
            })
            .sum::<f64>()
            / n
    };
    if a(0.0) <= 1.0 {
        return Ok(0.0);
    }
    // a(c) ≤ mean(r)/c, so c = mean(r) already satisfies a(c) ≤ 1.
    let mut lo = 0.0;
    let mut hi = resid_sq.iter().sum::<f64>() / n;
    for _ in 0..2000 {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        let am = a(mid);
        if (am - 1.0).abs() <= 1e-10 {
            return Ok(mid);
        }
        if am > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Variance weight fitted on `d2` from the squared residuals of `g_hat`.
pub fn form_vhat(d2: &Dataset, g_hat: &FittedModel, config: &PcmConfig, stream: RngStream) -> Result<VarianceFn> {
    let Some(reg_v) = &config.reg_v else {
        return Ok(VarianceFn::Unit);
    };
    let xz = d2.xz();
    let resid_sq = (d2.y() - g_hat.predict(&xz)?).map(|r| r * r);
    let v_tilde = fit(reg_v, &xz, &resid_sq, stream.derive_str("v"))?;
    let c_hat = solve_chat(resid_sq.as_slice(), v_tilde.fitted_values().as_slice())?;
    Ok(VarianceFn::Fitted { v_tilde, c_hat })
}

/// Evaluate `f̂` on `d1`, fit `m̂_f̂` and `m̂` there, and studentize the
/// residual products. The second value reports whether `v̂` was floored.
pub fn pcm_statistic(
    d1: &Dataset,
    f: &ProjectionFn,
    config: &PcmConfig,
    stream: RngStream,
) -> Result<(StatisticParts, bool)> {
    let (fvals, floored) = f.evaluate(d1)?;
    let m_f = fit(&config.reg_mf, d1.z(), &fvals, stream.derive_str("mf"))?;
    let m = fit(&config.reg_m, d1.z(), d1.y(), stream.derive_str("m"))?;
    let l: Vec<f64> = (d1.y() - m.fitted_values())
        .component_mul(&(fvals - m_f.fitted_values()))
        .iter()
        .copied()
        .collect();
    Ok((residual_product_statistic(&l), floored))
}

fn run_split(data: &Dataset, i1: &[usize], i2: &[usize], config: &PcmConfig, stream: RngStream) -> Result<SplitDiagnostics> {
    let d1 = data.subset(i1);
    let d2 = data.subset(i2);
    let h = form_hhat(&d2, config, stream)?;
    let v = form_vhat(&d2, &h.g_hat, config, stream)?;
    let rho_hat = h.rho_hat;
    let gtilde_fallback = h.gtilde_fallback;
    let c_hat = v.c_hat();
    let f = ProjectionFn { h, v };
    let (parts, vhat_floored) = pcm_statistic(&d1, &f, config, stream)?;
    Ok(SplitDiagnostics {
        statistic: parts.statistic,
        rho_hat,
        c_hat,
        denominator: parts.sd,
        mean_product: parts.mean,
        degenerate: parts.degenerate,
        n_projection: i2.len(),
        n_statistic: i1.len(),
        vhat_floored,
        gtilde_fallback,
    })
}

fn check_partition(n: usize, i1: &[usize], i2: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in i1.iter().chain(i2) {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid("index sets must partition the observations"));
        }
    }
    if seen.iter().any(|s| !s) || i1.is_empty() || i2.is_empty() {
        return Err(Error::invalid("index sets must partition the observations into two nonempty parts"));
    }
    Ok(())
}

fn fit_stream(config: &PcmConfig, b: usize) -> RngStream {
    config.seed.derive(label::FITS).derive(b as u64)
}

/// Single-split test: learn the projection on `data[i2]`, test on `data[i1]`.
pub fn pcm_single(data: &Dataset, i1: &[usize], i2: &[usize], config: &PcmConfig) -> Result<TestResult> {
    config.validate()?;
    check_partition(data.n(), i1, i2)?;
    config.check_sizes(data, i1.len(), i2.len())?;
    let diag = run_split(data, i1, i2, config, fit_stream(config, 0))?;
    Ok(TestResult::one_sided("pcm-single", diag.statistic, config.alpha, vec![diag]))
}

/// Single-split test on the first split drawn from `config.seed`; the same
/// split and fits as [`pcm_multi`] with one split.
pub fn pcm_single_split(data: &Dataset, config: &PcmConfig) -> Result<TestResult> {
    config.validate()?;
    let (i1, i2) = split(data.n(), config.seed.derive(label::SPLITS).derive(0))?;
    pcm_single(data, &i1, &i2, config)
}

/// Multi-split test: average the single-split statistics over
/// `config.splits` independent splits and compare the average with
/// `z_{1−α}`. Degenerate splits contribute 0 to the average.
pub fn pcm_multi(data: &Dataset, config: &PcmConfig) -> Result<TestResult> {
    config.validate()?;
    let plan = multi_split(data.n(), config.splits, config.seed.derive(label::SPLITS))?;
    let (i1, i2) = &plan.pairs[0];
    config.check_sizes(data, i1.len(), i2.len())?;
    let per_split = plan
        .pairs
        .par_iter()
        .enumerate()
        .map(|(b, (i1, i2))| run_split(data, i1, i2, config, fit_stream(config, b)))
        .collect::<Result<Vec<_>>>()?;
    let t_bar = per_split.iter().map(|s| s.statistic).sum::<f64>() / per_split.len() as f64;
    Ok(TestResult::one_sided("pcm", t_bar, config.alpha, per_split))
}
