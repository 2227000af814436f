//! The projected covariance measure test.
//!
//! One half of the data (`D2`) is used to learn a projection `f̂ = ĥ/v̂`
//! of `(X, Z)` that should correlate with `Y − E(Y|Z)` under the
//! alternative; the other half (`D1`) tests whether it does, through the
//! studentized mean of `L_i = (Y_i − m̂(Z_i))(f̂(X_i, Z_i) − m̂_f̂(Z_i))`.
//! Under the null the statistic is approximately standard normal and the
//! test is one-sided.

mod algorithm;
mod config;
mod spline_pcm;

pub use algorithm::{
    form_hhat, form_vhat, pcm_multi, pcm_single, pcm_single_split, pcm_statistic, residual_product_statistic,
    solve_chat, HatH, ProjectionFn, SplitDiagnostics, StatisticParts, TestResult, VarianceFn,
};
pub use config::{GtildeMode, PcmConfig};
pub use spline_pcm::{default_interior_knots, spline_pcm, spline_projection_coefficients, SplinePcmConfig};
