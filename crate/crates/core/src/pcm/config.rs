use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regress::RegressorSpec;
use crate::rng::RngStream;

/// What `g̃` is built from when forming the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GtildeMode {
    /// `g̃ = ĝ`.
    #[default]
    Full,
    /// Drop the intercept and every term of `ĝ` that involves only `Z`.
    /// Applies to linear and additive spline fits; other engines fall back to
    /// `Full` and flag it in the split diagnostics.
    ZeroZComponents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcmConfig {
    /// `Y` on `(X, Z)`.
    pub reg_g: RegressorSpec,
    /// Squared residuals on `(X, Z)`; `None` fixes the variance weight at 1.
    pub reg_v: Option<RegressorSpec>,
    /// Projection values on `Z`. Also used to regress `g̃` on `Z`.
    pub reg_mf: RegressorSpec,
    /// `Y` on `Z`.
    pub reg_m: RegressorSpec,
    /// Number of sample splits for the multi-split test.
    pub splits: usize,
    pub alpha: f64,
    pub seed: RngStream,
    pub gtilde_mode: GtildeMode,
}

impl PcmConfig {
    /// The same engine for every regression, variance weighting on, six
    /// splits, level 0.05, seed 0.
    pub fn with_regressor(reg: RegressorSpec) -> Self {
        PcmConfig {
            reg_g: reg.clone(),
            reg_v: Some(reg.clone()),
            reg_mf: reg.clone(),
            reg_m: reg,
            splits: 6,
            alpha: 0.05,
            seed: RngStream::new(0),
            gtilde_mode: GtildeMode::Full,
        }
    }

    pub fn ols() -> Self {
        Self::with_regressor(RegressorSpec::Ols)
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = RngStream::new(seed);
        self
    }

    pub fn splits(mut self, b: usize) -> Self {
        self.splits = b;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn reg_v(mut self, reg: Option<RegressorSpec>) -> Self {
        self.reg_v = reg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.splits == 0 {
            return Err(Error::config("number of splits must be at least 1"));
        }
        Ok(())
    }

    /// Configuration errors for `data` split into halves of sizes `n1`
    /// (statistic) and `n2` (projection).
    pub(crate) fn check_sizes(&self, data: &Dataset, n1: usize, n2: usize) -> Result<()> {
        require_z(data)?;
        let mut needs = vec![("reg_g", &self.reg_g, n2), ("reg_mf", &self.reg_mf, n2.min(n1)), ("reg_m", &self.reg_m, n1)];
        if let Some(v) = &self.reg_v {
            needs.push(("reg_v", v, n2));
        }
        for (role, spec, have) in needs {
            if have < spec.min_observations() {
                return Err(Error::config(format!(
                    "{role} = {spec} needs at least {} observations per half, got {have}",
                    spec.min_observations()
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

pub(crate) fn require_z(data: &Dataset) -> Result<()> {
    if data.dz() == 0 {
        return Err(Error::config(
            "no conditioning variables: Z must have at least one column",
        ));
    }
    Ok(())
}
