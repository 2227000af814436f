use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::scenario::{Dgp, Scenario};
use crate::baselines::{gcm_test, robust_wald_test, williamson_test};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::pcm::{pcm_multi, pcm_single_split, spline_pcm, PcmConfig, SplinePcmConfig};
use crate::regress::{ForestParams, RegressorSpec, SplineSpec};
use crate::rng::RngStream;

/// Test procedure names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MethodName {
    Pcm,
    PcmSingle,
    SplinePcm,
    Gcm,
    Williamson,
    Wald,
}

impl MethodName {
    pub const ALL: [MethodName; 6] = [
        MethodName::Pcm,
        MethodName::PcmSingle,
        MethodName::SplinePcm,
        MethodName::Gcm,
        MethodName::Williamson,
        MethodName::Wald,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::Pcm => "pcm",
            MethodName::PcmSingle => "pcm-single",
            MethodName::SplinePcm => "spline-pcm",
            MethodName::Gcm => "gcm",
            MethodName::Williamson => "williamson",
            MethodName::Wald => "wald",
        }
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodName::ALL.into_iter().find(|m| m.as_str() == s.trim()).ok_or_else(|| {
            let valid: Vec<&str> = MethodName::ALL.iter().map(MethodName::as_str).collect();
            Error::config(format!("unknown method `{s}`; valid methods: {}", valid.join(", ")))
        })
    }
}

/// Regression engines used by a method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Engines {
    /// `Y` on `(X, Z)`.
    pub g: RegressorSpec,
    /// Squared residuals on `(X, Z)`; `None` disables variance weighting.
    pub v: Option<RegressorSpec>,
    /// Functions of `(X, Z)`, and `X` itself, on `Z`.
    pub mf: RegressorSpec,
    /// `Y` on `Z`.
    pub m: RegressorSpec,
}

impl Engines {
    pub fn uniform(reg: RegressorSpec) -> Self {
        Engines {
            g: reg.clone(),
            v: Some(reg.clone()),
            mf: reg.clone(),
            m: reg,
        }
    }
}

/// Additive cubic splines with 20 interior knots in the listed columns and
/// the remaining columns linear.
fn additive_spline(cols: Vec<usize>) -> RegressorSpec {
    RegressorSpec::Spline(SplineSpec {
        order: 4,
        knots: 20,
        columns: Some(cols),
        ..SplineSpec::default()
    })
}

/// Default engines for a scenario: additive splines in `(X, Z₁)` with a
/// linear variance model for the `sin(2πZ₁)` and quadratic designs, forests for the interaction designs,
/// least squares for the linear ones with a forest for the variance in
/// `linear-F.1`.
pub fn default_engines(scenario: &Scenario) -> Engines {
    match scenario.dgp {
        Dgp::AdditiveNull | Dgp::AdditiveAlt1 | Dgp::AdditiveAlt2 | Dgp::AdditiveAlt3 | Dgp::Quadratic => {
            Engines {
                g: additive_spline(vec![0, 1]),
                v: Some(RegressorSpec::Ols),
                mf: additive_spline(vec![0]),
                m: additive_spline(vec![0]),
            }
        }
        Dgp::InteractionNull | Dgp::InteractionAlt1 | Dgp::InteractionAlt2 | Dgp::InteractionAlt3 => {
            Engines::uniform(RegressorSpec::Forest(ForestParams::default()))
        }
        Dgp::Linear { .. } => Engines {
            v: Some(RegressorSpec::Forest(ForestParams::default())),
            ..Engines::uniform(RegressorSpec::Ols)
        },
        Dgp::AdditiveLinearNull | Dgp::Independent => Engines::uniform(RegressorSpec::Ols),
    }
}

/// A fully configured test procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MethodConfig {
    Pcm(PcmConfig),
    PcmSingle(PcmConfig),
    SplinePcm(SplinePcmConfig),
    Gcm { reg_x: RegressorSpec, reg_y: RegressorSpec },
    Williamson { reg_g: RegressorSpec, reg_m: RegressorSpec },
    Wald,
}

/// A labelled test procedure as run by the experiment harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub label: String,
    pub config: MethodConfig,
}

/// What the harness keeps from one test run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

impl Method {
    pub fn new(label: impl Into<String>, config: MethodConfig) -> Self {
        Method {
            label: label.into(),
            config,
        }
    }

    /// `name` configured with `engines` and six splits for the multi-split test.
    pub fn with_engines(name: MethodName, engines: &Engines) -> Self {
        let pcm = PcmConfig {
            reg_g: engines.g.clone(),
            reg_v: engines.v.clone(),
            reg_mf: engines.mf.clone(),
            reg_m: engines.m.clone(),
            ..PcmConfig::ols()
        };
        let config = match name {
            MethodName::Pcm => MethodConfig::Pcm(pcm),
            MethodName::PcmSingle => MethodConfig::PcmSingle(pcm.splits(1)),
            MethodName::SplinePcm => MethodConfig::SplinePcm(SplinePcmConfig::default()),
            MethodName::Gcm => MethodConfig::Gcm {
                reg_x: engines.mf.clone(),
                reg_y: engines.m.clone(),
            },
            MethodName::Williamson => MethodConfig::Williamson {
                reg_g: engines.g.clone(),
                reg_m: engines.m.clone(),
            },
            MethodName::Wald => MethodConfig::Wald,
        };
        Method::new(name.as_str(), config)
    }

    /// `name` with the scenario's [`default_engines`].
    pub fn for_scenario(name: MethodName, scenario: &Scenario) -> Self {
        Self::with_engines(name, &default_engines(scenario))
    }

    /// Runs the test at level `alpha`; every random choice is drawn from `seed`.
    pub fn run(&self, data: &Dataset, alpha: f64, seed: RngStream) -> Result<Outcome> {
        let outcome = |statistic, p_value, reject| Outcome {
            statistic,
            p_value,
            reject,
        };
        match &self.config {
            MethodConfig::Pcm(c) => {
                let c = PcmConfig { alpha, seed, ..c.clone() };
                let r = pcm_multi(data, &c)?;
                Ok(outcome(r.statistic, r.p_value, r.reject))
            }
            MethodConfig::PcmSingle(c) => {
                let c = PcmConfig { alpha, seed, ..c.clone() };
                let r = pcm_single_split(data, &c)?;
                Ok(outcome(r.statistic, r.p_value, r.reject))
            }
            MethodConfig::SplinePcm(c) => {
                let c = SplinePcmConfig { alpha, seed, ..c.clone() };
                let r = spline_pcm(data, &c)?;
                Ok(outcome(r.statistic, r.p_value, r.reject))
            }
            MethodConfig::Gcm { reg_x, reg_y } => {
                let r = gcm_test(data, reg_x, reg_y, alpha, seed)?;
                Ok(outcome(r.statistic, r.p_value, r.reject))
            }
            MethodConfig::Williamson { reg_g, reg_m } => {
                let r = williamson_test(data, reg_g, reg_m, alpha, seed)?;
                Ok(outcome(r.statistic, r.p_value, r.reject))
            }
            MethodConfig::Wald => {
                let r = robust_wald_test(data, alpha)?;
                Ok(outcome(r.statistic, r.p_value, r.reject))
            }
        }
    }
}
