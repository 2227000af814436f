use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ForestParams;
use crate::error::{Error, Result};
use crate::spline::{SplineLayout, UnitScaling};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LassoPenalty {
    Fixed(f64),
    CrossValidated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SqrtPenalty {
    Fixed(f64),
    /// `λ_sq = c_sq·√(ln p / n)` with `p` the number of predictors.
    Auto { c_sq: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSpec {
    pub order: usize,
    pub knots: usize,
    pub layout: SplineLayout,
    pub scaling: UnitScaling,
    /// Predictor columns expanded in B-splines; the rest enter linearly.
    /// `None` expands every column.
    pub columns: Option<Vec<usize>>,
}

impl Default for SplineSpec {
    fn default() -> Self {
        SplineSpec {
            order: 4,
            knots: 8,
            layout: SplineLayout::Additive,
            scaling: UnitScaling::MinMax,
            columns: None,
        }
    }
}

/// Regression engine choice.
///
/// Text form, as accepted by [`FromStr`]:
///
/// ```text
/// mean
/// ols
/// lasso:cv | lasso:0.1 [,free=0,1]
/// sqrtlasso:auto [,c=1.1] | sqrtlasso:0.05
/// spline:r=4,N=8 [,tensor] [,scale=minmax|rank] [,cols=0,1]
/// forest:trees=200,leaf=5 [,mtry=0.33] [,depth=10] [,nobootstrap]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegressorSpec {
    Mean,
    Ols,
    Lasso {
        penalty: LassoPenalty,
        unpenalized: Vec<usize>,
    },
    SqrtLasso {
        penalty: SqrtPenalty,
    },
    Spline(SplineSpec),
    Forest(ForestParams),
}

impl RegressorSpec {
    /// Smallest training sample the engine accepts.
    pub fn min_observations(&self) -> usize {
        match self {
            RegressorSpec::Lasso {
                penalty: LassoPenalty::CrossValidated,
                ..
            } => 10,
            RegressorSpec::SqrtLasso { .. } => 2,
            _ => 1,
        }
    }

    /// Fitting `a·y` gives exactly `a` times the fitted values.
    pub fn is_scale_equivariant(&self) -> bool {
        !matches!(self, RegressorSpec::Forest(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegressorSpec::Mean => "mean",
            RegressorSpec::Ols => "ols",
            RegressorSpec::Lasso { .. } => "lasso",
            RegressorSpec::SqrtLasso { .. } => "sqrtlasso",
            RegressorSpec::Spline(_) => "spline",
            RegressorSpec::Forest(_) => "forest",
        }
    }
}

/// Splits `a=1,b=2,3,flag` into `(key, values)` groups; a bare number after
/// a keyed entry extends that entry's list.
fn options(text: &str) -> Vec<(String, Vec<String>)> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    for tok in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((k, v)) = tok.split_once('=') {
            out.push((k.trim().to_string(), vec![v.trim().to_string()]));
        } else if tok.parse::<f64>().is_ok() && out.last().is_some_and(|(k, v)| !k.is_empty() && !v.is_empty()) {
            out.last_mut().unwrap().1.push(tok.to_string());
        } else {
            out.push((tok.to_string(), Vec::new()));
        }
    }
    out
}

fn bad(spec: &str, why: impl fmt::Display) -> Error {
    Error::config(format!("bad regressor `{spec}`: {why}"))
}

fn one<'a>(spec: &str, key: &str, vals: &'a [String]) -> Result<&'a str> {
    match vals {
        [v] => Ok(v),
        _ => Err(bad(spec, format!("`{key}` takes exactly one value"))),
    }
}

fn num<T: FromStr>(spec: &str, key: &str, vals: &[String]) -> Result<T> {
    let v = one(spec, key, vals)?;
    v.parse().map_err(|_| bad(spec, format!("`{key}={v}` is not a valid number")))
}

fn indices(spec: &str, key: &str, vals: &[String]) -> Result<Vec<usize>> {
    vals.iter()
        .map(|v| v.parse().map_err(|_| bad(spec, format!("`{key}` expects column indices, got `{v}`"))))
        .collect()
}

fn nonneg(spec: &str, what: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(spec, format!("{what} must be a finite nonnegative number")))
    }
}

impl FromStr for RegressorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = s.trim();
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let opts = options(rest);
        let unknown = |k: &str| bad(spec, format!("unknown option `{k}`"));
        match kind.to_ascii_lowercase().as_str() {
            "mean" | "ols" => {
                if let Some((k, _)) = opts.first() {
                    return Err(unknown(k));
                }
                Ok(if kind.eq_ignore_ascii_case("ols") {
                    RegressorSpec::Ols
                } else {
                    RegressorSpec::Mean
                })
            }
            "lasso" => {
                let mut penalty = LassoPenalty::CrossValidated;
                let mut unpenalized = Vec::new();
                for (k, v) in &opts {
                    match (k.as_str(), v.is_empty()) {
                        ("cv", true) => penalty = LassoPenalty::CrossValidated,
                        ("free", false) => unpenalized = indices(spec, k, v)?,
                        ("lambda", false) => penalty = LassoPenalty::Fixed(nonneg(spec, "λ", num(spec, k, v)?)?),
                        (k, true) if k.parse::<f64>().is_ok() => {
                            penalty = LassoPenalty::Fixed(nonneg(spec, "λ", k.parse().unwrap())?)
                        }
                        _ => return Err(unknown(k)),
                    }
                }
                Ok(RegressorSpec::Lasso { penalty, unpenalized })
            }
            "sqrtlasso" => {
                let mut penalty = SqrtPenalty::Auto { c_sq: 1.1 };
                for (k, v) in &opts {
                    match (k.as_str(), v.is_empty()) {
                        ("auto", true) => {}
                        ("c", false) => {
                            let c: f64 = num(spec, k, v)?;
                            if !(c > 0.0 && c.is_finite()) {
                                return Err(bad(spec, "c must be positive"));
                            }
                            penalty = SqrtPenalty::Auto { c_sq: c };
                        }
                        ("lambda", false) => penalty = SqrtPenalty::Fixed(nonneg(spec, "λ_sq", num(spec, k, v)?)?),
                        (k, true) if k.parse::<f64>().is_ok() => {
                            penalty = SqrtPenalty::Fixed(nonneg(spec, "λ_sq", k.parse().unwrap())?)
                        }
                        _ => return Err(unknown(k)),
                    }
                }
                Ok(RegressorSpec::SqrtLasso { penalty })
            }
            "spline" => {
                let mut s = SplineSpec::default();
                for (k, v) in &opts {
                    match (k.as_str(), v.is_empty()) {
                        ("r", false) => s.order = num(spec, k, v)?,
                        ("N", false) | ("n", false) => s.knots = num(spec, k, v)?,
                        ("tensor", true) => s.layout = SplineLayout::Tensor,
                        ("additive", true) => s.layout = SplineLayout::Additive,
                        ("scale", false) => {
                            s.scaling = match one(spec, k, v)? {
                                "minmax" => UnitScaling::MinMax,
                                "rank" => UnitScaling::Rank,
                                "none" => UnitScaling::None,
                                other => return Err(bad(spec, format!("unknown scaling `{other}`"))),
                            }
                        }
                        ("cols", false) => s.columns = Some(indices(spec, k, v)?),
                        _ => return Err(unknown(k)),
                    }
                }
                if s.order == 0 {
                    return Err(bad(spec, "spline order r must be at least 1"));
                }
                Ok(RegressorSpec::Spline(s))
            }
            "forest" => {
                let mut p = ForestParams::default();
                for (k, v) in &opts {
                    match (k.as_str(), v.is_empty()) {
                        ("trees", false) => p.n_trees = num(spec, k, v)?,
                        ("leaf", false) => p.min_leaf = num(spec, k, v)?,
                        ("mtry", false) => p.mtry_fraction = num(spec, k, v)?,
                        ("depth", false) => p.max_depth = Some(num(spec, k, v)?),
                        ("nobootstrap", true) => p.bootstrap = false,
                        _ => return Err(unknown(k)),
                    }
                }
                p.validate().map_err(|e| bad(spec, e))?;
                Ok(RegressorSpec::Forest(p))
            }
            other => Err(bad(
                spec,
                format!("unknown engine `{other}` (expected mean, ols, lasso, sqrtlasso, spline or forest)"),
            )),
        }
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for RegressorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressorSpec::Mean => write!(f, "mean"),
            RegressorSpec::Ols => write!(f, "ols"),
            RegressorSpec::Lasso { penalty, unpenalized } => {
                match penalty {
                    LassoPenalty::CrossValidated => write!(f, "lasso:cv")?,
                    LassoPenalty::Fixed(l) => write!(f, "lasso:{l}")?,
                }
                if !unpenalized.is_empty() {
                    write!(f, ",free={}", join(unpenalized))?;
                }
                Ok(())
            }
            RegressorSpec::SqrtLasso { penalty } => match penalty {
                SqrtPenalty::Auto { c_sq } => write!(f, "sqrtlasso:auto,c={c_sq}"),
                SqrtPenalty::Fixed(l) => write!(f, "sqrtlasso:{l}"),
            },
            RegressorSpec::Spline(s) => {
                write!(f, "spline:r={},N={}", s.order, s.knots)?;
                if s.layout == SplineLayout::Tensor {
                    write!(f, ",tensor")?;
                }
                match s.scaling {
                    UnitScaling::MinMax => {}
                    UnitScaling::Rank => write!(f, ",scale=rank")?,
                    UnitScaling::None => write!(f, ",scale=none")?,
                }
                if let Some(c) = &s.columns {
                    write!(f, ",cols={}", join(c))?;
                }
                Ok(())
            }
            RegressorSpec::Forest(p) => {
                write!(f, "forest:trees={},leaf={},mtry={}", p.n_trees, p.min_leaf, p.mtry_fraction)?;
                if let Some(d) = p.max_depth {
                    write!(f, ",depth={d}")?;
                }
                if !p.bootstrap {
                    write!(f, ",nobootstrap")?;
                }
                Ok(())
            }
        }
    }
}
