//! Regression engines behind a single [`fit`] entry point.
//!
//! Every engine returns a [`FittedModel`]. Linear engines (OLS, lasso,
//! square-root lasso, splines) fit an unpenalized intercept; a response with
//! no variation short-circuits to an exact constant model.

mod forest;
mod lasso;
mod ols;
mod spec;

pub use forest::{Forest, ForestParams};
pub use lasso::default_sqrt_lambda;
pub use spec::{LassoPenalty, RegressorSpec, SplineSpec, SqrtPenalty};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::spline::{SplineFeatures, SplineLayout};

/// Solver diagnostics attached to a fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub engine: String,
    pub converged: bool,
    pub iterations: usize,
    pub rank: Option<usize>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    /// Response had zero variance.
    pub degenerate_scale: bool,
    pub constant_columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Constant(f64),
    Linear {
        coef: DVector<f64>,
        intercept: f64,
    },
    Spline {
        features: SplineFeatures,
        coef: DVector<f64>,
        intercept: f64,
    },
    Forest(Forest),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    model: Model,
    n_inputs: usize,
    fitted: DVector<f64>,
    info: FitInfo,
}

impl FittedModel {
    fn new(model: Model, design: &DMatrix<f64>, info: FitInfo) -> Result<Self> {
        let mut fm = FittedModel {
            model,
            n_inputs: design.ncols(),
            fitted: DVector::zeros(0),
            info,
        };
        fm.fitted = fm.predict(design)?;
        Ok(fm)
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    /// Predictions on the training design.
    pub fn fitted_values(&self) -> &DVector<f64> {
        &self.fitted
    }

    /// Slope coefficients for linear and spline engines; spline coefficients
    /// are indexed by generated feature.
    pub fn coefficients(&self) -> Option<&DVector<f64>> {
        match &self.model {
            Model::Linear { coef, .. } | Model::Spline { coef, .. } => Some(coef),
            _ => None,
        }
    }

    pub fn intercept(&self) -> Option<f64> {
        match &self.model {
            Model::Linear { intercept, .. } | Model::Spline { intercept, .. } => Some(*intercept),
            Model::Constant(c) => Some(*c),
            Model::Forest(_) => None,
        }
    }

    pub fn info(&self) -> &FitInfo {
        &self.info
    }

    pub fn spline_features(&self) -> Option<&SplineFeatures> {
        match &self.model {
            Model::Spline { features, .. } => Some(features),
            _ => None,
        }
    }

    pub fn forest(&self) -> Option<&Forest> {
        match &self.model {
            Model::Forest(f) => Some(f),
            _ => None,
        }
    }

    pub fn predict(&self, design: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_columns(design)?;
        let n = design.nrows();
        Ok(match &self.model {
            Model::Constant(c) => DVector::from_element(n, *c),
            Model::Linear { coef, intercept } => (design * coef).add_scalar(*intercept),
            Model::Spline {
                features,
                coef,
                intercept,
            } => (features.expand(design)? * coef).add_scalar(*intercept),
            Model::Forest(f) => f.predict(design),
        })
    }

    /// Prediction with the intercept and every component driven by an input
    /// column in `drop` removed. Available when the model is a sum of
    /// per-column terms (linear models and additive splines); `Ok(None)`
    /// otherwise.
    pub fn predict_dropping(&self, design: &DMatrix<f64>, drop: &[usize]) -> Result<Option<DVector<f64>>> {
        self.check_columns(design)?;
        let n = design.nrows();
        match &self.model {
            Model::Constant(_) => Ok(Some(DVector::zeros(n))),
            Model::Linear { coef, .. } => {
                let mut c = coef.clone();
                for &j in drop {
                    c[j] = 0.0;
                }
                Ok(Some(design * c))
            }
            Model::Spline { features, coef, .. } => {
                let Some(blocks) = features.blocks() else {
                    return Ok(None);
                };
                let mut c = coef.clone();
                for (j, range) in blocks {
                    if drop.contains(&j) {
                        c.rows_mut(range.start, range.len()).fill(0.0);
                    }
                }
                Ok(Some(features.expand(design)? * c))
            }
            Model::Forest(_) => Ok(None),
        }
    }

    fn check_columns(&self, design: &DMatrix<f64>) -> Result<()> {
        if design.ncols() != self.n_inputs {
            return Err(Error::invalid(format!(
                "design has {} columns, model was fitted on {}",
                design.ncols(),
                self.n_inputs
            )));
        }
        Ok(())
    }
}

/// Free-function form of [`FittedModel::predict`].
pub fn predict(model: &FittedModel, design: &DMatrix<f64>) -> Result<DVector<f64>> {
    model.predict(design)
}

fn check_inputs(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if design.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "design has {} rows but response has {}",
            design.nrows(),
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::invalid("cannot fit a regression on zero observations"));
    }
    if design.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("regression inputs must be finite"));
    }
    Ok(())
}

fn constant_response(y: &DVector<f64>) -> Option<f64> {
    y.iter().all(|v| *v == y[0]).then_some(y[0])
}

fn info(engine: &str) -> FitInfo {
    FitInfo {
        engine: engine.to_string(),
        converged: true,
        ..FitInfo::default()
    }
}

fn constant_linear(design: &DMatrix<f64>, c: f64, mut info: FitInfo) -> Result<FittedModel> {
    info.degenerate_scale = true;
    FittedModel::new(
        Model::Linear {
            coef: DVector::zeros(design.ncols()),
            intercept: c,
        },
        design,
        info,
    )
}

/// Fit the engine described by `spec`. `stream` only matters for forests.
pub fn fit(spec: &RegressorSpec, design: &DMatrix<f64>, y: &DVector<f64>, stream: RngStream) -> Result<FittedModel> {
    match spec {
        RegressorSpec::Mean => fit_mean(design, y),
        RegressorSpec::Ols => fit_ols(design, y),
        RegressorSpec::Lasso { penalty, unpenalized } => match penalty {
            LassoPenalty::Fixed(l) => fit_lasso(design, y, *l, unpenalized),
            LassoPenalty::CrossValidated => fit_lasso_cv(design, y, unpenalized),
        },
        RegressorSpec::SqrtLasso { penalty } => {
            let lambda = match penalty {
                SqrtPenalty::Fixed(l) => *l,
                SqrtPenalty::Auto { c_sq } => default_sqrt_lambda(*c_sq, design.ncols(), design.nrows()),
            };
            fit_sqrt_lasso(design, y, lambda)
        }
        RegressorSpec::Spline(s) => fit_spline(design, y, s),
        RegressorSpec::Forest(p) => fit_forest(design, y, p, stream),
    }
}

/// Intercept-only model, `ȳ` everywhere.
pub fn fit_mean(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedModel> {
    check_inputs(design, y)?;
    let c = constant_response(y).unwrap_or_else(|| y.mean());
    FittedModel::new(Model::Constant(c), design, info("mean"))
}

/// Ordinary least squares with an intercept.
pub fn fit_ols(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedModel> {
    fit_ols_with(design, y, true)
}

/// Minimum-norm least squares; `intercept = false` regresses on the columns
/// of `design` alone.
pub fn fit_ols_with(design: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> Result<FittedModel> {
    check_inputs(design, y)?;
    let ls = ols::least_squares(design, y, intercept);
    let mut inf = info("ols");
    inf.rank = Some(ls.rank);
    inf.constant_columns = ls.constant_columns;
    FittedModel::new(
        Model::Linear {
            coef: ls.coef,
            intercept: ls.intercept,
        },
        design,
        inf,
    )
}

/// Lasso at a fixed penalty `λ`, objective `(1/2n)‖r‖² + λ Σ|β_j|` on
/// standardized columns, with the columns in `unpenalized` left unpenalized.
pub fn fit_lasso(design: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, unpenalized: &[usize]) -> Result<FittedModel> {
    check_inputs(design, y)?;
    let sol = lasso::lasso_fixed(design, y, lambda, unpenalized)?;
    lasso_model(design, sol)
}

/// Lasso with `λ` chosen by five-fold cross-validation.
pub fn fit_lasso_cv(design: &DMatrix<f64>, y: &DVector<f64>, unpenalized: &[usize]) -> Result<FittedModel> {
    check_inputs(design, y)?;
    lasso::penalized_mask(design.ncols(), unpenalized)?;
    if let Some(c) = constant_response(y) {
        return constant_linear(design, c, info("lasso"));
    }
    let sol = lasso::lasso_cv(design, y, unpenalized)?;
    lasso_model(design, sol)
}

fn lasso_model(design: &DMatrix<f64>, sol: lasso::LassoSolution) -> Result<FittedModel> {
    let mut inf = info("lasso");
    inf.converged = sol.converged;
    inf.iterations = sol.sweeps;
    inf.lambda = Some(sol.lambda);
    inf.constant_columns = ols::constant_columns(design);
    FittedModel::new(
        Model::Linear {
            coef: sol.coef,
            intercept: sol.intercept,
        },
        design,
        inf,
    )
}

/// Square-root lasso `min √(mean r²) + λ_sq‖β‖₁` on standardized columns.
pub fn fit_sqrt_lasso(design: &DMatrix<f64>, y: &DVector<f64>, lambda_sq: f64) -> Result<FittedModel> {
    check_inputs(design, y)?;
    let sol = lasso::sqrt_lasso(design, y, lambda_sq)?;
    let mut inf = info("sqrtlasso");
    inf.lambda = Some(lambda_sq);
    if let Some(c) = constant_response(y) {
        inf.sigma = Some(0.0);
        return constant_linear(design, c, inf);
    }
    inf.converged = sol.converged;
    inf.iterations = sol.iterations;
    inf.sigma = Some(sol.sigma);
    inf.constant_columns = ols::constant_columns(design);
    FittedModel::new(
        Model::Linear {
            coef: sol.coef,
            intercept: sol.intercept,
        },
        design,
        inf,
    )
}

/// Spline series regression per `spec`; scaling is fitted on `design`.
pub fn fit_spline(design: &DMatrix<f64>, y: &DVector<f64>, spec: &SplineSpec) -> Result<FittedModel> {
    check_inputs(design, y)?;
    let features = SplineFeatures::fit(
        design,
        spec.order,
        spec.knots,
        spec.layout,
        spec.scaling,
        spec.columns.as_deref(),
    )?;
    fit_spline_features(features, design, y, true)
}

pub(crate) fn fit_spline_features(
    features: SplineFeatures,
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    intercept: bool,
) -> Result<FittedModel> {
    check_inputs(design, y)?;
    let phi = features.expand(design)?;
    let mut inf = info("spline");
    let (coef, b0) = match constant_response(y) {
        Some(c) if intercept => {
            inf.degenerate_scale = true;
            (DVector::zeros(phi.ncols()), c)
        }
        // a tensor basis sums to one, so `c·1` reproduces the constant
        Some(c) if !intercept && features.layout() == SplineLayout::Tensor => {
            inf.degenerate_scale = true;
            let mut fm = FittedModel::new(
                Model::Spline {
                    features,
                    coef: DVector::from_element(phi.ncols(), c),
                    intercept: 0.0,
                },
                design,
                inf,
            )?;
            fm.fitted = y.clone();
            return Ok(fm);
        }
        _ => {
            let ls = ols::least_squares(&phi, y, intercept);
            inf.rank = Some(ls.rank);
            (ls.coef, ls.intercept)
        }
    };
    FittedModel::new(
        Model::Spline {
            features,
            coef,
            intercept: b0,
        },
        design,
        inf,
    )
}

/// Bagged regression trees; deterministic given `stream`.
pub fn fit_forest(design: &DMatrix<f64>, y: &DVector<f64>, params: &ForestParams, stream: RngStream) -> Result<FittedModel> {
    check_inputs(design, y)?;
    params.validate()?;
    let mut inf = info("forest");
    if let Some(c) = constant_response(y) {
        inf.degenerate_scale = true;
        return FittedModel::new(Model::Constant(c), design, inf);
    }
    let forest = forest::fit_forest(design, y, params, stream)?;
    debug_assert_eq!(forest.n_features(), design.ncols());
    inf.iterations = forest.n_trees();
    FittedModel::new(Model::Forest(forest), design, inf)
}
