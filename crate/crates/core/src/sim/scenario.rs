use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Data-generating process behind a [`Scenario`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dgp {
    /// `Z ~ N₇(0, I)`, `s = sin(2πZ₁)`, `X = s + 0.1ξ`, `Y = s + ε`.
    AdditiveNull,
    /// `X = s + ξ`, `Y = s + 0.2X² + ε`.
    AdditiveAlt1,
    /// `ξ + 1 ~ Exp(1)`, `X = s − sξ`, `Y = s + 0.4X² + ε`.
    AdditiveAlt2,
    /// `X = s + ξ`, `Y = s + 0.4X²Z₂ + ε`.
    AdditiveAlt3,
    /// `Z ~ N₇(0, I)`, `X = Z₁ + 0.1ξ`, `Y = Z₁ + ε`: linear nuisances.
    AdditiveLinearNull,
    /// `u = sin(2πZ₁)(1 + Z₃)`, `v(X) = 0.5 + 1{X > 0}`,
    /// `X = u + ξ`, `Y = u + v(X)ε`.
    InteractionNull,
    /// `X = u + ξ`, `Y = u + 0.04X² + v(X)ε`.
    InteractionAlt1,
    /// `ξ ~ Exp(1)`, `X = u − sin(2πZ₁)(ξ − 1)`, `Y = u + 0.04X² + v(X)ε`.
    InteractionAlt2,
    /// `X = u + ξ`, `Y = u + 0.04X²Z₂ + v(X)ε`.
    InteractionAlt3,
    /// `Z, ξ ~ N_d(0, I)`, `X = Z + ξ`,
    /// `Y = βᵀX + 2(σ(3X₁) + σ(3Z₁))ε` with `β = beta·1` and `σ` the
    /// logistic function.
    Linear { d: usize, beta: f64 },
    /// `X, Y, Z` independent standard normal.
    Independent,
    /// `X, Z, ε` independent standard normal and `Y = X² + ε`, so that
    /// `Cov(X, Y | Z) = 0` under the alternative.
    Quadratic,
}

/// A named data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub dgp: Dgp,
    pub is_null: bool,
    pub default_n_grid: Vec<usize>,
    /// Sample sizes of the original large-sample study where it differs.
    pub full_n_grid: Vec<usize>,
}

const FIXED: [(&str, Dgp); 11] = [
    ("null-6.1", Dgp::AdditiveNull),
    ("alt1-6.1", Dgp::AdditiveAlt1),
    ("alt2-6.1", Dgp::AdditiveAlt2),
    ("alt3-6.1", Dgp::AdditiveAlt3),
    ("null-6.1-linear", Dgp::AdditiveLinearNull),
    ("null-6.2", Dgp::InteractionNull),
    ("alt1-6.2", Dgp::InteractionAlt1),
    ("alt2-6.2", Dgp::InteractionAlt2),
    ("alt3-6.2", Dgp::InteractionAlt3),
    ("independent", Dgp::Independent),
    ("quadratic", Dgp::Quadratic),
];

const LINEAR: &str = "linear-F.1";

impl Scenario {
    /// Every scenario name accepted by [`Scenario::lookup`]. The linear model
    /// also takes parameters, as in `linear-F.1:beta=0.2,d=1`.
    pub fn names() -> Vec<String> {
        let mut out: Vec<String> = FIXED.iter().map(|(n, _)| n.to_string()).collect();
        out.push(format!("{LINEAR}[:beta=<b>,d=<d>]"));
        out
    }

    pub fn lookup(name: &str) -> Result<Scenario> {
        let name = name.trim();
        if let Some((_, dgp)) = FIXED.iter().find(|(n, _)| *n == name) {
            return Ok(Scenario::from_dgp(*dgp));
        }
        if let Some(rest) = name.strip_prefix(LINEAR) {
            return parse_linear(rest).map(Scenario::from_dgp).ok_or_else(|| unknown(name));
        }
        Err(unknown(name))
    }

    pub fn from_dgp(dgp: Dgp) -> Scenario {
        let name = match dgp {
            Dgp::Linear { d, beta } => {
                if d == 5 && beta == 0.0 {
                    LINEAR.to_string()
                } else {
                    format!("{LINEAR}:beta={beta},d={d}")
                }
            }
            _ => FIXED.iter().find(|(_, g)| *g == dgp).map(|(n, _)| n.to_string()).unwrap(),
        };
        let (default_n_grid, full_n_grid) = match dgp {
            Dgp::AdditiveNull | Dgp::AdditiveAlt1 | Dgp::AdditiveAlt2 | Dgp::AdditiveAlt3 => {
                (vec![250, 500, 1000], vec![250, 500, 1000])
            }
            Dgp::InteractionNull | Dgp::InteractionAlt1 | Dgp::InteractionAlt2 | Dgp::InteractionAlt3 => {
                (vec![10_000], vec![10_000, 20_000, 40_000])
            }
            Dgp::Linear { .. } => (vec![100, 400, 1600, 6400], vec![100, 400, 1600, 6400]),
            Dgp::AdditiveLinearNull | Dgp::Independent | Dgp::Quadratic => (vec![500], vec![500]),
        };
        let is_null = match dgp {
            Dgp::AdditiveNull | Dgp::AdditiveLinearNull | Dgp::InteractionNull | Dgp::Independent => true,
            Dgp::Linear { beta, .. } => beta == 0.0,
            _ => false,
        };
        Scenario {
            name,
            dgp,
            is_null,
            default_n_grid,
            full_n_grid,
        }
    }

    pub fn dx(&self) -> usize {
        match self.dgp {
            Dgp::Linear { d, .. } => d,
            _ => 1,
        }
    }

    pub fn dz(&self) -> usize {
        match self.dgp {
            Dgp::Linear { d, .. } => d,
            Dgp::Independent | Dgp::Quadratic => 1,
            _ => 7,
        }
    }

    /// `n` i.i.d. draws. Rows are generated sequentially from one generator,
    /// so the first `m` rows do not depend on `n ≥ m`.
    pub fn generate(&self, n: usize, seed: RngStream) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::invalid("scenario sample size must be at least 1"));
        }
        let (dx, dz) = (self.dx(), self.dz());
        let mut rng = seed.rng();
        let mut x = Vec::with_capacity(n * dx);
        let mut y = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n * dz);
        let mut zi = vec![0.0; dz];
        for _ in 0..n {
            for v in zi.iter_mut() {
                *v = normal(&mut rng);
            }
            let yi = match self.dgp {
                Dgp::Linear { d, beta } => {
                    let mut lin = 0.0;
                    let mut x1 = 0.0;
                    for (j, zj) in zi.iter().enumerate() {
                        let xj = zj + normal(&mut rng);
                        if j == 0 {
                            x1 = xj;
                        }
                        lin += beta * xj;
                        x.push(xj);
                    }
                    debug_assert_eq!(x.len() % d, 0);
                    lin + 2.0 * (logistic(3.0 * x1) + logistic(3.0 * zi[0])) * normal(&mut rng)
                }
                dgp => {
                    let (xi, yi) = scalar_row(dgp, &zi, &mut rng);
                    x.push(xi);
                    yi
                }
            };
            y.push(yi);
            z.extend_from_slice(&zi);
        }
        Dataset::new(
            DMatrix::from_row_slice(n, dx, &x),
            DVector::from_vec(y),
            DMatrix::from_row_slice(n, dz, &z),
        )
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn unknown(name: &str) -> Error {
    Error::UnknownScenario {
        name: name.to_string(),
        valid: Scenario::names().join(", "),
    }
}

fn parse_linear(rest: &str) -> Option<Dgp> {
    let (mut d, mut beta) = (5usize, 0.0f64);
    if !rest.is_empty() {
        let params = rest.strip_prefix(':')?;
        for item in params.split(',') {
            let (k, v) = item.split_once('=')?;
            match k.trim() {
                "beta" => beta = v.trim().parse().ok().filter(|b: &f64| b.is_finite())?,
                "d" => d = v.trim().parse().ok().filter(|d| *d >= 1)?,
                _ => return None,
            }
        }
    }
    Some(Dgp::Linear { d, beta })
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn scalar_row<R: Rng>(dgp: Dgp, z: &[f64], rng: &mut R) -> (f64, f64) {
    let s = (2.0 * std::f64::consts::PI * z[0]).sin();
    match dgp {
        Dgp::AdditiveNull => {
            let x = s + 0.1 * normal(rng);
            (x, s + normal(rng))
        }
        Dgp::AdditiveAlt1 => {
            let x = s + normal(rng);
            (x, s + 0.2 * x * x + normal(rng))
        }
        Dgp::AdditiveAlt2 => {
            let xi: f64 = Exp1.sample(rng);
            let x = s - s * (xi - 1.0);
            (x, s + 0.4 * x * x + normal(rng))
        }
        Dgp::AdditiveAlt3 => {
            let x = s + normal(rng);
            (x, s + 0.4 * x * x * z[1] + normal(rng))
        }
        Dgp::AdditiveLinearNull => {
            let x = z[0] + 0.1 * normal(rng);
            (x, z[0] + normal(rng))
        }
        Dgp::InteractionNull | Dgp::InteractionAlt1 | Dgp::InteractionAlt2 | Dgp::InteractionAlt3 => {
            let u = s * (1.0 + z[2]);
            let x = if dgp == Dgp::InteractionAlt2 {
                let xi: f64 = Exp1.sample(rng);
                u - s * (xi - 1.0)
            } else {
                u + normal(rng)
            };
            let v = if x > 0.0 { 1.5 } else { 0.5 };
            let signal = match dgp {
                Dgp::InteractionNull => 0.0,
                Dgp::InteractionAlt3 => 0.04 * x * x * z[1],
                _ => 0.04 * x * x,
            };
            (x, u + signal + v * normal(rng))
        }
        Dgp::Independent => (normal(rng), normal(rng)),
        Dgp::Quadratic => {
            let x = normal(rng);
            (x, x * x + normal(rng))
        }
        Dgp::Linear { .. } => unreachable!("vector-valued X"),
    }
}

/// Nuisance quantities of the univariate linear scenario
/// (`d = 1`, `ξ = X − Z`, `ε = Y − βZ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearNuisances {
    pub sigma_beta: f64,
    pub sigma_xi_sq: f64,
    pub sigma_eps_xi: f64,
}

impl LinearNuisances {
    pub fn power_params(&self, beta: f64, n1: usize, n2: usize, alpha: f64) -> crate::power::LinearPowerParams {
        crate::power::LinearPowerParams {
            beta,
            sigma_beta: self.sigma_beta,
            sigma_xi_sq: self.sigma_xi_sq,
            sigma_eps_xi: self.sigma_eps_xi,
            n1,
            n2,
            alpha,
        }
    }
}

/// `Q = E[4(σ(3(Z+ξ)) + σ(3Z))² ξ²]` by the trapezoid rule on `[−9, 9]²`
/// with step `0.01` against the bivariate standard normal density.
pub fn linear_heteroscedastic_moment() -> f64 {
    let (lo, steps) = (-9.0, 1800usize);
    let h = 18.0 / steps as f64;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + i as f64 * h).collect();
    let weight = |i: usize| {
        let t = grid[i];
        let end = if i == 0 || i == steps { 0.5 } else { 1.0 };
        end * h * (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    let w: Vec<f64> = (0..=steps).map(weight).collect();
    let sz: Vec<f64> = grid.iter().map(|z| logistic(3.0 * z)).collect();
    let mut total = 0.0;
    for (i, z) in grid.iter().enumerate() {
        let mut inner = 0.0;
        for (j, xi) in grid.iter().enumerate() {
            let sd = 2.0 * (logistic(3.0 * (z + xi)) + sz[i]);
            inner += w[j] * sd * sd * xi * xi;
        }
        total += w[i] * inner;
    }
    total
}

/// Nuisances of `linear-F.1` with `d = 1` for OLS fits:
/// `σ_ξ² = 1`, `σ_β² = Q` and `σ_εξ² = 2β² + Q`.
pub fn linear_f1_nuisances(beta: f64) -> LinearNuisances {
    let q = linear_heteroscedastic_moment();
    LinearNuisances {
        sigma_beta: q.sqrt(),
        sigma_xi_sq: 1.0,
        sigma_eps_xi: (2.0 * beta * beta + q).sqrt(),
    }
}
