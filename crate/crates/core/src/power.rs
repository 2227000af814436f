//! Asymptotic power of the single-split test and of the GCM in the
//! univariate linear model, and the efficiency ratio that the optimal
//! projection maximises.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{normal_cdf, normal_quantile};

/// Nuisance quantities of the univariate linear model `Y = βX + γᵀZ + ζ`:
/// `σ_β²` is the asymptotic variance of `√n₂(β̂ − β)`, `σ_ξ²` the variance of
/// the `X`-on-`Z` residual `ξ`, and `σ_εξ` the standard deviation of `εξ`
/// with `ε` the `Y`-on-`Z` residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPowerParams {
    pub beta: f64,
    pub sigma_beta: f64,
    pub sigma_xi_sq: f64,
    pub sigma_eps_xi: f64,
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
}

impl LinearPowerParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_beta", self.sigma_beta),
            ("sigma_xi_sq", self.sigma_xi_sq),
            ("sigma_eps_xi", self.sigma_eps_xi),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.beta.is_finite() {
            return Err(Error::config("beta must be finite"));
        }
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::config("n1 and n2 must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    fn signal(&self, n: usize) -> f64 {
        (n as f64).sqrt() * self.beta * self.sigma_xi_sq / self.sigma_eps_xi
    }
}

/// `Φ(q + shift)` where `Φ(q) = p`, returning `p` itself when the shift
/// vanishes so that size statements hold exactly.
fn shifted(p: f64, q: f64, shift: f64) -> f64 {
    if shift == 0.0 {
        p
    } else {
        normal_cdf(q + shift)
    }
}

/// `ψ = Φ(a)Φ(z_α + b) + Φ(−a)Φ(z_α − b)` with `a = √n₂β/σ_β` and
/// `b = √n₁βσ_ξ²/σ_εξ`. Equals `α` exactly at `β = 0`.
pub fn pcm_asymptotic_power(p: &LinearPowerParams) -> Result<f64> {
    p.validate()?;
    let z = normal_quantile(p.alpha);
    let a = (p.n2 as f64).sqrt() * p.beta / p.sigma_beta;
    let b = p.signal(p.n1);
    let psi = normal_cdf(a) * shifted(p.alpha, z, b) + normal_cdf(-a) * shifted(p.alpha, z, -b);
    Ok(psi.clamp(0.0, 1.0))
}

/// Two-sided GCM power without splitting,
/// `Φ(z_{α/2} + c) + Φ(z_{α/2} − c)` with `c = √(n₁+n₂)βσ_ξ²/σ_εξ`.
pub fn gcm_asymptotic_power(p: &LinearPowerParams) -> Result<f64> {
    p.validate()?;
    let half = p.alpha / 2.0;
    let z = normal_quantile(half);
    let c = p.signal(p.n1 + p.n2);
    Ok((shifted(half, z, c) + shifted(half, z, -c)).clamp(0.0, 1.0))
}

/// One support point of a discrete law of `(X, Y, Z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub prob: f64,
}

/// Finitely supported joint distribution of scalar `(X, Y, Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Atom>,
}

impl DiscreteDistribution {
    /// Probabilities must be positive; they are normalised to sum to 1.
    pub fn new(mut atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("distribution needs at least one atom"));
        }
        if atoms.iter().any(|a| !(a.prob > 0.0) || !a.x.is_finite() || !a.y.is_finite() || !a.z.is_finite()) {
            return Err(Error::invalid("atoms need finite values and positive probabilities"));
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        for a in &mut atoms {
            a.prob /= total;
        }
        Ok(DiscreteDistribution { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Distinct `(x, z)` support points in first-seen order.
    pub fn xz_support(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for a in &self.atoms {
            if !out.contains(&(a.x, a.z)) {
                out.push((a.x, a.z));
            }
        }
        out
    }

    fn conditional<F: Fn(&Atom) -> bool>(&self, keep: F, g: impl Fn(&Atom) -> f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for a in self.atoms.iter().filter(|a| keep(a)) {
            num += a.prob * g(a);
            den += a.prob;
        }
        num / den
    }

    pub fn mean_y_given_z(&self, z: f64) -> f64 {
        self.conditional(|a| a.z == z, |a| a.y)
    }

    pub fn mean_y_given_xz(&self, x: f64, z: f64) -> f64 {
        self.conditional(|a| a.x == x && a.z == z, |a| a.y)
    }

    pub fn var_y_given_xz(&self, x: f64, z: f64) -> f64 {
        let m = self.mean_y_given_xz(x, z);
        self.conditional(|a| a.x == x && a.z == z, |a| (a.y - m).powi(2))
    }

    /// `E[{Y − E(Y|Z)} f(X, Z)]`; zero for every `f` exactly when `Y` is
    /// conditionally mean independent of `X` given `Z`.
    pub fn projected_covariance(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.prob * (a.y - self.mean_y_given_z(a.z)) * f(a.x, a.z))
            .sum()
    }

    /// `h/v` on each `(x, z)` support point, where
    /// `h = E(Y|X,Z) − E(Y|Z)` and `v = Var(Y|X,Z)`.
    pub fn optimal_projection(&self) -> Result<Vec<((f64, f64), f64)>> {
        self.xz_support()
            .into_iter()
            .map(|(x, z)| {
                let v = self.var_y_given_xz(x, z);
                if !(v > 0.0) {
                    return Err(Error::Domain(format!("Var(Y | X={x}, Z={z}) is zero")));
                }
                Ok(((x, z), (self.mean_y_given_xz(x, z) - self.mean_y_given_z(z)) / v))
            })
            .collect()
    }
}

/// `(E[{Y − E(Y|Z)} f])² / E[{Y − E(Y|X,Z)}² f²]` with `0/0 := 0`.
///
/// Requires `Var(Y | X, Z) > 0` on every `(x, z)` support point, which rules
/// out a zero denominator with a nonzero numerator.
pub fn oracle_ratio(f: impl Fn(f64, f64) -> f64, dist: &DiscreteDistribution) -> Result<f64> {
    for (x, z) in dist.xz_support() {
        if !(dist.var_y_given_xz(x, z) > 0.0) {
            return Err(Error::Domain(format!("Var(Y | X={x}, Z={z}) is zero")));
        }
    }
    let num = dist.projected_covariance(&f);
    let den: f64 = dist
        .atoms()
        .iter()
        .map(|a| a.prob * (a.y - dist.mean_y_given_xz(a.x, a.z)).powi(2) * f(a.x, a.z).powi(2))
        .sum();
    if den == 0.0 {
        assert!(num == 0.0, "nonzero covariance with zero weighted variance");
        return Ok(0.0);
    }
    Ok(num * num / den)
}
