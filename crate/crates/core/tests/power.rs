use approx::assert_abs_diff_eq;
use pcm_core::power::*;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn params(beta: f64, n1: usize, n2: usize) -> LinearPowerParams {
    LinearPowerParams {
        beta,
        sigma_beta: 2.0,
        sigma_xi_sq: 0.5,
        sigma_eps_xi: 1.5,
        n1,
        n2,
        alpha: 0.05,
    }
}

fn phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

#[test]
fn pcm_power_example() {
    let p = params(0.2, 300, 100);
    let z = Normal::standard().inverse_cdf(0.05);
    let a = 10.0 * 0.2 / 2.0;
    let b = 300f64.sqrt() * 0.2 * 0.5 / 1.5;
    let expect = phi(a) * phi(z + b) + phi(-a) * phi(z - b);
    assert_abs_diff_eq!(pcm_asymptotic_power(&p).unwrap(), expect, epsilon = 1e-10);
}

#[test]
fn gcm_power_example() {
    let p = params(0.2, 300, 100);
    let z = Normal::standard().inverse_cdf(0.025);
    let c = 400f64.sqrt() * 0.2 * 0.5 / 1.5;
    assert_abs_diff_eq!(gcm_asymptotic_power(&p).unwrap(), phi(z + c) + phi(z - c), epsilon = 1e-10);
}

#[test]
fn size_at_zero_effect() {
    assert_eq!(pcm_asymptotic_power(&params(0.0, 50, 50)).unwrap(), 0.05);
    assert_eq!(gcm_asymptotic_power(&params(0.0, 50, 50)).unwrap(), 0.05);
    assert!(pcm_asymptotic_power(&params(10.0, 5000, 5000)).unwrap() > 1.0 - 1e-12);
}

#[test]
fn balanced_split_beats_lopsided_split() {
    let mut p = params(0.1, 1000, 1000);
    p.sigma_beta = 1.0;
    p.sigma_xi_sq = 1.0;
    p.sigma_eps_xi = 1.0;
    let balanced = pcm_asymptotic_power(&p).unwrap();
    let lopsided = pcm_asymptotic_power(&LinearPowerParams { n1: 1900, n2: 100, ..p }).unwrap();
    assert!(balanced > lopsided, "{balanced} vs {lopsided}");
}

#[test]
fn invalid_parameters() {
    assert!(pcm_asymptotic_power(&LinearPowerParams { sigma_xi_sq: 0.0, ..params(0.1, 10, 10) }).is_err());
    assert!(pcm_asymptotic_power(&LinearPowerParams { n1: 0, ..params(0.1, 10, 10) }).is_err());
    assert!(gcm_asymptotic_power(&LinearPowerParams { alpha: 1.0, ..params(0.1, 10, 10) }).is_err());
}

proptest! {
    #[test]
    fn power_is_a_probability_and_even_in_beta(beta in -3.0f64..3.0, n1 in 1usize..5000, n2 in 1usize..5000) {
        let p = params(beta, n1, n2);
        let psi = pcm_asymptotic_power(&p).unwrap();
        prop_assert!((0.0..=1.0).contains(&psi));
        prop_assert!((psi - pcm_asymptotic_power(&params(-beta, n1, n2)).unwrap()).abs() < 1e-12);
        let g = gcm_asymptotic_power(&p).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn power_is_continuous_in_beta(beta in -2.0f64..2.0) {
        let a = pcm_asymptotic_power(&params(beta, 400, 400)).unwrap();
        let b = pcm_asymptotic_power(&params(beta + 1e-9, 400, 400)).unwrap();
        prop_assert!((a - b).abs() < 1e-6);
    }
}

fn atom(x: f64, y: f64, z: f64, prob: f64) -> Atom {
    Atom { x, y, z, prob }
}

/// Two `y` values on each of four `(x, z)` cells with unequal spreads and
/// means that depend on `x`.
fn alternative() -> DiscreteDistribution {
    DiscreteDistribution::new(vec![
        atom(0.0, -1.0, 0.0, 0.1),
        atom(0.0, 1.0, 0.0, 0.15),
        atom(1.0, 0.0, 0.0, 0.1),
        atom(1.0, 3.0, 0.0, 0.1),
        atom(0.0, 0.5, 1.0, 0.2),
        atom(0.0, 1.0, 1.0, 0.05),
        atom(1.0, -2.0, 1.0, 0.1),
        atom(1.0, 2.0, 1.0, 0.2),
    ])
    .unwrap()
}

/// `E(Y|X,Z)` free of `X`: each cell is `{c − s, c + s}` with equal weights.
fn null() -> DiscreteDistribution {
    DiscreteDistribution::new(vec![
        atom(0.0, 0.0, 0.0, 0.1),
        atom(0.0, 2.0, 0.0, 0.1),
        atom(1.0, -2.0, 0.0, 0.2),
        atom(1.0, 4.0, 0.0, 0.2),
        atom(0.0, -1.0, 1.0, 0.15),
        atom(0.0, -0.5, 1.0, 0.15),
        atom(1.0, -3.0, 1.0, 0.05),
        atom(1.0, 1.5, 1.0, 0.05),
    ])
    .unwrap()
}

fn lookup(table: &[((f64, f64), f64)]) -> impl Fn(f64, f64) -> f64 + '_ {
    move |x, z| table.iter().find(|(k, _)| *k == (x, z)).unwrap().1
}

#[test]
fn optimal_ratio_equals_weighted_signal() {
    let d = alternative();
    let best = d.optimal_projection().unwrap();
    let oracle: f64 = d
        .xz_support()
        .iter()
        .map(|&(x, z)| {
            let w: f64 = d.atoms().iter().filter(|a| a.x == x && a.z == z).map(|a| a.prob).sum();
            let h = d.mean_y_given_xz(x, z) - d.mean_y_given_z(z);
            w * h * h / d.var_y_given_xz(x, z)
        })
        .sum();
    assert_abs_diff_eq!(oracle_ratio(lookup(&best), &d).unwrap(), oracle, epsilon = 1e-12);
    assert!(oracle > 0.0);
}

proptest! {
    #[test]
    fn optimal_projection_maximizes_ratio(delta in proptest::collection::vec(-2.0f64..2.0, 4)) {
        let d = alternative();
        let best = d.optimal_projection().unwrap();
        let top = oracle_ratio(lookup(&best), &d).unwrap();
        let perturbed: Vec<_> = best.iter().zip(&delta).map(|(&(k, v), e)| (k, v + e)).collect();
        prop_assert!(oracle_ratio(lookup(&perturbed), &d).unwrap() <= top * (1.0 + 1e-12));
    }

    #[test]
    fn ratio_is_scale_invariant(c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0], f in proptest::collection::vec(-2.0f64..2.0, 4)) {
        let d = alternative();
        let table: Vec<_> = d.xz_support().into_iter().zip(f.iter().copied()).collect();
        let scaled: Vec<_> = table.iter().map(|&(k, v)| (k, c * v)).collect();
        let a = oracle_ratio(lookup(&table), &d).unwrap();
        let b = oracle_ratio(lookup(&scaled), &d).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn null_distribution_is_orthogonal_to_every_projection(f in proptest::collection::vec(-5.0f64..5.0, 4)) {
        let d = null();
        let table: Vec<_> = d.xz_support().into_iter().zip(f.iter().copied()).collect();
        prop_assert!(d.projected_covariance(lookup(&table)).abs() < 1e-12);
        prop_assert!(oracle_ratio(lookup(&table), &d).unwrap() < 1e-20);
    }
}

#[test]
fn null_optimal_projection_vanishes() {
    for (_, v) in null().optimal_projection().unwrap() {
        assert!(v.abs() < 1e-12);
    }
}

#[test]
fn distribution_validation() {
    assert!(DiscreteDistribution::new(vec![]).is_err());
    assert!(DiscreteDistribution::new(vec![atom(0.0, 0.0, 0.0, 0.0)]).is_err());
    let d = DiscreteDistribution::new(vec![atom(0.0, 1.0, 0.0, 2.0), atom(0.0, 3.0, 0.0, 6.0)]).unwrap();
    assert_abs_diff_eq!(d.atoms()[0].prob, 0.25, epsilon = 1e-15);
    assert_abs_diff_eq!(d.mean_y_given_xz(0.0, 0.0), 2.5, epsilon = 1e-15);
}
