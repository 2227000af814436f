use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use pcm_core::data::Dataset;
use pcm_core::pcm::*;
use pcm_core::regress::{fit_mean, RegressorSpec};
use pcm_core::rng::RngStream;
use pcm_core::sim::Scenario;
use pcm_core::stats::{ks_distance_to_normal, normal_quantile, normal_sf};
use pcm_core::Error;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// `Z ~ N(0,1)`, `X = Z + N(0,1)`, `Y = Z + slope·X + N(0,1)`.
fn toy(n: usize, slope: f64, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed).rng();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let zi: f64 = rng.sample(StandardNormal);
        let xi = zi + rng.sample::<f64, _>(StandardNormal);
        y.push(zi + slope * xi + rng.sample::<f64, _>(StandardNormal));
        x.push(xi);
        z.push(zi);
    }
    Dataset::from_rows(&x, 1, &y, &z, 1).unwrap()
}

fn six_points() -> Dataset {
    Dataset::from_rows(
        &[0.5, -1.0, 2.0, 0.0, 1.5, -0.5],
        1,
        &[1.0, -2.0, 3.5, 0.5, 1.0, 0.0],
        &[0.0, -1.0, 1.0, 0.5, 2.0, -2.0],
        1,
    )
    .unwrap()
}

#[test]
fn rho_hat_matches_normal_equations() {
    let d = six_points();
    let (x, y, z) = (d.x().column(0), d.y(), d.z().column(0));
    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for i in 0..6 {
        let row = Vector3::new(1.0, x[i], z[i]);
        xtx += row * row.transpose();
        xty += row * y[i];
    }
    let b = xtx.lu().solve(&xty).unwrap();
    let g: Vec<f64> = (0..6).map(|i| b[0] + b[1] * x[i] + b[2] * z[i]).collect();
    let (zm, gm) = (z.mean(), g.iter().sum::<f64>() / 6.0);
    let slope = (0..6).map(|i| (z[i] - zm) * (g[i] - gm)).sum::<f64>() / (0..6).map(|i| (z[i] - zm).powi(2)).sum::<f64>();
    let m: Vec<f64> = (0..6).map(|i| gm + slope * (z[i] - zm)).collect();
    let rho = (0..6).map(|i| (y[i] - m[i]) * (g[i] - m[i])).sum::<f64>() / 6.0;

    let h = form_hhat(&d, &PcmConfig::ols(), RngStream::new(0)).unwrap();
    assert_abs_diff_eq!(h.rho_hat, rho, epsilon = 1e-12);
    assert!(h.rho_hat >= 0.0);
    assert_eq!(h.sign, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rho_hat_nonnegative_for_least_squares(seed in 0u64..10_000, n in 8usize..80) {
        let d = toy(n, 0.0, seed);
        let h = form_hhat(&d, &PcmConfig::ols(), RngStream::new(seed)).unwrap();
        prop_assert!(h.rho_hat >= -1e-12);
    }

    #[test]
    fn one_sided_decision(seed in 0u64..10_000, slope in -0.5f64..0.5) {
        let d = toy(60, slope, seed);
        let r = pcm_single_split(&d, &PcmConfig::ols().seed(seed)).unwrap();
        prop_assert_eq!(r.reject, r.statistic > normal_quantile(0.95));
        prop_assert!((r.p_value - normal_sf(r.statistic)).abs() < 1e-15);
    }
}

fn chat_oracle() -> f64 {
    // ½[1/(0.5+c) + 4/(1+c)] = 1  ⇔  c² − c − 1 = 0
    (1.0 + 5f64.sqrt()) / 2.0
}

#[test]
fn chat_examples() {
    assert_eq!(solve_chat(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(solve_chat(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    assert_abs_diff_eq!(solve_chat(&[1.0, 4.0], &[0.5, 1.0]).unwrap(), chat_oracle(), epsilon = 1e-9);
    // ṽ ≤ 0 everywhere: a(c) = mean(r)/c
    assert_abs_diff_eq!(solve_chat(&[1.0, 2.0, 6.0], &[-1.0, -2.0, 0.0]).unwrap(), 3.0, epsilon = 1e-9);
    assert!(solve_chat(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn chat_constraint_holds() {
    let d = toy(300, 0.3, 11);
    let cfg = PcmConfig::ols();
    let h = form_hhat(&d, &cfg, RngStream::new(1)).unwrap();
    let v = form_vhat(&d, &h.g_hat, &cfg, RngStream::new(1)).unwrap();
    let (vals, floored) = v.evaluate(&d).unwrap();
    assert!(!floored);
    let r = d.y() - h.g_hat.fitted_values();
    let a = r.iter().zip(vals.iter()).map(|(r, v)| r * r / v).sum::<f64>() / d.n() as f64;
    assert!(a <= 1.0 + 1e-8);
    if v.c_hat() > 0.0 {
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-8);
    }
}

#[test]
fn unit_weight_without_variance_engine() {
    let d = toy(50, 0.0, 3);
    let cfg = PcmConfig::ols().reg_v(None);
    let h = form_hhat(&d, &cfg, RngStream::new(0)).unwrap();
    let v = form_vhat(&d, &h.g_hat, &cfg, RngStream::new(0)).unwrap();
    assert!(v.evaluate(&d).unwrap().0.iter().all(|v| *v == 1.0));
}

#[test]
fn intercept_only_variance_is_mean_squared_residual() {
    let d = toy(120, 0.2, 5);
    let mut cfg = PcmConfig::ols();
    cfg.reg_v = Some(RegressorSpec::Mean);
    let h = form_hhat(&d, &cfg, RngStream::new(0)).unwrap();
    let v = form_vhat(&d, &h.g_hat, &cfg, RngStream::new(0)).unwrap();
    let r = d.y() - h.g_hat.fitted_values();
    let msr = r.norm_squared() / d.n() as f64;
    assert!(v.c_hat() < 1e-9);
    for vi in v.evaluate(&d).unwrap().0.iter() {
        assert_abs_diff_eq!(*vi, msr, epsilon = 1e-10);
    }
}

#[test]
fn statistic_examples() {
    let s = residual_product_statistic(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    // mean 3, population sd √2
    assert_abs_diff_eq!(s.statistic, 5f64.sqrt() * 3.0 / 2f64.sqrt(), epsilon = 1e-12);
    let flat = residual_product_statistic(&[0.7; 9]);
    assert_eq!(flat.statistic, 0.0);
    assert!(flat.degenerate);
}

#[test]
fn statistic_matches_direct_computation() {
    let d = toy(200, 0.4, 8);
    let cfg = PcmConfig::ols().reg_v(None);
    let h = form_hhat(&d.subset(&(100..200).collect::<Vec<_>>()), &cfg, RngStream::new(0)).unwrap();
    let d1 = d.subset(&(0..100).collect::<Vec<_>>());
    let f = ProjectionFn { h: h.clone(), v: VarianceFn::Unit };
    let (parts, _) = pcm_statistic(&d1, &f, &cfg, RngStream::new(0)).unwrap();

    let fv = h.evaluate(&d1).unwrap();
    let resid = |v: &DVector<f64>| {
        let z = d1.z().column(0);
        let (zm, vm) = (z.mean(), v.mean());
        let b = z.iter().zip(v.iter()).map(|(a, c)| (a - zm) * (c - vm)).sum::<f64>()
            / z.iter().map(|a| (a - zm).powi(2)).sum::<f64>();
        DVector::from_fn(v.len(), |i, _| v[i] - vm - b * (z[i] - zm))
    };
    let l = resid(d1.y()).component_mul(&resid(&fv));
    let n = l.len() as f64;
    let mean = l.mean();
    let sd = (l.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert_abs_diff_eq!(parts.statistic, n.sqrt() * mean / sd, epsilon = 1e-9);
}

#[test]
fn statistic_invariant_to_scaling_projection() {
    let d = toy(200, 0.3, 21);
    let cfg = PcmConfig::ols();
    let h = form_hhat(&d.subset(&(100..200).collect::<Vec<_>>()), &cfg, RngStream::new(0)).unwrap();
    let d1 = d.subset(&(0..100).collect::<Vec<_>>());
    let zeros = fit_mean(&d1.xz(), &DVector::zeros(100)).unwrap();
    let with_weight = |c: f64| {
        let f = ProjectionFn {
            h: h.clone(),
            v: VarianceFn::Fitted { v_tilde: zeros.clone(), c_hat: c },
        };
        pcm_statistic(&d1, &f, &cfg, RngStream::new(0)).unwrap().0.statistic
    };
    let t = with_weight(1.0);
    for c in [0.01, 7.3, 1e4] {
        assert_abs_diff_eq!(with_weight(c), t, epsilon = 1e-9 * t.abs().max(1.0));
    }
}

#[test]
fn constant_response_is_degenerate() {
    let d = toy(80, 0.0, 4).with_y(DVector::from_element(80, 2.5)).unwrap();
    for r in [pcm_single_split(&d, &PcmConfig::ols()).unwrap(), pcm_multi(&d, &PcmConfig::ols()).unwrap()] {
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 0.5);
        assert!(!r.reject);
        assert!(r.degenerate);
    }
}

#[test]
fn one_split_multi_equals_single() {
    let d = toy(150, 0.2, 9);
    let cfg = PcmConfig::ols().seed(42).splits(1);
    let a = pcm_multi(&d, &cfg).unwrap();
    let b = pcm_single_split(&d, &cfg).unwrap();
    assert_eq!(a.statistic, b.statistic);
    assert_eq!(a.per_split, b.per_split);
}

#[test]
fn multi_split_averages_statistics() {
    let d = toy(200, 0.1, 10);
    let r = pcm_multi(&d, &PcmConfig::ols().splits(6)).unwrap();
    assert_eq!(r.per_split.len(), 6);
    let mean = r.per_split.iter().map(|s| s.statistic).sum::<f64>() / 6.0;
    assert_abs_diff_eq!(r.statistic, mean, epsilon = 1e-14);
    for s in &r.per_split {
        assert_eq!(s.n_statistic + s.n_projection, 200);
    }
}

#[test]
fn deterministic_given_seed() {
    let d = toy(200, 0.1, 12);
    let cfg = PcmConfig::ols().seed(7);
    assert_eq!(pcm_multi(&d, &cfg).unwrap(), pcm_multi(&d, &cfg).unwrap());
    assert_ne!(
        pcm_multi(&d, &cfg).unwrap().statistic,
        pcm_multi(&d, &PcmConfig::ols().seed(8)).unwrap().statistic
    );
}

#[test]
fn explicit_partition_is_checked() {
    let d = toy(10, 0.0, 1);
    let cfg = PcmConfig::ols();
    assert!(pcm_single(&d, &[0, 1, 2, 3, 4], &[5, 6, 7, 8, 9], &cfg).is_ok());
    assert!(matches!(pcm_single(&d, &[0, 1, 2], &[2, 3, 4, 5, 6, 7, 8, 9], &cfg), Err(Error::InvalidArgument(_))));
    assert!(matches!(pcm_single(&d, &[0, 1], &[2, 3], &cfg), Err(Error::InvalidArgument(_))));
}

#[test]
fn configuration_errors_name_the_engine() {
    let d = toy(12, 0.0, 1);
    let cfg = PcmConfig::with_regressor("lasso:cv".parse().unwrap());
    match pcm_single_split(&d, &cfg) {
        Err(Error::Config(msg)) => assert!(msg.contains("lasso"), "{msg}"),
        other => panic!("expected a configuration error, got {other:?}"),
    }
    assert!(matches!(pcm_multi(&d, &PcmConfig::ols().splits(0)), Err(Error::Config(_))));
    assert!(matches!(pcm_multi(&d, &PcmConfig::ols().alpha(1.0)), Err(Error::Config(_))));
    let no_z = Dataset::new(DMatrix::from_element(12, 1, 1.0), DVector::zeros(12), DMatrix::zeros(12, 0));
    if let Ok(no_z) = no_z {
        assert!(matches!(pcm_multi(&no_z, &PcmConfig::ols()), Err(Error::Config(_))));
    }
}

#[test]
fn null_rejection_rate_is_near_level() {
    let reps = 1000;
    let rejections = (0..reps)
        .filter(|&r| pcm_single_split(&toy(200, 0.0, 1000 + r), &PcmConfig::ols().seed(r)).unwrap().reject)
        .count();
    let rate = rejections as f64 / reps as f64;
    assert!((0.02..=0.09).contains(&rate), "rate {rate}");
}

#[test]
fn null_statistic_is_approximately_normal() {
    let stats: Vec<f64> = (0..600)
        .map(|r| pcm_single_split(&toy(300, 0.0, 5000 + r), &PcmConfig::ols().reg_v(None).seed(r)).unwrap().statistic)
        .collect();
    let ks = ks_distance_to_normal(&stats);
    assert!(ks < 0.08, "KS distance {ks}");
}

#[test]
fn detects_linear_effect() {
    let scenario = Scenario::lookup("linear-F.1:beta=1,d=1").unwrap();
    let cfg = PcmConfig::ols().reg_v(None);
    let reps = 200;
    let hits = (0..reps)
        .filter(|&r| {
            let d = scenario.generate(400, RngStream::new(r)).unwrap();
            pcm_single_split(&d, &cfg.clone().seed(r)).unwrap().reject
        })
        .count();
    assert!(hits as f64 / reps as f64 >= 0.9, "power {}", hits as f64 / reps as f64);
}

#[test]
fn spline_pcm_examples() {
    let d = toy(2000, 0.0, 31);
    let alt = {
        let mut rng = RngStream::new(32).rng();
        let y = DVector::from_fn(2000, |i, _| {
            let (x, z) = (d.x()[(i, 0)], d.z()[(i, 0)]);
            z + (x - z).powi(2) + 0.5 * rng.sample::<f64, _>(StandardNormal)
        });
        d.with_y(y).unwrap()
    };
    let cfg = SplinePcmConfig::default();
    let null = spline_pcm(&d, &cfg).unwrap();
    assert!(null.statistic.is_finite());
    assert_eq!(null.per_split[0].n_statistic, 500);
    assert!(spline_pcm(&alt, &cfg).unwrap().reject);
    assert_eq!(spline_pcm(&d, &cfg).unwrap(), null);

    let too_fine = SplinePcmConfig { knots_x: Some(40), knots_z: Some(40), ..cfg.clone() };
    assert!(matches!(spline_pcm(&d, &too_fine), Err(Error::Config(_))));
    let zero_order = SplinePcmConfig { order: 0, ..cfg };
    assert!(matches!(spline_pcm(&d, &zero_order), Err(Error::Config(_))));
}
