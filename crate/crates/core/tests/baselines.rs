use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use pcm_core::baselines::*;
use pcm_core::data::Dataset;
use pcm_core::regress::RegressorSpec;
use pcm_core::rng::{label, RngStream};
use pcm_core::split::split;
use pcm_core::stats::{normal_cdf, normal_sf};
use pcm_core::Error;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, beta: f64, seed: u64) -> Dataset {
    let mut rng = RngStream::new(seed).rng();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let zi: f64 = rng.sample(StandardNormal);
        let xi = 0.5 * zi + rng.sample::<f64, _>(StandardNormal);
        y.push(zi + beta * xi + rng.sample::<f64, _>(StandardNormal));
        x.push(xi);
        z.push(zi);
    }
    Dataset::from_rows(&x, 1, &y, &z, 1).unwrap()
}

/// Residuals of the simple regression of `v` on `z` with intercept.
fn simple_resid(v: &[f64], z: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let (vm, zm) = (v.iter().sum::<f64>() / n, z.iter().sum::<f64>() / n);
    let b = v.iter().zip(z).map(|(a, c)| (a - vm) * (c - zm)).sum::<f64>() / z.iter().map(|c| (c - zm).powi(2)).sum::<f64>();
    v.iter().zip(z).map(|(a, c)| a - vm - b * (c - zm)).collect()
}

/// Fitted values of `y` on `(1, x, z)` from the 3×3 normal equations.
fn two_regressor_fit(x: &[f64], z: &[f64], y: &[f64]) -> (Vector3<f64>, Vec<f64>) {
    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for i in 0..y.len() {
        let r = Vector3::new(1.0, x[i], z[i]);
        xtx += r * r.transpose();
        xty += r * y[i];
    }
    let b = xtx.lu().solve(&xty).unwrap();
    let fitted = (0..y.len()).map(|i| b[0] + b[1] * x[i] + b[2] * z[i]).collect();
    (b, fitted)
}

fn cols(d: &Dataset) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        d.x().column(0).iter().copied().collect(),
        d.y().iter().copied().collect(),
        d.z().column(0).iter().copied().collect(),
    )
}

#[test]
fn gcm_matches_hand_computation() {
    let d = gaussian(150, 0.2, 1);
    let (x, y, z) = cols(&d);
    let r: Vec<f64> = simple_resid(&x, &z).iter().zip(simple_resid(&y, &z)).map(|(a, b)| a * b).collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let sd = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let t = n.sqrt() * mean / sd;

    let res = gcm_test(&d, &RegressorSpec::Ols, &RegressorSpec::Ols, 0.05, RngStream::new(0)).unwrap();
    assert_abs_diff_eq!(res.statistic, t, epsilon = 1e-10);
    assert_abs_diff_eq!(res.p_value, 2.0 * (1.0 - normal_cdf(t.abs())), epsilon = 1e-12);
    assert_eq!(res.reject, res.p_value < 0.05);
}

#[test]
fn gcm_is_antisymmetric_in_y() {
    let d = gaussian(100, 0.3, 2);
    let flipped = d.with_y(-d.y()).unwrap();
    let a = gcm_test(&d, &RegressorSpec::Ols, &RegressorSpec::Ols, 0.05, RngStream::new(0)).unwrap();
    let b = gcm_test(&flipped, &RegressorSpec::Ols, &RegressorSpec::Ols, 0.05, RngStream::new(0)).unwrap();
    assert_abs_diff_eq!(a.statistic, -b.statistic, epsilon = 1e-10);
    assert_abs_diff_eq!(a.p_value, b.p_value, epsilon = 1e-12);
}

#[test]
fn gcm_rejects_multivariate_x() {
    let d = Dataset::from_rows(&[1., 2., 3., 4., 5., 7., 0., 1.], 2, &[1., 2., 3., 4.], &[0., 1., 0., 1.], 1).unwrap();
    match gcm_test(&d, &RegressorSpec::Ols, &RegressorSpec::Ols, 0.05, RngStream::new(0)) {
        Err(Error::Unsupported(msg)) => assert!(msg.contains("gcm supports univariate X"), "{msg}"),
        other => panic!("expected Unsupported, got {other:?}"),
    }
}

/// `(v̂, η̂)` written out from the definitions.
fn explained(y: &[f64], f: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mu = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    let mse = y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    let tau = f.iter().map(|b| (b - mu).powi(2)).sum::<f64>() / n;
    let eta = y
        .iter()
        .zip(f)
        .map(|(a, b)| {
            let phi = (2.0 * (a - b) * (b - mu) + (b - mu).powi(2)) / var - tau * (a - mu).powi(2) / var.powi(2);
            phi * phi
        })
        .sum::<f64>()
        / n;
    (1.0 - mse / var, eta)
}

#[test]
fn williamson_matches_hand_computation() {
    let d = Dataset::from_rows(
        &[0.3, -1.2, 2.2, 0.1, 1.4, -0.7, 0.9, -2.0],
        1,
        &[1.1, -2.0, 3.1, 0.4, 1.8, -0.2, 0.5, -1.9],
        &[0.2, -1.0, 1.1, 0.6, 1.9, -1.6, 0.0, -0.4],
        1,
    )
    .unwrap();
    let seed = RngStream::new(5);
    let (i1, i2) = split(8, seed.derive(label::SPLITS).derive(0)).unwrap();
    let (x1, y1, z1) = cols(&d.subset(&i1));
    let (_, y2, z2) = cols(&d.subset(&i2));
    let (_, g) = two_regressor_fit(&x1, &z1, &y1);
    let m: Vec<f64> = y2.iter().zip(simple_resid(&y2, &z2)).map(|(a, r)| a - r).collect();
    let (v1, e1) = explained(&y1, &g);
    let (v2, e2) = explained(&y2, &m);
    let t = (v1 - v2) / (e1 / 4.0 + e2 / 4.0).sqrt();

    let res = williamson_test(&d, &RegressorSpec::Ols, &RegressorSpec::Ols, 0.05, seed).unwrap();
    assert_abs_diff_eq!(res.statistic, t, epsilon = 1e-9);
    assert_abs_diff_eq!(res.p_value, normal_sf(t), epsilon = 1e-12);
}

#[test]
fn williamson_constant_response() {
    let d = gaussian(40, 0.0, 3).with_y(DVector::from_element(40, 1.5)).unwrap();
    let res = williamson_test(&d, &RegressorSpec::Ols, &RegressorSpec::Ols, 0.05, RngStream::new(0)).unwrap();
    assert_eq!(res.statistic, 0.0);
    assert!(!res.reject);
}

#[test]
fn wald_exact_linear_fit() {
    let d = gaussian(30, 0.0, 4);
    let y = d.x().column(0) * 2.0 + d.z().column(0);
    let res = robust_wald_test(&d.with_y(y).unwrap(), 0.05).unwrap();
    assert!(res.p_value < 1e-12);
    assert!(res.reject);
}

#[test]
fn wald_is_squared_robust_t() {
    let d = gaussian(60, 0.1, 6);
    let (x, y, z) = cols(&d);
    let (b, fitted) = two_regressor_fit(&x, &z, &y);
    let mut xtx = Matrix3::zeros();
    let mut meat = Matrix3::zeros();
    for i in 0..60 {
        let r = Vector3::new(1.0, x[i], z[i]);
        xtx += r * r.transpose();
        meat += r * r.transpose() * (y[i] - fitted[i]).powi(2);
    }
    let inv = xtx.try_inverse().unwrap();
    let cov = inv * meat * inv;
    let t = b[1] / cov[(1, 1)].sqrt();

    let res = robust_wald_test(&d, 0.05).unwrap();
    assert_abs_diff_eq!(res.statistic, t * t, epsilon = 1e-9 * (t * t).max(1.0));
    assert_abs_diff_eq!(res.p_value, 2.0 * normal_sf(t.abs()), epsilon = 1e-9);
}

#[test]
fn wald_rank_deficient_design() {
    let d = gaussian(20, 0.0, 7);
    let dup = Dataset::new(d.x().clone(), d.y().clone(), DMatrix::from_fn(20, 1, |i, _| d.x()[(i, 0)])).unwrap();
    assert!(matches!(robust_wald_test(&dup, 0.05), Err(Error::SingularCovariance(_))));
}

#[test]
fn wald_level_under_homoscedastic_null() {
    let reps = 1000;
    let hits = (0..reps).filter(|&r| robust_wald_test(&gaussian(200, 0.0, 100 + r), 0.05).unwrap().reject).count();
    let rate = hits as f64 / reps as f64;
    assert!((0.03..=0.08).contains(&rate), "rate {rate}");
}

#[test]
fn invalid_level() {
    let d = gaussian(20, 0.0, 8);
    assert!(matches!(robust_wald_test(&d, 0.0), Err(Error::Config(_))));
    assert!(matches!(
        williamson_test(&d, &RegressorSpec::Ols, &RegressorSpec::Ols, 1.5, RngStream::new(0)),
        Err(Error::Config(_))
    ));
}
