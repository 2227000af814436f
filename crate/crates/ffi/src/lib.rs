//! C interface.
//!
//! Datasets and test configurations are opaque handles created and freed
//! through this interface. Every fallible function returns a [`PcmStatus`];
//! on failure the message is available from [`pcm_last_error_message`] on the
//! same thread until the next failing call. Panics are caught and reported
//! as [`PcmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pcm_core::baselines::{gcm_test, robust_wald_test, williamson_test};
use pcm_core::data::Dataset;
use pcm_core::pcm::{pcm_multi, pcm_single_split, spline_pcm, PcmConfig as CoreConfig, SplinePcmConfig};
use pcm_core::power::{gcm_asymptotic_power, LinearPowerParams};
use pcm_core::regress::RegressorSpec;
use pcm_core::rng::RngStream;
use pcm_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Unsupported = 5,
    Singular = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcmMethod {
    /// Multi-split test.
    Multi = 0,
    /// Single split.
    Single = 1,
    /// Spline series test with four folds.
    Spline = 2,
    Gcm = 3,
    Williamson = 4,
    Wald = 5,
}

/// Which regression a configured engine is used for.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcmRole {
    /// `Y` on `(X, Z)`.
    G = 0,
    /// Squared residuals on `(X, Z)`; the engine string `none` disables weighting.
    V = 1,
    /// Projection on `Z`; also `X` on `Z` for the GCM.
    Mf = 2,
    /// `Y` on `Z`.
    M = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcmResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub degenerate: bool,
}

/// Opaque dataset handle.
pub struct PcmDataset(Dataset);

/// Opaque test configuration handle.
pub struct PcmConfig(CoreConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> PcmStatus {
    match e {
        Error::InvalidArgument(_) => PcmStatus::InvalidArgument,
        Error::Config(_) | Error::UnknownScenario { .. } => PcmStatus::Config,
        Error::Unsupported(_) => PcmStatus::Unsupported,
        Error::SingularCovariance(_) => PcmStatus::Singular,
        Error::Schema(_) | Error::Parse { .. } | Error::Domain(_) | Error::Io { .. } => PcmStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PcmStatus, String)>) -> PcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PcmStatus::Panic
        }
    }
}

fn core(e: Error) -> (PcmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PcmStatus, String) {
    (PcmStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failure on this thread, or null if none. Owned by the
/// library and valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn pcm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pcm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies row-major `x` (`n × dx`), `y` (`n`) and `z` (`n × dz`) into a new
/// dataset. `z` may be null when `dz` is 0.
///
/// # Safety
/// `x`, `y` and `z` must point to at least `n·dx`, `n` and `n·dz` readable
/// doubles, and `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn pcm_dataset_new(
    x: *const f64,
    dx: usize,
    y: *const f64,
    z: *const f64,
    dz: usize,
    n: usize,
    out: *mut *mut PcmDataset,
) -> PcmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if x.is_null() || y.is_null() || (z.is_null() && dz > 0) {
            return Err(null("data pointer"));
        }
        let len = |rows: usize, cols: usize| {
            rows.checked_mul(cols)
                .ok_or((PcmStatus::InvalidArgument, "dimensions overflow".to_string()))
        };
        let xs = std::slice::from_raw_parts(x, len(n, dx)?);
        let ys = std::slice::from_raw_parts(y, n);
        let zs: &[f64] = if dz == 0 { &[] } else { std::slice::from_raw_parts(z, len(n, dz)?) };
        let data = Dataset::from_rows(xs, dx, ys, zs, dz).map_err(core)?;
        *out = Box::into_raw(Box::new(PcmDataset(data)));
        Ok(())
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `data` must be null or a live handle from [`pcm_dataset_new`].
#[no_mangle]
pub unsafe extern "C" fn pcm_dataset_rows(data: *const PcmDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n())
}

/// # Safety
/// `data` must be null or a handle from [`pcm_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcm_dataset_free(data: *mut PcmDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// New configuration: least squares for every regression, six splits,
/// level 0.05, seed 0.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn pcm_config_new(out: *mut *mut PcmConfig) -> PcmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(PcmConfig(CoreConfig::ols())));
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from [`pcm_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pcm_config_free(config: *mut PcmConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Sets the engine for `role` from its text form, e.g. `"lasso:cv"` or
/// `"forest:trees=200,leaf=5"`.
///
/// # Safety
/// `config` must be a live handle and `spec` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pcm_config_set_regressor(config: *mut PcmConfig, role: PcmRole, spec: *const c_char) -> PcmStatus {
    guard(|| {
        let config = config.as_mut().ok_or_else(|| null("config"))?;
        if spec.is_null() {
            return Err(null("spec"));
        }
        let text = CStr::from_ptr(spec)
            .to_str()
            .map_err(|_| (PcmStatus::InvalidArgument, "spec is not UTF-8".to_string()))?;
        if role == PcmRole::V && text.trim() == "none" {
            config.0.reg_v = None;
            return Ok(());
        }
        let reg: RegressorSpec = text.parse().map_err(core)?;
        match role {
            PcmRole::G => config.0.reg_g = reg,
            PcmRole::V => config.0.reg_v = Some(reg),
            PcmRole::Mf => config.0.reg_mf = reg,
            PcmRole::M => config.0.reg_m = reg,
        }
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcm_config_set_splits(config: *mut PcmConfig, splits: usize) -> PcmStatus {
    guard(|| {
        let config = config.as_mut().ok_or_else(|| null("config"))?;
        if splits == 0 {
            return Err((PcmStatus::Config, "number of splits must be at least 1".into()));
        }
        config.0.splits = splits;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcm_config_set_alpha(config: *mut PcmConfig, alpha: f64) -> PcmStatus {
    guard(|| {
        let config = config.as_mut().ok_or_else(|| null("config"))?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err((PcmStatus::Config, format!("alpha must lie in (0, 1), got {alpha}")));
        }
        config.0.alpha = alpha;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pcm_config_set_seed(config: *mut PcmConfig, seed: u64) -> PcmStatus {
    guard(|| {
        let config = config.as_mut().ok_or_else(|| null("config"))?;
        config.0.seed = RngStream::new(seed);
        Ok(())
    })
}

/// Runs `method` on `data`. The GCM uses the `Mf` engine for `X` on `Z` and
/// the `M` engine for `Y` on `Z`; the Williamson test uses `G` and `M`.
///
/// # Safety
/// `data` and `config` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcm_run(
    data: *const PcmDataset,
    config: *const PcmConfig,
    method: PcmMethod,
    out: *mut PcmResult,
) -> PcmStatus {
    guard(|| {
        let data = &data.as_ref().ok_or_else(|| null("data"))?.0;
        let c = &config.as_ref().ok_or_else(|| null("config"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let from_baseline = |r: pcm_core::baselines::BaselineResult| PcmResult {
            statistic: r.statistic,
            p_value: r.p_value,
            reject: r.reject,
            degenerate: false,
        };
        let from_test = |r: pcm_core::pcm::TestResult| PcmResult {
            statistic: r.statistic,
            p_value: r.p_value,
            reject: r.reject,
            degenerate: r.degenerate,
        };
        *out = match method {
            PcmMethod::Multi => from_test(pcm_multi(data, c).map_err(core)?),
            PcmMethod::Single => from_test(pcm_single_split(data, c).map_err(core)?),
            PcmMethod::Spline => {
                let sc = SplinePcmConfig {
                    alpha: c.alpha,
                    seed: c.seed,
                    ..SplinePcmConfig::default()
                };
                from_test(spline_pcm(data, &sc).map_err(core)?)
            }
            PcmMethod::Gcm => from_baseline(gcm_test(data, &c.reg_mf, &c.reg_m, c.alpha, c.seed).map_err(core)?),
            PcmMethod::Williamson => {
                from_baseline(williamson_test(data, &c.reg_g, &c.reg_m, c.alpha, c.seed).map_err(core)?)
            }
            PcmMethod::Wald => from_baseline(robust_wald_test(data, c.alpha).map_err(core)?),
        };
        Ok(())
    })
}

/// Asymptotic power in the univariate linear model. `method` is
/// [`PcmMethod::Single`] for the split test or [`PcmMethod::Gcm`].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pcm_power(
    beta: f64,
    sigma_beta: f64,
    sigma_xi_sq: f64,
    sigma_eps_xi: f64,
    n1: usize,
    n2: usize,
    alpha: f64,
    method: PcmMethod,
    out: *mut f64,
) -> PcmStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = LinearPowerParams {
            beta,
            sigma_beta,
            sigma_xi_sq,
            sigma_eps_xi,
            n1,
            n2,
            alpha,
        };
        *out = match method {
            PcmMethod::Single => pcm_core::power::pcm_asymptotic_power(&p).map_err(core)?,
            PcmMethod::Gcm => gcm_asymptotic_power(&p).map_err(core)?,
            other => {
                return Err((
                    PcmStatus::Unsupported,
                    format!("no power formula for {other:?}"),
                ))
            }
        };
        Ok(())
    })
}
