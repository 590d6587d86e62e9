//! C ABI over `eos_lab`.
//!
//! Objects are opaque handles created by `eos_*_new`/`eos_run` and released with the
//! matching `*_free`. Every call returns an [`EosStatus`]; on failure a message is kept
//! per thread and can be read with [`eos_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eos_lab::fixed_point::{two_periodic_points, MapParams};
use eos_lab::model::{generate_dataset, Dataset, HyperParams, InitScheme, Termination, WeightState};
use eos_lab::regime::{simulate, ClassifyConfig, Outcome, Regime};
use eos_lab::sharpness::sharpness;
use eos_lab::EosError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EosStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    /// The requested quantity was not produced by this run.
    NotAvailable = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EosRegime {
    GradientFlow = 0,
    EosSub = 1,
    EosSuper = 2,
    Periodic = 3,
    Chaotic = 4,
    Divergent = 5,
    Inconclusive = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EosTermination {
    MaxSteps = 0,
    Converged = 1,
    Diverged = 2,
    NonFinite = 3,
}

/// Opaque regression dataset.
pub struct EosDataset(Dataset);

/// Opaque finished run with its classification.
pub struct EosTrajectory(Outcome);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: EosStatus, msg: &str) -> EosStatus {
    set_error(msg);
    status
}

fn from_error(e: EosError) -> EosStatus {
    let status = match e {
        EosError::DimensionMismatch { .. } => EosStatus::DimensionMismatch,
        EosError::PowerIterationNoConvergence { .. } | EosError::NotConverged | EosError::DegenerateX => {
            EosStatus::Numerical
        }
        EosError::SharpnessNotRecorded | EosError::NotInterpolating { .. } => EosStatus::NotAvailable,
        _ => EosStatus::InvalidArgument,
    };
    fail(status, &e.to_string())
}

fn guard(f: impl FnOnce() -> EosStatus) -> EosStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == EosStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(EosStatus::Panic, "internal panic"),
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        return Some(&[]);
    }
    if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Copies `values` into `buf`; `written` always receives the full length.
unsafe fn copy_out(values: &[f64], buf: *mut f64, cap: usize, written: *mut usize) -> EosStatus {
    if written.is_null() {
        return fail(EosStatus::NullPointer, "written is null");
    }
    *written = values.len();
    if buf.is_null() && !values.is_empty() {
        return if cap == 0 { fail(EosStatus::BufferTooSmall, "buffer too small") } else { fail(EosStatus::NullPointer, "buf is null") };
    }
    if cap < values.len() {
        return fail(EosStatus::BufferTooSmall, "buffer too small");
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    EosStatus::Ok
}

/// Version string; static, never free it.
#[no_mangle]
pub extern "C" fn eos_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn eos_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Single sample `(x, y)` with reference vector `beta_star` (may be null for zeros).
///
/// # Safety
/// `x` must point to `d` doubles, `beta_star` to `d` doubles or be null, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eos_dataset_single(
    x: *const f64,
    d: usize,
    y: f64,
    beta_star: *const f64,
    out: *mut *mut EosDataset,
) -> EosStatus {
    guard(|| {
        if out.is_null() {
            return fail(EosStatus::NullPointer, "out is null");
        }
        let Some(xs) = slice(x, d) else { return fail(EosStatus::NullPointer, "x is null") };
        let bs = if beta_star.is_null() { vec![0.0; d] } else { slice(beta_star, d).unwrap_or_default().to_vec() };
        match Dataset::single(xs.to_vec(), y, bs) {
            Ok(data) => {
                put(out, EosDataset(data));
                EosStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// The two-coordinate input `x = (1, x2)` with target `mu`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eos_dataset_two_dim(x2: f64, mu: f64, out: *mut *mut EosDataset) -> EosStatus {
    guard(|| {
        if out.is_null() {
            return fail(EosStatus::NullPointer, "out is null");
        }
        if !(x2.is_finite() && mu.is_finite()) {
            return fail(EosStatus::InvalidArgument, "x2 and mu must be finite");
        }
        put(out, EosDataset(Dataset::two_dim(x2, mu)));
        EosStatus::Ok
    })
}

/// `n` Gaussian samples in dimension `d` labelled by a seeded `k`-sparse vector.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eos_dataset_generate(
    d: usize,
    n: usize,
    k: usize,
    seed: u64,
    out: *mut *mut EosDataset,
) -> EosStatus {
    guard(|| {
        if out.is_null() {
            return fail(EosStatus::NullPointer, "out is null");
        }
        match generate_dataset(d, n, k, seed) {
            Ok(data) => {
                put(out, EosDataset(data));
                EosStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `data` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn eos_dataset_free(data: *mut EosDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// # Safety
/// `data` must be a live handle; `d` and `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eos_dataset_shape(data: *const EosDataset, d: *mut usize, n: *mut usize) -> EosStatus {
    guard(|| {
        if data.is_null() || d.is_null() || n.is_null() {
            return fail(EosStatus::NullPointer, "null argument");
        }
        *d = (*data).0.d();
        *n = (*data).0.n();
        EosStatus::Ok
    })
}

/// Largest Hessian eigenvalue of the loss at `(w_plus, w_minus)`.
///
/// # Safety
/// `data` must be a live handle, `w_plus` and `w_minus` must point to `d` doubles, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eos_sharpness(
    data: *const EosDataset,
    w_plus: *const f64,
    w_minus: *const f64,
    d: usize,
    out: *mut f64,
) -> EosStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return fail(EosStatus::NullPointer, "null argument");
        }
        let (Some(p), Some(m)) = (slice(w_plus, d), slice(w_minus, d)) else {
            return fail(EosStatus::NullPointer, "weights are null");
        };
        let w = match WeightState::new(p.to_vec(), m.to_vec()) {
            Ok(w) => w,
            Err(e) => return from_error(e),
        };
        match sharpness(&w, &(*data).0) {
            Ok(s) => {
                *out = s;
                EosStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Gradient descent from `w_plus = w_minus = alpha` with step `eta`, classified on completion.
/// `max_steps = 0` keeps the library default.
///
/// # Safety
/// `data` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eos_run(
    data: *const EosDataset,
    eta: f64,
    alpha: f64,
    max_steps: usize,
    out: *mut *mut EosTrajectory,
) -> EosStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return fail(EosStatus::NullPointer, "null argument");
        }
        let mut hp = HyperParams::new(eta, alpha);
        if max_steps > 0 {
            hp = hp.with_max_steps(max_steps);
        }
        match simulate(&(*data).0, InitScheme::Symmetric, &hp, &ClassifyConfig::default()) {
            Ok(o) => {
                put(out, EosTrajectory(o));
                EosStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eos_trajectory_free(traj: *mut EosTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of recorded steps (including the initial point).
///
/// # Safety
/// `traj` must be a live handle and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn eos_trajectory_len(traj: *const EosTrajectory, len: *mut usize) -> EosStatus {
    guard(|| {
        if traj.is_null() || len.is_null() {
            return fail(EosStatus::NullPointer, "null argument");
        }
        *len = (*traj).0.log.len();
        EosStatus::Ok
    })
}

/// Residual series of one sample. Pass `cap = 0` to query the length through `written`.
///
/// # Safety
/// `traj` must be a live handle, `buf` must hold `cap` doubles, `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eos_trajectory_residuals(
    traj: *const EosTrajectory,
    sample: usize,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> EosStatus {
    guard(|| {
        if traj.is_null() {
            return fail(EosStatus::NullPointer, "traj is null");
        }
        let log = &(*traj).0.log;
        if sample >= log.n {
            return fail(EosStatus::InvalidArgument, "sample index out of range");
        }
        copy_out(&log.residual_series(sample), buf, cap, written)
    })
}

/// Sharpness per step; NaN where it was not recorded.
///
/// # Safety
/// As for [`eos_trajectory_residuals`].
#[no_mangle]
pub unsafe extern "C" fn eos_trajectory_sharpness(
    traj: *const EosTrajectory,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> EosStatus {
    guard(|| {
        if traj.is_null() {
            return fail(EosStatus::NullPointer, "traj is null");
        }
        let v: Vec<f64> = (*traj).0.log.sharpness.iter().map(|s| s.unwrap_or(f64::NAN)).collect();
        copy_out(&v, buf, cap, written)
    })
}

/// Regime label; `period` receives the period for `Periodic` and 0 otherwise.
///
/// # Safety
/// `traj` must be a live handle; `regime` and `period` writable.
#[no_mangle]
pub unsafe extern "C" fn eos_trajectory_regime(
    traj: *const EosTrajectory,
    regime: *mut EosRegime,
    period: *mut usize,
) -> EosStatus {
    guard(|| {
        if traj.is_null() || regime.is_null() || period.is_null() {
            return fail(EosStatus::NullPointer, "null argument");
        }
        let (r, p) = match (*traj).0.report.regime() {
            Regime::GradientFlow => (EosRegime::GradientFlow, 0),
            Regime::EosSub => (EosRegime::EosSub, 0),
            Regime::EosSuper => (EosRegime::EosSuper, 0),
            Regime::Periodic(k) => (EosRegime::Periodic, k),
            Regime::Chaotic => (EosRegime::Chaotic, 0),
            Regime::Divergent => (EosRegime::Divergent, 0),
            Regime::Inconclusive => (EosRegime::Inconclusive, 0),
        };
        *regime = r;
        *period = p;
        EosStatus::Ok
    })
}

/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eos_trajectory_termination(traj: *const EosTrajectory, out: *mut EosTermination) -> EosStatus {
    guard(|| {
        if traj.is_null() || out.is_null() {
            return fail(EosStatus::NullPointer, "null argument");
        }
        *out = match (*traj).0.log.termination {
            Termination::MaxSteps => EosTermination::MaxSteps,
            Termination::Converged => EosTermination::Converged,
            Termination::Diverged => EosTermination::Diverged,
            Termination::NonFinite => EosTermination::NonFinite,
        };
        EosStatus::Ok
    })
}

/// Distance of the limit to the reference vector; `NotAvailable` unless the run converged.
///
/// # Safety
/// `traj` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eos_trajectory_error_norm(traj: *const EosTrajectory, out: *mut f64) -> EosStatus {
    guard(|| {
        if traj.is_null() || out.is_null() {
            return fail(EosStatus::NullPointer, "null argument");
        }
        match (*traj).0.report.error_norm {
            Some(e) => {
                *out = e;
                EosStatus::Ok
            }
            None => fail(EosStatus::NotAvailable, "run did not converge to an interpolator"),
        }
    })
}

/// Closed-form 2-cycle `[(r1, s1), (r2, s2)]` of the reduced map.
/// `real` is 1 when the cycle is real; the points are NaN otherwise.
///
/// # Safety
/// `points` must hold 4 doubles and `real` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eos_two_cycle(mu: f64, eta: f64, x: f64, points: *mut f64, real: *mut i32) -> EosStatus {
    guard(|| {
        if points.is_null() || real.is_null() {
            return fail(EosStatus::NullPointer, "null argument");
        }
        match two_periodic_points(&MapParams::new(mu, eta, x)) {
            Ok(pair) => {
                let out = std::slice::from_raw_parts_mut(points, 4);
                out.fill(f64::NAN);
                for (i, &(r, s)) in pair.points.iter().take(2).enumerate() {
                    out[2 * i] = r;
                    out[2 * i + 1] = s;
                }
                *real = pair.real_flag as i32;
                EosStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
