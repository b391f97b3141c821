//! C ABI over `poisson-lab`.
//!
//! Schemes are opaque handles created by [`pl_scheme_new`] and released with
//! [`pl_scheme_free`]. Every fallible call returns a [`PlStatus`]; on failure
//! [`pl_last_error`] describes what went wrong on the calling thread. Output
//! parameters are written only on success. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use poisson_lab::analytics::{converse_energy_bound, estimate_bernoulli, Estimate};
use poisson_lab::montecarlo::simulate_message;
use poisson_lab::process::poisson_pmf;
use poisson_lab::{run_trial, Error, RandomSource, Scheme, SchemeKind, SchemeSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    InvalidArgument = 1,
    PolicyViolation = 2,
    RunawayIntensity = 3,
    NullPointer = 4,
    /// No closed form exists for the requested quantity.
    NotAvailable = 5,
    Internal = 6,
}

/// Values accepted in `PlSchemeSpec::kind`.
#[repr(u32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlSchemeKind {
    BinaryZeroDark = 0,
    BinaryDarkWindow = 1,
    MaryZeroDark = 2,
    MaryDarkWindow = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PlSchemeSpec {
    /// One of `PlSchemeKind`.
    pub kind: u32,
    pub messages: usize,
    pub power: f64,
    /// Signaling horizon `T`, or the window `delta` for the dark-current kinds.
    pub horizon: f64,
    pub dark_current: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PlEstimate {
    pub n: u64,
    pub mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PlTrial {
    pub energy: f64,
    pub n_events: u64,
    /// NaN when there was no count.
    pub first_event: f64,
    pub decoded: usize,
    pub correct: bool,
}

/// Opaque scheme handle.
pub struct PlScheme {
    scheme: Scheme,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> PlStatus {
    match err {
        Error::InvalidArgument(_) | Error::Config { .. } => PlStatus::InvalidArgument,
        Error::PolicyViolation { .. } => PlStatus::PolicyViolation,
        Error::RunawayIntensity { .. } => PlStatus::RunawayIntensity,
        Error::NoClosedForm(_) => PlStatus::NotAvailable,
        _ => PlStatus::Internal,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), PlStatus>>(f: F) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PlStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            PlStatus::Internal
        }
    }
}

fn fail(err: Error) -> PlStatus {
    set_error(&err.to_string());
    status_of(&err)
}

fn null(what: &str) -> PlStatus {
    set_error(&format!("{what} is null"));
    PlStatus::NullPointer
}

fn kind_of(raw: u32) -> Result<SchemeKind, PlStatus> {
    Ok(match raw {
        0 => SchemeKind::BinaryZeroDark,
        1 => SchemeKind::BinaryDarkWindow,
        2 => SchemeKind::MaryZeroDark,
        3 => SchemeKind::MaryDarkWindow,
        other => {
            set_error(&format!("unknown scheme kind {other}"));
            return Err(PlStatus::InvalidArgument);
        }
    })
}

impl From<Estimate> for PlEstimate {
    fn from(e: Estimate) -> Self {
        PlEstimate {
            n: e.n,
            mean: e.mean,
            std_error: e.stderr,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
        }
    }
}

/// Validate `spec` and create a scheme handle in `*out`.
///
/// # Safety
/// `spec` must point to a valid `PlSchemeSpec` and `out` to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn pl_scheme_new(spec: *const PlSchemeSpec, out: *mut *mut PlScheme) -> PlStatus {
    guard(|| {
        let spec = unsafe { spec.as_ref() }.ok_or_else(|| null("spec"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = kind_of(spec.kind)?;
        let scheme = Scheme::from_spec(SchemeSpec {
            kind,
            messages: spec.messages,
            power: spec.power,
            horizon: spec.horizon,
            dark_current: spec.dark_current,
        })
        .map_err(fail)?;
        unsafe { *out = Box::into_raw(Box::new(PlScheme { scheme })) };
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `scheme` must be null or a handle from [`pl_scheme_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_scheme_free(scheme: *mut PlScheme) {
    if !scheme.is_null() {
        drop(unsafe { Box::from_raw(scheme) });
    }
}

/// Simulate trial `trial` of `message` under `seed`. The same arguments always
/// give the same result.
///
/// # Safety
/// `scheme` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pl_scheme_run_trial(
    scheme: *const PlScheme,
    message: usize,
    seed: u64,
    trial: u64,
    out: *mut PlTrial,
) -> PlStatus {
    guard(|| {
        let s = &unsafe { scheme.as_ref() }.ok_or_else(|| null("scheme"))?.scheme;
        if out.is_null() {
            return Err(null("out"));
        }
        s.check_message(message).map_err(fail)?;
        let src = RandomSource::for_trial(seed, message, trial);
        let r = run_trial(s, s, message, &s.params(), s.spec().horizon, src).map_err(fail)?;
        let trial = PlTrial {
            energy: r.energy,
            n_events: r.timeline.len() as u64,
            first_event: r.timeline.first_event().unwrap_or(f64::NAN),
            decoded: r.decoded,
            correct: r.correct,
        };
        unsafe { *out = trial };
        Ok(())
    })
}

/// Monte Carlo error probability and energy for `message` over `n_trials`
/// trials (95% intervals). Either output may be null.
///
/// # Safety
/// `scheme` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_scheme_simulate(
    scheme: *const PlScheme,
    message: usize,
    n_trials: u64,
    seed: u64,
    p_err: *mut PlEstimate,
    energy: *mut PlEstimate,
) -> PlStatus {
    guard(|| {
        let s = &unsafe { scheme.as_ref() }.ok_or_else(|| null("scheme"))?.scheme;
        let st = simulate_message(s, message, n_trials, seed).map_err(fail)?;
        let level = poisson_lab::analytics::DEFAULT_LEVEL;
        let p = st.p_err(level).map_err(fail)?;
        let e = st.energy(level).map_err(fail)?;
        unsafe {
            if let Some(o) = p_err.as_mut() {
                *o = p.into();
            }
            if let Some(o) = energy.as_mut() {
                *o = e.into();
            }
        }
        Ok(())
    })
}

/// Exact message-averaged error probability and energy. Returns
/// `NotAvailable` for the M-ary kind with dark current.
///
/// # Safety
/// `scheme` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_scheme_closed_form(
    scheme: *const PlScheme,
    p_err_avg: *mut f64,
    energy_avg: *mut f64,
) -> PlStatus {
    guard(|| {
        let s = &unsafe { scheme.as_ref() }.ok_or_else(|| null("scheme"))?.scheme;
        let cf = s
            .closed_form()
            .ok_or_else(|| fail(Error::NoClosedForm(s.spec().kind.to_string())))?;
        unsafe {
            if let Some(o) = p_err_avg.as_mut() {
                *o = cf.p_err_avg;
            }
            if let Some(o) = energy_avg.as_mut() {
                *o = cf.energy_avg;
            }
        }
        Ok(())
    })
}

/// Poisson probability of `count` events at the given mean.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_poisson_pmf(mean: f64, count: u64, out: *mut f64) -> PlStatus {
    guard(|| {
        let o = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *o = poisson_pmf(mean, count).map_err(fail)?;
        Ok(())
    })
}

/// Least average energy per message, `(M - 1) / M`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_converse_energy_bound(messages: usize, out: *mut f64) -> PlStatus {
    guard(|| {
        let o = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *o = converse_energy_bound(messages).map_err(fail)?;
        Ok(())
    })
}

/// Wilson 95% interval for `successes` out of `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pl_estimate_bernoulli(successes: u64, n: u64, out: *mut PlEstimate) -> PlStatus {
    guard(|| {
        let o = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *o = estimate_bernoulli(successes, n).map_err(fail)?.into();
        Ok(())
    })
}

/// Message for the most recent failure on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn pl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"",
    };
    VERSION.as_ptr()
}
