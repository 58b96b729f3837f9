//! C ABI for irka-lab.
//!
//! Objects are opaque handles created by `*_new`/`irka_run` and released with the matching
//! `*_free`. Every fallible call returns an [`IrkaStatus`]; on failure
//! [`irka_last_error_message`] describes the error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use irka_lab::error::Error;
use irka_lab::fixpoint::Verdict;
use irka_lab::h2;
use irka_lab::irka::{InitStrategy, IrkaConfig};
use irka_lab::lti::{system_from_json, system_to_json, StateSpaceSystem};
use irka_lab::report::{self, CertifyMode, RunConfig, RunReport};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrkaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    SingularShift = 3,
    Unstable = 4,
    NotSss = 5,
    Numerical = 6,
    NotAFixedPoint = 7,
    Parse = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrkaInit {
    Logspace = 0,
    Random = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrkaVerdict {
    AttractiveLocalMin = 0,
    RepellentOrSaddle = 1,
    Indeterminate = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IrkaRunOptions {
    pub r: usize,
    pub tol: f64,
    pub max_sweeps: usize,
    pub init: IrkaInit,
    pub seed: u64,
    /// Certify converged SSS runs.
    pub certify: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IrkaCertificateSummary {
    pub verdict: IrkaVerdict,
    pub spectral_radius: f64,
    pub fd_jacobian_maxdiff: f64,
    pub e_positive: bool,
    pub s_tilde_positive: bool,
    pub neg_phi_positive: bool,
}

/// Opaque state-space system.
pub struct IrkaSystem(StateSpaceSystem);

/// Opaque result of one IRKA reduction.
pub struct IrkaRun(RunReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(err: &Error) -> IrkaStatus {
    match err {
        Error::InvalidInput { .. } | Error::RepeatedPoles { .. } => IrkaStatus::InvalidInput,
        Error::SingularShift { .. } => IrkaStatus::SingularShift,
        Error::UnstableSystem { .. } | Error::UnstableMatrix { .. } => IrkaStatus::Unstable,
        Error::NotSss(_) | Error::NonZipReduced(_) => IrkaStatus::NotSss,
        Error::NotAFixedPoint { .. } => IrkaStatus::NotAFixedPoint,
        Error::Json { .. } | Error::Io { .. } => IrkaStatus::Parse,
        _ => IrkaStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status and the thread's error message.
fn guard(f: impl FnOnce() -> Result<(), (IrkaStatus, String)>) -> IrkaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IrkaStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IrkaStatus::Panic
        }
    }
}

fn lift(err: Error) -> (IrkaStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (IrkaStatus, String) {
    (IrkaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (IrkaStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread; empty if none. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn irka_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a system from a row-major `n x n` matrix and length-`n` vectors.
///
/// # Safety
/// `a` must point to `n * n` doubles, `b` and `c` to `n` doubles, `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn irka_system_new(
    n: usize,
    a: *const f64,
    b: *const f64,
    c: *const f64,
    out: *mut *mut IrkaSystem,
) -> IrkaStatus {
    guard(|| {
        if a.is_null() || b.is_null() || c.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        if n == 0 {
            return Err((IrkaStatus::InvalidInput, "n must be positive".into()));
        }
        let a = std::slice::from_raw_parts(a, n * n);
        let b = std::slice::from_raw_parts(b, n);
        let c = std::slice::from_raw_parts(c, n);
        let sys = StateSpaceSystem::new(
            DMatrix::from_row_slice(n, n, a),
            DVector::from_column_slice(b),
            DVector::from_column_slice(c),
        )
        .map_err(lift)?;
        *out = Box::into_raw(Box::new(IrkaSystem(sys)));
        Ok(())
    })
}

/// Parses a system file (state-space or pole-residue layout).
///
/// # Safety
/// `json` must be a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn irka_system_from_json(
    json: *const c_char,
    out: *mut *mut IrkaSystem,
) -> IrkaStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| (IrkaStatus::Parse, "input is not UTF-8".to_string()))?;
        let sys = system_from_json(text).map_err(lift)?;
        *out = Box::into_raw(Box::new(IrkaSystem(sys)));
        Ok(())
    })
}

/// # Safety
/// `sys` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn irka_system_free(sys: *mut IrkaSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Order `n`, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn irka_system_order(sys: *const IrkaSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.0.order())
}

/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn irka_system_is_sss(sys: *const IrkaSystem) -> bool {
    sys.as_ref().is_some_and(|s| s.0.is_sss())
}

/// `H^(order)(s)` for `order` in 0..=2.
///
/// # Safety
/// `sys` live; `out_re`, `out_im` writable.
#[no_mangle]
pub unsafe extern "C" fn irka_eval_transfer(
    sys: *const IrkaSystem,
    s_re: f64,
    s_im: f64,
    order: u32,
    out_re: *mut f64,
    out_im: *mut f64,
) -> IrkaStatus {
    guard(|| {
        let sys = deref(sys, "system")?;
        if out_re.is_null() || out_im.is_null() {
            return Err(null("output"));
        }
        let v = irka_lab::eval_transfer(&sys.0, Complex64::new(s_re, s_im), order as usize)
            .map_err(lift)?;
        *out_re = v.re;
        *out_im = v.im;
        Ok(())
    })
}

/// # Safety
/// `sys` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn irka_h2_norm(sys: *const IrkaSystem, out: *mut f64) -> IrkaStatus {
    guard(|| {
        let sys = deref(sys, "system")?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = h2::h2_norm(&sys.0).map_err(lift)?;
        Ok(())
    })
}

/// Defaults: `tol = 1e-10`, `max_sweeps = 200`, logspace start, seed 0, certification on.
#[no_mangle]
pub extern "C" fn irka_run_options_default(r: usize) -> IrkaRunOptions {
    IrkaRunOptions {
        r,
        tol: 1e-10,
        max_sweeps: 200,
        init: IrkaInit::Logspace,
        seed: 0,
        certify: true,
    }
}

/// Runs IRKA. Exhausting `max_sweeps` still returns `IRKA_STATUS_OK`; query
/// [`irka_run_converged`].
///
/// # Safety
/// `sys` live, `opts` readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn irka_run(
    sys: *const IrkaSystem,
    opts: *const IrkaRunOptions,
    out: *mut *mut IrkaRun,
) -> IrkaStatus {
    guard(|| {
        let sys = deref(sys, "system")?;
        let opts = deref(opts, "options")?;
        if out.is_null() {
            return Err(null("output"));
        }
        let mut irka = IrkaConfig::new(opts.r);
        irka.tol = opts.tol;
        irka.max_sweeps = opts.max_sweeps;
        irka.init = match opts.init {
            IrkaInit::Logspace => InitStrategy::MirrorSpectrumLogspace,
            IrkaInit::Random => InitStrategy::RandomLoguniform,
        };
        let cfg = RunConfig {
            irka,
            seed: opts.seed,
            certify: if opts.certify { CertifyMode::Auto } else { CertifyMode::Off },
        };
        let input = system_to_json(&sys.0);
        let rep = report::run_reduce(&sys.0, input.as_bytes(), &cfg, false).map_err(lift)?;
        *out = Box::into_raw(Box::new(IrkaRun(rep)));
        Ok(())
    })
}

/// # Safety
/// `run` must come from [`irka_run`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn irka_run_free(run: *mut IrkaRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn irka_run_converged(run: *const IrkaRun) -> bool {
    run.as_ref().is_some_and(|r| r.0.trace.converged)
}

/// # Safety
/// `run` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn irka_run_sweeps(run: *const IrkaRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.trace.sweeps.len())
}

/// Reduced order `r`, or 0 for a null handle.
///
/// # Safety
/// `run` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn irka_run_order(run: *const IrkaRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.trace.final_model.order())
}

/// Copies the final shifts (canonical order) into `re[0..len]`, `im[0..len]`; `len` must be `r`.
///
/// # Safety
/// `run` live; `re` and `im` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn irka_run_shifts(
    run: *const IrkaRun,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> IrkaStatus {
    guard(|| {
        let run = deref(run, "run")?;
        if re.is_null() || im.is_null() {
            return Err(null("output"));
        }
        let shifts = run.0.trace.final_shifts.as_slice();
        if len != shifts.len() {
            return Err((
                IrkaStatus::InvalidInput,
                format!("buffer length {len} != r = {}", shifts.len()),
            ));
        }
        for (k, z) in shifts.iter().enumerate() {
            *re.add(k) = z.re;
            *im.add(k) = z.im;
        }
        Ok(())
    })
}

/// New handle holding a copy of the final reduced model.
///
/// # Safety
/// `run` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn irka_run_reduced_system(
    run: *const IrkaRun,
    out: *mut *mut IrkaSystem,
) -> IrkaStatus {
    guard(|| {
        let run = deref(run, "run")?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = Box::into_raw(Box::new(IrkaSystem(run.0.trace.final_model.clone())));
        Ok(())
    })
}

/// Relative H2 error `||H - H_r|| / ||H||`.
///
/// # Safety
/// `run` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn irka_run_relative_h2_error(run: *const IrkaRun, out: *mut f64) -> IrkaStatus {
    guard(|| {
        let run = deref(run, "run")?;
        if out.is_null() {
            return Err(null("output"));
        }
        *out = run.0.h2.relative_h2_error;
        Ok(())
    })
}

/// Fills `out` when the run carries a certificate; `IRKA_STATUS_NOT_SSS` otherwise.
///
/// # Safety
/// `run` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn irka_run_certificate(
    run: *const IrkaRun,
    out: *mut IrkaCertificateSummary,
) -> IrkaStatus {
    guard(|| {
        let run = deref(run, "run")?;
        if out.is_null() {
            return Err(null("output"));
        }
        let cert = run.0.certificate.as_ref().ok_or_else(|| {
            (
                IrkaStatus::NotSss,
                "run has no certificate (not SSS, not converged, or certification off)".to_string(),
            )
        })?;
        *out = IrkaCertificateSummary {
            verdict: match cert.verdict {
                Verdict::AttractiveLocalMin => IrkaVerdict::AttractiveLocalMin,
                Verdict::RepellentOrSaddle => IrkaVerdict::RepellentOrSaddle,
                Verdict::Indeterminate => IrkaVerdict::Indeterminate,
            },
            spectral_radius: cert.spectral_radius,
            fd_jacobian_maxdiff: cert.fd_jacobian_maxdiff,
            e_positive: cert.e_positive,
            s_tilde_positive: cert.s_tilde_positive,
            neg_phi_positive: cert.neg_phi_positive,
        };
        Ok(())
    })
}

/// Full JSON run report; release with [`irka_string_free`]. Null on failure.
///
/// # Safety
/// `run` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn irka_run_report_json(run: *const IrkaRun) -> *mut c_char {
    let Some(run) = run.as_ref() else {
        set_error("run is null");
        return ptr::null_mut();
    };
    match CString::new(run.0.to_json()) {
        Ok(s) => s.into_raw(),
        Err(_) => {
            set_error("report contains NUL");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn irka_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
