//! C ABI for `caplab`.
//!
//! Every fallible function returns a [`CaplabStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`caplab_last_error_message`] on the same thread. Handles are opaque and
//! must be released with their `_free` function; strings returned by the
//! library are released with [`caplab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use caplab::capacity::{
    dirichlet_potential, drifted_capacity, drifted_capacity_limit, exact_model_pcapacity, pcap_lower_bound,
    CapacityEstimate, CapacityMethod,
};
use caplab::classifier::{classify, Mode, Verdict};
use caplab::config::{parse_config, Task};
use caplab::{Annulus, Bounds, Constellation, Error, ModelSpace, RadialExpr};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaplabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Syntax = 3,
    UnknownIdentifier = 4,
    Domain = 5,
    QuadratureFailure = 6,
    NonConvergence = 7,
    BalanceViolation = 8,
    HypothesisViolation = 9,
    Precondition = 10,
    Config = 11,
    Verification = 12,
    Io = 13,
    Panic = 14,
}

impl From<&Error> for CaplabStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Syntax { .. } => CaplabStatus::Syntax,
            Error::UnknownIdentifier { .. } => CaplabStatus::UnknownIdentifier,
            Error::Domain { .. } => CaplabStatus::Domain,
            Error::QuadratureFailure { .. } => CaplabStatus::QuadratureFailure,
            Error::NonConvergence { .. } => CaplabStatus::NonConvergence,
            Error::BalanceViolation { .. } => CaplabStatus::BalanceViolation,
            Error::HypothesisViolation { .. } => CaplabStatus::HypothesisViolation,
            Error::Precondition(_) => CaplabStatus::Precondition,
            Error::Config { .. } => CaplabStatus::Config,
            Error::Verification(_) => CaplabStatus::Verification,
            Error::Io(_) => CaplabStatus::Io,
        }
    }
}

/// How a capacity value was obtained.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaplabMethod {
    DriftedQuadrature = 0,
    DriftedTailLimit = 1,
    DivergentTail = 2,
    UnknownTail = 3,
    ExactModel = 4,
    EnergyOracle = 5,
    LowerBound = 6,
}

impl From<CapacityMethod> for CaplabMethod {
    fn from(m: CapacityMethod) -> Self {
        match m {
            CapacityMethod::DriftedQuadrature => CaplabMethod::DriftedQuadrature,
            CapacityMethod::DriftedTailLimit => CaplabMethod::DriftedTailLimit,
            CapacityMethod::DivergentTail => CaplabMethod::DivergentTail,
            CapacityMethod::UnknownTail => CaplabMethod::UnknownTail,
            CapacityMethod::ExactModel => CaplabMethod::ExactModel,
            CapacityMethod::EnergyOracle => CaplabMethod::EnergyOracle,
            CapacityMethod::LowerBound => CaplabMethod::LowerBound,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaplabEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub method: CaplabMethod,
}

impl From<CapacityEstimate> for CaplabEstimate {
    fn from(e: CapacityEstimate) -> Self {
        Self {
            value: e.value,
            error_estimate: e.error_estimate,
            method: e.method.into(),
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaplabMode {
    Intrinsic = 0,
    Extrinsic = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaplabVerdict {
    PHyperbolic = 0,
    PParabolic = 1,
    Inconclusive = 2,
}

/// Parsed radial expression.
pub struct CaplabExpr(RadialExpr);

/// Comparison constellation.
pub struct CaplabConstellation(Constellation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(CaplabStatus);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = CaplabStatus::from(&e);
        set_last_error(e.to_string());
        Failure(status)
    }
}

fn fail(status: CaplabStatus, message: &str) -> Failure {
    set_last_error(message.to_string());
    Failure(status)
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CaplabStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CaplabStatus::Ok,
        Ok(Err(Failure(status))) => status,
        Err(_) => {
            set_last_error("internal panic".into());
            CaplabStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(fail(CaplabStatus::NullPointer, &format!("{name} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(CaplabStatus::InvalidUtf8, &format!("{name} is not valid UTF-8")))
}

unsafe fn reference<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(CaplabStatus::NullPointer, &format!("{name} is null")))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(CaplabStatus::NullPointer, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn caplab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn caplab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn caplab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a radial expression in the variable `r`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_expr_parse(text: *const c_char, out: *mut *mut CaplabExpr) -> CaplabStatus {
    guard(|| {
        let expr = caplab::parse(c_str(text, "text")?)?;
        write(out, Box::into_raw(Box::new(CaplabExpr(expr))))
    })
}

/// # Safety
/// `expr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_expr_evaluate(expr: *const CaplabExpr, r: f64, out: *mut f64) -> CaplabStatus {
    guard(|| {
        let value = reference(expr, "expr")?.0.evaluate(r)?;
        write(out, value)
    })
}

/// Symbolic derivative with respect to `r`, as a new handle.
///
/// # Safety
/// `expr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_expr_derivative(expr: *const CaplabExpr, out: *mut *mut CaplabExpr) -> CaplabStatus {
    guard(|| {
        let derivative = reference(expr, "expr")?.0.differentiate();
        write(out, Box::into_raw(Box::new(CaplabExpr(derivative))))
    })
}

/// Canonical text of the expression; free with [`caplab_string_free`].
///
/// # Safety
/// `expr` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_expr_to_string(expr: *const CaplabExpr, out: *mut *mut c_char) -> CaplabStatus {
    guard(|| {
        let s = reference(expr, "expr")?.0.to_string();
        let s = CString::new(s).map_err(|_| fail(CaplabStatus::InvalidUtf8, "expression text contains NUL"))?;
        write(out, s.into_raw())
    })
}

/// # Safety
/// `expr` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn caplab_expr_free(expr: *mut CaplabExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Constellation over the space form of curvature `b` with constant bounds
/// `g = 1`, `h = h0`, `lambda = lambda0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_constellation_space_form(
    m: u32,
    n: u32,
    p: f64,
    rho: f64,
    b: f64,
    h0: f64,
    lambda0: f64,
    out: *mut *mut CaplabConstellation,
) -> CaplabStatus {
    guard(|| {
        let model = ModelSpace::space_form(m, b)?;
        let c = Constellation::new(n, p, model, Bounds::constant(h0, lambda0), rho)?;
        write(out, Box::into_raw(Box::new(CaplabConstellation(c))))
    })
}

/// Constellation from a JSON job description (the fields `m`, `n`, `p`,
/// `rho`, `warping`, `bounds` of the command-line config).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_constellation_from_json(
    json: *const c_char,
    out: *mut *mut CaplabConstellation,
) -> CaplabStatus {
    guard(|| {
        let job = parse_config(c_str(json, "json")?, Some(Task::Analyze))?;
        let problem = job
            .problem
            .ok_or_else(|| fail(CaplabStatus::Config, "config does not describe a constellation"))?;
        write(out, Box::into_raw(Box::new(CaplabConstellation(problem.constellation))))
    })
}

/// # Safety
/// `c` must be null or a live handle, which is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn caplab_constellation_free(c: *mut CaplabConstellation) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Balance function `M(r)`.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_balance(c: *const CaplabConstellation, r: f64, out: *mut f64) -> CaplabStatus {
    guard(|| {
        let value = reference(c, "constellation")?.0.balance(r)?;
        write(out, value)
    })
}

/// Drifted potential on the annulus `(rho, outer)` at radius `r`.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_dirichlet_potential(
    c: *const CaplabConstellation,
    rho: f64,
    outer: f64,
    r: f64,
    out: *mut f64,
) -> CaplabStatus {
    guard(|| {
        let c = &reference(c, "constellation")?.0;
        let value = dirichlet_potential(c, &Annulus::new(rho, outer)?, r)?;
        write(out, value)
    })
}

/// Drifted capacity of `(rho, outer)`; an infinite `outer` gives the limit.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_drifted_capacity(
    c: *const CaplabConstellation,
    rho: f64,
    outer: f64,
    out: *mut CaplabEstimate,
) -> CaplabStatus {
    guard(|| {
        let c = &reference(c, "constellation")?.0;
        let estimate = if outer.is_infinite() {
            drifted_capacity_limit(c, rho)?
        } else {
            drifted_capacity(c, &Annulus::new(rho, outer)?)?
        };
        write(out, estimate.into())
    })
}

/// Exact p-capacity of the model annulus `(rho, outer)` for `1 < p < inf`.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_model_pcapacity(
    c: *const CaplabConstellation,
    p: f64,
    rho: f64,
    outer: f64,
    out: *mut CaplabEstimate,
) -> CaplabStatus {
    guard(|| {
        let c = &reference(c, "constellation")?.0;
        let estimate = exact_model_pcapacity(c.model(), p, &Annulus::new(rho, outer)?)?;
        write(out, estimate.into())
    })
}

/// Lower bound for the p-capacity of the extrinsic annulus `(rho, outer)`
/// given the boundary flux.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_pcap_lower_bound(
    c: *const CaplabConstellation,
    rho: f64,
    outer: f64,
    boundary_flux: f64,
    out: *mut CaplabEstimate,
) -> CaplabStatus {
    guard(|| {
        let c = &reference(c, "constellation")?.0;
        let estimate = pcap_lower_bound(c, &Annulus::new(rho, outer)?, boundary_flux)?;
        write(out, estimate.into())
    })
}

/// p-hyperbolicity verdict.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caplab_classify(
    c: *const CaplabConstellation,
    mode: CaplabMode,
    out: *mut CaplabVerdict,
) -> CaplabStatus {
    guard(|| {
        let c = &reference(c, "constellation")?.0;
        let mode = match mode {
            CaplabMode::Intrinsic => Mode::Intrinsic,
            CaplabMode::Extrinsic => Mode::Extrinsic,
        };
        let verdict = match classify(c, mode)? {
            Verdict::PHyperbolic { .. } => CaplabVerdict::PHyperbolic,
            Verdict::PParabolic { .. } => CaplabVerdict::PParabolic,
            Verdict::Inconclusive { .. } => CaplabVerdict::Inconclusive,
        };
        write(out, verdict)
    })
}
