//! C ABI over `btspec`.
//!
//! Operators live behind an opaque `BtOperator` handle built from the JSON
//! form of an operator spec. Every fallible call returns a `BtStatus`; on
//! failure the message is kept per thread and can be copied out with
//! `bt_last_error_message`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use btspec::asymptotics::{mu_k0, mu_k1, mu_k1_quadrature, Mu1Method, QuadratureOptions};
use btspec::spectra::{locate_eigenvalue, resolvent_norm, survey_spectrum, Window};
use btspec::variational::{compute_rho0, RHO0_GRIDS};
use btspec::{Error, OperatorSpec};
use num_complex::Complex64;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidSpec = 4,
    Singular = 5,
    NoConvergence = 6,
    DenseCapExceeded = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for BtComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<BtComplex> for Complex64 {
    fn from(z: BtComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// Opaque operator handle.
pub struct BtOperator {
    spec: OperatorSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BtStatus {
    match e {
        Error::InvalidArgument(_) => BtStatus::InvalidArgument,
        Error::InvalidSpec(_) | Error::Json(_) => BtStatus::InvalidSpec,
        Error::Singular { .. } | Error::ShiftIsEigenvalue { .. } | Error::SingularPotential { .. } => {
            BtStatus::Singular
        }
        Error::NoConvergence { .. } | Error::ResidualTooLarge { .. } | Error::LocationFailed { .. } => {
            BtStatus::NoConvergence
        }
        Error::DenseCapExceeded { .. } => BtStatus::DenseCapExceeded,
        _ => BtStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (BtStatus, String)>) -> BtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BtStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BtStatus::Internal
        }
    }
}

fn lift<T>(r: btspec::Result<T>) -> Result<T, (BtStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (BtStatus, String) {
    (BtStatus::NullPointer, "null pointer argument".into())
}

fn operator<'a>(op: *const BtOperator) -> Result<&'a BtOperator, (BtStatus, String)> {
    // SAFETY: the caller passes a handle from `bt_operator_from_json` that
    // has not been freed, or null.
    unsafe { op.as_ref() }.ok_or_else(null)
}

fn out<'a, T>(p: *mut T) -> Result<&'a mut T, (BtStatus, String)> {
    // SAFETY: the caller passes a valid, writable pointer or null.
    unsafe { p.as_mut() }.ok_or_else(null)
}

/// Builds an operator from its JSON spec and stores the handle in `*out_op`.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out_op` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bt_operator_from_json(json: *const c_char, out_op: *mut *mut BtOperator) -> BtStatus {
    guard(|| {
        let slot = out(out_op)?;
        *slot = ptr::null_mut();
        if json.is_null() {
            return Err(null());
        }
        // SAFETY: checked non-null; NUL termination is the caller's contract.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| (BtStatus::InvalidUtf8, e.to_string()))?;
        let spec: OperatorSpec = lift(serde_json::from_str(text).map_err(Error::from))?;
        lift(spec.validate())?;
        *slot = Box::into_raw(Box::new(BtOperator { spec }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bt_operator_free(op: *mut BtOperator) {
    if !op.is_null() {
        // SAFETY: ownership returns from the caller, per the contract above.
        drop(unsafe { Box::from_raw(op) });
    }
}

/// Rows of the discretized operator, or 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bt_operator_dimension(op: *const BtOperator) -> usize {
    // SAFETY: per the contract above.
    unsafe { op.as_ref() }.map_or(0, |o| o.spec.dimension())
}

/// Eigenvalue nearest `target` by shift-invert iteration.
///
/// # Safety
/// `op` must be a live handle; `eigenvalue` and `residual` writable.
#[no_mangle]
pub unsafe extern "C" fn bt_locate_eigenvalue(
    op: *const BtOperator,
    target: BtComplex,
    tol: f64,
    eigenvalue: *mut BtComplex,
    residual: *mut f64,
) -> BtStatus {
    guard(|| {
        let o = operator(op)?;
        let (ev, res) = (out(eigenvalue)?, out(residual)?);
        let (z, r) = lift(locate_eigenvalue(&o.spec, target.into(), tol))?;
        *ev = z.into();
        *res = r;
        Ok(())
    })
}

/// `||(B - lambda)^{-1}||_2`; infinity when `lambda` is numerically an
/// eigenvalue.
///
/// # Safety
/// `op` must be a live handle; `norm` writable.
#[no_mangle]
pub unsafe extern "C" fn bt_resolvent_norm(
    op: *const BtOperator,
    lambda: BtComplex,
    tol: f64,
    norm: *mut f64,
) -> BtStatus {
    guard(|| {
        let o = operator(op)?;
        let slot = out(norm)?;
        *slot = lift(resolvent_norm(&o.spec, lambda.into(), tol))?;
        Ok(())
    })
}

/// Eigenvalues inside the closed box, sorted. `*count` receives the number
/// found; `BufferTooSmall` is returned when it exceeds `capacity`, with
/// the first `capacity` values written.
///
/// # Safety
/// `op` must be a live handle; `buffer` must hold `capacity` entries (or be
/// null when `capacity` is 0); `count` writable.
#[no_mangle]
pub unsafe extern "C" fn bt_survey_spectrum(
    op: *const BtOperator,
    re_min: f64,
    re_max: f64,
    im_min: f64,
    im_max: f64,
    buffer: *mut BtComplex,
    capacity: usize,
    count: *mut usize,
) -> BtStatus {
    guard(|| {
        let o = operator(op)?;
        let n_out = out(count)?;
        if buffer.is_null() && capacity > 0 {
            return Err(null());
        }
        let window = lift(Window::new(re_min, re_max, im_min, im_max))?;
        let r = lift(survey_spectrum(&o.spec, &window))?;
        *n_out = r.eigenvalues.len();
        for (i, z) in r.eigenvalues.iter().take(capacity).enumerate() {
            // SAFETY: `i < capacity` and the buffer holds `capacity` entries.
            unsafe { *buffer.add(i) = (*z).into() };
        }
        if r.eigenvalues.len() > capacity {
            return Err((
                BtStatus::BufferTooSmall,
                format!("{} eigenvalues do not fit in {capacity}", r.eigenvalues.len()),
            ));
        }
        Ok(())
    })
}

/// Leading coefficient `mu_{k,0}`.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bt_mu_k0(k: usize, value: *mut BtComplex) -> BtStatus {
    guard(|| {
        let slot = out(value)?;
        *slot = lift(mu_k0(k))?.into();
        Ok(())
    })
}

/// Second coefficient `mu_{k,1}`: closed form for `k = 1`, quadrature
/// otherwise.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bt_mu_k1(k: usize, value: *mut BtComplex) -> BtStatus {
    guard(|| {
        let slot = out(value)?;
        let v = if k == 1 {
            mu_k1(1, Mu1Method::ClosedFormK1)
        } else {
            mu_k1_quadrature(k, &QuadratureOptions::default())
        };
        *slot = lift(v)?.into();
        Ok(())
    })
}

/// Extrapolated variational constant on `(a, b)` from the reference grids.
///
/// # Safety
/// `rho0` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bt_rho0(a: f64, b: f64, rho0: *mut f64) -> BtStatus {
    guard(|| {
        let slot = out(rho0)?;
        *slot = lift(compute_rho0(a, b, &RHO0_GRIDS))?.rho0;
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buffer` (always
/// NUL-terminated when `len > 0`) and returns the full message length
/// without the terminator.
///
/// # Safety
/// `buffer` must be null or hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn bt_last_error_message(buffer: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buffer.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `n + 1 <= len` bytes are written into the caller's buffer.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buffer, n);
                *buffer.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
