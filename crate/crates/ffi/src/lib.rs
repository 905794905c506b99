//! C ABI for the torus-hj solver.
//!
//! Every function returns a [`ThjStatus`]; on failure the message is available
//! through [`thj_last_error_message`] on the calling thread. Handles are opaque
//! and owned by the caller, who releases them with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use torus_hj::geometry::{interpolate, wrap, ScalarField, UniformGrid};
use torus_hj::hamiltonian::{
    ContactHamiltonian, EquilibriumData, QuadraticHamiltonian, TonelliSine,
};
use torus_hj::oracle::oracle_w;
use torus_hj::periods::check_period_in_d;
use torus_hj::semigroup::{evolve, SolverConfig};
use torus_hj::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NoConvergence = 4,
    Internal = 5,
}

/// Opaque Hamiltonian handle.
pub struct ThjHamiltonian {
    inner: Box<dyn ContactHamiltonian>,
}

/// Opaque grid function handle.
pub struct ThjField {
    inner: ScalarField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(ThjStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::DimensionMismatch { .. } | Error::GridMismatch(_) => ThjStatus::DimensionMismatch,
            Error::NoConvergence(_) | Error::FixedPoint { .. } | Error::Legendre { .. } => {
                ThjStatus::NoConvergence
            }
            Error::NonFinite(_)
            | Error::InvalidParameter(_)
            | Error::Domain(_)
            | Error::Config(_)
            | Error::Format(_) => ThjStatus::InvalidArgument,
            _ => ThjStatus::Internal,
        };
        Fail(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ThjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ThjStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            ThjStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(ThjStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn hamiltonian<'a>(h: *const ThjHamiltonian) -> Result<&'a dyn ContactHamiltonian, Fail> {
    h.as_ref().map(|h| h.inner.as_ref()).ok_or_else(|| null("hamiltonian"))
}

unsafe fn field<'a>(f: *const ThjField) -> Result<&'a ScalarField, Fail> {
    f.as_ref().map(|f| &f.inner).ok_or_else(|| null("field"))
}

fn check_len(expected: usize, got: usize) -> Result<(), Fail> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got }.into());
    }
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn thj_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `H = |p|^2 + <omega, p> - lambda u`.
///
/// # Safety
/// `omega` points to `n` doubles; the out pointer is writable.
#[no_mangle]
pub unsafe extern "C" fn thj_hamiltonian_quadratic(
    lambda: f64,
    omega: *const f64,
    n: usize,
    out_h: *mut *mut ThjHamiltonian,
) -> ThjStatus {
    guard(|| {
        let omega = slice(omega, n, "omega")?;
        let slot = out(out_h, "out")?;
        let h = QuadraticHamiltonian::new(lambda, omega)?;
        *slot = Box::into_raw(Box::new(ThjHamiltonian { inner: Box::new(h) }));
        Ok(())
    })
}

/// `H = sqrt(1+|p|^2) - 1 + |p|^2/2 + <omega,p> - lambda u - mu sin u + b`.
///
/// # Safety
/// `omega` points to `n` doubles; the out pointer is writable.
#[no_mangle]
pub unsafe extern "C" fn thj_hamiltonian_tonelli_sine(
    lambda: f64,
    mu: f64,
    b: f64,
    omega: *const f64,
    n: usize,
    out_h: *mut *mut ThjHamiltonian,
) -> ThjStatus {
    guard(|| {
        let omega = slice(omega, n, "omega")?;
        let slot = out(out_h, "out")?;
        let h = TonelliSine::new(lambda, mu, b, omega)?;
        *slot = Box::into_raw(Box::new(ThjHamiltonian { inner: Box::new(h) }));
        Ok(())
    })
}

/// # Safety
/// `h` is null or came from a `thj_hamiltonian_*` constructor and was not freed.
#[no_mangle]
pub unsafe extern "C" fn thj_hamiltonian_free(h: *mut ThjHamiltonian) {
    if !h.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(h))));
    }
}

/// Dimension of the Hamiltonian.
///
/// # Safety
/// `h` is a live handle; `n_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn thj_hamiltonian_dim(h: *const ThjHamiltonian, n_out: *mut usize) -> ThjStatus {
    guard(|| {
        let h = hamiltonian(h)?;
        *out(n_out, "n_out")? = h.dim();
        Ok(())
    })
}

/// Equilibrium level `c` and frequency `omega = H_p(0, c)`.
///
/// # Safety
/// `h` is a live handle; `c_out` is writable; `omega_out` holds `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn thj_equilibrium(
    h: *const ThjHamiltonian,
    c_out: *mut f64,
    omega_out: *mut f64,
    n: usize,
) -> ThjStatus {
    guard(|| {
        let h = hamiltonian(h)?;
        let c_slot = out(c_out, "c_out")?;
        let w = slice_mut(omega_out, n, "omega_out")?;
        check_len(h.dim(), n)?;
        let eq = EquilibriumData::of(h)?;
        *c_slot = eq.c;
        w.copy_from_slice(&eq.omega);
        Ok(())
    })
}

/// Grid function on the uniform `size^n` grid, values in row-major order.
///
/// # Safety
/// `values` points to `len` doubles; the out pointer is writable.
#[no_mangle]
pub unsafe extern "C" fn thj_field_new(
    n: usize,
    size: usize,
    values: *const f64,
    len: usize,
    time: f64,
    out_f: *mut *mut ThjField,
) -> ThjStatus {
    guard(|| {
        let v = slice(values, len, "values")?;
        let slot = out(out_f, "out")?;
        let grid = UniformGrid::new(n, size)?;
        let f = ScalarField::new(grid, v.to_vec(), time)?;
        *slot = Box::into_raw(Box::new(ThjField { inner: f }));
        Ok(())
    })
}

/// # Safety
/// `f` is null or a live field handle.
#[no_mangle]
pub unsafe extern "C" fn thj_field_free(f: *mut ThjField) {
    if !f.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(f))));
    }
}

/// Number of nodes.
///
/// # Safety
/// `f` is a live handle; `len_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn thj_field_len(f: *const ThjField, len_out: *mut usize) -> ThjStatus {
    guard(|| {
        *out(len_out, "len_out")? = field(f)?.grid.len();
        Ok(())
    })
}

/// Copies the node values into `buf`, which must hold exactly the node count.
///
/// # Safety
/// `f` is a live handle; `buf` holds `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn thj_field_values(f: *const ThjField, buf: *mut f64, len: usize) -> ThjStatus {
    guard(|| {
        let f = field(f)?;
        let b = slice_mut(buf, len, "buf")?;
        check_len(f.values.len(), len)?;
        b.copy_from_slice(&f.values);
        Ok(())
    })
}

/// # Safety
/// `f` is a live handle; `t_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn thj_field_time(f: *const ThjField, t_out: *mut f64) -> ThjStatus {
    guard(|| {
        *out(t_out, "t_out")? = field(f)?.time;
        Ok(())
    })
}

/// Torus position of node 0. Fields produced by `thj_evolve` live in a frame
/// that travels with `omega`.
///
/// # Safety
/// `f` is a live handle; `buf` holds `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn thj_field_origin(f: *const ThjField, buf: *mut f64, n: usize) -> ThjStatus {
    guard(|| {
        let f = field(f)?;
        let b = slice_mut(buf, n, "buf")?;
        check_len(f.grid.n, n)?;
        b.copy_from_slice(&f.origin);
        Ok(())
    })
}

/// Advances `phi` to `t_final` with the default solver settings.
///
/// # Safety
/// `h` and `phi` are live handles; the out pointer is writable.
#[no_mangle]
pub unsafe extern "C" fn thj_evolve(
    h: *const ThjHamiltonian,
    phi: *const ThjField,
    t_final: f64,
    out_f: *mut *mut ThjField,
) -> ThjStatus {
    guard(|| {
        let h = hamiltonian(h)?;
        let phi = field(phi)?;
        let slot = out(out_f, "out")?;
        let r = evolve(phi, t_final, h, &SolverConfig::default(), &[])?;
        *slot = Box::into_raw(Box::new(ThjField {
            inner: r.last().clone(),
        }));
        Ok(())
    })
}

/// Multilinear interpolation at the torus point `x`.
///
/// # Safety
/// `f` is a live handle; `x` holds `n` doubles; `value_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn thj_interpolate(
    f: *const ThjField,
    x: *const f64,
    n: usize,
    value_out: *mut f64,
) -> ThjStatus {
    guard(|| {
        let f = field(f)?;
        let x = slice(x, n, "x")?;
        let slot = out(value_out, "value_out")?;
        *slot = interpolate(f, &wrap(x)?)?;
        Ok(())
    })
}

/// Closed-form `w_{x0}(x, t) = (lambda/4) dist(x, x0 + omega t)^2` of the
/// quadratic family.
///
/// # Safety
/// `x0`, `x` and `omega` hold `n` doubles; `value_out` is writable.
#[no_mangle]
pub unsafe extern "C" fn thj_oracle_w(
    x0: *const f64,
    x: *const f64,
    n: usize,
    t: f64,
    lambda: f64,
    omega: *const f64,
    value_out: *mut f64,
) -> ThjStatus {
    guard(|| {
        let x0 = wrap(slice(x0, n, "x0")?)?;
        let x = wrap(slice(x, n, "x")?)?;
        let omega = slice(omega, n, "omega")?;
        let slot = out(value_out, "value_out")?;
        *slot = oracle_w(&x0, &x, t, lambda, omega)?;
        Ok(())
    })
}

/// Searches for `k` with `|k_i| <= height`, `k . omega T = k_{n+1}` up to
/// `tol`. On success `*certified_out = 1` and `k_out` holds the `n + 1`
/// integers; otherwise `*certified_out = 0` and `k_out` is left untouched.
///
/// # Safety
/// `omega` holds `n` doubles; `k_out` holds `n + 1` integers; `certified_out`
/// is writable.
#[no_mangle]
pub unsafe extern "C" fn thj_check_period(
    period: f64,
    omega: *const f64,
    n: usize,
    height: i64,
    tol: f64,
    k_out: *mut i64,
    certified_out: *mut i32,
) -> ThjStatus {
    guard(|| {
        let omega = slice(omega, n, "omega")?;
        let k = slice_mut(k_out, n + 1, "k_out")?;
        let flag = out(certified_out, "certified_out")?;
        let search = check_period_in_d(period, omega, height, tol)?;
        match search.certificate {
            Some(c) => {
                k.copy_from_slice(&c.k);
                *flag = 1;
            }
            None => *flag = 0,
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_mapping() {
        let f: Fail = Error::DimensionMismatch { expected: 1, got: 2 }.into();
        assert_eq!(f.0, ThjStatus::DimensionMismatch);
        let f: Fail = Error::NoConvergence("x".into()).into();
        assert_eq!(f.0, ThjStatus::NoConvergence);
        let f: Fail = Error::Invariant("x".into()).into();
        assert_eq!(f.0, ThjStatus::Internal);
    }

    #[test]
    fn panics_become_internal() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, ThjStatus::Internal);
        let msg = unsafe { std::ffi::CStr::from_ptr(thj_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("boom"));
    }
}
