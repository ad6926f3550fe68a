//! C interface to the `tcmerton` solver.
//!
//! A solve returns an opaque [`TcmSolution`] handle that answers point queries and must be
//! released with [`tcm_solution_free`]. Every fallible call returns a [`TcmStatus`]; the
//! message of the most recent failure on the calling thread is available through
//! [`tcm_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tcmerton::cli::RunConfig;
use tcmerton::pipeline::{solve, Solution};
use tcmerton::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcmStatus {
    Ok = 0,
    NullPointer = 1,
    /// A model, grid or solver parameter is invalid, or the config text does not parse.
    InvalidArgument = 2,
    NoConvergence = 3,
    /// The query point lies outside the solved grid or the covered wealth range.
    OutOfRange = 4,
    /// Numerical failure inside the solver.
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

/// Opaque handle to a converged solution.
pub struct TcmSolution {
    inner: Solution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> TcmStatus {
    match err {
        Error::InvalidParameter { .. } | Error::Config(_) => TcmStatus::InvalidArgument,
        Error::NoConvergence { .. } => TcmStatus::NoConvergence,
        Error::OutOfRange { .. } | Error::Domain(_) | Error::Coverage { .. } => TcmStatus::OutOfRange,
        Error::Io(_) => TcmStatus::Io,
        Error::Solver { .. } | Error::Integrity(_) => TcmStatus::Numerical,
    }
}

/// Runs `f`, records any error or panic, and converts the outcome to a status.
fn guard(f: impl FnOnce() -> Result<(), (TcmStatus, String)>) -> TcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TcmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TcmStatus::Panic
        }
    }
}

fn lib(err: Error) -> (TcmStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (TcmStatus, String) {
    (TcmStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (TcmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TcmStatus::InvalidArgument, format!("`{what}` is not valid UTF-8")))
}

unsafe fn handle<'a>(sol: *const TcmSolution) -> Result<&'a Solution, (TcmStatus, String)> {
    sol.as_ref().map(|s| &s.inner).ok_or_else(|| null("solution"))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), (TcmStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn solve_config(cfg: RunConfig) -> Result<Solution, (TcmStatus, String)> {
    let resolved = cfg.resolve().map_err(lib)?;
    solve(resolved.context().map_err(lib)?, &resolved.iteration).map_err(lib)
}

fn finish(
    out: *mut *mut TcmSolution,
    f: impl FnOnce() -> Result<Solution, (TcmStatus, String)>,
) -> TcmStatus {
    if out.is_null() {
        set_error("`out` is null");
        return TcmStatus::NullPointer;
    }
    // SAFETY: checked non-null; the caller provides a writable slot
    unsafe { out.write(ptr::null_mut()) };
    guard(|| {
        let sol = f()?;
        unsafe { out.write(Box::into_raw(Box::new(TcmSolution { inner: sol }))) };
        Ok(())
    })
}

fn check_time(sol: &Solution, t: f64) -> Result<(), (TcmStatus, String)> {
    let h = sol.ctx.grid().horizon();
    if !(t >= 0.0 && t <= h) {
        return Err((TcmStatus::OutOfRange, format!("t = {t} is outside [0, {h}]")));
    }
    Ok(())
}

fn check_grid_point(sol: &Solution, t: f64, y: f64) -> Result<(), (TcmStatus, String)> {
    let g = sol.ctx.grid();
    if !(t >= 0.0 && t <= g.horizon() && y >= g.y_min() && y <= g.y_max()) {
        return Err((
            TcmStatus::OutOfRange,
            format!(
                "(t, y) = ({t}, {y}) is outside [0, {}] x [{}, {}]",
                g.horizon(),
                g.y_min(),
                g.y_max()
            ),
        ));
    }
    Ok(())
}

/// Solves the problem described by a TOML configuration string.
///
/// On success `*out` receives a handle; on failure it is set to null.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tcm_solve_config(
    config_toml: *const c_char,
    out: *mut *mut TcmSolution,
) -> TcmStatus {
    finish(out, || {
        let text = str_arg(config_toml, "config_toml")?;
        solve_config(RunConfig::from_toml(text).map_err(lib)?)
    })
}

/// Solves the problem described by a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tcm_solve_config_file(path: *const c_char, out: *mut *mut TcmSolution) -> TcmStatus {
    finish(out, || {
        let path = str_arg(path, "path")?;
        solve_config(RunConfig::load(Path::new(path)).map_err(lib)?)
    })
}

/// Releases a handle. Null is accepted.
///
/// # Safety
/// `sol` must come from a solve function and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tcm_solution_free(sol: *mut TcmSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Equilibrium discount rate `rho_bar(t, y)`, bilinear between grid nodes.
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tcm_rho_bar(sol: *const TcmSolution, t: f64, y: f64, out: *mut f64) -> TcmStatus {
    guard(|| {
        let s = handle(sol)?;
        check_grid_point(s, t, y)?;
        write(out, s.rho.phi.bilinear(t, y), "out")
    })
}

/// Wealth map `p_bar(t, y)`.
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tcm_pbar(sol: *const TcmSolution, t: f64, y: f64, out: *mut f64) -> TcmStatus {
    guard(|| {
        let s = handle(sol)?;
        check_grid_point(s, t, y)?;
        write(out, s.feedback().pbar(t, y), "out")
    })
}

/// The `y` with `p_bar(t, y) = x`.
///
/// # Safety
/// `sol` must be a live handle and `y_out` writable.
#[no_mangle]
pub unsafe extern "C" fn tcm_invert_pbar(
    sol: *const TcmSolution,
    t: f64,
    x: f64,
    y_out: *mut f64,
) -> TcmStatus {
    guard(|| {
        let s = handle(sol)?;
        check_time(s, t)?;
        write(y_out, s.feedback().invert(t, x).map_err(lib)?, "y_out")
    })
}

/// Equilibrium controls at wealth `x`: risky fraction `pi` and consumption per unit wealth `c`.
///
/// # Safety
/// `sol` must be a live handle; `pi_out` and `c_out` writable.
#[no_mangle]
pub unsafe extern "C" fn tcm_controls(
    sol: *const TcmSolution,
    t: f64,
    x: f64,
    pi_out: *mut f64,
    c_out: *mut f64,
) -> TcmStatus {
    guard(|| {
        let s = handle(sol)?;
        check_time(s, t)?;
        if pi_out.is_null() || c_out.is_null() {
            return Err(null(if pi_out.is_null() { "pi_out" } else { "c_out" }));
        }
        let k = s.feedback().controls(t, x).map_err(lib)?;
        write(pi_out, k.pi, "pi_out")?;
        write(c_out, k.c, "c_out")
    })
}

/// Marginal value `v(t, x)`.
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tcm_marginal_value(
    sol: *const TcmSolution,
    t: f64,
    x: f64,
    out: *mut f64,
) -> TcmStatus {
    guard(|| {
        let s = handle(sol)?;
        check_time(s, t)?;
        write(out, s.feedback().marginal_value(t, x).map_err(lib)?, "out")
    })
}

/// Equilibrium value `G(t, x)`.
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tcm_value(sol: *const TcmSolution, t: f64, x: f64, out: *mut f64) -> TcmStatus {
    guard(|| {
        let s = handle(sol)?;
        check_time(s, t)?;
        write(out, s.value.g(t, x).map_err(lib)?, "out")
    })
}

/// Fixed-point iterations used; 0 when the first iterate was already a fixed point.
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tcm_iterations(sol: *const TcmSolution, out: *mut usize) -> TcmStatus {
    guard(|| write(out, handle(sol)?.rho.iterations, "out"))
}

/// Final fixed-point residual in the sup norm of the value and its `y`-derivative.
///
/// # Safety
/// `sol` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tcm_residual(sol: *const TcmSolution, out: *mut f64) -> TcmStatus {
    guard(|| write(out, handle(sol)?.rho.residual_sup, "out"))
}

/// Horizon and `y`-limits of the solved grid.
///
/// # Safety
/// `sol` must be a live handle; every output pointer writable.
#[no_mangle]
pub unsafe extern "C" fn tcm_grid(
    sol: *const TcmSolution,
    horizon: *mut f64,
    y_min: *mut f64,
    y_max: *mut f64,
    n_t: *mut usize,
    n_y: *mut usize,
) -> TcmStatus {
    guard(|| {
        let g = handle(sol)?.ctx.grid();
        if [horizon, y_min, y_max].iter().any(|p| p.is_null()) || n_t.is_null() || n_y.is_null() {
            return Err(null("grid output"));
        }
        write(horizon, g.horizon(), "horizon")?;
        write(y_min, g.y_min(), "y_min")?;
        write(y_max, g.y_max(), "y_max")?;
        write(n_t, g.n_t(), "n_t")?;
        write(n_y, g.n_y(), "n_y")
    })
}

/// Copies the last error message of this thread into `buf`, truncated and NUL-terminated.
///
/// Returns the full message length excluding the terminator, or 0 when no error is recorded.
/// Passing a null `buf` or zero `len` only queries the length.
///
/// # Safety
/// `buf` must be writable for `len` bytes when non-null.
#[no_mangle]
pub unsafe extern "C" fn tcm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tcm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Config("x".into())), TcmStatus::InvalidArgument);
        assert_eq!(
            status_of(&Error::OutOfRange {
                t: 0.0,
                x: 1.0,
                lo: 2.0,
                hi: 3.0
            }),
            TcmStatus::OutOfRange
        );
        assert_eq!(
            status_of(&Error::NoConvergence {
                iterations: 1,
                last: 1.0,
                history: vec![]
            }),
            TcmStatus::NoConvergence
        );
    }

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, TcmStatus::Panic);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { tcm_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
        assert_eq!(n, msg.len());
    }

    #[test]
    fn message_truncates() {
        set_error("abcdef");
        let mut buf = [1 as c_char; 4];
        let n = unsafe { tcm_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, 6);
        assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "abc");
        assert_eq!(unsafe { tcm_last_error_message(ptr::null_mut(), 0) }, 6);
    }
}
