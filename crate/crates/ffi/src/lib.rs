//! C ABI over the `liqpde` solver.
//!
//! Objects are opaque handles created by `*_new`/`liqpde_solve` and released
//! with the matching `*_free`. Every fallible call returns a [`LiqpdeStatus`];
//! on failure the message is kept per thread and read back with
//! [`liqpde_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use liqpde::{
    indifference_prices, solve, Error, Grid, MertonFactors, ModelParams, PayoffSpec, Scheme, SolverConfig, Surface,
};

/// Status codes. The numbering matches the command-line exit codes where
/// they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiqpdeStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Solver = 3,
    Audit = 4,
    Domain = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiqpdeScheme {
    Direct = 0,
    Monotone = 1,
}

pub struct LiqpdeModel(ModelParams);

pub struct LiqpdePayoff(PayoffSpec);

pub struct LiqpdeSurface(Surface);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn status_of(e: &Error) -> LiqpdeStatus {
    match e {
        Error::Validation { .. } | Error::IllposedFactors | Error::DegenerateSpectrum { .. } | Error::UnboundedPayoff(_) => {
            LiqpdeStatus::Validation
        }
        Error::Domain(_) => LiqpdeStatus::Domain,
        Error::AuditFailure { .. } => LiqpdeStatus::Audit,
        _ => LiqpdeStatus::Solver,
    }
}

/// Runs `f`, recording errors and turning panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), (LiqpdeStatus, String)>) -> LiqpdeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LiqpdeStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LiqpdeStatus::Panic
        }
    }
}

fn lift(e: Error) -> (LiqpdeStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (LiqpdeStatus, String) {
    (LiqpdeStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (LiqpdeStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), (LiqpdeStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), (LiqpdeStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value;
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn liqpde_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn liqpde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn liqpde_model_new(
    sigma: f64,
    mu: f64,
    nu01: f64,
    nu10: f64,
    gamma: f64,
    horizon: f64,
    out: *mut *mut LiqpdeModel,
) -> LiqpdeStatus {
    guard(|| {
        let p = ModelParams::new(sigma, mu, nu01, nu10, gamma, horizon).map_err(lift)?;
        store(out, LiqpdeModel(p))
    })
}

/// # Safety
/// `model` must come from `liqpde_model_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn liqpde_model_free(model: *mut LiqpdeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes `F0(t)` and `F1(t)` for calendar time `t` in `[0, T]`.
///
/// # Safety
/// `model` must be a live handle; `f0`, `f1` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liqpde_model_factors(
    model: *const LiqpdeModel,
    t: f64,
    f0: *mut f64,
    f1: *mut f64,
) -> LiqpdeStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let v = MertonFactors::new(&m.0).and_then(|f| f.evaluate(t)).map_err(lift)?;
        write(f0, v.f0)?;
        write(f1, v.f1)
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liqpde_payoff_call(strike: f64, out: *mut *mut LiqpdePayoff) -> LiqpdeStatus {
    guard(|| store(out, LiqpdePayoff(PayoffSpec::call(strike).map_err(lift)?)))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liqpde_payoff_put(strike: f64, out: *mut *mut LiqpdePayoff) -> LiqpdeStatus {
    guard(|| store(out, LiqpdePayoff(PayoffSpec::put(strike).map_err(lift)?)))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liqpde_payoff_constant(level: f64, out: *mut *mut LiqpdePayoff) -> LiqpdeStatus {
    guard(|| store(out, LiqpdePayoff(PayoffSpec::constant(level).map_err(lift)?)))
}

/// Piecewise-linear payoff through `(s[i], h[i])`, `s` strictly increasing.
///
/// # Safety
/// `s` and `h` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn liqpde_payoff_tabulated(
    s: *const f64,
    h: *const f64,
    len: usize,
    out: *mut *mut LiqpdePayoff,
) -> LiqpdeStatus {
    guard(|| {
        if s.is_null() || h.is_null() {
            return Err(null("s or h"));
        }
        let s = std::slice::from_raw_parts(s, len).to_vec();
        let h = std::slice::from_raw_parts(h, len).to_vec();
        store(out, LiqpdePayoff(PayoffSpec::tabulated(s, h).map_err(lift)?))
    })
}

/// # Safety
/// `payoff` must come from a `liqpde_payoff_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn liqpde_payoff_free(payoff: *mut LiqpdePayoff) {
    if !payoff.is_null() {
        drop(Box::from_raw(payoff));
    }
}

/// # Safety
/// `payoff` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn liqpde_payoff_evaluate(payoff: *const LiqpdePayoff, s: f64, out: *mut f64) -> LiqpdeStatus {
    guard(|| {
        let p = deref(payoff, "payoff")?;
        write(out, p.0.evaluate(s))
    })
}

/// Solves on `x = ln S` in `[x_min, x_max]` with `n_space` nodes and
/// `n_time` steps up to the model horizon.
///
/// # Safety
/// `model`, `payoff` must be live handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn liqpde_solve(
    model: *const LiqpdeModel,
    payoff: *const LiqpdePayoff,
    x_min: f64,
    x_max: f64,
    n_space: usize,
    n_time: usize,
    scheme: LiqpdeScheme,
    out: *mut *mut LiqpdeSurface,
) -> LiqpdeStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let h = deref(payoff, "payoff")?;
        let grid = Grid::new(x_min, x_max, n_space, m.0.horizon(), n_time).map_err(lift)?;
        let config = SolverConfig {
            scheme: match scheme {
                LiqpdeScheme::Direct => Scheme::DirectImex,
                LiqpdeScheme::Monotone => Scheme::MonotoneIteration,
            },
            ..SolverConfig::default()
        };
        let (surface, _) = solve(&m.0, &h.0, &grid, &config).map_err(lift)?;
        store(out, LiqpdeSurface(surface))
    })
}

/// # Safety
/// `surface` must come from `liqpde_solve`.
#[no_mangle]
pub unsafe extern "C" fn liqpde_surface_free(surface: *mut LiqpdeSurface) {
    if !surface.is_null() {
        drop(Box::from_raw(surface));
    }
}

/// Node count and number of time levels (`n_time + 1`).
///
/// # Safety
/// `surface` live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn liqpde_surface_dims(
    surface: *const LiqpdeSurface,
    n_space: *mut usize,
    n_levels: *mut usize,
) -> LiqpdeStatus {
    guard(|| {
        let s = deref(surface, "surface")?;
        write(n_space, s.0.grid().n_space())?;
        write(n_levels, s.0.n_levels())
    })
}

fn check_level(s: &Surface, level: usize) -> Result<(), (LiqpdeStatus, String)> {
    if level >= s.n_levels() {
        return Err((
            LiqpdeStatus::Domain,
            format!("level {level} out of range 0..{}", s.n_levels()),
        ));
    }
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), (LiqpdeStatus, String)> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < src.len() {
        return Err((
            LiqpdeStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Copies `u` (and optionally the memory integral `I`) at time level `level`.
/// `memory` may be null.
///
/// # Safety
/// `surface` live; `u` and non-null `memory` hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn liqpde_surface_level(
    surface: *const LiqpdeSurface,
    level: usize,
    u: *mut f64,
    memory: *mut f64,
    len: usize,
) -> LiqpdeStatus {
    guard(|| {
        let s = &deref(surface, "surface")?.0;
        check_level(s, level)?;
        copy_out(s.level(level), u, len)?;
        if !memory.is_null() {
            copy_out(s.memory_level(level), memory, len)?;
        }
        Ok(())
    })
}

/// Copies the grid's `S` nodes.
///
/// # Safety
/// `surface` live; `buf` holds at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn liqpde_surface_s_nodes(surface: *const LiqpdeSurface, buf: *mut f64, len: usize) -> LiqpdeStatus {
    guard(|| copy_out(deref(surface, "surface")?.0.grid().s_nodes(), buf, len))
}

/// Indifference prices `p`, `q` at calendar row `row` (`t = row * dtau`).
/// `payoff` must be the one the surface was solved with.
///
/// # Safety
/// Handles live; `p`, `q` hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn liqpde_prices(
    surface: *const LiqpdeSurface,
    model: *const LiqpdeModel,
    payoff: *const LiqpdePayoff,
    row: usize,
    p: *mut f64,
    q: *mut f64,
    len: usize,
) -> LiqpdeStatus {
    guard(|| {
        let s = &deref(surface, "surface")?.0;
        let m = &deref(model, "model")?.0;
        let h = &deref(payoff, "payoff")?.0;
        check_level(s, row)?;
        let f = MertonFactors::new(m).map_err(lift)?;
        let prices = indifference_prices(s, m, &f, h).map_err(lift)?;
        copy_out(prices.row(&prices.p, row), p, len)?;
        copy_out(prices.row(&prices.q, row), q, len)
    })
}
