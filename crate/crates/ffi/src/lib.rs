//! C interface to the axistream solver.
//!
//! Every function returns an [`AxiStatus`]. On failure the message is kept per
//! thread and can be copied out with [`axi_last_error_message`]. Fields cross
//! the boundary as `nr·nz` doubles, index `i·nz + j` for radial cell `i` and
//! axial cell `j`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use axistream::domain::{CylinderDomain, Grid};
use axistream::error::Error;
use axistream::field::{Field, Parity};
use axistream::mellin::{resolvent, solve_model, MellinProblem, TauGrid};
use axistream::norms::{weighted_norm, Region, WeightedNormSpec};
use axistream::solver::{assemble, solve, DiscreteOperator, SolverOptions};
use num_complex::Complex64;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    /// Contour or evaluation point at a resolvent pole.
    Pole = 5,
    Panic = 99,
}

/// Cylinder, grid and assembled operator. Create with [`axi_problem_new`].
pub struct AxiProblem {
    grid: Arc<Grid>,
    op: DiscreteOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AxiStatus {
    match e {
        Error::InvalidDomain(_) | Error::InvalidParameter(_) | Error::Config(_) | Error::GridMismatch => {
            AxiStatus::InvalidArgument
        }
        Error::PoleGuard { .. } | Error::ResolventPole { .. } => AxiStatus::Pole,
        _ => AxiStatus::SolverFailure,
    }
}

fn fail(status: AxiStatus, msg: impl Into<String>) -> AxiStatus {
    set_error(msg.into());
    status
}

fn guarded(f: impl FnOnce() -> Result<(), AxiStatus>) -> AxiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AxiStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(AxiStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: axistream::error::Result<T>) -> Result<T, AxiStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), AxiStatus> {
    if p.is_null() {
        Err(fail(AxiStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn field_from(problem: &AxiProblem, data: *const f64, len: usize, parity: Parity) -> Result<Field, AxiStatus> {
    non_null(data, "field data")?;
    if len != problem.grid.len() {
        return Err(fail(
            AxiStatus::InvalidArgument,
            format!("field has {len} values, grid has {}", problem.grid.len()),
        ));
    }
    let values = std::slice::from_raw_parts(data, len).to_vec();
    lift(Field::new(problem.grid.clone(), parity, values))
}

/// Build a problem on `{r < radius, |z| < half_height}` with an `nr × nz` grid.
///
/// `r0` is the inner radius of the partition of unity, `0 < 2·r0 < radius`.
///
/// # Safety
/// `out` must be a valid pointer; the handle written there is released with [`axi_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn axi_problem_new(
    radius: f64,
    half_height: f64,
    r0: f64,
    nr: usize,
    nz: usize,
    out: *mut *mut AxiProblem,
) -> AxiStatus {
    guarded(|| {
        non_null(out, "out")?;
        let domain = lift(CylinderDomain::new(radius, half_height, r0))?;
        let grid = lift(Grid::new(&domain, nr, nz))?;
        let op = assemble(&grid);
        *out = Box::into_raw(Box::new(AxiProblem { grid, op }));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from [`axi_problem_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn axi_problem_free(problem: *mut AxiProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of cells per direction.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn axi_problem_size(problem: *const AxiProblem, nr: *mut usize, nz: *mut usize) -> AxiStatus {
    guarded(|| {
        non_null(problem, "problem")?;
        non_null(nr, "nr")?;
        non_null(nz, "nz")?;
        let p = &*problem;
        *nr = p.grid.nr;
        *nz = p.grid.nz;
        Ok(())
    })
}

/// Cell centers: `r` receives `nr` values, `z` receives `nz`.
///
/// # Safety
/// `r` and `z` must hold `nr` and `nz` doubles.
#[no_mangle]
pub unsafe extern "C" fn axi_problem_centers(problem: *const AxiProblem, r: *mut f64, z: *mut f64) -> AxiStatus {
    guarded(|| {
        non_null(problem, "problem")?;
        non_null(r, "r")?;
        non_null(z, "z")?;
        let g = &(*problem).grid;
        std::ptr::copy_nonoverlapping(g.r.as_ptr(), r, g.nr);
        std::ptr::copy_nonoverlapping(g.z.as_ptr(), z, g.nz);
        Ok(())
    })
}

/// Solve `−ψ₁,rr − (3/r)ψ₁,r − ψ₁,zz = ω₁` with homogeneous Dirichlet data.
///
/// `tol` is the relative residual target; pass 0 for the default. `residual`
/// and `iterations` may be null.
///
/// # Safety
/// `omega1` and `psi1` must each hold `len = nr·nz` doubles.
#[no_mangle]
pub unsafe extern "C" fn axi_solve(
    problem: *const AxiProblem,
    omega1: *const f64,
    psi1: *mut f64,
    len: usize,
    tol: f64,
    residual: *mut f64,
    iterations: *mut usize,
) -> AxiStatus {
    guarded(|| {
        non_null(problem, "problem")?;
        non_null(psi1, "psi1")?;
        let p = &*problem;
        let w = field_from(p, omega1, len, Parity::Even)?;
        let mut opts = SolverOptions::default();
        if tol != 0.0 {
            opts.tol = tol;
        }
        let res = lift(solve(&p.op, &w, opts))?;
        std::ptr::copy_nonoverlapping(res.psi1.values().as_ptr(), psi1, len);
        if !residual.is_null() {
            *residual = res.residual_norm;
        }
        if !iterations.is_null() {
            *iterations = res.iterations;
        }
        Ok(())
    })
}

/// `‖u‖_{H^k_μ}` over the whole cylinder. `odd` selects the axis parity of `u`.
///
/// # Safety
/// `field` must hold `len = nr·nz` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn axi_weighted_norm(
    problem: *const AxiProblem,
    field: *const f64,
    len: usize,
    odd: bool,
    k: usize,
    mu: f64,
    out: *mut f64,
) -> AxiStatus {
    guarded(|| {
        non_null(problem, "problem")?;
        non_null(out, "out")?;
        let parity = if odd { Parity::Odd } else { Parity::Even };
        let f = field_from(&*problem, field, len, parity)?;
        let spec = lift(WeightedNormSpec::new(k, mu))?;
        *out = lift(weighted_norm(&f, spec, &Region::Full))?;
        Ok(())
    })
}

/// `R(λ) = 1/(λ(λ + 2i))`.
///
/// # Safety
/// `out_re` and `out_im` must be valid.
#[no_mangle]
pub unsafe extern "C" fn axi_resolvent(re: f64, im: f64, out_re: *mut f64, out_im: *mut f64) -> AxiStatus {
    guarded(|| {
        non_null(out_re, "out_re")?;
        non_null(out_im, "out_im")?;
        let r = lift(resolvent(Complex64::new(re, im)))?;
        *out_re = r.re;
        *out_im = r.im;
        Ok(())
    })
}

/// Solve the radial model problem in `τ = −ln r` on the contour `Im λ = h`.
///
/// `gprime` holds `n` samples at `τ_k = lo + k·(hi − lo)/n`; `u` receives the
/// solution at the same nodes. `ode_residual` may be null.
///
/// # Safety
/// `gprime` and `u` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn axi_mellin_solve(
    gprime: *const f64,
    n: usize,
    lo: f64,
    hi: f64,
    h: f64,
    u: *mut f64,
    ode_residual: *mut f64,
) -> AxiStatus {
    guarded(|| {
        non_null(gprime, "gprime")?;
        non_null(u, "u")?;
        let data = std::slice::from_raw_parts(gprime, n).to_vec();
        let problem = lift(MellinProblem::from_samples(TauGrid { lo, hi, n }, data))?;
        let sol = lift(solve_model(&problem, h))?;
        std::ptr::copy_nonoverlapping(sol.u.as_ptr(), u, n);
        if !ode_residual.is_null() {
            *ode_residual = lift(sol.ode_residual())?;
        }
        Ok(())
    })
}

/// Copy the calling thread's last error message into `buf`, NUL-terminated and
/// truncated to `len` bytes.
///
/// Returns the full message length without the terminator, 0 if there is none.
///
/// # Safety
/// `buf` must hold `len` bytes or be null, in which case only the length is returned.
#[no_mangle]
pub unsafe extern "C" fn axi_last_error_message(buf: *mut c_char, len: usize) -> usize {
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
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn axi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
