//! C ABI over the core library.
//!
//! Every fallible call returns a [`LammStatus`]; on failure the message is
//! kept per thread and read with [`lamm_last_error`]. Problems and
//! trajectories are opaque handles released with their `_free` function.
//! Panics never cross the boundary; they surface as `LAMM_PANIC`.

#![allow(clippy::missing_safety_doc, non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lookahead_minmax::harness::{self, presets, RunConfig, Series, Trajectory};
use lookahead_minmax::problems::{
    Batch, Bilinear2D, GameProblem, JointPoint, Quadratic2D, StochasticBilinear,
};
use lookahead_minmax::spectral::{spectrum, OperatorSpec};
use lookahead_minmax::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LammStatus {
    LAMM_OK = 0,
    LAMM_NULL_POINTER = 1,
    LAMM_INVALID_ARGUMENT = 2,
    LAMM_DIMENSION_MISMATCH = 3,
    LAMM_UNSUPPORTED = 4,
    LAMM_CONFIG = 5,
    LAMM_UNKNOWN_PRESET = 6,
    LAMM_NUMERICAL = 7,
    LAMM_IO = 8,
    LAMM_BUFFER_TOO_SMALL = 9,
    LAMM_PANIC = 10,
}

use LammStatus::*;

/// Trajectory series tag.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LammSeries {
    LAMM_SERIES_FAST = 0,
    LAMM_SERIES_SLOW = 1,
    LAMM_SERIES_SUPER_SLOW = 2,
    LAMM_SERIES_EMA = 3,
    LAMM_SERIES_UMA = 4,
    LAMM_SERIES_EMA_SLOW = 5,
    LAMM_SERIES_UMA_SLOW = 6,
}

impl From<Series> for LammSeries {
    fn from(s: Series) -> Self {
        match s {
            Series::Fast => LammSeries::LAMM_SERIES_FAST,
            Series::Slow => LammSeries::LAMM_SERIES_SLOW,
            Series::SuperSlow => LammSeries::LAMM_SERIES_SUPER_SLOW,
            Series::Ema => LammSeries::LAMM_SERIES_EMA,
            Series::Uma => LammSeries::LAMM_SERIES_UMA,
            Series::EmaSlow => LammSeries::LAMM_SERIES_EMA_SLOW,
            Series::UmaSlow => LammSeries::LAMM_SERIES_UMA_SLOW,
        }
    }
}

impl From<LammSeries> for Series {
    fn from(s: LammSeries) -> Self {
        Series::ALL[s as usize]
    }
}

/// One trajectory row.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LammRow {
    pub update: u64,
    pub passes: f64,
    pub distance: f64,
    pub series: LammSeries,
}

/// Opaque game problem.
pub struct LammProblem(GameProblem);

/// Opaque run result.
pub struct LammTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LammStatus {
    match e {
        Error::DimensionMismatch { .. } => LAMM_DIMENSION_MISMATCH,
        Error::NonFinite(_) | Error::IndexOutOfRange { .. } | Error::InvalidParameter(_) => {
            LAMM_INVALID_ARGUMENT
        }
        Error::Unsupported(_) => LAMM_UNSUPPORTED,
        Error::Config(_) | Error::Json(_) => LAMM_CONFIG,
        Error::UnknownPreset(_) => LAMM_UNKNOWN_PRESET,
        Error::Eigen => LAMM_NUMERICAL,
        Error::Io(_) => LAMM_IO,
    }
}

fn fail(status: LammStatus, msg: impl Into<String>) -> LammStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, mapping library errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), LammStatus>) -> LammStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LAMM_OK,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(LAMM_PANIC, msg)
        }
    }
}

fn lib<T>(r: lookahead_minmax::Result<T>) -> Result<T, LammStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn nonnull<'a, T>(p: *const T, what: &str) -> Result<&'a T, LammStatus> {
    p.as_ref()
        .ok_or_else(|| fail(LAMM_NULL_POINTER, format!("{what} is null")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], LammStatus> {
    if p.is_null() {
        return Err(fail(LAMM_NULL_POINTER, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], LammStatus> {
    if p.is_null() {
        return Err(fail(LAMM_NULL_POINTER, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, LammStatus> {
    if p.is_null() {
        return Err(fail(LAMM_NULL_POINTER, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LAMM_INVALID_ARGUMENT, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), LammStatus> {
    if out.is_null() {
        return Err(fail(LAMM_NULL_POINTER, "output handle pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn point_of(problem: &GameProblem, joint: &[f64]) -> Result<JointPoint, LammStatus> {
    if joint.len() != problem.dim() {
        return Err(fail(
            LAMM_DIMENSION_MISMATCH,
            format!(
                "point has length {}, problem needs {}",
                joint.len(),
                problem.dim()
            ),
        ));
    }
    lib(JointPoint::from_joint(joint.to_vec(), problem.d_theta()))
}

fn check_capacity(cap: usize, need: usize) -> Result<(), LammStatus> {
    if cap < need {
        return Err(fail(
            LAMM_BUFFER_TOO_SMALL,
            format!("buffer holds {cap} values, need {need}"),
        ));
    }
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lamm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lamm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `L(x, y) = x·y`.
#[no_mangle]
pub unsafe extern "C" fn lamm_problem_bilinear2d(out: *mut *mut LammProblem) -> LammStatus {
    guard(|| put(out, LammProblem(Bilinear2D.into())))
}

/// `L(x, y) = a·x² + b·x·y + c·y²`.
#[no_mangle]
pub unsafe extern "C" fn lamm_problem_quadratic2d(
    a: f64,
    b: f64,
    c: f64,
    out: *mut *mut LammProblem,
) -> LammStatus {
    guard(|| {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(fail(LAMM_INVALID_ARGUMENT, "coefficients must be finite"));
        }
        put(out, LammProblem(Quadratic2D { a, b, c }.into()))
    })
}

/// Stochastic bilinear game with `n = d` samples drawn from `seed`.
#[no_mangle]
pub unsafe extern "C" fn lamm_problem_stochastic_bilinear(
    n: usize,
    d: usize,
    seed: u64,
    out: *mut *mut LammProblem,
) -> LammStatus {
    guard(|| {
        put(
            out,
            LammProblem(lib(StochasticBilinear::new(n, d, seed))?.into()),
        )
    })
}

/// `bilinear2d`, `qp1`, `qp2`, `sbg` or `sbg:<seed>`.
#[no_mangle]
pub unsafe extern "C" fn lamm_problem_preset(
    name: *const c_char,
    out: *mut *mut LammProblem,
) -> LammStatus {
    guard(|| {
        put(
            out,
            LammProblem(lib(presets::problem_preset(text(name, "name")?))?),
        )
    })
}

/// Releases a problem. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn lamm_problem_free(problem: *mut LammProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

#[no_mangle]
pub unsafe extern "C" fn lamm_problem_dims(
    problem: *const LammProblem,
    d_theta: *mut usize,
    d_phi: *mut usize,
) -> LammStatus {
    guard(|| {
        let p = &nonnull(problem, "problem")?.0;
        if d_theta.is_null() || d_phi.is_null() {
            return Err(fail(LAMM_NULL_POINTER, "output pointer is null"));
        }
        *d_theta = p.d_theta();
        *d_phi = p.d_phi();
        Ok(())
    })
}

/// Full-batch joint vector field at `point = (θ, φ)`; `point_len` and
/// `out_len` must both be `d_theta + d_phi`.
#[no_mangle]
pub unsafe extern "C" fn lamm_problem_jvf(
    problem: *const LammProblem,
    point: *const f64,
    point_len: usize,
    out: *mut f64,
    out_len: usize,
) -> LammStatus {
    guard(|| {
        let p = &nonnull(problem, "problem")?.0;
        let w = point_of(p, slice(point, point_len, "point")?)?;
        check_capacity(out_len, p.dim())?;
        lib(p.jvf_into(
            &w,
            Batch::Full,
            &mut slice_mut(out, out_len, "out")?[..p.dim()],
        ))
    })
}

/// Writes the optimum `(θ*, φ*)` into `out`.
#[no_mangle]
pub unsafe extern "C" fn lamm_problem_optimum(
    problem: *const LammProblem,
    out: *mut f64,
    out_len: usize,
) -> LammStatus {
    guard(|| {
        let p = &nonnull(problem, "problem")?.0;
        check_capacity(out_len, p.dim())?;
        slice_mut(out, out_len, "out")?[..p.dim()].copy_from_slice(p.optimum().as_slice());
        Ok(())
    })
}

/// Euclidean distance from `point` to the optimum.
#[no_mangle]
pub unsafe extern "C" fn lamm_problem_distance(
    problem: *const LammProblem,
    point: *const f64,
    point_len: usize,
    out: *mut f64,
) -> LammStatus {
    guard(|| {
        let p = &nonnull(problem, "problem")?.0;
        let w = point_of(p, slice(point, point_len, "point")?)?;
        if out.is_null() {
            return Err(fail(LAMM_NULL_POINTER, "out is null"));
        }
        *out = p.distance_to_opt(&w);
        Ok(())
    })
}

/// Spectrum of an operator descriptor (e.g. `la:6:0.5/eg:0.3`) or run
/// preset on `problem`. Writes the radius and, if `capacity` allows, the
/// sorted eigenvalues; `count` always receives the eigenvalue count.
#[no_mangle]
pub unsafe extern "C" fn lamm_spectrum(
    problem: *const LammProblem,
    operator: *const c_char,
    radius: *mut f64,
    eig_re: *mut f64,
    eig_im: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> LammStatus {
    guard(|| {
        let p = &nonnull(problem, "problem")?.0;
        let spec: OperatorSpec = lib(presets::operator_preset(text(operator, "operator")?))?;
        let report = lib(spectrum(&spec, p))?;
        if radius.is_null() || count.is_null() {
            return Err(fail(LAMM_NULL_POINTER, "output pointer is null"));
        }
        *radius = report.spectral_radius;
        let n = report.eigenvalues.len();
        *count = n;
        if capacity == 0 {
            return Ok(());
        }
        check_capacity(capacity, n)?;
        let (re, im) = (
            slice_mut(eig_re, capacity, "eig_re")?,
            slice_mut(eig_im, capacity, "eig_im")?,
        );
        for (i, z) in report.eigenvalues.iter().enumerate() {
            re[i] = z.re;
            im[i] = z.im;
        }
        Ok(())
    })
}

/// Runs a TOML run config.
#[no_mangle]
pub unsafe extern "C" fn lamm_run_toml(
    config: *const c_char,
    out: *mut *mut LammTrajectory,
) -> LammStatus {
    guard(|| {
        let c = lib(RunConfig::from_toml(text(config, "config")?))?;
        put(out, LammTrajectory(lib(harness::run(&c))?.trajectory))
    })
}

/// Runs a named preset under run seed `seed`.
#[no_mangle]
pub unsafe extern "C" fn lamm_run_preset(
    name: *const c_char,
    seed: u64,
    out: *mut *mut LammTrajectory,
) -> LammStatus {
    guard(|| {
        let mut c = lib(presets::preset(text(name, "name")?))?;
        c.seed = seed;
        put(out, LammTrajectory(lib(harness::run(&c))?.trajectory))
    })
}

/// Releases a trajectory. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn lamm_trajectory_free(trajectory: *mut LammTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Row count, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn lamm_trajectory_len(trajectory: *const LammTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.0.rows.len())
}

#[no_mangle]
pub unsafe extern "C" fn lamm_trajectory_row(
    trajectory: *const LammTrajectory,
    index: usize,
    out: *mut LammRow,
) -> LammStatus {
    guard(|| {
        let t = &nonnull(trajectory, "trajectory")?.0;
        let r = t.rows.get(index).ok_or_else(|| {
            fail(
                LAMM_INVALID_ARGUMENT,
                format!("row {index} out of range for {} rows", t.rows.len()),
            )
        })?;
        if out.is_null() {
            return Err(fail(LAMM_NULL_POINTER, "out is null"));
        }
        *out = LammRow {
            update: r.update,
            passes: r.passes,
            distance: r.distance,
            series: r.series.into(),
        };
        Ok(())
    })
}

/// Last logged distance of `series`; `LAMM_INVALID_ARGUMENT` if the
/// series is not in the trajectory.
#[no_mangle]
pub unsafe extern "C" fn lamm_trajectory_final_distance(
    trajectory: *const LammTrajectory,
    series: LammSeries,
    out: *mut f64,
) -> LammStatus {
    guard(|| {
        let t = &nonnull(trajectory, "trajectory")?.0;
        let s = Series::from(series);
        let d = t
            .final_distance(s)
            .ok_or_else(|| fail(LAMM_INVALID_ARGUMENT, format!("series {s} not logged")))?;
        if out.is_null() {
            return Err(fail(LAMM_NULL_POINTER, "out is null"));
        }
        *out = d;
        Ok(())
    })
}

/// Trajectory as CSV text; release with [`lamm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn lamm_trajectory_csv(
    trajectory: *const LammTrajectory,
    out: *mut *mut c_char,
) -> LammStatus {
    guard(|| {
        let t = &nonnull(trajectory, "trajectory")?.0;
        if out.is_null() {
            return Err(fail(LAMM_NULL_POINTER, "out is null"));
        }
        *out = CString::new(t.to_csv_string())
            .expect("CSV has no NULs")
            .into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn lamm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
