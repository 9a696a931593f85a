//! C ABI for the online solver.
//!
//! A solver handle plays one slot at a time: `dtc_oco_solver_decide` returns
//! `x_t`, then `dtc_oco_solver_feedback` hands over `∇f_t(x_t)` and the affine
//! constraint `g_t(x) = A_t x + b_t`. The solver reads that feedback no
//! earlier than slot `t + τ`.
//!
//! Every function returns a [`DtcOcoStatus`]. On failure the message is
//! available from [`dtc_oco_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use dtc_oco::algorithm::{pick_step_sizes, DtcOco, RegularizationMode, StepSizePolicy, StepSizes};
use dtc_oco::delay::{DelayBuffer, SlotFeedback};
use dtc_oco::linalg::Matrix;
use dtc_oco::problem::{ConstraintSnapshot, DecisionVector, FeasibleSet};
use dtc_oco::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DtcOcoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// Calls out of order, e.g. two decisions without feedback in between.
    OutOfOrder = 4,
    Internal = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DtcOcoMode {
    Double = 0,
    OnlyDelayedAnchor = 1,
    OnlyPreviousAnchor = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DtcOcoPolicy {
    KnownDelta = 0,
    UnknownDelta = 1,
    UnknownTauKnownDelta = 2,
    UnknownTauUnknownDelta = 3,
    TimeInvariant = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DtcOcoStepSizes {
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
}

/// Opaque solver handle.
pub struct DtcOcoSolver {
    alg: DtcOco,
    buffer: DelayBuffer,
    dim: usize,
    constraints: usize,
    /// Decision of the last slot still waiting for its feedback.
    pending: Option<(usize, DecisionVector)>,
    next_slot: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: DtcOcoStatus, msg: impl Into<String>) -> DtcOcoStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> DtcOcoStatus {
    let status = match e {
        Error::Dimension { .. } => DtcOcoStatus::DimensionMismatch,
        Error::Contract(_) | Error::Config { .. } | Error::NoInteriorPoint(_) => DtcOcoStatus::InvalidArgument,
        _ => DtcOcoStatus::Internal,
    };
    fail(status, e.to_string())
}

/// Run `f`, turning panics into `Panic` with the message recorded.
fn guard(f: impl FnOnce() -> DtcOcoStatus) -> DtcOcoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(DtcOcoStatus::Panic, msg)
        }
    }
}

/// # Safety
/// `ptr` must be null or point to `len` readable `f64`s.
unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], DtcOcoStatus> {
    if ptr.is_null() {
        return Err(fail(DtcOcoStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or point to `len` writable `f64`s.
unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], DtcOcoStatus> {
    if ptr.is_null() {
        return Err(fail(DtcOcoStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dtc_oco_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dtc_oco_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Step sizes from a policy. `delta` is ignored by policies without it.
///
/// # Safety
/// `out` must be null or point to a writable `DtcOcoStepSizes`.
#[no_mangle]
pub unsafe extern "C" fn dtc_oco_pick_step_sizes(
    policy: DtcOcoPolicy,
    delta: f64,
    horizon: usize,
    tau: usize,
    beta: f64,
    out: *mut DtcOcoStepSizes,
) -> DtcOcoStatus {
    guard(|| {
        if out.is_null() {
            return fail(DtcOcoStatus::NullPointer, "out is null");
        }
        let policy = match policy {
            DtcOcoPolicy::KnownDelta => StepSizePolicy::KnownDelta { delta },
            DtcOcoPolicy::UnknownDelta => StepSizePolicy::UnknownDelta,
            DtcOcoPolicy::UnknownTauKnownDelta => StepSizePolicy::UnknownTauKnownDelta { delta },
            DtcOcoPolicy::UnknownTauUnknownDelta => StepSizePolicy::UnknownTauUnknownDelta,
            DtcOcoPolicy::TimeInvariant => StepSizePolicy::TimeInvariant { delta },
        };
        match pick_step_sizes(policy, horizon, tau, beta) {
            Ok(s) => {
                *out = DtcOcoStepSizes {
                    alpha: s.alpha,
                    eta: s.eta,
                    gamma: s.gamma,
                };
                DtcOcoStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Create a solver over the box `[lower, upper]` (length `dim`) with
/// `constraint_count` long-term constraints and feedback delay `tau ≥ 1`.
/// `x_init` may be null for the box midpoint.
///
/// # Safety
/// `lower`, `upper` and a non-null `x_init` must point to `dim` readable
/// `f64`s; `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dtc_oco_solver_create(
    dim: usize,
    lower: *const f64,
    upper: *const f64,
    constraint_count: usize,
    tau: usize,
    sizes: DtcOcoStepSizes,
    mode: DtcOcoMode,
    x_init: *const f64,
    out: *mut *mut DtcOcoSolver,
) -> DtcOcoStatus {
    guard(|| {
        if out.is_null() {
            return fail(DtcOcoStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        let lo = tri!(slice(lower, dim, "lower")).to_vec();
        let hi = tri!(slice(upper, dim, "upper")).to_vec();
        let init = if x_init.is_null() {
            None
        } else {
            match DecisionVector::new(tri!(slice(x_init, dim, "x_init")).to_vec()) {
                Ok(v) => Some(v),
                Err(e) => return from_error(e),
            }
        };
        let mode = match mode {
            DtcOcoMode::Double => RegularizationMode::Double,
            DtcOcoMode::OnlyDelayedAnchor => RegularizationMode::OnlyDelayedAnchor,
            DtcOcoMode::OnlyPreviousAnchor => RegularizationMode::OnlyPreviousAnchor,
        };
        let built = (|| {
            let set = FeasibleSet::boxed(lo, hi)?;
            let sizes = StepSizes::new(sizes.alpha, sizes.eta, sizes.gamma)?;
            let alg = DtcOco::initialize(set, tau, sizes, mode, constraint_count, init)?;
            let buffer = DelayBuffer::new(tau, constraint_count)?;
            Ok::<_, Error>(DtcOcoSolver {
                alg,
                buffer,
                dim,
                constraints: constraint_count,
                pending: None,
                next_slot: 1,
            })
        })();
        match built {
            Ok(s) => {
                *out = Box::into_raw(Box::new(s));
                DtcOcoStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Decide the next slot and write `x_t` to `out_x` (length `dim`). The
/// previous slot's feedback must have been given.
///
/// # Safety
/// `solver` must come from `dtc_oco_solver_create`; `out_x` must point to
/// `dim` writable `f64`s.
#[no_mangle]
pub unsafe extern "C" fn dtc_oco_solver_decide(solver: *mut DtcOcoSolver, out_x: *mut f64, dim: usize) -> DtcOcoStatus {
    guard(|| {
        let Some(s) = solver.as_mut() else {
            return fail(DtcOcoStatus::NullPointer, "solver is null");
        };
        if dim != s.dim {
            return fail(DtcOcoStatus::DimensionMismatch, format!("decision buffer has {dim} entries, solver has {}", s.dim));
        }
        let out = tri!(slice_mut(out_x, dim, "out_x"));
        if let Some((t, _)) = &s.pending {
            return fail(DtcOcoStatus::OutOfOrder, format!("slot {t} still needs feedback"));
        }
        let t = s.next_slot;
        match s.alg.step(&mut s.buffer, t) {
            Ok(report) => {
                out.copy_from_slice(&report.decision);
                s.pending = Some((t, report.decision));
                s.next_slot += 1;
                DtcOcoStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Feedback for the last decided slot: the loss gradient at `x_t` (length
/// `dim`) and `g_t(x) = A x + b` with `A` row-major
/// `constraint_count × dim` and `b` of length `constraint_count`.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn dtc_oco_solver_feedback(
    solver: *mut DtcOcoSolver,
    gradient: *const f64,
    dim: usize,
    matrix: *const f64,
    offset: *const f64,
    constraint_count: usize,
) -> DtcOcoStatus {
    guard(|| {
        let Some(s) = solver.as_mut() else {
            return fail(DtcOcoStatus::NullPointer, "solver is null");
        };
        if dim != s.dim || constraint_count != s.constraints {
            return fail(
                DtcOcoStatus::DimensionMismatch,
                format!("feedback is {constraint_count}×{dim}, solver is {}×{}", s.constraints, s.dim),
            );
        }
        let grad = tri!(slice(gradient, dim, "gradient")).to_vec();
        let a = tri!(slice(matrix, dim * constraint_count, "matrix")).to_vec();
        let b = tri!(slice(offset, constraint_count, "offset")).to_vec();
        if grad.iter().chain(&a).chain(&b).any(|v| !v.is_finite()) {
            return fail(DtcOcoStatus::InvalidArgument, "feedback contains a non-finite value");
        }
        let Some((t, x)) = s.pending.take() else {
            return fail(DtcOcoStatus::OutOfOrder, "no decision is waiting for feedback");
        };
        let fb = SlotFeedback {
            origin_slot: t,
            loss_gradient: grad,
            constraint: ConstraintSnapshot::Affine {
                matrix: Arc::new(Matrix::from_row_major(constraint_count, dim, a)),
                offset: b,
            },
            decision: x,
        };
        match s.buffer.push(fb) {
            Ok(()) => DtcOcoStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Copy the virtual queue `Q_t` (length `constraint_count`) to `out`.
///
/// # Safety
/// `solver` must be a live handle; `out` must point to `len` writable `f64`s.
#[no_mangle]
pub unsafe extern "C" fn dtc_oco_solver_queue(solver: *const DtcOcoSolver, out: *mut f64, len: usize) -> DtcOcoStatus {
    guard(|| {
        let Some(s) = solver.as_ref() else {
            return fail(DtcOcoStatus::NullPointer, "solver is null");
        };
        if len != s.constraints {
            return fail(DtcOcoStatus::DimensionMismatch, format!("queue has {} entries, buffer {len}", s.constraints));
        }
        tri!(slice_mut(out, len, "out")).copy_from_slice(s.alg.queue().values());
        DtcOcoStatus::Ok
    })
}

/// Number of slots decided so far, or 0 for a null handle.
///
/// # Safety
/// `solver` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dtc_oco_solver_slot(solver: *const DtcOcoSolver) -> usize {
    solver.as_ref().map_or(0, |s| s.next_slot - 1)
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `solver` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dtc_oco_solver_free(solver: *mut DtcOcoSolver) {
    if !solver.is_null() {
        drop(Box::from_raw(solver));
    }
}
