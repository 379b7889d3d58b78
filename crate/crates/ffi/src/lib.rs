//! C ABI over the `cylconf` simulator.
//!
//! Every fallible function returns a [`CylconfStatus`]; on failure the
//! message is available from [`cylconf_last_error`] on the same thread.
//! States are opaque handles created by the `cylconf_state_new_*`
//! functions and released with [`cylconf_state_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cylconf::euler::{advance, EulerStepConfig, Scheme};
use cylconf::initial::{discretize, PatchSpec};
use cylconf::kernel::{green, grad_perp_green, induced_velocity, validate_decay_envelope};
use cylconf::ns::{ns_step, NsStepConfig};
use cylconf::replay::{make_plan_log, recursive_log_bound, PlanParams, Regime};
use cylconf::{Blob, CylPoint, DecayEnvelope, Error, FlowState, KernelConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CylconfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CylconfScheme {
    Rk4 = 0,
    Rk2 = 1,
    EulerForward = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CylconfRegime {
    NsA = 0,
    NsB = 1,
    Euler = 2,
}

/// Scalar diagnostics of a state. `center_x1` is NaN when the total mass
/// vanishes.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CylconfDiagnostics {
    pub time: f64,
    pub total_mass: f64,
    pub diameter: f64,
    pub max_abs_x1: f64,
    pub center_x1: f64,
    pub first_moment_x1: f64,
    pub hamiltonian: f64,
}

/// Log-domain iteration bound for one time.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CylconfBound {
    pub n: u64,
    pub log_r0: f64,
    pub log_h: f64,
    /// Capped at `log m0`.
    pub log_recursive: f64,
    pub log_recursive_uncapped: f64,
    pub log_closed_form: f64,
}

/// Opaque simulation state.
pub struct CylconfState {
    inner: FlowState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CylconfStatus {
    match e.exit_code() {
        2 => CylconfStatus::InvalidArgument,
        4 => CylconfStatus::Io,
        _ => CylconfStatus::Numerical,
    }
}

fn fail(status: CylconfStatus, msg: impl Into<String>) -> CylconfStatus {
    set_error(msg.into());
    status
}

/// Run `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), CylconfStatus>>(f: F) -> CylconfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CylconfStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CylconfStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn check(r: cylconf::Result<()>) -> Result<(), CylconfStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn lift<T>(r: cylconf::Result<T>) -> Result<T, CylconfStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn null(what: &str) -> CylconfStatus {
    fail(CylconfStatus::NullPointer, format!("{what} is null"))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next `cylconf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn cylconf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cylconf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Periodic Green function `G(x, y)`.
///
/// # Safety
/// `out` must be null or point to writable storage for one double.
#[no_mangle]
pub unsafe extern "C" fn cylconf_green(x1: f64, x2: f64, y1: f64, y2: f64, out: *mut f64) -> CylconfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = lift(green(&CylPoint::new(x1, x2), &CylPoint::new(y1, y2)))?;
        // SAFETY: checked non-null; caller guarantees it is writable.
        unsafe { *out = g };
        Ok(())
    })
}

/// `(1/2pi) grad_perp G(x, y)` regularised by `core_radius`, written to
/// `out[0..2]`. Coincident points give zero.
///
/// # Safety
/// `out` must be null or point to two writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cylconf_velocity_kernel(
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
    core_radius: f64,
    out: *mut f64,
) -> CylconfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = KernelConfig::with_core(core_radius);
        check(cfg.validate())?;
        let v = grad_perp_green(&CylPoint::new(x1, x2), &CylPoint::new(y1, y2), &cfg);
        // SAFETY: caller guarantees two writable doubles.
        unsafe {
            *out = v[0];
            *out.add(1) = v[1];
        }
        Ok(())
    })
}

/// Check `|dG/dx2| <= c1 exp(-c2 r) / r` on a grid of `samples` points.
///
/// # Safety
/// `max_ratio` and `pass` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cylconf_validate_decay_envelope(
    c1: f64,
    c2: f64,
    samples: usize,
    max_ratio: *mut f64,
    pass: *mut bool,
) -> CylconfStatus {
    guard(|| {
        if max_ratio.is_null() || pass.is_null() {
            return Err(null("output pointer"));
        }
        let r = lift(validate_decay_envelope(DecayEnvelope { c1, c2 }, samples))?;
        // SAFETY: both checked non-null.
        unsafe {
            *max_ratio = r.max_ratio;
            *pass = r.pass;
        }
        Ok(())
    })
}

fn boxed(state: FlowState, out: *mut *mut CylconfState) {
    let h = Box::into_raw(Box::new(CylconfState { inner: state }));
    // SAFETY: callers check `out` before building the state.
    unsafe { *out = h };
}

fn seeded(mut s: FlowState, viscosity: f64, seed: u64) -> Result<FlowState, CylconfStatus> {
    if !(viscosity >= 0.0 && viscosity.is_finite()) {
        return Err(fail(
            CylconfStatus::InvalidArgument,
            format!("viscosity must be finite and >= 0, got {viscosity}"),
        ));
    }
    s.viscosity = viscosity;
    s.stream.seed = seed;
    Ok(s)
}

/// Standard patch (uniform disk of radius 1 at `(0, pi)`, unit mass)
/// discretised with about `n_blobs` blobs.
///
/// # Safety
/// `out` must be null or writable; on success it receives a handle owned
/// by the caller.
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_new_standard(
    n_blobs: usize,
    viscosity: f64,
    seed: u64,
    out: *mut *mut CylconfState,
) -> CylconfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = lift(discretize(&PatchSpec::standard(n_blobs)))?;
        boxed(seeded(s, viscosity, seed)?, out);
        Ok(())
    })
}

/// Patch described by a JSON `PatchSpec` object.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out` as in
/// [`cylconf_state_new_standard`].
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_new_patch_json(
    json: *const c_char,
    viscosity: f64,
    seed: u64,
    out: *mut *mut CylconfState,
) -> CylconfStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        // SAFETY: caller guarantees a NUL-terminated string.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| fail(CylconfStatus::InvalidArgument, e.to_string()))?;
        let spec: PatchSpec =
            serde_json::from_str(text).map_err(|e| fail(CylconfStatus::InvalidArgument, e.to_string()))?;
        let s = lift(discretize(&spec))?;
        boxed(seeded(s, viscosity, seed)?, out);
        Ok(())
    })
}

/// Explicit blobs sharing one blob core (> 0); `kernel_core` regularises
/// the velocity kernel and may be 0 for point vortices.
///
/// # Safety
/// `x1`, `x2` and `gamma` must each point to `n` readable doubles; `out` as
/// in [`cylconf_state_new_standard`].
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_new_blobs(
    x1: *const f64,
    x2: *const f64,
    gamma: *const f64,
    n: usize,
    blob_core: f64,
    kernel_core: f64,
    viscosity: f64,
    seed: u64,
    out: *mut *mut CylconfState,
) -> CylconfStatus {
    guard(|| {
        if x1.is_null() || x2.is_null() || gamma.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        // SAFETY: caller guarantees `n` readable elements each.
        let (a, b, g) = unsafe {
            (
                std::slice::from_raw_parts(x1, n),
                std::slice::from_raw_parts(x2, n),
                std::slice::from_raw_parts(gamma, n),
            )
        };
        let blobs = (0..n).map(|i| Blob::new(a[i], b[i], g[i], blob_core)).collect();
        let s = lift(FlowState::new(blobs, KernelConfig::with_core(kernel_core), viscosity))?;
        boxed(seeded(s, viscosity, seed)?, out);
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `state` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_free(state: *mut CylconfState) {
    if !state.is_null() {
        // SAFETY: the handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(state) });
    }
}

/// Number of blobs (0 for null).
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_len(state: *const CylconfState) -> usize {
    // SAFETY: caller guarantees a live handle or null.
    unsafe { state.as_ref() }.map_or(0, |s| s.inner.len())
}

/// Current time (NaN for null).
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_time(state: *const CylconfState) -> f64 {
    // SAFETY: caller guarantees a live handle or null.
    unsafe { state.as_ref() }.map_or(f64::NAN, |s| s.inner.time)
}

/// One inviscid step of length `dt`; the state must have zero viscosity.
///
/// # Safety
/// `state` must be null or a live handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_step_euler(
    state: *mut CylconfState,
    dt: f64,
    scheme: CylconfScheme,
) -> CylconfStatus {
    guard(|| {
        // SAFETY: caller guarantees exclusive access to a live handle.
        let s = unsafe { state.as_mut() }.ok_or_else(|| null("state"))?;
        if s.inner.viscosity != 0.0 {
            return Err(fail(
                CylconfStatus::InvalidArgument,
                "euler step on a viscous state; use cylconf_state_step_ns",
            ));
        }
        let cfg = EulerStepConfig {
            dt,
            scheme: match scheme {
                CylconfScheme::Rk4 => Scheme::Rk4,
                CylconfScheme::Rk2 => Scheme::Rk2,
                CylconfScheme::EulerForward => Scheme::EulerFwd,
            },
            adaptive_tolerance: None,
        };
        check(advance(&mut s.inner, &cfg))
    })
}

/// One viscous splitting step: RK4 transport over `dt`, then Gaussian
/// displacements drawn from the state's seed and step counter.
///
/// # Safety
/// `state` must be null or a live handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_step_ns(state: *mut CylconfState, dt: f64) -> CylconfStatus {
    guard(|| {
        // SAFETY: caller guarantees exclusive access to a live handle.
        let s = unsafe { state.as_mut() }.ok_or_else(|| null("state"))?;
        let mut cfg = NsStepConfig::new(dt, EulerStepConfig::rk4(dt), s.inner.stream.seed);
        cfg.ensemble_id = s.inner.stream.ensemble_id;
        s.inner = lift(ns_step(&s.inner, &cfg))?;
        Ok(())
    })
}

/// Copy positions and circulations into caller buffers of length `cap`.
///
/// # Safety
/// Each non-null buffer must hold `cap` writable doubles; null buffers are
/// skipped.
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_blobs(
    state: *const CylconfState,
    x1: *mut f64,
    x2: *mut f64,
    gamma: *mut f64,
    cap: usize,
) -> CylconfStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let s = unsafe { state.as_ref() }.ok_or_else(|| null("state"))?;
        let n = s.inner.len();
        if cap < n {
            return Err(fail(
                CylconfStatus::BufferTooSmall,
                format!("buffers hold {cap} values, state has {n} blobs"),
            ));
        }
        for (i, b) in s.inner.blobs.iter().enumerate() {
            // SAFETY: i < n <= cap and each buffer is writable when non-null.
            unsafe {
                if !x1.is_null() {
                    *x1.add(i) = b.pos.x1();
                }
                if !x2.is_null() {
                    *x2.add(i) = b.pos.x2();
                }
                if !gamma.is_null() {
                    *gamma.add(i) = b.gamma;
                }
            }
        }
        Ok(())
    })
}

/// Induced velocity at every blob, written to `u1[0..n]`, `u2[0..n]`.
///
/// # Safety
/// `u1` and `u2` must hold `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_velocity(
    state: *const CylconfState,
    u1: *mut f64,
    u2: *mut f64,
    cap: usize,
) -> CylconfStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let s = unsafe { state.as_ref() }.ok_or_else(|| null("state"))?;
        if u1.is_null() || u2.is_null() {
            return Err(null("output buffer"));
        }
        let n = s.inner.len();
        if cap < n {
            return Err(fail(
                CylconfStatus::BufferTooSmall,
                format!("buffers hold {cap} values, state has {n} blobs"),
            ));
        }
        let targets: Vec<CylPoint> = s.inner.blobs.iter().map(|b| b.pos).collect();
        let sources: Vec<(CylPoint, f64)> = s.inner.blobs.iter().map(|b| (b.pos, b.gamma)).collect();
        for (i, v) in induced_velocity(&targets, &sources, &s.inner.kernel).iter().enumerate() {
            // SAFETY: i < n <= cap.
            unsafe {
                *u1.add(i) = v[0];
                *u2.add(i) = v[1];
            }
        }
        Ok(())
    })
}

/// Scalar diagnostics of the current state.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_diagnostics(
    state: *const CylconfState,
    out: *mut CylconfDiagnostics,
) -> CylconfStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let s = unsafe { state.as_ref() }.ok_or_else(|| null("state"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let f = &s.inner;
        let d = CylconfDiagnostics {
            time: f.time,
            total_mass: f.total_mass(),
            diameter: lift(f.diameter_x1())?,
            max_abs_x1: f.max_abs_x1(),
            center_x1: f.center_x1().unwrap_or(f64::NAN),
            first_moment_x1: f.first_moment_x1(),
            hamiltonian: lift(f.hamiltonian())?,
        };
        // SAFETY: checked non-null.
        unsafe { *out = d };
        Ok(())
    })
}

/// Tail masses `m(h) = sum of gamma over |x1| > h` for `n` thresholds.
///
/// # Safety
/// `h` must hold `n` readable doubles and `out` `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cylconf_state_tail_mass(
    state: *const CylconfState,
    h: *const f64,
    n: usize,
    out: *mut f64,
) -> CylconfStatus {
    guard(|| {
        // SAFETY: caller guarantees a live handle or null.
        let s = unsafe { state.as_ref() }.ok_or_else(|| null("state"))?;
        if h.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        // SAFETY: caller guarantees `n` elements each.
        let (hs, os) = unsafe { (std::slice::from_raw_parts(h, n), std::slice::from_raw_parts_mut(out, n)) };
        for (o, &hh) in os.iter_mut().zip(hs) {
            *o = s.inner.tail_mass(hh);
        }
        Ok(())
    })
}

/// Replay the iteration bound at `log t`. `alpha` is used by the ns_a and
/// euler regimes, `beta` and `delta` by ns_b.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cylconf_replay_bound(
    regime: CylconfRegime,
    log_t: f64,
    alpha: f64,
    beta: f64,
    delta: f64,
    big_c: f64,
    m0: f64,
    support_radius: f64,
    out: *mut CylconfBound,
) -> CylconfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (regime, params) = match regime {
            CylconfRegime::NsA => (Regime::NsA, PlanParams::Alpha { alpha }),
            CylconfRegime::NsB => (Regime::NsB, PlanParams::BetaDelta { beta, delta }),
            CylconfRegime::Euler => (Regime::Euler, PlanParams::Alpha { alpha }),
        };
        let plan = lift(make_plan_log(regime, log_t, params, big_c))?;
        let c = lift(recursive_log_bound(&plan, m0, support_radius))?;
        // SAFETY: checked non-null.
        unsafe {
            *out = CylconfBound {
                n: plan.n,
                log_r0: plan.log_r0,
                log_h: plan.log_h,
                log_recursive: c.log_recursive_bound,
                log_recursive_uncapped: c.log_recursive_uncapped,
                log_closed_form: c.log_closed_form,
            }
        };
        Ok(())
    })
}
