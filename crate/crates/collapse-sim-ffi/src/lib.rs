//! C ABI for the collapse simulator.
//!
//! The surface follows the usual opaque-handle pattern: states and RNG
//! streams are heap handles created and destroyed through paired
//! constructor/free calls, every fallible function returns a [`CsimStatus`],
//! and results come back through out-pointers. The generated header lives in
//! `include/collapse_sim.h`.
//!
//! Handles are not synchronized; share a handle between threads only with
//! external locking. All pointers must be valid for the duration of the
//! call, and handles must not be used after being freed.

use std::os::raw::c_char;

use collapse_sim::{
    absorption_oracle, apply_nsf_cascade, apply_psf, build_stat_matrix, eigen_spectrum, fluctuate,
    relaxation_times, run_trajectory, trajectory_rng, Error, FluctuationParams, PhaseDist,
    RunConfig, SimRng, TransitionScheme, WaveState,
};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsimStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument failed validation (bad epsilon, weight sum, index...).
    InvalidArgument = 2,
    /// The operation is not defined for the given state (collapsed state,
    /// destroyed packet, off-grid start point...).
    DomainError = 3,
    /// A caller-provided buffer is shorter than the packet count.
    BufferTooSmall = 4,
    /// An internal numerical routine failed; not expected in normal use.
    InternalError = 5,
}

/// Three-point phase-factor distribution (the model default).
pub const CSIM_PHASE_DIST_THREE_POINT: i32 = 0;
/// Phase factor fixed at 1; violates the mean-amplitude identity, for
/// ablation runs only.
pub const CSIM_PHASE_DIST_DETERMINISTIC_REAL: i32 = 1;

/// Opaque wave-state handle.
pub struct CsimState(WaveState);

/// Opaque deterministic RNG stream handle.
pub struct CsimRng(SimRng);

fn status_of(err: &Error) -> CsimStatus {
    match err {
        Error::LengthMismatch { .. }
        | Error::EmptyState
        | Error::NegativeWeight { .. }
        | Error::NormOutOfRange { .. }
        | Error::EpsilonOutOfRange(_)
        | Error::TauOutOfRange(_)
        | Error::PacketOutOfRange { .. }
        | Error::NonPositiveWeight(_)
        | Error::WeightOutOfRange(_)
        | Error::GridMismatch(_)
        | Error::GridTooSmall(_)
        | Error::CombinedSchemeRange(_)
        | Error::NoTrajectories
        | Error::NoSteps => CsimStatus::InvalidArgument,
        Error::PacketDestroyed(_)
        | Error::AllWeightsZero
        | Error::PhaseSampleDomain { .. }
        | Error::StateCollapsed
        | Error::UnexpectedTotalWeight { .. }
        | Error::OffGrid { .. } => CsimStatus::DomainError,
        _ => CsimStatus::InternalError,
    }
}

fn phase_dist_of(raw: i32) -> Option<PhaseDist> {
    match raw {
        CSIM_PHASE_DIST_THREE_POINT => Some(PhaseDist::ThreePoint),
        CSIM_PHASE_DIST_DETERMINISTIC_REAL => Some(PhaseDist::DeterministicReal),
        _ => None,
    }
}

/// Builds a state from `len` weights and phases. On success writes a handle
/// to `out`; free it with [`csim_state_free`].
///
/// # Safety
/// `weights` and `phases` must point to `len` readable doubles and `out`
/// must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn csim_state_new(
    weights: *const f64,
    phases: *const f64,
    len: usize,
    out: *mut *mut CsimState,
) -> CsimStatus {
    if weights.is_null() || phases.is_null() || out.is_null() {
        return CsimStatus::NullPointer;
    }
    let weights = std::slice::from_raw_parts(weights, len);
    let phases = std::slice::from_raw_parts(phases, len);
    match WaveState::new(weights, phases) {
        Ok(state) => {
            *out = Box::into_raw(Box::new(CsimState(state)));
            CsimStatus::Ok
        }
        Err(err) => status_of(&err),
    }
}

/// Deep copy of a state handle.
///
/// # Safety
/// `state` must be a live handle from this library and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csim_state_clone(
    state: *const CsimState,
    out: *mut *mut CsimState,
) -> CsimStatus {
    if state.is_null() || out.is_null() {
        return CsimStatus::NullPointer;
    }
    *out = Box::into_raw(Box::new(CsimState((*state).0.clone())));
    CsimStatus::Ok
}

/// Frees a state handle. Passing null is a no-op.
///
/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csim_state_free(state: *mut CsimState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of packets (live and destroyed).
///
/// # Safety
/// `state` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csim_state_packet_count(
    state: *const CsimState,
    out: *mut usize,
) -> CsimStatus {
    if state.is_null() || out.is_null() {
        return CsimStatus::NullPointer;
    }
    *out = (*state).0.packet_count();
    CsimStatus::Ok
}

/// Current total weight of the state.
///
/// # Safety
/// `state` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csim_state_total_weight(
    state: *const CsimState,
    out: *mut f64,
) -> CsimStatus {
    if state.is_null() || out.is_null() {
        return CsimStatus::NullPointer;
    }
    *out = (*state).0.total_weight();
    CsimStatus::Ok
}

/// Whether exactly one packet is live.
///
/// # Safety
/// `state` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csim_state_is_collapsed(
    state: *const CsimState,
    out: *mut bool,
) -> CsimStatus {
    if state.is_null() || out.is_null() {
        return CsimStatus::NullPointer;
    }
    *out = (*state).0.is_collapsed();
    CsimStatus::Ok
}

/// Index of the sole live packet, or -1 if the state is not collapsed.
///
/// # Safety
/// `state` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn csim_state_surviving_packet(
    state: *const CsimState,
    out: *mut i64,
) -> CsimStatus {
    if state.is_null() || out.is_null() {
        return CsimStatus::NullPointer;
    }
    *out = match (*state).0.surviving_packet() {
        Some(index) => index as i64,
        None => -1,
    };
    CsimStatus::Ok
}

unsafe fn copy_out(values: Vec<f64>, buf: *mut f64, len: usize) -> CsimStatus {
    if buf.is_null() {
        return CsimStatus::NullPointer;
    }
    if len < values.len() {
        return CsimStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    CsimStatus::Ok
}

/// Copies the packet weights into `buf` (at least the packet count long).
///
/// # Safety
/// `state` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csim_state_weights(
    state: *const CsimState,
    buf: *mut f64,
    len: usize,
) -> CsimStatus {
    if state.is_null() {
        return CsimStatus::NullPointer;
    }
    copy_out((*state).0.weights(), buf, len)
}

/// Copies the packet phases into `buf` (at least the packet count long).
///
/// # Safety
/// `state` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn csim_state_phases(
    state: *const CsimState,
    buf: *mut f64,
    len: usize,
) -> CsimStatus {
    if state.is_null() {
        return CsimStatus::NullPointer;
    }
    copy_out((*state).0.phases(), buf, len)
}

/// Creates the deterministic RNG stream `(seed, stream)`; the same pair
/// always reproduces the same draws. Free with [`csim_rng_free`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csim_rng_new(
    seed: u64,
    stream: u64,
    out: *mut *mut CsimRng,
) -> CsimStatus {
    if out.is_null() {
        return CsimStatus::NullPointer;
    }
    *out = Box::into_raw(Box::new(CsimRng(trajectory_rng(seed, stream))));
    CsimStatus::Ok
}

/// Frees an RNG handle. Passing null is a no-op.
///
/// # Safety
/// `rng` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn csim_rng_free(rng: *mut CsimRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Applies one fluctuation tick (weight-removal cascade followed by the
/// weight gain) in place. A collapsed state is left untouched. If
/// `cascade_len` is non-null it receives the number of removal draws
/// (0 for a collapsed state).
///
/// # Safety
/// `state` and `rng` must be live handles; `cascade_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn csim_fluctuate(
    state: *mut CsimState,
    epsilon: f64,
    phase_dist: i32,
    rng: *mut CsimRng,
    cascade_len: *mut usize,
) -> CsimStatus {
    if state.is_null() || rng.is_null() {
        return CsimStatus::NullPointer;
    }
    let Some(dist) = phase_dist_of(phase_dist) else {
        return CsimStatus::InvalidArgument;
    };
    let params = match FluctuationParams::new(epsilon, 1.0, dist, 0) {
        Ok(p) => p,
        Err(err) => return status_of(&err),
    };
    match fluctuate(&mut (*state).0, &params, &mut (*rng).0) {
        Ok(record) => {
            if !cascade_len.is_null() {
                *cascade_len = record.map_or(0, |r| r.len());
            }
            CsimStatus::Ok
        }
        Err(err) => status_of(&err),
    }
}

/// Applies only the weight-removal cascade (total weight drops by exactly
/// `epsilon`).
///
/// # Safety
/// `state` and `rng` must be live handles; `cascade_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn csim_apply_nsf_cascade(
    state: *mut CsimState,
    epsilon: f64,
    phase_dist: i32,
    rng: *mut CsimRng,
    cascade_len: *mut usize,
) -> CsimStatus {
    if state.is_null() || rng.is_null() {
        return CsimStatus::NullPointer;
    }
    let Some(dist) = phase_dist_of(phase_dist) else {
        return CsimStatus::InvalidArgument;
    };
    match apply_nsf_cascade(&mut (*state).0, epsilon, dist, &mut (*rng).0) {
        Ok(record) => {
            if !cascade_len.is_null() {
                *cascade_len = record.len();
            }
            CsimStatus::Ok
        }
        Err(err) => status_of(&err),
    }
}

/// Applies only the weight gain (total weight rises by exactly `epsilon`).
///
/// # Safety
/// `state` and `rng` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn csim_apply_psf(
    state: *mut CsimState,
    epsilon: f64,
    phase_dist: i32,
    rng: *mut CsimRng,
) -> CsimStatus {
    if state.is_null() || rng.is_null() {
        return CsimStatus::NullPointer;
    }
    let Some(dist) = phase_dist_of(phase_dist) else {
        return CsimStatus::InvalidArgument;
    };
    match apply_psf(&mut (*state).0, epsilon, dist, &mut (*rng).0) {
        Ok(()) => CsimStatus::Ok,
        Err(err) => status_of(&err),
    }
}

/// Runs one trajectory to collapse or the step budget. Writes the surviving
/// packet index (-1 if the budget ran out) and the step count at collapse.
/// Deterministic in `(seed, trajectory_index)`.
///
/// # Safety
/// `weights`/`phases` must point to `len` doubles; the out-pointers must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn csim_run_trajectory(
    weights: *const f64,
    phases: *const f64,
    len: usize,
    epsilon: f64,
    phase_dist: i32,
    seed: u64,
    trajectory_index: u64,
    max_steps: u64,
    surviving_packet: *mut i64,
    steps: *mut u64,
) -> CsimStatus {
    if weights.is_null() || phases.is_null() || surviving_packet.is_null() || steps.is_null() {
        return CsimStatus::NullPointer;
    }
    let Some(dist) = phase_dist_of(phase_dist) else {
        return CsimStatus::InvalidArgument;
    };
    let params = match FluctuationParams::new(epsilon, 1.0, dist, seed) {
        Ok(p) => p,
        Err(err) => return status_of(&err),
    };
    let config = RunConfig {
        weights: std::slice::from_raw_parts(weights, len).to_vec(),
        phases: std::slice::from_raw_parts(phases, len).to_vec(),
        params,
        n_trajectories: 1,
        max_steps,
        record_every: 0,
        worker_count: 1,
    };
    match run_trajectory(&config, trajectory_index) {
        Ok(result) => {
            *surviving_packet = result.surviving_packet.map_or(-1, |i| i as i64);
            *steps = result.steps_to_collapse;
            CsimStatus::Ok
        }
        Err(err) => status_of(&err),
    }
}

/// Exact absorption probability at weight 1 for the single-packet walk
/// started from the grid point `x0` (1/epsilon must be an integer and `x0`
/// a multiple of epsilon).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csim_absorption_oracle(
    epsilon: f64,
    x0: f64,
    out: *mut f64,
) -> CsimStatus {
    if out.is_null() {
        return CsimStatus::NullPointer;
    }
    let scheme = match TransitionScheme::combined(epsilon) {
        Ok(s) => s,
        Err(err) => return status_of(&err),
    };
    match absorption_oracle(&scheme, x0) {
        Ok(w) => {
            *out = w;
            CsimStatus::Ok
        }
        Err(err) => status_of(&err),
    }
}

/// The quantum-selection time: the slowest relaxation time of the ensemble
/// matrix for the grid defined by `epsilon`, in units set by `tau`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn csim_selection_time(epsilon: f64, tau: f64, out: *mut f64) -> CsimStatus {
    if out.is_null() {
        return CsimStatus::NullPointer;
    }
    let result = build_stat_matrix(epsilon)
        .and_then(|m| eigen_spectrum(&m))
        .and_then(|s| relaxation_times(&s, tau));
    match result {
        Ok(times) => {
            *out = times.selection_time;
            CsimStatus::Ok
        }
        Err(err) => status_of(&err),
    }
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn csim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
