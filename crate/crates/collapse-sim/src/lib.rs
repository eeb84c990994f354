//! Simulator and verification suite for endogenous norm-fluctuation
//! collapse dynamics.
//!
//! A wave state is a list of mutually orthogonal packets carrying weights
//! (squared amplitude norms) and phases. At every tick a random nonlinear
//! fluctuation removes exactly `epsilon` of weight from one or more drawn
//! packets (destroying packets lighter than the remaining deficit) and
//! returns the same amount to another drawn packet. Iterated, this drives
//! any superposition to collapse onto a single surviving packet with
//! probability equal to its initial weight.
//!
//! The crate provides:
//! * [`state`]: packet states, norm bookkeeping and model parameters;
//! * [`fluct`]: the two semi-fluctuation operators, their cascade, and the
//!   phase-factor samplers;
//! * [`walk`]: the equivalent single-packet random walk with an exact
//!   absorption oracle;
//! * [`spectral`]: the tridiagonal ensemble matrix, its relaxation
//!   spectrum and the quantum-selection time;
//! * [`ensemble`]: reproducible parallel trajectory ensembles;
//! * [`conformance`]: named checks of every consistency criterion against
//!   standard quantum statistics;
//! * [`io`]: CSV/JSON serialization and config-file parsing for the
//!   `collapse-sim` command-line tool.

pub mod conformance;
pub mod ensemble;
pub mod error;
pub mod fluct;
pub mod io;
pub mod rng;
pub mod spectral;
pub mod state;
pub mod walk;

pub use conformance::{
    run_check, run_checks, CheckItem, CheckKind, CheckReport, ConformanceConfig,
};
pub use ensemble::{
    mean_amplitude_series, run_ensemble, run_trajectory, EnsembleStats, RunConfig, TimeSeries,
    TrajectoryResult,
};
pub use error::{Error, Result};
pub use fluct::{
    apply_nsf_cascade, apply_nsf_single, apply_psf, draw_packet, fluctuate, sample_phase_negative,
    sample_phase_positive, CascadeDraw, CascadeRecord, PhaseSample,
};
pub use rng::{derive_seed, trajectory_rng, SimRng};
pub use spectral::{
    asymptotic_selection_time, build_stat_matrix, eigen_spectrum, evolve_distribution,
    relaxation_times, RelaxationTimes, SpectralResult, StatMatrix,
};
pub use state::{FluctuationParams, PacketAmplitude, PhaseDist, WaveState};
pub use walk::{
    absorption_oracle, absorption_probability_offgrid, effective_probs, simulate_walk, Boundary,
    TransitionScheme, WalkGrid, WalkOutcome,
};
