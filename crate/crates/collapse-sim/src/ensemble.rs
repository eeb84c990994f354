//! Trajectory ensembles.
//!
//! A trajectory applies the fluctuation tick to one state until it collapses
//! or a step budget runs out. Ensembles aggregate survival counts,
//! collapse-time and cascade-length histograms, and (optionally) time series
//! of per-packet mean weights and mean complex amplitudes.
//!
//! Reproducibility contract: trajectory `i` draws from the ChaCha stream
//! `(seed, i)`, and partial sums are merged in fixed batch order, so the
//! output is identical for any worker count.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluct::fluctuate;
use crate::rng::trajectory_rng;
use crate::state::{FluctuationParams, WaveState};

/// Trajectories per reduction batch. Each batch is accumulated serially in
/// index order; batches are merged in index order. The constant is part of
/// the output contract: changing it reorders floating-point sums.
const BATCH_SIZE: u64 = 64;

/// Ensemble run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub weights: Vec<f64>,
    pub phases: Vec<f64>,
    pub params: FluctuationParams,
    pub n_trajectories: u64,
    pub max_steps: u64,
    /// Time-series sampling stride; 0 records no series (final counts only).
    pub record_every: u64,
    /// Worker threads; 0 picks the default for the machine. The statistics
    /// do not depend on this value.
    pub worker_count: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::NoTrajectories);
        }
        if self.max_steps == 0 {
            return Err(Error::NoSteps);
        }
        self.initial_state().map(|_| ())
    }

    pub fn initial_state(&self) -> Result<WaveState> {
        WaveState::new(&self.weights, &self.phases)
    }
}

/// Outcome of a single trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    /// The sole live packet after collapse; `None` if the step budget ran
    /// out first.
    pub surviving_packet: Option<usize>,
    /// Step index at which the state collapsed; `max_steps + 1` if it never
    /// did, so `surviving_packet.is_some() == (steps_to_collapse <= max_steps)`.
    pub steps_to_collapse: u64,
    /// Histogram of negative-cascade lengths over the trajectory.
    pub cascade_lengths: BTreeMap<u32, u64>,
}

/// Aggregated ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub total_trajectories: u64,
    /// Trajectories that collapsed within the step budget.
    pub resolved: u64,
    /// Trajectories cut off by the budget; reported separately and never
    /// folded into the survival counts, which would bias the survival law.
    pub unresolved: u64,
    /// Collapses won by each packet.
    pub survival_counts: Vec<u64>,
    /// steps-to-collapse histogram over resolved trajectories.
    pub collapse_steps: BTreeMap<u64, u64>,
    /// Negative-cascade length histogram over all fluctuation ticks.
    pub cascade_lengths: BTreeMap<u32, u64>,
    /// Optional per-packet time series; present iff `record_every > 0`.
    pub series: Option<TimeSeries>,
}

/// Per-packet ensemble means sampled at a stride. Row 0 is the initial
/// state, which all trajectories share, so it holds the initial weights and
/// amplitudes exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// Recorded step numbers: 0, s, 2s, ...
    pub steps: Vec<u64>,
    /// Mean weight per packet at each recorded step.
    pub mean_weights: Vec<Vec<f64>>,
    /// Mean complex amplitude per packet, split into re/im.
    pub mean_amp_re: Vec<Vec<f64>>,
    pub mean_amp_im: Vec<Vec<f64>>,
}

impl EnsembleStats {
    /// Survival frequency per packet over resolved trajectories.
    pub fn survival_frequencies(&self) -> Vec<f64> {
        if self.resolved == 0 {
            return vec![0.0; self.survival_counts.len()];
        }
        self.survival_counts
            .iter()
            .map(|&c| c as f64 / self.resolved as f64)
            .collect()
    }

    pub fn mean_steps_to_collapse(&self) -> f64 {
        if self.resolved == 0 {
            return f64::NAN;
        }
        let total: u128 = self
            .collapse_steps
            .iter()
            .map(|(&s, &c)| s as u128 * c as u128)
            .sum();
        total as f64 / self.resolved as f64
    }
}

/// Mean complex amplitude of one packet at each recorded step.
pub fn mean_amplitude_series(stats: &EnsembleStats, packet: usize) -> Result<Vec<Complex64>> {
    let series = stats.series.as_ref().ok_or(Error::SeriesNotRecorded)?;
    let n = stats.survival_counts.len();
    if packet >= n {
        return Err(Error::PacketOutOfRange {
            index: packet,
            len: n,
        });
    }
    Ok(series
        .mean_amp_re
        .iter()
        .zip(&series.mean_amp_im)
        .map(|(re, im)| Complex64::new(re[packet], im[packet]))
        .collect())
}

/// Runs one trajectory: fluctuation ticks until collapse or the budget.
/// Bit-exact for a fixed (seed, trajectory_index).
pub fn run_trajectory(config: &RunConfig, trajectory_index: u64) -> Result<TrajectoryResult> {
    config.validate()?;
    let mut acc = Accum::new(config);
    run_one(config, trajectory_index, &mut acc)
}

/// Runs the configured ensemble. Aggregation is associative and merged in a
/// fixed order, so any worker count gives identical statistics.
pub fn run_ensemble(config: &RunConfig) -> Result<EnsembleStats> {
    config.validate()?;
    if config.worker_count == 0 {
        run_ensemble_inner(config)
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.worker_count)
            .build()
            .map_err(|e| Error::WorkerPool(e.to_string()))?;
        pool.install(|| run_ensemble_inner(config))
    }
}

fn run_ensemble_inner(config: &RunConfig) -> Result<EnsembleStats> {
    let n = config.n_trajectories;
    let n_batches = n.div_ceil(BATCH_SIZE);
    let chunk_len = (rayon::current_num_threads().max(1) * 4) as usize;
    let batch_ids: Vec<u64> = (0..n_batches).collect();
    let mut master = Accum::new(config);
    for chunk in batch_ids.chunks(chunk_len) {
        let partials: Vec<Result<Accum>> = chunk
            .par_iter()
            .map(|&batch| {
                let mut acc = Accum::new(config);
                let start = batch * BATCH_SIZE;
                let end = (start + BATCH_SIZE).min(n);
                for index in start..end {
                    run_one(config, index, &mut acc)?;
                }
                Ok(acc)
            })
            .collect();
        for partial in partials {
            master.merge(partial?);
        }
    }
    Ok(master.finalize(config))
}

fn run_one(config: &RunConfig, index: u64, acc: &mut Accum) -> Result<TrajectoryResult> {
    let mut state = config.initial_state()?;
    let mut rng = trajectory_rng(config.params.seed, index);
    let mut cascade_lengths: BTreeMap<u32, u64> = BTreeMap::new();

    let mut record_index = 1; // row 0 is filled analytically
    let mut collapsed_at = if state.is_collapsed() {
        Some(0u64)
    } else {
        None
    };
    let mut step = 0u64;
    while collapsed_at.is_none() && step < config.max_steps {
        step += 1;
        let record = fluctuate(&mut state, &config.params, &mut rng)?
            .expect("state was checked to be uncollapsed");
        *cascade_lengths.entry(record.len() as u32).or_insert(0) += 1;
        if config.record_every > 0 && step.is_multiple_of(config.record_every) {
            acc.add_state(record_index, &state);
            record_index += 1;
        }
        if state.is_collapsed() {
            collapsed_at = Some(step);
        }
    }
    // A collapsed state is frozen; later samples all see the same values.
    while record_index < acc.record_count() {
        acc.add_state(record_index, &state);
        record_index += 1;
    }

    let result = match collapsed_at {
        Some(steps) => TrajectoryResult {
            surviving_packet: state.surviving_packet(),
            steps_to_collapse: steps,
            cascade_lengths,
        },
        None => TrajectoryResult {
            surviving_packet: None,
            steps_to_collapse: config.max_steps + 1,
            cascade_lengths,
        },
    };
    acc.add_result(&result);
    Ok(result)
}

/// Order-insensitive partial sums for one batch of trajectories.
struct Accum {
    packet_count: usize,
    recorded_steps: Vec<u64>,
    trajectories: u64,
    resolved: u64,
    unresolved: u64,
    survival_counts: Vec<u64>,
    collapse_steps: BTreeMap<u64, u64>,
    cascade_lengths: BTreeMap<u32, u64>,
    weight_sums: Vec<Vec<f64>>,
    amp_re_sums: Vec<Vec<f64>>,
    amp_im_sums: Vec<Vec<f64>>,
}

impl Accum {
    fn new(config: &RunConfig) -> Self {
        let packet_count = config.weights.len();
        let recorded_steps: Vec<u64> = match config.record_every {
            0 => Vec::new(),
            stride => (0..=config.max_steps / stride)
                .map(|k| k * stride)
                .collect(),
        };
        let rows = recorded_steps.len();
        Self {
            packet_count,
            recorded_steps,
            trajectories: 0,
            resolved: 0,
            unresolved: 0,
            survival_counts: vec![0; packet_count],
            collapse_steps: BTreeMap::new(),
            cascade_lengths: BTreeMap::new(),
            weight_sums: vec![vec![0.0; packet_count]; rows],
            amp_re_sums: vec![vec![0.0; packet_count]; rows],
            amp_im_sums: vec![vec![0.0; packet_count]; rows],
        }
    }

    fn record_count(&self) -> usize {
        self.recorded_steps.len()
    }

    fn add_state(&mut self, row: usize, state: &WaveState) {
        for (i, packet) in state.packets().iter().enumerate() {
            self.weight_sums[row][i] += packet.weight();
            let amp = packet.amplitude();
            self.amp_re_sums[row][i] += amp.re;
            self.amp_im_sums[row][i] += amp.im;
        }
    }

    fn add_result(&mut self, result: &TrajectoryResult) {
        self.trajectories += 1;
        match result.surviving_packet {
            Some(packet) => {
                self.resolved += 1;
                self.survival_counts[packet] += 1;
                *self
                    .collapse_steps
                    .entry(result.steps_to_collapse)
                    .or_insert(0) += 1;
            }
            None => self.unresolved += 1,
        }
        for (&len, &count) in &result.cascade_lengths {
            *self.cascade_lengths.entry(len).or_insert(0) += count;
        }
    }

    fn merge(&mut self, other: Accum) {
        self.trajectories += other.trajectories;
        self.resolved += other.resolved;
        self.unresolved += other.unresolved;
        for (a, b) in self.survival_counts.iter_mut().zip(&other.survival_counts) {
            *a += b;
        }
        for (step, count) in other.collapse_steps {
            *self.collapse_steps.entry(step).or_insert(0) += count;
        }
        for (len, count) in other.cascade_lengths {
            *self.cascade_lengths.entry(len).or_insert(0) += count;
        }
        for row in 0..self.weight_sums.len() {
            for i in 0..self.packet_count {
                self.weight_sums[row][i] += other.weight_sums[row][i];
                self.amp_re_sums[row][i] += other.amp_re_sums[row][i];
                self.amp_im_sums[row][i] += other.amp_im_sums[row][i];
            }
        }
    }

    fn finalize(self, config: &RunConfig) -> EnsembleStats {
        let series = if self.recorded_steps.is_empty() {
            None
        } else {
            let n = self.trajectories as f64;
            let mut mean_weights: Vec<Vec<f64>> = self
                .weight_sums
                .iter()
                .map(|row| row.iter().map(|&s| s / n).collect())
                .collect();
            let mut mean_amp_re: Vec<Vec<f64>> = self
                .amp_re_sums
                .iter()
                .map(|row| row.iter().map(|&s| s / n).collect())
                .collect();
            let mut mean_amp_im: Vec<Vec<f64>> = self
                .amp_im_sums
                .iter()
                .map(|row| row.iter().map(|&s| s / n).collect())
                .collect();
            // Every trajectory starts from the same state, so the step-0
            // means are the initial values exactly, free of summation noise.
            let initial = config.initial_state().expect("validated before running");
            for (i, packet) in initial.packets().iter().enumerate() {
                mean_weights[0][i] = packet.weight();
                let amp = packet.amplitude();
                mean_amp_re[0][i] = amp.re;
                mean_amp_im[0][i] = amp.im;
            }
            Some(TimeSeries {
                steps: self.recorded_steps,
                mean_weights,
                mean_amp_re,
                mean_amp_im,
            })
        };
        EnsembleStats {
            total_trajectories: self.trajectories,
            resolved: self.resolved,
            unresolved: self.unresolved,
            survival_counts: self.survival_counts,
            collapse_steps: self.collapse_steps,
            cascade_lengths: self.cascade_lengths,
            series,
        }
    }
}
