//! Named consistency checks against standard quantum statistics.
//!
//! Each check compares measured ensemble quantities with their analytic
//! targets and reports per-item results. Tolerances decompose as an analytic
//! bound plus a statistical term (3 sigma for means, 4 sigma for frequency
//! comparisons), so doubling the sample count shrinks only the statistical
//! part. Every check derives its own sub-stream from the master seed; the
//! whole suite is deterministic end to end and independent of worker count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, RunConfig};
use crate::error::{Error, Result};
use crate::fluct::{apply_nsf_cascade, apply_psf, draw_packet, fluctuate};
use crate::rng::{derive_seed, trajectory_rng};
use crate::spectral::{
    asymptotic_selection_time, build_stat_matrix, eigen_spectrum, evolve_distribution,
    relaxation_times,
};
use crate::state::{FluctuationParams, PacketAmplitude, PhaseDist, WaveState};
use crate::walk::{absorption_oracle, TransitionScheme, WalkGrid};

/// Grid size from which the asymptotic selection-time window
/// [0.9, 1.1] * tau/(2 eps^2) provably contains the exact value
/// -tau / ln(1 - 2 eps^2 / (1 - eps)): the ratio grows monotonically with
/// the grid size and first enters the window at 1/eps = 11 (0.90081; it is
/// 0.88997 at 1/eps = 10). Below this the ratio is reported without gating
/// the check.
pub const SELECTION_RATIO_MIN_STEPS: usize = 11;

/// Shared configuration for the checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceConfig {
    pub epsilon: f64,
    pub tau: f64,
    /// Sample/trajectory count used by the stochastic checks.
    pub trajectories: u64,
    pub seed: u64,
    /// Initial weights for the survival check; when absent a grid-aligned
    /// two-packet state near (0.3, 0.7) is used. Survival equals the initial
    /// weight exactly only when every weight is a multiple of epsilon, since
    /// off-grid trajectories wander through the sub-epsilon band where mean
    /// weights carry O(eps^2) per-tick deviations.
    pub weights: Option<Vec<f64>>,
    pub phase_dist: PhaseDist,
    pub worker_count: usize,
}

impl ConformanceConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            tau: 1.0,
            trajectories: 10_000,
            seed: 0,
            weights: None,
            phase_dist: PhaseDist::ThreePoint,
            worker_count: 0,
        }
    }
}

/// One measured-vs-expected comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub label: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Informational items report a value without gating the check.
    pub asserted: bool,
}

impl CheckItem {
    fn asserted(label: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            expected,
            tolerance,
            pass: (measured - expected).abs() <= tolerance,
            asserted: true,
        }
    }

    fn into_informational(mut self) -> Self {
        self.asserted = false;
        self
    }
}

/// Result of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub samples: u64,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    fn new(name: &str, samples: u64, items: Vec<CheckItem>) -> Self {
        let pass = items.iter().all(|i| i.pass || !i.asserted);
        Self {
            name: name.to_string(),
            pass,
            samples,
            items,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "[{}] {} (samples = {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.samples
        )?;
        for item in &self.items {
            writeln!(
                f,
                "  {} {}: measured {:.6e}, expected {:.6e}, tolerance {:.3e}{}",
                if item.pass { "ok  " } else { "FAIL" },
                item.label,
                item.measured,
                item.expected,
                item.tolerance,
                if item.asserted {
                    ""
                } else {
                    " (informational)"
                }
            )?;
        }
        Ok(())
    }
}

/// The named checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Axiom,
    NsfMeans,
    PsfMeans,
    Additivity,
    Walk,
    Spectral,
}

impl CheckKind {
    pub const ALL: [CheckKind; 6] = [
        CheckKind::Axiom,
        CheckKind::NsfMeans,
        CheckKind::PsfMeans,
        CheckKind::Additivity,
        CheckKind::Walk,
        CheckKind::Spectral,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Axiom => "axiom",
            CheckKind::NsfMeans => "nsf-means",
            CheckKind::PsfMeans => "psf-means",
            CheckKind::Additivity => "additivity",
            CheckKind::Walk => "walk",
            CheckKind::Spectral => "spectral",
        }
    }
}

impl FromStr for CheckKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "axiom" => Ok(CheckKind::Axiom),
            "nsf-means" => Ok(CheckKind::NsfMeans),
            "psf-means" => Ok(CheckKind::PsfMeans),
            "additivity" => Ok(CheckKind::Additivity),
            "walk" => Ok(CheckKind::Walk),
            "spectral" => Ok(CheckKind::Spectral),
            other => Err(Error::UnknownCheck(other.to_string())),
        }
    }
}

/// Runs one check.
pub fn run_check(kind: CheckKind, config: &ConformanceConfig) -> Result<CheckReport> {
    match kind {
        CheckKind::Axiom => check_measurement_axiom(config),
        CheckKind::NsfMeans => check_nsf_means(config),
        CheckKind::PsfMeans => check_psf_means(config),
        CheckKind::Additivity => check_additivity(config),
        CheckKind::Walk => check_walk_equivalence(config),
        CheckKind::Spectral => check_spectral(config),
    }
}

/// Runs a set of checks in parallel. Reports come back in the order given;
/// each check is internally deterministic, so the combined output is too.
pub fn run_checks(kinds: &[CheckKind], config: &ConformanceConfig) -> Result<Vec<CheckReport>> {
    kinds
        .par_iter()
        .map(|&kind| run_check(kind, config))
        .collect()
}

/// Welford accumulator for sample means and their standard errors.
#[derive(Debug, Clone, Default)]
pub struct OnlineStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl OnlineStats {
    pub fn push(&mut self, value: f64) {
        self.n += 1;
        let delta = value - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (value - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / ((self.n - 1) as f64 * self.n as f64)).sqrt()
    }
}

fn binomial_sigma(p: f64, n: u64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / n.max(1) as f64).sqrt()
}

/// Grid-aligned two-packet default near (0.3, 0.7).
fn default_axiom_weights(eps: f64) -> Result<Vec<f64>> {
    let grid = WalkGrid::new(eps)?;
    let m_top = grid.step_count();
    let m = ((0.3 * m_top as f64).round() as usize).clamp(1, m_top - 1);
    let x = grid.x(m);
    Ok(vec![x, 1.0 - x])
}

/// Survival law: each packet's collapse-win frequency equals its initial
/// weight, and the walk oracle reproduces the same law exactly.
fn check_measurement_axiom(config: &ConformanceConfig) -> Result<CheckReport> {
    let seed = derive_seed(config.seed, 1);
    let weights = match &config.weights {
        Some(w) => w.clone(),
        None => default_axiom_weights(config.epsilon)?,
    };
    let max_steps = (1000.0 * asymptotic_selection_time(config.epsilon, 1.0)).ceil() as u64;
    let run = RunConfig {
        phases: vec![0.0; weights.len()],
        weights: weights.clone(),
        params: FluctuationParams::new(config.epsilon, config.tau, config.phase_dist, seed)?,
        n_trajectories: config.trajectories,
        max_steps,
        record_every: 0,
        worker_count: config.worker_count,
    };
    let stats = run_ensemble(&run)?;
    let freqs = stats.survival_frequencies();

    let mut items = Vec::new();
    for (i, (&w, &freq)) in weights.iter().zip(&freqs).enumerate() {
        let sigma = binomial_sigma(w, stats.resolved);
        items.push(CheckItem::asserted(
            format!("survival frequency of packet {i}"),
            freq,
            w,
            3.0 * sigma,
        ));
    }
    items.push(CheckItem::asserted(
        "unresolved trajectory fraction",
        stats.unresolved as f64 / stats.total_trajectories as f64,
        0.0,
        1e-3,
    ));

    // Exact companion: the absorption oracle must return the start weight on
    // every grid point, for the operator-induced scheme and for an arbitrary
    // miss profile.
    let grid = WalkGrid::new(config.epsilon)?;
    let schemes = [
        TransitionScheme::combined(config.epsilon)?,
        TransitionScheme::generic(config.epsilon, |x| 1.0 - 0.8 * x * (1.0 - x) - 0.1)?,
    ];
    let mut worst = 0.0f64;
    for scheme in &schemes {
        for m in 0..=grid.step_count() {
            let x0 = grid.x(m);
            worst = worst.max((absorption_oracle(scheme, x0)? - x0).abs());
        }
    }
    items.push(CheckItem::asserted(
        "largest oracle deviation over the grid",
        worst,
        0.0,
        1e-10,
    ));

    Ok(CheckReport::new("axiom", config.trajectories, items))
}

/// Per-packet statistics of one weight-removal cascade on replicas of a
/// fixed state.
struct CascadeSample {
    weight: Vec<OnlineStats>,
    amp_re: Vec<OnlineStats>,
    amp_im: Vec<OnlineStats>,
}

fn sample_cascades(
    weights: &[f64],
    eps: f64,
    dist: PhaseDist,
    seed: u64,
    samples: u64,
) -> Result<CascadeSample> {
    let n = weights.len();
    let mut out = CascadeSample {
        weight: vec![OnlineStats::default(); n],
        amp_re: vec![OnlineStats::default(); n],
        amp_im: vec![OnlineStats::default(); n],
    };
    let template = WaveState::new(weights, &vec![0.0; n])?;
    let mut rng = trajectory_rng(seed, 0);
    for _ in 0..samples {
        let mut state = template.clone();
        apply_nsf_cascade(&mut state, eps, dist, &mut rng)?;
        for i in 0..n {
            let initial_amp = template.weight(i).sqrt();
            let amp = state.packets()[i].amplitude();
            out.weight[i].push(state.weight(i));
            out.amp_re[i].push(amp.re / initial_amp);
            out.amp_im[i].push(amp.im / initial_amp);
        }
    }
    Ok(out)
}

/// Mean effect of the weight-removal half. Heavy packets contract by
/// (1 - eps) in both weight and amplitude; packets below the step carry an
/// exactly computable excess delta bounded by eps^2/4, and their amplitude
/// factor becomes 1 - x instead of 1 - eps.
fn check_nsf_means(config: &ConformanceConfig) -> Result<CheckReport> {
    let eps = config.epsilon;
    let samples = config.trajectories;
    let dist = config.phase_dist;
    let mut items = Vec::new();

    // All packets heavy: contraction is exact.
    let heavy: Vec<f64> = if eps <= 0.4 {
        vec![0.4, 0.6]
    } else {
        vec![0.5, 0.5]
    };
    let sample = sample_cascades(&heavy, eps, dist, derive_seed(config.seed, 2), samples)?;
    for (i, &weight) in heavy.iter().enumerate() {
        items.push(CheckItem::asserted(
            format!("heavy state: mean weight of packet {i}"),
            sample.weight[i].mean(),
            (1.0 - eps) * weight,
            3.0 * sample.weight[i].std_error(),
        ));
        items.push(CheckItem::asserted(
            format!("heavy state: amplitude factor of packet {i} (re)"),
            sample.amp_re[i].mean(),
            1.0 - eps,
            3.0 * sample.amp_re[i].std_error(),
        ));
        items.push(CheckItem::asserted(
            format!("heavy state: amplitude factor of packet {i} (im)"),
            sample.amp_im[i].mean(),
            0.0,
            3.0 * sample.amp_im[i].std_error(),
        ));
    }

    // One light packet at half the step: the mean-weight excess reaches its
    // extreme value eps^2/4 and the heavy partner gives it back.
    let x = eps / 2.0;
    let light = vec![x, 1.0 - x];
    let sample = sample_cascades(&light, eps, dist, derive_seed(config.seed, 3), samples)?;
    let delta_max = eps * eps / 4.0;
    items.push(CheckItem::asserted(
        "light packet at eps/2: weight excess over (1 - eps) x",
        sample.weight[0].mean() - (1.0 - eps) * x,
        delta_max,
        3.0 * sample.weight[0].std_error(),
    ));
    items.push(CheckItem::asserted(
        "heavy partner: weight deficit",
        sample.weight[1].mean() - (1.0 - eps) * (1.0 - x),
        -delta_max,
        3.0 * sample.weight[1].std_error(),
    ));
    items.push(CheckItem::asserted(
        "light packet: amplitude factor (re) is 1 - x",
        sample.amp_re[0].mean(),
        1.0 - x,
        3.0 * sample.amp_re[0].std_error(),
    ));
    items.push(CheckItem::asserted(
        "light packet: amplitude factor (im)",
        sample.amp_im[0].mean(),
        0.0,
        3.0 * sample.amp_im[0].std_error(),
    ));
    // The heavy partner's amplitude factor picks up an O(eps^2) shift from
    // the cascades the light packet triggers.
    items.push(CheckItem::asserted(
        "heavy partner: amplitude factor (re) near 1 - eps",
        sample.amp_re[1].mean(),
        1.0 - eps,
        delta_max / (1.0 - eps) + 3.0 * sample.amp_re[1].std_error(),
    ));

    // Two light packets whose joint weight covers the step: excesses stay
    // within the single-packet bound.
    let (xa, xb) = (0.4 * eps, 0.8 * eps);
    let trio = vec![xa, xb, 1.0 - xa - xb];
    let sample = sample_cascades(&trio, eps, dist, derive_seed(config.seed, 4), samples)?;
    for (i, &xi) in [xa, xb].iter().enumerate() {
        let bound = eps * eps * (xi / eps) * (1.0 - xi / eps);
        items.push(CheckItem::asserted(
            format!("two light packets (joint >= step): excess of packet {i} within bound"),
            sample.weight[i].mean() - (1.0 - eps) * xi,
            0.0,
            bound + 3.0 * sample.weight[i].std_error(),
        ));
    }

    // Two light packets whose joint weight is below the step: the excess has
    // a closed form on the rescaled sub-grid.
    let (xa, xb) = (0.3 * eps, 0.3 * eps);
    let trio = vec![xa, xb, 1.0 - xa - xb];
    let sample = sample_cascades(&trio, eps, dist, derive_seed(config.seed, 5), samples)?;
    for (i, (&xi, &xo)) in [(xa, xb), (xb, xa)].iter().map(|(a, b)| (a, b)).enumerate() {
        let u = xi / (eps * (1.0 - xo));
        let delta = eps * eps * (1.0 - xo) * u * (1.0 - u);
        items.push(CheckItem::asserted(
            format!("two light packets (joint < step): excess of packet {i}"),
            sample.weight[i].mean() - (1.0 - eps) * xi,
            delta,
            3.0 * sample.weight[i].std_error(),
        ));
    }

    // Equal packets: by symmetry the contraction is exact whatever the size.
    let n_equal = 16usize;
    let equal = vec![1.0 / n_equal as f64; n_equal];
    let sample = sample_cascades(&equal, eps, dist, derive_seed(config.seed, 6), samples)?;
    let mut worst = 0.0f64;
    let mut worst_tol = 0.0f64;
    for i in 0..n_equal {
        let dev = sample.weight[i].mean() - (1.0 - eps) / n_equal as f64;
        if dev.abs() > worst.abs() {
            worst = dev;
            worst_tol = 3.0 * sample.weight[i].std_error();
        }
    }
    items.push(CheckItem::asserted(
        "sixteen equal packets: worst mean-weight deviation",
        worst,
        0.0,
        worst_tol,
    ));

    Ok(CheckReport::new("nsf-means", samples, items))
}

/// Mean effect of the weight-gain half on a population of reduced states:
/// weights scale by 1/(1 - eps) and mean amplitudes are left untouched.
fn check_psf_means(config: &ConformanceConfig) -> Result<CheckReport> {
    let eps = config.epsilon;
    let samples = config.trajectories;
    let mut items = Vec::new();

    for (tag, shares) in [("uniform", vec![0.5, 0.5]), ("skewed", vec![0.3, 0.7])] {
        let reduced: Vec<f64> = shares.iter().map(|s| s * (1.0 - eps)).collect();
        let template = WaveState::from_raw(
            reduced
                .iter()
                .map(|&w| PacketAmplitude::new(w, 0.0))
                .collect::<Result<Vec<_>>>()?,
        );
        let mut rng = trajectory_rng(derive_seed(config.seed, 7), tag.len() as u64);
        let n = shares.len();
        let mut weight = vec![OnlineStats::default(); n];
        let mut amp_re = vec![OnlineStats::default(); n];
        let mut amp_im = vec![OnlineStats::default(); n];
        for _ in 0..samples {
            let mut state = template.clone();
            apply_psf(&mut state, eps, config.phase_dist, &mut rng)?;
            for i in 0..n {
                let initial_amp = reduced[i].sqrt();
                let amp = state.packets()[i].amplitude();
                weight[i].push(state.weight(i));
                amp_re[i].push(amp.re / initial_amp);
                amp_im[i].push(amp.im / initial_amp);
            }
        }
        for i in 0..n {
            items.push(CheckItem::asserted(
                format!("{tag} population: mean weight of packet {i} rescaled"),
                weight[i].mean(),
                reduced[i] / (1.0 - eps),
                3.0 * weight[i].std_error(),
            ));
            items.push(CheckItem::asserted(
                format!("{tag} population: amplitude factor of packet {i} (re)"),
                amp_re[i].mean(),
                1.0,
                3.0 * amp_re[i].std_error(),
            ));
            items.push(CheckItem::asserted(
                format!("{tag} population: amplitude factor of packet {i} (im)"),
                amp_im[i].mean(),
                0.0,
                3.0 * amp_im[i].std_error(),
            ));
        }
    }

    // A single live packet is hit with probability one and lands on weight
    // one deterministically.
    let mut state = WaveState::from_raw(vec![
        PacketAmplitude::destroyed(),
        PacketAmplitude::new(1.0 - eps, 0.0)?,
    ]);
    let mut rng = trajectory_rng(derive_seed(config.seed, 8), 0);
    apply_psf(&mut state, eps, config.phase_dist, &mut rng)?;
    items.push(CheckItem::asserted(
        "single live packet: restored weight",
        state.weight(1),
        1.0,
        1e-12,
    ));
    items.push(CheckItem::asserted(
        "single live packet: destroyed partner stays destroyed",
        state.weight(0),
        0.0,
        0.0,
    ));

    Ok(CheckReport::new("psf-means", samples, items))
}

/// Additivity of the draw rule: a pair of packets is hit as often as the
/// merged packet of the combined weight, both in exact arithmetic and in
/// sampled frequencies.
fn check_additivity(config: &ConformanceConfig) -> Result<CheckReport> {
    let samples = config.trajectories;
    let mut items = Vec::new();

    let state = WaveState::new(&[0.2, 0.3, 0.5], &[0.0; 3])?;
    let merged_weight = state.weight(0) + state.weight(1);
    let merged = WaveState::new(&[merged_weight, state.weight(2)], &[0.0; 2])?;

    // Exact arithmetic: the pair probability and the merged probability are
    // the same ratio of the same floats.
    let total = state.total_weight();
    let pair_prob = (state.weight(0) + state.weight(1)) / total;
    let merged_prob = merged.weight(0) / merged.total_weight();
    items.push(CheckItem::asserted(
        "draw rule: pair probability equals merged probability",
        pair_prob - merged_prob,
        0.0,
        0.0,
    ));
    let all_prob = (state.weight(0) + state.weight(1) + state.weight(2)) / total;
    items.push(CheckItem::asserted(
        "draw rule: probability of the full set is one",
        all_prob,
        1.0,
        1e-15,
    ));

    // Sampled frequencies, two independent streams.
    let mut rng_pair = trajectory_rng(derive_seed(config.seed, 9), 0);
    let mut rng_merged = trajectory_rng(derive_seed(config.seed, 9), 1);
    let mut pair_hits = 0u64;
    let mut merged_hits = 0u64;
    for _ in 0..samples {
        if draw_packet(&state, &mut rng_pair)? <= 1 {
            pair_hits += 1;
        }
        if draw_packet(&merged, &mut rng_merged)? == 0 {
            merged_hits += 1;
        }
    }
    let f_pair = pair_hits as f64 / samples as f64;
    let f_merged = merged_hits as f64 / samples as f64;
    let pooled = (pair_hits + merged_hits) as f64 / (2 * samples) as f64;
    let sigma_diff = (pooled * (1.0 - pooled) * 2.0 / samples as f64).sqrt();
    items.push(CheckItem::asserted(
        "sampled pair frequency vs merged frequency",
        f_pair - f_merged,
        0.0,
        4.0 * sigma_diff,
    ));

    // A destroyed packet joined to the pair draws through the identical
    // cumulative scan, so the counts agree exactly on the same stream.
    let padded = WaveState::new(&[0.2, 0.3, 0.5, 0.0], &[0.0; 4])?;
    let mut rng_a = trajectory_rng(derive_seed(config.seed, 10), 0);
    let mut rng_b = trajectory_rng(derive_seed(config.seed, 10), 0);
    let mut mismatches = 0u64;
    for _ in 0..samples.min(100_000) {
        let a = draw_packet(&state, &mut rng_a)?;
        let b = draw_packet(&padded, &mut rng_b)?;
        if a != b {
            mismatches += 1;
        }
    }
    items.push(CheckItem::asserted(
        "destroyed packet added to the state never changes a draw",
        mismatches as f64,
        0.0,
        0.0,
    ));

    Ok(CheckReport::new("additivity", samples, items))
}

/// The two-packet marginal of the full tick reproduces the combined
/// transition scheme.
fn check_walk_equivalence(config: &ConformanceConfig) -> Result<CheckReport> {
    let eps = config.epsilon;
    let samples = config.trajectories;
    let scheme = TransitionScheme::combined(eps)?;
    let mut items = Vec::new();

    let mut points = vec![0.5, eps, 1.0 - eps];
    points.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let params = FluctuationParams::new(eps, config.tau, config.phase_dist, 0)?;
    for (pi, &x) in points.iter().enumerate() {
        let (p, q, r) = scheme.transition_probs(x)?;
        let template = WaveState::new(&[x, 1.0 - x], &[0.0, 0.0])?;
        let mut rng = trajectory_rng(derive_seed(config.seed, 11), pi as u64);
        let (mut down, mut stay, mut up) = (0u64, 0u64, 0u64);
        for _ in 0..samples {
            let mut state = template.clone();
            fluctuate(&mut state, &params, &mut rng)?;
            let w = state.weight(0);
            if w < x - eps / 2.0 {
                down += 1;
            } else if w > x + eps / 2.0 {
                up += 1;
            } else {
                stay += 1;
            }
        }
        for (label, count, expected) in [("down", down, p), ("stay", stay, q), ("up", up, r)] {
            items.push(CheckItem::asserted(
                format!("one-tick marginal at x = {x}: {label}"),
                count as f64 / samples as f64,
                expected,
                4.0 * binomial_sigma(expected, samples),
            ));
        }
    }

    // The low band row and the bulk row coincide at x = eps: both reduce to
    // p = r = (1 - q) / 2.
    let q_at_eps = scheme.miss_probability(eps);
    let (p_bulk, _, _) = scheme.transition_probs(eps)?;
    let p_band = eps * (1.0 - q_at_eps) / (eps + eps);
    items.push(CheckItem::asserted(
        "band rows agree at x = eps",
        p_bulk - p_band,
        0.0,
        1e-12,
    ));

    // Mirror symmetry of the scheme under x <-> 1 - x with the move
    // directions swapped.
    let (p_lo, _, r_lo) = scheme.transition_probs(eps)?;
    let (p_hi, _, r_hi) = scheme.transition_probs(1.0 - eps)?;
    items.push(CheckItem::asserted(
        "mirror symmetry p(eps) = r(1 - eps)",
        p_lo - r_hi,
        0.0,
        1e-12,
    ));
    items.push(CheckItem::asserted(
        "mirror symmetry r(eps) = p(1 - eps)",
        r_lo - p_hi,
        0.0,
        1e-12,
    ));

    Ok(CheckReport::new("walk", samples, items))
}

/// Spectral structure of the ensemble matrix: the two absorbed modes sit at
/// eigenvalue one, the slowest interior mode matches its closed form, and
/// long-time evolution reproduces the absorption oracle.
fn check_spectral(config: &ConformanceConfig) -> Result<CheckReport> {
    let eps = config.epsilon;
    let matrix = build_stat_matrix(eps)?;
    let m_top = matrix.step_count();
    let spectrum = eigen_spectrum(&matrix)?;
    let ev = spectrum.eigenvalues();
    let mut items = Vec::new();

    items.push(CheckItem::asserted("largest eigenvalue", ev[0], 1.0, 1e-10));
    items.push(CheckItem::asserted("second eigenvalue", ev[1], 1.0, 1e-10));
    let analytic_gap = 1.0 - 2.0 * eps * eps / (1.0 - eps);
    items.push(CheckItem::asserted(
        "slowest interior mode matches its closed form",
        ev[2],
        analytic_gap,
        1e-10,
    ));
    items.push(CheckItem::asserted(
        "biorthonormality defect of the eigenbasis",
        spectrum.biorthonormality_defect(),
        0.0,
        1e-8,
    ));

    let times = relaxation_times(&spectrum, config.tau)?;
    let ratio = times.selection_time / asymptotic_selection_time(eps, config.tau);
    let ratio_item = CheckItem::asserted(
        "selection time over its asymptotic estimate",
        ratio,
        1.0,
        0.1,
    );
    items.push(if m_top >= SELECTION_RATIO_MIN_STEPS {
        ratio_item
    } else {
        // The exact gap keeps the ratio below 0.9 on coarse grids (0.890 at
        // M = 10); it enters the 10% window from M = 11 on.
        ratio_item.into_informational()
    });

    // Long-time evolution against the exact oracle.
    let m0 = ((0.3 * m_top as f64).round() as usize).clamp(1, m_top - 1);
    let x0 = m0 as f64 * eps;
    let steps = (100.0 * times.selection_time / config.tau).ceil().max(1.0) as u64;
    let mut phi0 = vec![0.0; matrix.dimension()];
    phi0[m0] = 1.0;
    let phi = evolve_distribution(&matrix, &phi0, steps)?;
    let scheme = TransitionScheme::combined(eps)?;
    let oracle = absorption_oracle(&scheme, x0)?;
    items.push(CheckItem::asserted(
        format!("absorbed mass after {steps} ticks vs oracle"),
        phi[m_top],
        oracle,
        1e-3,
    ));
    let sum: f64 = crate::state::neumaier_sum(phi.iter().copied());
    items.push(CheckItem::asserted(
        "probability conservation over the evolution",
        sum,
        1.0,
        1e-12,
    ));

    Ok(CheckReport::new("spectral", 0, items))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast_config(eps: f64) -> ConformanceConfig {
        ConformanceConfig {
            trajectories: 4000,
            seed: 12345,
            worker_count: 1,
            ..ConformanceConfig::new(eps)
        }
    }

    #[test]
    fn axiom_check_passes_on_grid_states() {
        let report = run_check(CheckKind::Axiom, &fast_config(0.1)).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn axiom_default_weights_align_to_the_grid() {
        assert_eq!(
            default_axiom_weights(0.1).unwrap(),
            vec![0.30000000000000004, 0.7]
        );
        assert_eq!(default_axiom_weights(0.25).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn nsf_means_check_passes() {
        let report = run_check(CheckKind::NsfMeans, &fast_config(0.1)).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn psf_means_check_passes() {
        let report = run_check(CheckKind::PsfMeans, &fast_config(0.1)).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn additivity_check_passes() {
        let report = run_check(CheckKind::Additivity, &fast_config(0.1)).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn walk_check_passes() {
        let report = run_check(CheckKind::Walk, &fast_config(0.1)).unwrap();
        assert!(report.pass, "{report}");
    }

    #[test]
    fn spectral_check_passes() {
        let report = run_check(CheckKind::Spectral, &fast_config(0.1)).unwrap();
        assert!(report.pass, "{report}");
        // The asymptotic ratio is informational on this coarse grid.
        let ratio = report
            .items
            .iter()
            .find(|i| i.label.contains("selection time"))
            .unwrap();
        assert!(!ratio.asserted);
        assert!((ratio.measured - 0.890).abs() < 0.001);
    }

    #[test]
    fn spectral_check_asserts_ratio_on_fine_grids() {
        let report = run_check(CheckKind::Spectral, &fast_config(0.05)).unwrap();
        assert!(report.pass, "{report}");
        let ratio = report
            .items
            .iter()
            .find(|i| i.label.contains("selection time"))
            .unwrap();
        assert!(ratio.asserted);
        assert!(ratio.pass);
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = fast_config(0.1);
        let a = run_check(CheckKind::NsfMeans, &cfg).unwrap();
        let b = run_check(CheckKind::NsfMeans, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn check_kind_parses() {
        assert_eq!("axiom".parse::<CheckKind>().unwrap(), CheckKind::Axiom);
        assert_eq!(
            "nsf-means".parse::<CheckKind>().unwrap(),
            CheckKind::NsfMeans
        );
        assert!("bogus".parse::<CheckKind>().is_err());
    }

    #[test]
    fn full_suite_on_the_coarse_grid() {
        let cfg = fast_config(0.25);
        let reports = run_checks(&CheckKind::ALL, &cfg).unwrap();
        assert_eq!(reports.len(), 6);
        for report in &reports {
            assert!(report.pass, "{report}");
        }
    }
}
