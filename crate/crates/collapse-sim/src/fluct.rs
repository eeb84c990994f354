//! The random nonlinear semi-fluctuation operators.
//!
//! One fluctuation tick is a negative semi-fluctuation (a cascade of weight
//! removals totalling exactly epsilon) followed by a positive
//! semi-fluctuation (a single weight gain of exactly epsilon), each landing
//! on a packet drawn proportionally to its share of the current total
//! weight. Between the two halves the total weight sits at 1 - epsilon; the
//! pair restores it to 1.
//!
//! Randomness budget, for bit-exact replay from a seed:
//! * one uniform f64 per packet draw ([`draw_packet`]),
//! * one uniform f64 per three-point phase sample (none for the
//!   deterministic-real distribution, none when a draw destroys a packet).

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::state::{FluctuationParams, PhaseDist, WaveState};

/// Tolerance on the entry preconditions of the operators (total weight 1
/// before a fluctuation, 1 - epsilon before the positive half).
pub const TOTAL_WEIGHT_TOLERANCE: f64 = 1e-9;

/// A weight reduction that would leave less than this is a destruction.
///
/// Weights reach the destruction boundary through chains of +/- epsilon
/// updates whose rounding noise is far below this ball, so the snap only
/// fires where the exact model destroys the packet anyway; without it a
/// one-ulp leftover would survive as an effectively unkillable dust packet,
/// since its draw probability is its weight. Each snap moves the total
/// weight by less than the ladder tolerance 1e-12.
pub const WEIGHT_DUST: f64 = 1e-12;

/// A realized unit phase factor. Under the three-point distribution the
/// factor is one of {1, +i, -i}; it is stored as an angle so its modulus is
/// 1 exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    angle: f64,
}

impl PhaseSample {
    /// The factor 1.
    pub const REAL_ONE: Self = Self { angle: 0.0 };
    /// The factor +i.
    pub const PLUS_I: Self = Self { angle: FRAC_PI_2 };
    /// The factor -i.
    pub const MINUS_I: Self = Self { angle: -FRAC_PI_2 };

    /// A custom unit factor exp(i angle), for distributions beyond the
    /// built-in ones.
    pub fn from_angle(angle: f64) -> Self {
        Self { angle }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn value(&self) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(1.0, self.angle)
    }
}

/// Record of one negative semi-fluctuation cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeRecord {
    /// (packet index, weight removed) for every draw, in order. Every draw
    /// except possibly the last destroyed its packet.
    pub draws: Vec<CascadeDraw>,
    /// The reduction applied to the final surviving packet, or 0.0 if the
    /// last draw destroyed its packet exactly.
    pub residual_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeDraw {
    pub packet: usize,
    pub weight_removed: f64,
}

impl CascadeRecord {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Total weight removed over the cascade; equals the step epsilon up to
    /// the compensated-subtraction bookkeeping.
    pub fn total_removed(&self) -> f64 {
        crate::state::neumaier_sum(self.draws.iter().map(|d| d.weight_removed))
    }
}

/// Draws a packet index with probability weight / total weight. Destroyed
/// packets carry zero weight and are never drawn. Consumes one uniform f64.
pub fn draw_packet<R: Rng + ?Sized>(state: &WaveState, rng: &mut R) -> Result<usize> {
    let total = state.total_weight();
    if total <= 0.0 {
        return Err(Error::AllWeightsZero);
    }
    let mut u = rng.random::<f64>() * total;
    let mut last_live = None;
    for (index, packet) in state.packets().iter().enumerate() {
        let w = packet.weight();
        if w == 0.0 {
            continue;
        }
        if u < w {
            return Ok(index);
        }
        u -= w;
        last_live = Some(index);
    }
    // Rounding in the cumulative scan can push u past the last live packet;
    // attribute the draw there.
    last_live.ok_or(Error::AllWeightsZero)
}

/// Samples the phase factor of a weight reduction on a packet of weight `x`
/// losing `eps_prime`. The factor is 1 with probability
/// sqrt(1 - eps_prime / x) and +/-i with equal shares of the remainder, so
/// the sample mean converges to sqrt(1 - eps_prime / x).
pub fn sample_phase_negative<R: Rng + ?Sized>(
    x: f64,
    eps_prime: f64,
    dist: PhaseDist,
    rng: &mut R,
) -> Result<PhaseSample> {
    if eps_prime <= 0.0 || eps_prime.is_nan() || x < eps_prime {
        return Err(Error::PhaseSampleDomain { x, eps_prime });
    }
    match dist {
        PhaseDist::DeterministicReal => Ok(PhaseSample::REAL_ONE),
        PhaseDist::ThreePoint => {
            let p_one = (1.0 - eps_prime / x).sqrt();
            Ok(three_point(p_one, rng))
        }
    }
}

/// Samples the phase factor of a weight gain of `eps` on a packet of weight
/// `x_prime`. The factor is 1 with probability (1 + eps / x_prime)^(-1/2)
/// and +/-i with equal shares of the remainder.
pub fn sample_phase_positive<R: Rng + ?Sized>(
    x_prime: f64,
    eps: f64,
    dist: PhaseDist,
    rng: &mut R,
) -> Result<PhaseSample> {
    if x_prime <= 0.0 || x_prime.is_nan() {
        return Err(Error::NonPositiveWeight(x_prime));
    }
    match dist {
        PhaseDist::DeterministicReal => Ok(PhaseSample::REAL_ONE),
        PhaseDist::ThreePoint => {
            let p_one = 1.0 / (1.0 + eps / x_prime).sqrt();
            Ok(three_point(p_one, rng))
        }
    }
}

/// One uniform draw split three ways: [0, p) -> 1, [p, (1+p)/2) -> +i,
/// [(1+p)/2, 1) -> -i.
fn three_point<R: Rng + ?Sized>(p_one: f64, rng: &mut R) -> PhaseSample {
    let u = rng.random::<f64>();
    if u < p_one {
        PhaseSample::REAL_ONE
    } else if u < (1.0 + p_one) / 2.0 {
        PhaseSample::PLUS_I
    } else {
        PhaseSample::MINUS_I
    }
}

/// A single negative draw on packet `k`: if the packet holds more than
/// `eps_prime` it loses exactly `eps_prime` and its phase rotates by the
/// sampled factor; otherwise the packet is destroyed outright. At the
/// boundary weight == eps_prime the amplitude multiplier vanishes either
/// way, so the destroy branch is taken and the weight lands on exact zero;
/// the branch fires within [`WEIGHT_DUST`] of the boundary so that weights
/// reaching it through floating arithmetic cannot leave unkillable dust.
pub fn apply_nsf_single(
    state: &mut WaveState,
    k: usize,
    eps_prime: f64,
    phase: PhaseSample,
) -> Result<()> {
    if eps_prime <= 0.0 || eps_prime.is_nan() {
        return Err(Error::NonPositiveWeight(eps_prime));
    }
    let len = state.packet_count();
    if k >= len {
        return Err(Error::PacketOutOfRange { index: k, len });
    }
    let packet = state.packet_mut(k);
    if packet.is_destroyed() {
        return Err(Error::PacketDestroyed(k));
    }
    let w = packet.weight();
    if w - eps_prime <= WEIGHT_DUST {
        packet.destroy();
    } else {
        packet.set_weight(w - eps_prime);
        packet.rotate(phase.angle());
    }
    Ok(())
}

/// The negative semi-fluctuation: draws packets against the shrinking total
/// weight and removes weight until the loss reaches exactly `eps`. Draws
/// that fall on packets lighter than the remaining deficit destroy them and
/// the cascade continues; the draw that reaches the deficit ends it. The
/// remaining deficit is tracked by compensated subtraction so the final
/// reduction makes the loss epsilon by construction.
///
/// Requires an uncollapsed state of total weight 1; total weight 1 > eps
/// then guarantees termination with at least one live packet.
pub fn apply_nsf_cascade<R: Rng + ?Sized>(
    state: &mut WaveState,
    eps: f64,
    dist: PhaseDist,
    rng: &mut R,
) -> Result<CascadeRecord> {
    // A step indistinguishable from 1 at the snap tolerance would let the
    // final reduction land inside the snap ball of the sole survivor.
    if !(eps > 0.0 && eps < 1.0) || 1.0 - eps <= WEIGHT_DUST {
        return Err(Error::EpsilonOutOfRange(eps));
    }
    if state.is_collapsed() {
        return Err(Error::StateCollapsed);
    }
    let total = state.total_weight();
    if (total - 1.0).abs() > TOTAL_WEIGHT_TOLERANCE {
        return Err(Error::UnexpectedTotalWeight {
            total,
            expected: 1.0,
            tolerance: TOTAL_WEIGHT_TOLERANCE,
        });
    }

    let mut draws = Vec::new();
    let mut removed = 0.0f64;
    let mut removed_comp = 0.0f64;
    let residual_used;
    loop {
        let deficit = (eps - removed) - removed_comp;
        if deficit <= 0.0 {
            // Rounding already closed the loss; nothing left to remove.
            residual_used = 0.0;
            break;
        }
        let k = draw_packet(state, rng)?;
        let w = state.weight(k);
        if w < deficit {
            // Not enough weight to close the deficit: destroy and redraw
            // against the reduced total.
            state.packet_mut(k).destroy();
            draws.push(CascadeDraw {
                packet: k,
                weight_removed: w,
            });
            let t = removed + w;
            if removed.abs() >= w.abs() {
                removed_comp += (removed - t) + w;
            } else {
                removed_comp += (w - t) + removed;
            }
            removed = t;
            continue;
        }
        // Terminal draw: the drawn packet covers the remaining deficit.
        if w - deficit <= WEIGHT_DUST && state.live_count() > 1 {
            // The boundary case up to rounding: destruction, no phase
            // factor involved.
            state.packet_mut(k).destroy();
            draws.push(CascadeDraw {
                packet: k,
                weight_removed: w,
            });
            residual_used = 0.0;
        } else {
            // The sole live packet is never snapped away (its weight sits
            // inside the snap ball only when eps is within 1e-12 of 1); it
            // keeps the genuine remainder so the cascade always leaves a
            // live packet. w > deficit holds strictly here: the last live
            // packet carries 1 - eps + deficit.
            let phase = sample_phase_negative(w, deficit, dist, rng)?;
            let packet = state.packet_mut(k);
            packet.set_weight(w - deficit);
            packet.rotate(phase.angle());
            draws.push(CascadeDraw {
                packet: k,
                weight_removed: deficit,
            });
            residual_used = deficit;
        }
        break;
    }
    Ok(CascadeRecord {
        draws,
        residual_used,
    })
}

/// The positive semi-fluctuation: one packet drawn against the reduced total
/// gains exactly `eps`, restoring the total weight to 1, and its phase
/// rotates by the sampled factor. Destroyed packets carry zero draw weight
/// and can never be revived.
pub fn apply_psf<R: Rng + ?Sized>(
    state: &mut WaveState,
    eps: f64,
    dist: PhaseDist,
    rng: &mut R,
) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::EpsilonOutOfRange(eps));
    }
    let total = state.total_weight();
    let expected = 1.0 - eps;
    if (total - expected).abs() > TOTAL_WEIGHT_TOLERANCE {
        return Err(Error::UnexpectedTotalWeight {
            total,
            expected,
            tolerance: TOTAL_WEIGHT_TOLERANCE,
        });
    }
    let k = draw_packet(state, rng)?;
    let w = state.weight(k);
    let phase = sample_phase_positive(w, eps, dist, rng)?;
    let packet = state.packet_mut(k);
    packet.set_weight(w + eps);
    packet.rotate(phase.angle());
    Ok(())
}

/// One full fluctuation tick: the negative cascade followed by the positive
/// half. A collapsed state is absorbing: the pair would return the sole
/// packet to weight 1 with only a physically irrelevant global phase churn,
/// so it is skipped and `None` is returned.
pub fn fluctuate<R: Rng + ?Sized>(
    state: &mut WaveState,
    params: &FluctuationParams,
    rng: &mut R,
) -> Result<Option<CascadeRecord>> {
    if state.is_collapsed() {
        return Ok(None);
    }
    let record = apply_nsf_cascade(state, params.epsilon, params.phase_dist, rng)?;
    debug_assert!(
        (state.total_weight() - (1.0 - params.epsilon)).abs() <= 1e-12,
        "norm ladder violated after the negative half: {}",
        state.total_weight()
    );
    apply_psf(state, params.epsilon, params.phase_dist, rng)?;
    debug_assert!(
        (state.total_weight() - 1.0).abs() <= 1e-12,
        "norm ladder violated after the positive half: {}",
        state.total_weight()
    );
    Ok(Some(record))
}
