//! The single-packet weight random walk.
//!
//! Viewed in isolation, one packet's weight performs a walk on [0, 1] with
//! absorbing ends: down a step, idle, or up a step with probabilities
//! (p, q, r) that depend on the current weight. Any scheme in the admitted
//! family satisfies the survival law w(x) = x, which this module verifies
//! with an exact linear-system oracle rather than Monte Carlo.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Default per-walk step budget; absorption is almost sure, but runtime must
/// stay bounded.
pub const DEFAULT_MAX_WALK_STEPS: u64 = 100_000_000;

/// Tolerance used to match a requested start point to the weight grid.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// A one-packet transition scheme. The miss probability q(x) is a free
/// function of the family; the down/up splits follow from it:
///
/// * near zero (x < eps): down means destruction, and the split is
///   eps : x against the deficit band,
/// * in the bulk (eps <= x <= 1 - eps): symmetric, p = r = (1 - q) / 2,
/// * near one (x > 1 - eps): up means full absorption, split (1 - x) : eps,
/// * the ends x = 0 and x = 1 are absorbing: (0, 1, 0).
///
/// The combined scheme is the family member realized by the two-half
/// fluctuation operators: q(x) = 1 - 2 x (1 - x) / (1 - eps), which gives
/// p(x) = r(x) = x (1 - x) / (1 - eps) in the bulk.
#[derive(Clone)]
pub struct TransitionScheme {
    eps: f64,
    kind: SchemeKind,
}

#[derive(Clone)]
enum SchemeKind {
    Combined,
    Generic(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for TransitionScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            SchemeKind::Combined => "combined",
            SchemeKind::Generic(_) => "generic",
        };
        write!(f, "TransitionScheme {{ eps: {}, kind: {kind} }}", self.eps)
    }
}

impl TransitionScheme {
    /// The scheme induced by the fluctuation operators. Requires
    /// eps <= 0.5 so the bulk miss probability stays nonnegative.
    pub fn combined(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::EpsilonOutOfRange(eps));
        }
        if eps > 0.5 {
            return Err(Error::CombinedSchemeRange(eps));
        }
        Ok(Self {
            eps,
            kind: SchemeKind::Combined,
        })
    }

    /// A family member with a caller-supplied miss function q(x). The values
    /// of q at the interior points must lie in [0, 1]; the absorbing ends
    /// ignore q.
    pub fn generic(eps: f64, q: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::EpsilonOutOfRange(eps));
        }
        Ok(Self {
            eps,
            kind: SchemeKind::Generic(Arc::new(q)),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The miss probability at an interior point.
    pub fn miss_probability(&self, x: f64) -> f64 {
        match &self.kind {
            SchemeKind::Combined => 1.0 - 2.0 * x * (1.0 - x) / (1.0 - self.eps),
            SchemeKind::Generic(q) => q(x),
        }
    }

    /// (p, q, r) at weight x.
    pub fn transition_probs(&self, x: f64) -> Result<(f64, f64, f64)> {
        if !(0.0..=1.0).contains(&x) || !x.is_finite() {
            return Err(Error::WeightOutOfRange(x));
        }
        if x == 0.0 || x == 1.0 {
            return Ok((0.0, 1.0, 0.0));
        }
        let q = self.miss_probability(x);
        if !(0.0..=1.0).contains(&q) || !q.is_finite() {
            return Err(Error::InvalidMissProbability { x, q });
        }
        let eps = self.eps;
        let leave = 1.0 - q;
        let (p, r) = if x < eps {
            (eps * leave / (x + eps), x * leave / (x + eps))
        } else if x <= 1.0 - eps {
            (leave / 2.0, leave / 2.0)
        } else {
            (
                (1.0 - x) * leave / (1.0 - x + eps),
                eps * leave / (1.0 - x + eps),
            )
        };
        Ok((p, q, r))
    }
}

/// Effective move probabilities with misses folded in: P = p / (p + r),
/// R = r / (p + r). Scaling (p, r) by a common factor while q absorbs the
/// difference leaves (P, R) unchanged, which is why the absorption oracle
/// can ignore q entirely.
pub fn effective_probs(p: f64, q: f64, r: f64) -> Result<(f64, f64)> {
    if p < 0.0 || r < 0.0 {
        return Err(Error::NotAProbabilityTriple(p + q + r));
    }
    let total = p + q + r;
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotAProbabilityTriple(total));
    }
    let leave = p + r;
    if leave == 0.0 {
        return Err(Error::AbsorbingPoint);
    }
    Ok((p / leave, r / leave))
}

/// The weight grid x = m * eps for m = 0..=M with M = 1/eps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkGrid {
    eps: f64,
    m: usize,
}

impl WalkGrid {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::EpsilonOutOfRange(eps));
        }
        let inv = 1.0 / eps;
        let m = inv.round();
        if (inv - m).abs() > 1e-9 || (m * eps - 1.0).abs() > 1e-12 {
            return Err(Error::GridMismatch(inv));
        }
        let m = m as usize;
        if m < 2 {
            return Err(Error::GridTooSmall(m));
        }
        Ok(Self { eps, m })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Number of steps; the grid has M + 1 states.
    pub fn step_count(&self) -> usize {
        self.m
    }

    pub fn x(&self, m: usize) -> f64 {
        if m == self.m {
            1.0
        } else {
            m as f64 * self.eps
        }
    }

    /// Grid index of x0, or an error if x0 is not a grid point.
    pub fn index_of(&self, x0: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x0) || !x0.is_finite() {
            return Err(Error::WeightOutOfRange(x0));
        }
        let m = (x0 / self.eps).round();
        let idx = m as usize;
        if idx > self.m || (x0 - self.x(idx.min(self.m))).abs() > GRID_TOLERANCE {
            return Err(Error::OffGrid { x0, eps: self.eps });
        }
        Ok(idx)
    }
}

/// Exact probability of absorption at x = 1 from the grid point x0, by
/// solving the linear system w(x) = P(x) w(x - eps) + R(x) w(x + eps) with
/// w(0) = 0 and w(1) = 1. The system is posed in the effective
/// probabilities, so the choice of q(x) cannot influence the result. For
/// any admissible scheme the answer equals x0: this is the survival law
/// checked without any sampling.
pub fn absorption_oracle(scheme: &TransitionScheme, x0: f64) -> Result<f64> {
    let grid = WalkGrid::new(scheme.eps())?;
    let m0 = grid.index_of(x0)?;
    if m0 == 0 {
        return Ok(0.0);
    }
    if m0 == grid.step_count() {
        return Ok(1.0);
    }
    let m = grid.step_count();
    let mut down = Vec::with_capacity(m - 1);
    let mut up = Vec::with_capacity(m - 1);
    for i in 1..m {
        let (p, q, r) = scheme.transition_probs(grid.x(i))?;
        let (cap_p, cap_r) = effective_probs(p, q, r)?;
        down.push(cap_p);
        up.push(cap_r);
    }
    let w = solve_absorption_system(&down, &up);
    Ok(w[m0 - 1])
}

/// Absorption probability at x = 1 from an arbitrary (possibly off-grid)
/// start in (0, 1). The walk from x0 lives on the shifted lattice
/// {0} + {x0 + k eps} + {1}: below eps the down move lands on exact zero,
/// above 1 - eps the up move lands on exact one, so the lattice closes. The
/// effective probabilities on the shifted lattice come straight from the
/// deficit-band recursions and do not involve q.
pub fn absorption_probability_offgrid(eps: f64, x0: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::EpsilonOutOfRange(eps));
    }
    if !(0.0..=1.0).contains(&x0) || !x0.is_finite() {
        return Err(Error::WeightOutOfRange(x0));
    }
    if x0 == 0.0 {
        return Ok(0.0);
    }
    if x0 == 1.0 {
        return Ok(1.0);
    }
    // Shift down to the lowest positive lattice point.
    let steps_below = (x0 / eps).ceil() as usize - 1;
    let bottom = x0 - steps_below as f64 * eps;
    let mut states = Vec::new();
    let mut x = bottom;
    while x < 1.0 && (1.0 - x) > 1e-15 {
        states.push(x);
        x = bottom + (states.len() as f64) * eps;
    }
    let n = states.len();
    let mut down = Vec::with_capacity(n);
    let mut up = Vec::with_capacity(n);
    for &s in &states {
        let (cap_p, cap_r) = if s < eps {
            (eps / (s + eps), s / (s + eps))
        } else if s <= 1.0 - eps {
            (0.5, 0.5)
        } else {
            ((1.0 - s) / (1.0 - s + eps), eps / (1.0 - s + eps))
        };
        down.push(cap_p);
        up.push(cap_r);
    }
    let w = solve_absorption_system(&down, &up);
    Ok(w[steps_below])
}

/// Thomas solve of the absorption system over interior states 0..n-1:
/// w_i - P_i w_{i-1} - R_i w_{i+1} = 0 with w_{-1} = 0 and w_n = 1.
fn solve_absorption_system(down: &[f64], up: &[f64]) -> Vec<f64> {
    let n = down.len();
    debug_assert!(n >= 1);
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    // Row i: a_i = -down[i], b_i = 1, c_i = -up[i], rhs_i = 0 except the
    // last row which carries up[n-1] from the fixed boundary w_n = 1.
    c_prime[0] = -up[0];
    d_prime[0] = 0.0;
    for i in 1..n {
        let a = -down[i];
        let denom = 1.0 - a * c_prime[i - 1];
        c_prime[i] = -up[i] / denom;
        let rhs = if i == n - 1 { up[i] } else { 0.0 };
        d_prime[i] = (rhs - a * d_prime[i - 1]) / denom;
    }
    let mut w = vec![0.0; n];
    w[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        w[i] = d_prime[i] - c_prime[i] * w[i + 1];
    }
    w
}

/// Boundary a walk was absorbed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkOutcome {
    /// `None` if the step budget ran out first.
    pub absorbed_at: Option<Boundary>,
    pub steps: u64,
}

/// Monte Carlo realization of the walk from a grid point. Consumes one
/// uniform f64 per step (misses included).
pub fn simulate_walk<R: Rng + ?Sized>(
    scheme: &TransitionScheme,
    x0: f64,
    rng: &mut R,
    max_steps: u64,
) -> Result<WalkOutcome> {
    let grid = WalkGrid::new(scheme.eps())?;
    let mut m = grid.index_of(x0)?;
    let top = grid.step_count();
    let mut steps = 0u64;
    while m != 0 && m != top {
        if steps >= max_steps {
            return Ok(WalkOutcome {
                absorbed_at: None,
                steps,
            });
        }
        let (p, q, _r) = scheme.transition_probs(grid.x(m))?;
        let u = rng.random::<f64>();
        if u < p {
            m -= 1;
        } else if u >= p + q {
            m += 1;
        }
        steps += 1;
    }
    Ok(WalkOutcome {
        absorbed_at: Some(if m == 0 {
            Boundary::Zero
        } else {
            Boundary::One
        }),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trajectory_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn combined_scheme_bulk_values() {
        let scheme = TransitionScheme::combined(0.1).unwrap();
        let (p, q, r) = scheme.transition_probs(0.5).unwrap();
        assert_abs_diff_eq!(p, 0.25 / 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.25 / 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(q, 1.0 - 0.5 / 0.9, epsilon = 1e-15);
    }

    #[test]
    fn ends_are_absorbing() {
        let scheme = TransitionScheme::combined(0.1).unwrap();
        assert_eq!(scheme.transition_probs(0.0).unwrap(), (0.0, 1.0, 0.0));
        assert_eq!(scheme.transition_probs(1.0).unwrap(), (0.0, 1.0, 0.0));
        let generic = TransitionScheme::generic(0.1, |_| 0.3).unwrap();
        assert_eq!(generic.transition_probs(0.0).unwrap(), (0.0, 1.0, 0.0));
    }

    #[test]
    fn generic_low_band_split() {
        // x = eps/2 with q = 0: the down/up split is eps : x, i.e. 2/3, 1/3.
        let scheme = TransitionScheme::generic(0.1, |_| 0.0).unwrap();
        let (p, _q, r) = scheme.transition_probs(0.05).unwrap();
        assert_abs_diff_eq!(p, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn band_rows_agree_at_the_seam() {
        // At x = eps the low-band row and the bulk row coincide.
        let q = 0.37;
        let scheme = TransitionScheme::generic(0.2, move |_| q);
        let scheme = scheme.unwrap();
        let eps = 0.2;
        let (p_bulk, _, r_bulk) = scheme.transition_probs(eps).unwrap();
        let p_low = eps * (1.0 - q) / (eps + eps);
        let r_low = eps * (1.0 - q) / (eps + eps);
        assert_abs_diff_eq!(p_bulk, p_low, epsilon = 1e-15);
        assert_abs_diff_eq!(r_bulk, r_low, epsilon = 1e-15);
        assert_abs_diff_eq!(p_bulk, (1.0 - q) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn mirror_symmetry_of_band_rows() {
        let scheme = TransitionScheme::generic(0.1, |_| 0.25).unwrap();
        for x in [0.03, 0.07, 0.09] {
            let (p_lo, _, r_lo) = scheme.transition_probs(x).unwrap();
            let (p_hi, _, r_hi) = scheme.transition_probs(1.0 - x).unwrap();
            assert_abs_diff_eq!(p_lo, r_hi, epsilon = 1e-12);
            assert_abs_diff_eq!(r_lo, p_hi, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_weight() {
        let scheme = TransitionScheme::combined(0.1).unwrap();
        assert!(scheme.transition_probs(-0.1).is_err());
        assert!(scheme.transition_probs(1.1).is_err());
    }

    #[test]
    fn effective_probs_basics() {
        assert_eq!(effective_probs(0.2, 0.6, 0.2).unwrap(), (0.5, 0.5));
        assert!(matches!(
            effective_probs(0.0, 1.0, 0.0),
            Err(Error::AbsorbingPoint)
        ));
    }

    #[test]
    fn effective_probs_invariant_under_miss_rescaling() {
        let (p, r) = (0.3, 0.1);
        let (base_p, base_r) = effective_probs(p, 1.0 - p - r, r).unwrap();
        for lambda in [0.1, 0.5, 0.9] {
            let (sp, sr) = effective_probs(lambda * p, 1.0 - lambda * (p + r), lambda * r).unwrap();
            assert_abs_diff_eq!(sp, base_p, epsilon = 1e-12);
            assert_abs_diff_eq!(sr, base_r, epsilon = 1e-12);
        }
    }

    #[test]
    fn low_band_effective_probs() {
        // 0 < x < eps: P = eps / (x + eps), R = x / (x + eps) whatever q is.
        let eps = 0.1;
        for q in [0.0, 0.3, 0.9] {
            let scheme = TransitionScheme::generic(eps, move |_| q).unwrap();
            let x = 0.04;
            let (p, qq, r) = scheme.transition_probs(x).unwrap();
            let (cap_p, cap_r) = effective_probs(p, qq, r).unwrap();
            assert_abs_diff_eq!(cap_p, eps / (x + eps), epsilon = 1e-12);
            assert_abs_diff_eq!(cap_r, x / (x + eps), epsilon = 1e-12);
        }
    }

    #[test]
    fn grid_construction() {
        let grid = WalkGrid::new(0.25).unwrap();
        assert_eq!(grid.step_count(), 4);
        assert_eq!(grid.index_of(0.5).unwrap(), 2);
        assert_eq!(grid.index_of(1.0).unwrap(), 4);
        assert!(grid.index_of(0.37).is_err());
        assert!(WalkGrid::new(0.3).is_err());
        assert!(WalkGrid::new(0.6).is_err());
    }

    #[test]
    fn oracle_returns_start_weight_on_every_grid_point() {
        for eps in [0.25, 0.1, 0.01] {
            let combined = TransitionScheme::combined(eps).unwrap();
            let grid = WalkGrid::new(eps).unwrap();
            for m in 0..=grid.step_count() {
                let x0 = grid.x(m);
                let w = absorption_oracle(&combined, x0).unwrap();
                assert!((w - x0).abs() < 1e-10, "eps {eps} x0 {x0}: oracle gave {w}");
            }
        }
    }

    #[test]
    fn oracle_is_insensitive_to_miss_function() {
        let eps = 0.1;
        let schemes: Vec<TransitionScheme> = vec![
            TransitionScheme::generic(eps, |_| 0.0).unwrap(),
            TransitionScheme::generic(eps, |x| 0.5 + 0.4 * (x - 0.5)).unwrap(),
            TransitionScheme::generic(eps, |x| 1.0 - x * (1.0 - x)).unwrap(),
        ];
        let grid = WalkGrid::new(eps).unwrap();
        for scheme in &schemes {
            for m in 0..=grid.step_count() {
                let x0 = grid.x(m);
                let w = absorption_oracle(scheme, x0).unwrap();
                assert!((w - x0).abs() < 1e-10, "{scheme:?} at {x0}: {w}");
            }
        }
    }

    #[test]
    fn oracle_boundaries() {
        let scheme = TransitionScheme::combined(0.25).unwrap();
        assert_eq!(absorption_oracle(&scheme, 0.0).unwrap(), 0.0);
        assert_eq!(absorption_oracle(&scheme, 1.0).unwrap(), 1.0);
        assert!(absorption_oracle(&scheme, 0.37).is_err());
    }

    #[test]
    fn offgrid_oracle_returns_start_weight() {
        for (eps, x0) in [(0.25, 0.37), (0.1, 0.123), (0.25, 0.05), (0.1, 0.999)] {
            let w = absorption_probability_offgrid(eps, x0).unwrap();
            assert!((w - x0).abs() < 1e-10, "eps {eps} x0 {x0}: {w}");
        }
        assert_eq!(absorption_probability_offgrid(0.1, 0.0).unwrap(), 0.0);
        assert_eq!(absorption_probability_offgrid(0.1, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn walk_from_the_ends_is_instant() {
        let scheme = TransitionScheme::combined(0.25).unwrap();
        let mut rng = trajectory_rng(30, 0);
        let out = simulate_walk(&scheme, 1.0, &mut rng, 100).unwrap();
        assert_eq!(out.absorbed_at, Some(Boundary::One));
        assert_eq!(out.steps, 0);
        let out = simulate_walk(&scheme, 0.0, &mut rng, 100).unwrap();
        assert_eq!(out.absorbed_at, Some(Boundary::Zero));
    }

    #[test]
    fn walk_absorption_frequency_matches_start_weight() {
        let scheme = TransitionScheme::combined(0.25).unwrap();
        let n = 100_000u64;
        let mut hits = 0u64;
        let mut rng = trajectory_rng(31, 0);
        for _ in 0..n {
            let out = simulate_walk(&scheme, 0.5, &mut rng, 1_000_000).unwrap();
            match out.absorbed_at {
                Some(Boundary::One) => hits += 1,
                Some(Boundary::Zero) => {}
                None => panic!("walk did not terminate"),
            }
        }
        let freq = hits as f64 / n as f64;
        // 3 sigma of a fair binomial at n = 1e5.
        assert!((freq - 0.5).abs() < 0.0048, "freq {freq}");
    }

    #[test]
    fn walk_respects_step_budget() {
        let scheme = TransitionScheme::combined(0.01).unwrap();
        let mut rng = trajectory_rng(32, 0);
        let out = simulate_walk(&scheme, 0.5, &mut rng, 10).unwrap();
        assert_eq!(out.absorbed_at, None);
        assert_eq!(out.steps, 10);
    }

    #[test]
    fn mean_absorption_time_tracks_selection_time() {
        // For eps = 0.1 from the midpoint, the mean number of ticks to
        // absorption is of the order of the slowest relaxation time
        // 1/(2 eps^2) = 50.
        let scheme = TransitionScheme::combined(0.1).unwrap();
        let mut rng = trajectory_rng(33, 0);
        let n = 20_000u64;
        let mut total = 0u64;
        for _ in 0..n {
            let out = simulate_walk(&scheme, 0.5, &mut rng, 10_000_000).unwrap();
            assert!(out.absorbed_at.is_some());
            total += out.steps;
        }
        let mean = total as f64 / n as f64;
        let t2 = 50.0;
        assert!(
            mean > t2 / 3.0 && mean < t2 * 3.0,
            "mean absorption time {mean} vs selection scale {t2}"
        );
    }
}
