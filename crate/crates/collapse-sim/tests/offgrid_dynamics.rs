//! Exact-chain oracle for two-packet dynamics started off the weight grid.
//!
//! A two-packet state whose first weight is not a multiple of eps walks on
//! the shifted lattice {0} U {x0 + k eps} U {1}. Inside the deficit bands
//! the operator pair does not reduce to the grid transition scheme: the
//! enumerated one-tick moves are
//!   * bottom point x < eps: down (destruction via a cascade) with
//!     probability x, up with probability x (1 - x) / (1 - eps);
//!   * top point x > 1 - eps: down with probability x (1 - x) / (1 - eps),
//!     up (full absorption, the partner dies in a cascade) with
//!     probability 1 - x;
//!   * bulk: the usual symmetric x (1 - x) / (1 - eps) both ways.
//!
//! Solving that chain gives the exact survival probability, which deviates
//! from the start weight (the survival law is a grid statement). The test
//! checks the simulator against this independent solve, including the
//! deviation itself, so a simulator that somehow reproduced the grid law
//! off-grid would fail here.

use collapse_sim::{run_ensemble, FluctuationParams, PhaseDist, RunConfig};

/// Survival probability of packet 0 from the exact shifted-lattice chain,
/// solved by Gaussian elimination on the tridiagonal system
/// w_j = P_j w_{j-1} + R_j w_{j+1} with w(0) = 0, w(1) = 1.
fn chain_survival(eps: f64, x0: f64) -> f64 {
    assert!(x0 > 0.0 && x0 < 1.0);
    let steps_below = (x0 / eps).ceil() as usize - 1;
    let bottom = x0 - steps_below as f64 * eps;
    let mut states = Vec::new();
    let mut x = bottom;
    while x < 1.0 && (1.0 - x) > 1e-12 {
        states.push(x);
        x = bottom + states.len() as f64 * eps;
    }
    let n = states.len();
    let (mut down, mut up) = (vec![0.0; n], vec![0.0; n]);
    for (j, &s) in states.iter().enumerate() {
        let (p, r) = if s < eps {
            (s, s * (1.0 - s) / (1.0 - eps))
        } else if s > 1.0 - eps {
            (s * (1.0 - s) / (1.0 - eps), 1.0 - s)
        } else {
            let m = s * (1.0 - s) / (1.0 - eps);
            (m, m)
        };
        down[j] = p / (p + r);
        up[j] = r / (p + r);
    }
    // Thomas solve.
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    c_prime[0] = -up[0];
    for j in 1..n {
        let denom = 1.0 + down[j] * c_prime[j - 1];
        c_prime[j] = -up[j] / denom;
        let rhs = if j == n - 1 { up[j] } else { 0.0 };
        d_prime[j] = (rhs + down[j] * d_prime[j - 1]) / denom;
    }
    let mut w = vec![0.0; n];
    w[n - 1] = d_prime[n - 1];
    for j in (0..n - 1).rev() {
        w[j] = d_prime[j] - c_prime[j] * w[j + 1];
    }
    w[steps_below]
}

#[test]
fn chain_oracle_reproduces_hand_solved_values() {
    // Four-state chain at eps = 0.25 from 0.3: lattice 0.05/0.3/0.55/0.8,
    // solved by hand to survival 0.425.
    assert!((chain_survival(0.25, 0.3) - 0.425).abs() < 1e-12);
    // And from 0.1: lattice 0.1/0.35/0.6/0.85, survival 0.225.
    assert!((chain_survival(0.25, 0.1) - 0.225).abs() < 1e-12);
    // On-grid starts recover the grid law exactly.
    assert!((chain_survival(0.25, 0.5) - 0.5).abs() < 1e-12);
    assert!((chain_survival(0.1, 0.3) - 0.3).abs() < 1e-12);
}

#[test]
fn simulator_matches_the_offgrid_chain() {
    for (case, (eps, x0)) in [(0u64, (0.25, 0.3)), (1, (0.25, 0.1)), (2, (0.1, 0.57))] {
        let expected = chain_survival(eps, x0);
        let config = RunConfig {
            weights: vec![x0, 1.0 - x0],
            phases: vec![0.0, 0.0],
            params: FluctuationParams::new(eps, 1.0, PhaseDist::ThreePoint, 9000 + case).unwrap(),
            n_trajectories: 60_000,
            max_steps: 1_000_000,
            record_every: 0,
            worker_count: 0,
        };
        let stats = run_ensemble(&config).unwrap();
        assert_eq!(stats.unresolved, 0);
        let freq = stats.survival_frequencies()[0];
        let sigma = (expected * (1.0 - expected) / config.n_trajectories as f64).sqrt();
        assert!(
            (freq - expected).abs() < 4.0 * sigma,
            "eps {eps}, x0 {x0}: survival {freq} vs chain {expected} (4 sigma {:.2e})",
            4.0 * sigma
        );
        // The off-grid deviation from the grid law is real and resolved:
        // the chain value, not x0, is what the dynamics follows.
        if (expected - x0).abs() > 6.0 * sigma {
            assert!(
                (freq - x0).abs() > 4.0 * sigma,
                "eps {eps}, x0 {x0}: frequency {freq} should be distinguishable from {x0}"
            );
        }
    }
}
