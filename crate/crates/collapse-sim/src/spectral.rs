//! Ensemble relaxation of the weight distribution.
//!
//! On the weight grid x = m eps the one-tick dynamics of an ensemble is a
//! column-stochastic tridiagonal matrix: column m sends mass down with
//! p(m eps), keeps it with q(m eps) and sends it up with r(m eps), while the
//! end columns are absorbing. The spectrum of that matrix carries the whole
//! relaxation story: two unit eigenvalues for the absorbed fractions and
//! M - 1 interior modes whose decay times are T_k = -tau / ln(lambda_k). The
//! slowest of them is the quantum-selection time, asymptotically
//! tau / (2 eps^2).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::walk::{TransitionScheme, WalkGrid};

/// The tridiagonal statistical matrix over the weight grid, stored as its
/// three diagonals. `loss[m]`, `miss[m]`, `gain[m]` are the down/stay/up
/// probabilities out of grid state m, so every column sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StatMatrix {
    eps: f64,
    loss: Vec<f64>,
    miss: Vec<f64>,
    gain: Vec<f64>,
}

impl StatMatrix {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Number of grid steps M; the matrix is (M + 1) x (M + 1).
    pub fn step_count(&self) -> usize {
        self.loss.len() - 1
    }

    pub fn dimension(&self) -> usize {
        self.loss.len()
    }

    /// (p, q, r) of column m.
    pub fn column(&self, m: usize) -> (f64, f64, f64) {
        (self.loss[m], self.miss[m], self.gain[m])
    }

    /// Dense copy, for tests and residual checks.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut dense = DMatrix::zeros(n, n);
        for m in 0..n {
            dense[(m, m)] = self.miss[m];
            if m > 0 {
                dense[(m - 1, m)] = self.loss[m];
            }
            if m + 1 < n {
                dense[(m + 1, m)] = self.gain[m];
            }
        }
        dense
    }
}

/// Builds the statistical matrix for the combined scheme on the grid
/// defined by eps. Fails if 1/eps is not an integer.
pub fn build_stat_matrix(eps: f64) -> Result<StatMatrix> {
    let grid = WalkGrid::new(eps)?;
    let scheme = TransitionScheme::combined(eps)?;
    let m_top = grid.step_count();
    let mut loss = Vec::with_capacity(m_top + 1);
    let mut miss = Vec::with_capacity(m_top + 1);
    let mut gain = Vec::with_capacity(m_top + 1);
    for m in 0..=m_top {
        let (p, q, r) = scheme.transition_probs(grid.x(m))?;
        loss.push(p);
        miss.push(q);
        gain.push(r);
    }
    Ok(StatMatrix {
        eps,
        loss,
        miss,
        gain,
    })
}

/// Full eigendecomposition of a statistical matrix: eigenvalues sorted
/// descending with the two exact unit modes first, plus biorthonormal left
/// and right eigenvectors (⟨L_j|R_k⟩ = δ_jk).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    eigenvalues: Vec<f64>,
    right_vectors: Vec<Vec<f64>>,
    left_vectors: Vec<Vec<f64>>,
}

impl SpectralResult {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn right_vector(&self, k: usize) -> &[f64] {
        &self.right_vectors[k]
    }

    pub fn left_vector(&self, k: usize) -> &[f64] {
        &self.left_vectors[k]
    }

    /// Largest deviation of ⟨L_j|R_k⟩ from the identity.
    pub fn biorthonormality_defect(&self) -> f64 {
        let n = self.dimension();
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in 0..n {
                let dot: f64 = self.left_vectors[j]
                    .iter()
                    .zip(&self.right_vectors[k])
                    .map(|(a, b)| a * b)
                    .sum();
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Spectrum of the statistical matrix.
///
/// The two absorbing columns contribute the unit eigenvalues exactly: their
/// right eigenvectors are the end basis vectors and their left eigenvectors
/// are the absorption-probability profiles (1 - m eps) and (m eps). The
/// interior block is similar to a symmetric tridiagonal matrix through a
/// positive diagonal scaling, so its eigenproblem is solved in symmetric
/// form; eigenvalues map back unchanged and eigenvectors through the
/// scaling, which makes the left/right pairs biorthonormal by construction.
pub fn eigen_spectrum(matrix: &StatMatrix) -> Result<SpectralResult> {
    let m_top = matrix.step_count();
    let n = m_top - 1;
    let dim = matrix.dimension();

    // Diagonal similarity scaling d and the symmetrized interior block.
    let mut scale = vec![1.0f64; n];
    for j in 0..n.saturating_sub(1) {
        let m = j + 1;
        let product = matrix.gain[m] * matrix.loss[m + 1];
        if product <= 0.0 {
            return Err(Error::NotSymmetrizable(m));
        }
        scale[j + 1] = scale[j] * (matrix.gain[m] / matrix.loss[m + 1]).sqrt();
    }
    let mut sym = DMatrix::zeros(n, n);
    for j in 0..n {
        sym[(j, j)] = matrix.miss[j + 1];
        if j + 1 < n {
            let m = j + 1;
            let off = (matrix.gain[m] * matrix.loss[m + 1]).sqrt();
            sym[(j, j + 1)] = off;
            sym[(j + 1, j)] = off;
        }
    }
    let eigen = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 100_000)
        .ok_or(Error::EigenNonConvergence)?;

    // Interior modes, sorted by eigenvalue descending.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .expect("eigenvalues are finite")
    });

    let mut eigenvalues = Vec::with_capacity(dim);
    let mut right_vectors = Vec::with_capacity(dim);
    let mut left_vectors = Vec::with_capacity(dim);

    // Unit pair absorbed at zero: right = e_0, left = 1 - m eps.
    let mut e0 = vec![0.0; dim];
    e0[0] = 1.0;
    eigenvalues.push(1.0);
    right_vectors.push(e0);
    left_vectors.push((0..dim).map(|m| 1.0 - m as f64 * matrix.eps).collect());

    // Unit pair absorbed at one: right = e_M, left = m eps.
    let mut etop = vec![0.0; dim];
    etop[m_top] = 1.0;
    eigenvalues.push(1.0);
    right_vectors.push(etop);
    left_vectors.push((0..dim).map(|m| m as f64 * matrix.eps).collect());

    for &idx in &order {
        let lambda = eigen.eigenvalues[idx];
        let v = eigen.eigenvectors.column(idx);
        let mut right = vec![0.0; dim];
        let mut left = vec![0.0; dim];
        for j in 0..n {
            right[j + 1] = scale[j] * v[j];
            left[j + 1] = v[j] / scale[j];
        }
        // Boundary components of the right vector from the absorbing rows:
        // (lambda - 1) R_0 = loss(eps) R_1 and symmetrically at the top.
        right[0] = matrix.loss[1] * right[1] / (lambda - 1.0);
        right[m_top] = matrix.gain[m_top - 1] * right[m_top - 1] / (lambda - 1.0);
        eigenvalues.push(lambda);
        right_vectors.push(right);
        left_vectors.push(left);
    }

    Ok(SpectralResult {
        eigenvalues,
        right_vectors,
        left_vectors,
    })
}

/// Relaxation times of the decaying modes.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationTimes {
    /// -tau / ln(lambda) for each eigenvalue below one, in the spectrum's
    /// (descending) order; eigenvalues at or below zero decay within a
    /// single tick and map to 0.
    pub times: Vec<f64>,
    /// The largest finite relaxation time: the quantum-selection time.
    pub selection_time: f64,
}

pub fn relaxation_times(result: &SpectralResult, tau: f64) -> Result<RelaxationTimes> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(Error::TauOutOfRange(tau));
    }
    let times: Vec<f64> = result
        .eigenvalues()
        .iter()
        .filter(|&&l| l < 1.0)
        .map(|&l| if l <= 0.0 { 0.0 } else { -tau / l.ln() })
        .collect();
    let selection_time = times.iter().copied().fold(0.0, f64::max);
    Ok(RelaxationTimes {
        times,
        selection_time,
    })
}

/// The asymptotic selection-time estimate tau / (2 eps^2).
pub fn asymptotic_selection_time(eps: f64, tau: f64) -> f64 {
    tau / (2.0 * eps * eps)
}

/// Applies the statistical matrix `steps` times to a distribution over the
/// grid. Matrix-vector products keep the evolution stochastic numerically;
/// no renormalization is applied.
pub fn evolve_distribution(matrix: &StatMatrix, phi0: &[f64], steps: u64) -> Result<Vec<f64>> {
    let dim = matrix.dimension();
    if phi0.len() != dim {
        return Err(Error::DistributionLength {
            got: phi0.len(),
            expected: dim,
        });
    }
    for (index, &value) in phi0.iter().enumerate() {
        if value < 0.0 || !value.is_finite() {
            return Err(Error::NegativeDistributionEntry { index, value });
        }
    }
    let sum: f64 = crate::state::neumaier_sum(phi0.iter().copied());
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::DistributionNotNormalized(sum));
    }
    let mut phi = phi0.to_vec();
    let mut next = vec![0.0; dim];
    for _ in 0..steps {
        for i in 0..dim {
            let mut v = matrix.miss[i] * phi[i];
            if i > 0 {
                v += matrix.gain[i - 1] * phi[i - 1];
            }
            if i + 1 < dim {
                v += matrix.loss[i + 1] * phi[i + 1];
            }
            next[i] = v;
        }
        std::mem::swap(&mut phi, &mut next);
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::absorption_oracle;
    use approx::assert_abs_diff_eq;

    #[test]
    fn columns_are_stochastic_and_ends_absorbing() {
        let s = build_stat_matrix(0.1).unwrap();
        assert_eq!(s.dimension(), 11);
        for m in 0..=10 {
            let (p, q, r) = s.column(m);
            assert_abs_diff_eq!(p + q + r, 1.0, epsilon = 1e-12);
            assert!(p >= 0.0 && q >= 0.0 && r >= 0.0);
        }
        assert_eq!(s.column(0), (0.0, 1.0, 0.0));
        assert_eq!(s.column(10), (0.0, 1.0, 0.0));
    }

    #[test]
    fn coarsest_grid_interior_column() {
        // eps = 0.5: the middle column is p = r = 0.25 / 0.5 = 0.5, q = 0.
        let s = build_stat_matrix(0.5).unwrap();
        let (p, q, r) = s.column(1);
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_non_divisor_eps() {
        assert!(build_stat_matrix(0.3).is_err());
    }

    #[test]
    fn coarsest_grid_spectrum() {
        // M = 2: spectrum {1, 1, 0} straight from the characteristic
        // polynomial of the 3x3 matrix.
        let s = build_stat_matrix(0.5).unwrap();
        let spec = eigen_spectrum(&s).unwrap();
        let ev = spec.eigenvalues();
        assert_eq!(ev.len(), 3);
        assert_eq!(ev[0], 1.0);
        assert_eq!(ev[1], 1.0);
        assert_abs_diff_eq!(ev[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn slowest_mode_matches_closed_form() {
        // The constant interior vector is an exact eigenvector of the
        // interior block with eigenvalue 1 - 2 eps^2 / (1 - eps): the two
        // neighbours of x contribute 2[x(1-x) - eps^2]/(1-eps) and the
        // diagonal the rest.
        for eps in [0.1, 0.05, 0.01] {
            let s = build_stat_matrix(eps).unwrap();
            let spec = eigen_spectrum(&s).unwrap();
            let lambda2 = spec.eigenvalues()[2];
            let analytic = 1.0 - 2.0 * eps * eps / (1.0 - eps);
            assert_abs_diff_eq!(lambda2, analytic, epsilon = 1e-11);
        }
    }

    #[test]
    fn unit_eigenvalues_have_multiplicity_two() {
        let s = build_stat_matrix(0.01).unwrap();
        let spec = eigen_spectrum(&s).unwrap();
        let ev = spec.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-10);
        assert!((ev[1] - 1.0).abs() < 1e-10);
        assert!(ev[2] < 1.0);
        for &l in &ev[2..] {
            assert!((-1e-10..1.0).contains(&l), "interior eigenvalue {l}");
        }
    }

    #[test]
    fn eigenpairs_satisfy_the_matrix_equation() {
        let s = build_stat_matrix(0.1).unwrap();
        let dense = s.to_dense();
        let spec = eigen_spectrum(&s).unwrap();
        for k in 0..spec.dimension() {
            let lambda = spec.eigenvalues()[k];
            let r = nalgebra::DVector::from_column_slice(spec.right_vector(k));
            let resid = (&dense * &r - lambda * &r).amax();
            assert!(resid < 1e-10, "right residual {resid} at mode {k}");
            let l = nalgebra::DVector::from_column_slice(spec.left_vector(k));
            let resid_l = (dense.transpose() * &l - lambda * &l).amax();
            assert!(resid_l < 1e-10, "left residual {resid_l} at mode {k}");
        }
    }

    #[test]
    fn left_and_right_vectors_are_biorthonormal() {
        for eps in [0.1, 0.05, 0.01] {
            let s = build_stat_matrix(eps).unwrap();
            let spec = eigen_spectrum(&s).unwrap();
            assert!(
                spec.biorthonormality_defect() < 1e-8,
                "defect {} at eps {eps}",
                spec.biorthonormality_defect()
            );
        }
    }

    #[test]
    fn relaxation_time_definitions() {
        let s = build_stat_matrix(0.1).unwrap();
        let spec = eigen_spectrum(&s).unwrap();
        let times = relaxation_times(&spec, 1.0).unwrap();
        assert_eq!(times.times.len(), 9);
        let lambda2 = spec.eigenvalues()[2];
        assert_abs_diff_eq!(times.selection_time, -1.0 / lambda2.ln(), epsilon = 1e-12);
        // Scales linearly in tau.
        let times2 = relaxation_times(&spec, 2.0).unwrap();
        assert_abs_diff_eq!(
            times2.selection_time,
            2.0 * times.selection_time,
            epsilon = 1e-9
        );
    }

    #[test]
    fn selection_time_approaches_the_asymptotic_estimate() {
        // The exact gap gives ratios 0.890, 0.947, 0.990 at M = 10, 20, 100:
        // the asymptotic estimate is approached from below as eps shrinks.
        for (eps, expected_ratio) in [(0.1, 0.890), (0.05, 0.9475), (0.01, 0.9899)] {
            let s = build_stat_matrix(eps).unwrap();
            let spec = eigen_spectrum(&s).unwrap();
            let times = relaxation_times(&spec, 1.0).unwrap();
            let ratio = times.selection_time / asymptotic_selection_time(eps, 1.0);
            assert!(
                (ratio - expected_ratio).abs() < 0.001,
                "eps {eps}: ratio {ratio}"
            );
        }
    }

    #[test]
    fn zero_eigenvalues_decay_instantly() {
        let s = build_stat_matrix(0.5).unwrap();
        let spec = eigen_spectrum(&s).unwrap();
        let times = relaxation_times(&spec, 1.0).unwrap();
        assert_eq!(times.times, vec![0.0]);
        assert_eq!(times.selection_time, 0.0);
    }

    #[test]
    fn absorbed_distribution_is_stationary() {
        let s = build_stat_matrix(0.25).unwrap();
        let mut phi0 = vec![0.0; 5];
        phi0[0] = 1.0;
        let phi = evolve_distribution(&s, &phi0, 1000).unwrap();
        assert_eq!(phi, phi0);
    }

    #[test]
    fn one_step_splits_mass_by_the_column() {
        let s = build_stat_matrix(0.25).unwrap();
        let mut phi0 = vec![0.0; 5];
        phi0[2] = 1.0;
        let phi = evolve_distribution(&s, &phi0, 1).unwrap();
        let (p, q, r) = s.column(2);
        assert_abs_diff_eq!(phi[1], p, epsilon = 1e-15);
        assert_abs_diff_eq!(phi[2], q, epsilon = 1e-15);
        assert_abs_diff_eq!(phi[3], r, epsilon = 1e-15);
    }

    #[test]
    fn evolution_preserves_total_probability() {
        let s = build_stat_matrix(0.1).unwrap();
        let mut phi = vec![0.0; 11];
        phi[3] = 1.0;
        for _ in 0..200 {
            phi = evolve_distribution(&s, &phi, 1).unwrap();
            let sum: f64 = crate::state::neumaier_sum(phi.iter().copied());
            assert!((sum - 1.0).abs() < 1e-12, "sum {sum}");
            assert!(phi.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn long_time_mass_matches_the_absorption_oracle() {
        let eps = 0.1;
        let s = build_stat_matrix(eps).unwrap();
        let spec = eigen_spectrum(&s).unwrap();
        let t2 = relaxation_times(&spec, 1.0).unwrap().selection_time;
        let steps = (100.0 * t2).ceil() as u64;
        let mut phi0 = vec![0.0; 11];
        phi0[3] = 1.0;
        let phi = evolve_distribution(&s, &phi0, steps).unwrap();
        let scheme = TransitionScheme::combined(eps).unwrap();
        let oracle = absorption_oracle(&scheme, 0.3).unwrap();
        assert!(
            (phi[10] - oracle).abs() < 1e-8,
            "mass {} vs oracle {oracle}",
            phi[10]
        );
    }

    #[test]
    fn rejects_invalid_distributions() {
        let s = build_stat_matrix(0.25).unwrap();
        assert!(evolve_distribution(&s, &[0.5, 0.5], 1).is_err());
        assert!(evolve_distribution(&s, &[0.5, 0.0, 0.0, 0.0, 0.4], 1).is_err());
        assert!(evolve_distribution(&s, &[-0.1, 0.6, 0.5, 0.0, 0.0], 1).is_err());
    }
}
