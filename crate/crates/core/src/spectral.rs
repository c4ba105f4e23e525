//! Eigendecompositions, resolvent blocks, Schatten norms and eigenvalue
//! counting.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimators::mc_table;
use crate::exec::Executor;
use crate::linalg::{
    complex_operator_norm, singular_values, symmetric_eigen, symmetric_eigenvalues, BandedLu, CMat, Complex64, Mat,
};
use crate::model::{build_hamiltonian, sample_realization, Hamiltonian, ModelConfig};
use crate::stats::EstimatorResult;

/// Eigenvalues in ascending order with orthonormal eigenvectors as the
/// columns of `vectors`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SpectralData {
    /// Diagonalizes an explicit symmetric matrix.
    pub fn of_matrix(m: &Mat) -> Result<Self> {
        let e = symmetric_eigen(m)?;
        Ok(SpectralData { values: e.values, vectors: e.vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Component `i` of eigenvector `k`.
    #[inline]
    pub fn component(&self, i: usize, k: usize) -> f64 {
        self.vectors[(i, k)]
    }

    /// Distance from `e` to the nearest eigenvalue.
    pub fn distance_to_spectrum(&self, e: f64) -> f64 {
        let k = self.values.partition_point(|&v| v < e);
        let mut d = f64::INFINITY;
        if k < self.values.len() {
            d = d.min(self.values[k] - e);
        }
        if k > 0 {
            d = d.min(e - self.values[k - 1]);
        }
        d
    }

    /// Smallest gap between consecutive eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// `V g(Λ) Vᵀ`.
    pub fn apply(&self, g: impl Fn(f64) -> f64) -> Mat {
        let w: Vec<f64> = self.values.iter().map(|&x| g(x)).collect();
        Mat::from_spectral(&self.vectors, &w)
    }

    /// Entries `(a_i, b_j)` of `V g(Λ) Vᵀ`, without forming the full matrix.
    pub fn apply_block(&self, g: impl Fn(f64) -> f64, a: &[usize], b: &[usize]) -> Mat {
        let w: Vec<f64> = self.values.iter().map(|&x| g(x)).collect();
        Mat::from_fn(a.len(), b.len(), |i, j| {
            let mut s = 0.0;
            for (k, &wk) in w.iter().enumerate() {
                if wk != 0.0 {
                    s += self.vectors[(a[i], k)] * wk * self.vectors[(b[j], k)];
                }
            }
            s
        })
    }

    /// Fermi projection `1_{(−∞,E]}(H)`.
    pub fn projection(&self, e: f64) -> Mat {
        let n = self.values.partition_point(|&v| v <= e);
        let mut out = Mat::zeros(self.dim(), self.dim());
        for k in 0..n {
            for i in 0..self.dim() {
                let vi = self.vectors[(i, k)];
                if vi == 0.0 {
                    continue;
                }
                for j in 0..self.dim() {
                    out[(i, j)] += vi * self.vectors[(j, k)];
                }
            }
        }
        out
    }

    /// `max |VᵀV − I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        self.vectors.transpose().matmul(&self.vectors).sub(&Mat::identity(self.dim())).max_abs()
    }

    /// `max |VΛVᵀ − H|`.
    pub fn reconstruction_residual(&self, h: &Mat) -> f64 {
        Mat::from_spectral(&self.vectors, &self.values).sub(h).max_abs()
    }
}

pub fn eig(h: &Hamiltonian) -> Result<SpectralData> {
    SpectralData::of_matrix(h.matrix())
}

/// Rectangular block `χ_a M χ_b`; rows follow `a`, columns follow `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalBlock {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub matrix: CMat,
}

impl LocalBlock {
    pub fn from_real(rows: &[usize], cols: &[usize], m: &Mat) -> Self {
        assert_eq!((m.rows(), m.cols()), (rows.len(), cols.len()));
        LocalBlock { rows: rows.to_vec(), cols: cols.to_vec(), matrix: m.to_complex() }
    }

    /// Block of a full matrix.
    pub fn of(m: &Mat, a: &[usize], b: &[usize]) -> Self {
        Self::from_real(a, b, &m.select(a, b))
    }
}

/// `χ_a (H − z)⁻¹ χ_b` from one banded factorization of `H − z` and
/// `|b|` solves.
///
/// Real `z` is accepted below the spectral floor, or when it is more than
/// `eig_tol` away from every eigenvalue.
pub fn resolvent_block(h: &Hamiltonian, z: Complex64, a: &[usize], b: &[usize], eig_tol: f64) -> Result<LocalBlock> {
    let n = h.dim();
    if let Some(&bad) = a.iter().chain(b).find(|&&i| i >= n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad + 1 });
    }
    if z.im == 0.0 && z.re >= h.floor - eig_tol {
        let values = symmetric_eigenvalues(h.matrix())?;
        let d = values.iter().map(|v| (v - z.re).abs()).fold(f64::INFINITY, f64::min);
        if d <= eig_tol {
            return Err(Error::NearSpectrum { energy: z.re, distance: d });
        }
    }
    let lu = BandedLu::factor_shifted(h.matrix(), h.bandwidth(), z)?;
    let mut out = CMat::zeros(a.len(), b.len());
    for (j, &col) in b.iter().enumerate() {
        let x = lu.inverse_column(col);
        for (i, &row) in a.iter().enumerate() {
            out[(i, j)] = x[row];
        }
    }
    Ok(LocalBlock { rows: a.to_vec(), cols: b.to_vec(), matrix: out })
}

/// Largest singular value.
pub fn operator_norm(block: &LocalBlock) -> f64 {
    complex_operator_norm(&block.matrix)
}

/// `(Σ σₙᵖ)^{1/p}`; a quasi-norm for `p < 1`.
pub fn schatten_norm(m: &Mat, p: f64) -> Result<f64> {
    Ok(libm::pow(schatten_power(m, p)?, 1.0 / p))
}

/// `‖M‖_p^p = Σ σₙᵖ`.
pub fn schatten_power(m: &Mat, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::param("p", "Schatten exponent must be positive"));
    }
    if m.rows() == 1 && m.cols() == 1 {
        return Ok(libm::pow(m[(0, 0)].abs(), p));
    }
    Ok(resolved_singular_values(m).iter().filter(|&&s| s > 0.0).map(|&s| libm::pow(s, p)).sum())
}

/// Singular values with those below `max(rows, cols)·ε·σ₁` set to zero.
/// Below that level they are rounding noise, which `σᵖ` with `p < 1`
/// would amplify.
pub fn resolved_singular_values(m: &Mat) -> Vec<f64> {
    let mut s = singular_values(m);
    let cutoff = s.first().copied().unwrap_or(0.0) * m.rows().max(m.cols()) as f64 * f64::EPSILON;
    for x in s.iter_mut() {
        if *x <= cutoff {
            *x = 0.0;
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Count {
    pub count: usize,
    /// `E` lies within `eig_tol` of an eigenvalue.
    pub degenerate: bool,
}

/// `#{eigenvalues ≤ E}`.
pub fn counting_function(spec: &SpectralData, e: f64, eig_tol: f64) -> Count {
    Count { count: spec.values.partition_point(|&v| v <= e), degenerate: spec.distance_to_spectrum(e) <= eig_tol }
}

/// Disorder average of `N_L(E)/L^d` over realizations `0..n`, one result
/// per energy.
pub fn ids_estimate<X: Executor>(config: &ModelConfig, energies: &[f64], n: usize, exec: &X) -> Result<Vec<EstimatorResult>> {
    config.validate()?;
    let volume = config.volume() as f64;
    let names = vec!["ids"; energies.len()];
    mc_table(config, n, exec, &names, |cfg, omega| {
        let h = build_hamiltonian(cfg, omega)?;
        let values = symmetric_eigenvalues(h.matrix())?;
        Ok(energies.iter().map(|&e| values.partition_point(|&v| v <= e) as f64 / volume).collect())
    })
}

/// Eigenvalues of one realization, for callers that only count.
pub fn realization_eigenvalues(config: &ModelConfig, index: u64) -> Result<Vec<f64>> {
    let h = build_hamiltonian(config, &sample_realization(config, index))?;
    symmetric_eigenvalues(h.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;
    use crate::rng::StreamRng;
    use core::f64::consts::PI;

    fn random_symmetric(n: usize, rng: &mut StreamRng) -> Mat {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = rng.uniform_in(-1.0, 1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    fn random_matrix(r: usize, c: usize, rng: &mut StreamRng) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.normal())
    }

    #[test]
    fn diagonal_input() {
        let s = SpectralData::of_matrix(&Mat::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(s.component(1, 0), 1.0);
        assert_eq!(s.component(2, 1), 1.0);
        assert_eq!(s.component(0, 2), 1.0);
    }

    #[test]
    fn dirichlet_laplacian_l5() {
        let cfg = ModelConfig::chain(5, 0.0);
        let h = build_hamiltonian(&cfg, &sample_realization(&cfg, 0)).unwrap();
        let s = eig(&h).unwrap();
        for (m, v) in s.values.iter().enumerate() {
            assert!((v - (2.0 - 2.0 * libm::cos((m + 1) as f64 * PI / 6.0))).abs() < 1e-13);
        }
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = StreamRng::new(5, 0);
        let m = random_symmetric(50, &mut rng);
        let s = SpectralData::of_matrix(&m).unwrap();
        assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.orthogonality_residual() <= 1e-10);
        assert!(s.reconstruction_residual(&m) <= 1e-10);
    }

    #[test]
    fn scalar_resolvent() {
        let h = Hamiltonian::from_matrix(Mat::from_diag(&[2.0]), 2.0).unwrap();
        let blk = resolvent_block(&h, Complex64::new(0.0, 0.0), &[0], &[0], 1e-10).unwrap();
        assert!((blk.matrix[(0, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!(matches!(
            resolvent_block(&h, Complex64::new(2.0, 0.0), &[0], &[0], 1e-10),
            Err(Error::NearSpectrum { .. })
        ));
    }

    #[test]
    fn resolvent_matches_spectral_oracle_and_symmetry() {
        let mut rng = StreamRng::new(9, 0);
        let m = random_symmetric(20, &mut rng);
        let h = Hamiltonian::from_matrix(m.clone(), -10.0).unwrap();
        let s = SpectralData::of_matrix(&m).unwrap();
        let z = Complex64::new(1.0, 0.1);
        let a = [0usize, 3, 7];
        let b = [1usize, 3, 19, 12];
        let blk = resolvent_block(&h, z, &a, &b, 1e-10).unwrap();
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                let mut oracle = Complex64::new(0.0, 0.0);
                for k in 0..20 {
                    oracle += s.component(ai, k) * s.component(bj, k) / (s.values[k] - z);
                }
                assert!((blk.matrix[(i, j)] - oracle).norm() <= 1e-8 * oracle.norm().max(1.0));
            }
        }
        let conj_blk = resolvent_block(&h, z.conj(), &b, &a, 1e-10).unwrap();
        assert!(blk.matrix.sub(&conj_blk.matrix.transpose().conj()).max_abs() < 1e-12);
    }

    #[test]
    fn resolvent_norm_bounded_by_inverse_eta() {
        let cfg = ModelConfig::chain(40, 3.0).with_seed(2);
        let h = build_hamiltonian(&cfg, &sample_realization(&cfg, 0)).unwrap();
        for eta in [1.0, 0.1, 0.01] {
            let blk = resolvent_block(&h, Complex64::new(3.3, eta), &[5, 6], &[20, 30, 31], 1e-10).unwrap();
            assert!(operator_norm(&blk) <= 1.0 / eta * (1.0 + 1e-12));
        }
    }

    #[test]
    fn operator_norm_examples() {
        let zero = LocalBlock::of(&Mat::zeros(3, 3), &[0, 1], &[2]);
        assert_eq!(operator_norm(&zero), 0.0);
        let d = LocalBlock::of(&Mat::from_diag(&[3.0, -4.0]), &[0, 1], &[0, 1]);
        assert!((operator_norm(&d) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn schatten_examples() {
        assert!((schatten_norm(&Mat::identity(2), 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((schatten_norm(&Mat::from_diag(&[3.0, 4.0]), 2.0).unwrap() - 5.0).abs() < 1e-14);
        assert!(schatten_norm(&Mat::identity(2), 0.0).is_err());
    }

    #[test]
    fn schatten_monotone_in_p() {
        let mut rng = StreamRng::new(3, 1);
        for _ in 0..20 {
            let m = random_matrix(6, 4, &mut rng);
            let ps = [0.25, 0.5, 1.0, 1.5, 2.0, 4.0];
            let norms: Vec<f64> = ps.iter().map(|&p| schatten_norm(&m, p).unwrap()).collect();
            assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn quasi_norm_triangle_product_and_interpolation() {
        let mut rng = StreamRng::new(4, 2);
        for _ in 0..200 {
            let a = random_matrix(5, 5, &mut rng);
            let b = random_matrix(5, 5, &mut rng);
            for p in [0.25, 0.5, 1.0] {
                let lhs = schatten_power(&a.add(&b), p).unwrap();
                let rhs = schatten_power(&a, p).unwrap() + schatten_power(&b, p).unwrap();
                assert!(lhs <= rhs * (1.0 + 1e-12));
                let prod = schatten_norm(&a.matmul(&b), p).unwrap();
                let bound = singular_values(&a)[0] * schatten_norm(&b, p).unwrap();
                assert!(prod <= bound * (1.0 + 1e-12));
                for eps in [0.1 * p, 0.5 * p, 0.9 * p] {
                    let op = singular_values(&a)[0];
                    let inter = libm::pow(op, eps) * schatten_power(&a, p - eps).unwrap();
                    assert!(schatten_power(&a, p).unwrap() <= inter * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn counting_examples() {
        let s = SpectralData::of_matrix(&Mat::from_diag(&[0.0, 1.0, 2.0])).unwrap();
        assert_eq!(counting_function(&s, -1.0, 1e-10).count, 0);
        assert_eq!(counting_function(&s, 5.0, 1e-10).count, 3);
        let c = counting_function(&s, 1.0, 1e-10);
        assert_eq!(c.count, 2);
        assert!(c.degenerate);
        assert!(!counting_function(&s, 1.5, 1e-10).degenerate);
    }

    #[test]
    fn counting_matches_trace_of_projection() {
        let mut rng = StreamRng::new(8, 0);
        let m = random_symmetric(12, &mut rng);
        let s = SpectralData::of_matrix(&m).unwrap();
        for e in [-1.0, 0.0, 0.3, 2.0] {
            let tr = s.projection(e).trace();
            assert!((tr - counting_function(&s, e, 1e-10).count as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn ids_without_disorder_is_deterministic() {
        let cfg = ModelConfig::chain(16, 0.0);
        let grid = [-0.5, 1.0, 2.0, 3.9, 4.5];
        let ids = ids_estimate(&cfg, &grid, 5, &Serial).unwrap();
        assert_eq!(ids[0].mean, 0.0);
        assert_eq!(ids[4].mean, 1.0);
        for r in &ids {
            assert_eq!(r.stderr, 0.0);
        }
        let exact = (1..=16).filter(|&m| 2.0 - 2.0 * libm::cos(m as f64 * PI / 17.0) <= 2.0).count();
        assert_eq!(ids[2].mean, exact as f64 / 16.0);
    }
}
