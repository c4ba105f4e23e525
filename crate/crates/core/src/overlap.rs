//! Ground-state overlaps: determinants of eigenvector overlap matrices and
//! their Fredholm forms.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{log_abs_det, pairwise_sum, singular_values, symmetric_eigenvalues, Mat};
use crate::shift::{projection_residual, ShiftOperator};
use crate::spectral::{counting_function, SpectralData};

pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum OverlapMethod {
    MatrixDet,
    #[cfg_attr(feature = "serde", serde(rename = "fredholm-PQ"))]
    FredholmPq,
    #[cfg_attr(feature = "serde", serde(rename = "fredholm-PQ^cP"))]
    FredholmPqcP,
    #[cfg_attr(feature = "serde", serde(rename = "fredholm-P^cQP^c"))]
    FredholmPcQPc,
}

impl OverlapMethod {
    pub fn tag(self) -> &'static str {
        match self {
            OverlapMethod::MatrixDet => "matrix-det",
            OverlapMethod::FredholmPq => "fredholm-PQ",
            OverlapMethod::FredholmPqcP => "fredholm-PQ^cP",
            OverlapMethod::FredholmPcQPc => "fredholm-P^cQP^c",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OverlapResult {
    pub value: f64,
    /// Natural log of the overlap, `−∞` for an exact zero.
    pub log_value: f64,
    pub particles: usize,
    pub method: OverlapMethod,
    pub zero_flag: bool,
    /// The particle number sits inside an eigenvalue cluster narrower than
    /// `eig_tol`, so the overlap depends on the basis chosen there.
    pub degenerate: bool,
}

impl OverlapResult {
    fn from_log(log_value: f64, particles: usize, method: OverlapMethod, zero_threshold: f64) -> Self {
        let zero_flag = log_value < libm::log(zero_threshold);
        let value = if zero_flag { 0.0 } else { libm::exp(log_value) };
        OverlapResult { value, log_value, particles, method, zero_flag, degenerate: false }
    }

    fn one(particles: usize, method: OverlapMethod) -> Self {
        OverlapResult { value: 1.0, log_value: 0.0, particles, method, zero_flag: false, degenerate: false }
    }
}

/// `|det ⟨φ_j, ψ_k⟩|` over the lowest `n` eigenvectors of each operator.
pub fn overlap_matrix_det(spec_a: &SpectralData, spec_b: &SpectralData, n: usize) -> Result<OverlapResult> {
    let dim = spec_a.dim();
    if spec_b.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: spec_b.dim() });
    }
    if n == 0 || n > dim {
        return Err(Error::param("n", alloc::format!("particle number must lie in 1..={dim}")));
    }
    if spec_a == spec_b {
        return Ok(OverlapResult::one(n, OverlapMethod::MatrixDet));
    }
    let rows: Vec<usize> = (0..dim).collect();
    let cols: Vec<usize> = (0..n).collect();
    let u = spec_a.vectors.select(&rows, &cols);
    let v = spec_b.vectors.select(&rows, &cols);
    let m = u.transpose().matmul(&v);
    let det = log_abs_det(&m);
    let log = if det.sign == 0.0 { f64::NEG_INFINITY } else { det.log_abs };
    Ok(OverlapResult::from_log(log, n, OverlapMethod::MatrixDet, DEFAULT_ZERO_THRESHOLD))
}

/// `power · Σ log cₙ`, or `−∞` when some factor vanishes.
fn log_product(factors: impl Iterator<Item = f64>, power: f64) -> f64 {
    let mut logs = Vec::new();
    for c in factors {
        if c <= 0.0 {
            return f64::NEG_INFINITY;
        }
        logs.push(libm::log(c));
    }
    power * pairwise_sum(&logs)
}

/// The three Fredholm-determinant forms of the overlap of the ranges of
/// two equal-rank projections, in the order `(P−Q)²`, `PQᶜP`, `PᶜQPᶜ`.
///
/// Each determinant is a product of `1 − bₙ` over the eigenvalues `bₙ`.
/// Those factors are squared cosines of principal angles, so they are
/// obtained from quantities that carry the cosines themselves: the
/// eigenvalues of `P + Q − I` (whose square is `I − (P−Q)²`), and the
/// singular values of `PQ` and `PᶜQᶜ` (whose squares are the nontrivial
/// eigenvalues of `I − PQᶜP` and `I − PᶜQPᶜ`). Going through the squares
/// directly would cost half the significant digits of small overlaps.
pub fn overlap_fredholm(p: &Mat, q: &Mat, proj_tol: f64) -> Result<[OverlapResult; 3]> {
    if !p.is_square() || p.rows() != q.rows() || !q.is_square() {
        return Err(Error::DimensionMismatch { expected: p.rows(), found: q.rows() });
    }
    for (m, which) in [(p, "P"), (q, "Q")] {
        let residual = projection_residual(m);
        if !(residual <= proj_tol) {
            return Err(Error::NotProjection { which, residual });
        }
    }
    let dim = p.rows();
    let rank_p = libm::round(p.trace()) as usize;
    let rank_q = libm::round(q.trace()) as usize;
    if rank_p != rank_q {
        return Err(Error::RankMismatch { p: rank_p, q: rank_q });
    }
    let id = Mat::identity(dim);
    let s = symmetric_eigenvalues(&p.add(q).sub(&id))?;
    let log_pq = log_product(s.iter().map(|x| x.abs()), 0.5);
    let cos_p = singular_values(&p.matmul(q));
    let log_pqcp = log_product(cos_p.into_iter().take(rank_p), 1.0);
    let cos_pc = singular_values(&id.sub(p).matmul(&id.sub(q)));
    let log_pcqpc = log_product(cos_pc.into_iter().take(dim - rank_p), 1.0);
    let mk = |log, method| OverlapResult::from_log(log, rank_p, method, DEFAULT_ZERO_THRESHOLD);
    Ok([
        mk(log_pq, OverlapMethod::FredholmPq),
        mk(log_pqcp, OverlapMethod::FredholmPqcP),
        mk(log_pcqpc, OverlapMethod::FredholmPcQPc),
    ])
}

/// Finite-volume overlap `S_{N,L}(E)` with `N` the number of eigenvalues
/// of `A` at or below `E`.
pub fn ground_state_overlap(spec_a: &SpectralData, spec_b: &SpectralData, e: f64, eig_tol: f64) -> Result<OverlapResult> {
    let count = counting_function(spec_a, e, eig_tol);
    let n = count.count;
    let mut result = if n == 0 {
        OverlapResult::one(0, OverlapMethod::MatrixDet)
    } else {
        overlap_matrix_det(spec_a, spec_b, n)?
    };
    result.degenerate = count.degenerate || cluster_at(spec_a, n, eig_tol) || cluster_at(spec_b, n, eig_tol);
    Ok(result)
}

/// The `n`-th and `n+1`-th eigenvalues are closer than `eig_tol`.
fn cluster_at(spec: &SpectralData, n: usize, eig_tol: f64) -> bool {
    n > 0 && n < spec.dim() && spec.values[n] - spec.values[n - 1] < eig_tol
}

/// `det(I − T²)^{1/4}` from the eigenvalues of `T`. The zero flag is set
/// exactly when `1 ∈ σ(T²)` at `kernel_tol`.
pub fn infinite_volume_overlap_proxy(t: &ShiftOperator, kernel_tol: f64, zero_threshold: f64) -> OverlapResult {
    let log = log_product(t.eigenvalues.iter().map(|&x| (1.0 - x.abs()) * (1.0 + x.abs())), 0.25);
    let max_b = t.norm() * t.norm();
    let zero_flag = max_b >= 1.0 - kernel_tol;
    let value = if log < libm::log(zero_threshold) { 0.0 } else { libm::exp(log) };
    // the particle number is not recoverable from T alone
    OverlapResult { value, log_value: log, particles: 0, method: OverlapMethod::FredholmPq, zero_flag, degenerate: t.degenerate }
}

/// `exp(−‖T‖₂²/(1 − ‖T‖²))`, the lower bound on `S⁴` for `‖T‖ < 1`.
pub fn overlap_lower_bound(t: &ShiftOperator) -> Option<f64> {
    let norm = t.norm();
    (norm < 1.0).then(|| libm::exp(-t.hs_norm_squared() / (1.0 - norm * norm)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use crate::shift::shift_operator;

    fn spec(m: &Mat) -> SpectralData {
        SpectralData::of_matrix(m).unwrap()
    }

    fn random_symmetric(n: usize, rng: &mut StreamRng) -> Mat {
        let g = Mat::from_fn(n, n, |_, _| rng.normal());
        g.add(&g.transpose())
    }

    fn projection_onto(spec: &SpectralData, n: usize) -> Mat {
        let rows: Vec<usize> = (0..spec.dim()).collect();
        let cols: Vec<usize> = (0..n).collect();
        let v = spec.vectors.select(&rows, &cols);
        v.matmul(&v.transpose())
    }

    #[test]
    fn identical_spectra_overlap_one() {
        let mut rng = StreamRng::new(41, 0);
        let a = spec(&random_symmetric(6, &mut rng));
        for n in 1..=6 {
            let r = overlap_matrix_det(&a, &a, n).unwrap();
            assert!((r.value - 1.0).abs() < 1e-12);
        }
        assert!(overlap_matrix_det(&a, &a, 0).is_err());
        assert!(overlap_matrix_det(&a, &a, 7).is_err());
    }

    #[test]
    fn rotated_basis_gives_cosine() {
        let phi: f64 = 0.7;
        let (c, s) = (phi.cos(), phi.sin());
        // eigenvectors of B are those of diag(0,1) rotated by φ
        let rot = Mat::from_rows(&[&[c, -s], &[s, c]]);
        let b = rot.matmul(&Mat::from_diag(&[0.0, 1.0])).matmul(&rot.transpose());
        let r = overlap_matrix_det(&spec(&Mat::from_diag(&[0.0, 1.0])), &spec(&b), 1).unwrap();
        assert!((r.value - c.abs()).abs() < 1e-14);
        let full = overlap_matrix_det(&spec(&Mat::from_diag(&[0.0, 1.0])), &spec(&b), 2).unwrap();
        assert!((full.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fredholm_trivial_cases() {
        let p = Mat::from_diag(&[1.0, 0.0]);
        for r in overlap_fredholm(&p, &p, 1e-10).unwrap() {
            assert_eq!(r.value, 1.0);
        }
        let q = Mat::from_diag(&[0.0, 1.0]);
        for r in overlap_fredholm(&p, &q, 1e-10).unwrap() {
            assert_eq!(r.value, 0.0);
            assert!(r.zero_flag);
        }
        assert!(matches!(
            overlap_fredholm(&p, &Mat::identity(2), 1e-10),
            Err(Error::RankMismatch { p: 1, q: 2 })
        ));
    }

    #[test]
    fn fredholm_forms_match_matrix_det() {
        let mut rng = StreamRng::new(42, 0);
        for k in 0..80 {
            let dim = if k < 50 { 8 } else { rng.int_in(20, 64) };
            let a = spec(&random_symmetric(dim, &mut rng));
            let b = spec(&random_symmetric(dim, &mut rng));
            let n = rng.int_in(1, dim - 1);
            let det = overlap_matrix_det(&a, &b, n).unwrap();
            let forms = overlap_fredholm(&projection_onto(&a, n), &projection_onto(&b, n), 1e-10).unwrap();
            for f in forms {
                assert!((f.value - det.value).abs() <= 1e-10 * det.value, "{} vs {}", f.value, det.value);
            }
        }
    }

    #[test]
    fn ground_state_overlap_cases() {
        let mut rng = StreamRng::new(43, 0);
        let h = random_symmetric(10, &mut rng);
        let a = spec(&h);
        let below = ground_state_overlap(&a, &a, a.values[0] - 1.0, 1e-10).unwrap();
        assert_eq!((below.value, below.particles), (1.0, 0));
        let e = 0.5 * (a.values[4] + a.values[5]);
        assert!((ground_state_overlap(&a, &a, e, 1e-10).unwrap().value - 1.0).abs() < 1e-12);

        let mut hw = h.clone();
        hw[(3, 3)] += 0.3;
        let b = spec(&hw);
        let t = shift_operator(&a, &b, e, 1e-10).unwrap();
        if t.trace().abs() < 0.5 {
            let s = ground_state_overlap(&a, &b, e, 1e-10).unwrap();
            let proxy = infinite_volume_overlap_proxy(&t, 1e-6, DEFAULT_ZERO_THRESHOLD);
            assert!((s.value - proxy.value).abs() <= 1e-8, "{} {}", s.value, proxy.value);
        }
    }

    #[test]
    fn proxy_examples() {
        let zero = ShiftOperator::from_matrix(Mat::zeros(3, 3), 0.0).unwrap();
        let r = infinite_volume_overlap_proxy(&zero, 1e-6, DEFAULT_ZERO_THRESHOLD);
        assert_eq!((r.value, r.zero_flag), (1.0, false));
        let one = ShiftOperator::from_matrix(Mat::from_diag(&[1.0, 0.2]), 0.0).unwrap();
        let r = infinite_volume_overlap_proxy(&one, 1e-6, DEFAULT_ZERO_THRESHOLD);
        assert_eq!((r.value, r.zero_flag), (0.0, true));
        assert_eq!(r.log_value, f64::NEG_INFINITY);
    }

    #[test]
    fn lower_bound_on_random_shifts() {
        let mut rng = StreamRng::new(44, 0);
        let mut checked = 0;
        for _ in 0..200 {
            let h = random_symmetric(8, &mut rng);
            let mut hw = h.clone();
            let k = rng.int_in(0, 7);
            hw[(k, k)] += rng.uniform_in(0.05, 2.0);
            let t = shift_operator(&spec(&h), &spec(&hw), rng.uniform_in(-3.0, 3.0), 1e-10).unwrap();
            if let Some(bound) = overlap_lower_bound(&t) {
                if t.norm() < 1.0 - 1e-6 {
                    let s = infinite_volume_overlap_proxy(&t, 1e-6, DEFAULT_ZERO_THRESHOLD);
                    assert!(s.value.powi(4) >= bound * (1.0 - 1e-12), "{} < {bound}", s.value.powi(4));
                    checked += 1;
                }
            }
        }
        assert!(checked > 50);
    }
}
