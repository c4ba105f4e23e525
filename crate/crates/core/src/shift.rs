//! Spectral shift operators, spectral shift functions and the index of a
//! pair of projections.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::funcalc::BvFunction;
use crate::linalg::{pairwise_sum, symmetric_eigen, symmetric_eigenvalues, Mat};
use crate::model::{build_hamiltonian, DisorderRealization, ModelConfig};
use crate::spectral::{counting_function, SpectralData};

/// `T(E) = 1_{(−∞,E]}(A) − 1_{(−∞,E]}(B)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftOperator {
    pub matrix: Mat,
    pub energy: f64,
    /// Ascending, in `[−1, 1]` up to rounding.
    pub eigenvalues: Vec<f64>,
    /// Absolute eigenvalues in non-increasing order.
    pub singular_values: Vec<f64>,
    /// `E` is within `eig_tol` of an eigenvalue of `A` or `B`.
    pub degenerate: bool,
}

impl ShiftOperator {
    /// Wraps a symmetric matrix built elsewhere, e.g. `P − Q`.
    pub fn from_matrix(matrix: Mat, energy: f64) -> Result<Self> {
        let eigenvalues = symmetric_eigenvalues(&matrix)?;
        let mut singular_values: Vec<f64> = eigenvalues.iter().map(|x| x.abs()).collect();
        singular_values.sort_by(|a, b| b.total_cmp(a));
        Ok(ShiftOperator { matrix, energy, eigenvalues, singular_values, degenerate: false })
    }

    pub fn norm(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Hilbert–Schmidt norm squared, `Σ tₙ²`.
    pub fn hs_norm_squared(&self) -> f64 {
        let sq: Vec<f64> = self.eigenvalues.iter().map(|t| t * t).collect();
        pairwise_sum(&sq)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// `Σ |tₙ|`, the trace norm.
    pub fn trace_norm(&self) -> f64 {
        pairwise_sum(&self.singular_values)
    }
}

pub fn shift_operator(spec_a: &SpectralData, spec_b: &SpectralData, e: f64, eig_tol: f64) -> Result<ShiftOperator> {
    if spec_a.dim() != spec_b.dim() {
        return Err(Error::DimensionMismatch { expected: spec_a.dim(), found: spec_b.dim() });
    }
    let t = spec_a.projection(e).sub(&spec_b.projection(e));
    let mut op = ShiftOperator::from_matrix(t, e)?;
    op.degenerate = spec_a.distance_to_spectrum(e) <= eig_tol || spec_b.distance_to_spectrum(e) <= eig_tol;
    Ok(op)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SsfValue {
    pub xi: i64,
    pub degenerate: bool,
}

/// `ξ(E) = N_A(E) − N_B(E)`.
pub fn ssf_counting(spec_a: &SpectralData, spec_b: &SpectralData, e: f64, eig_tol: f64) -> SsfValue {
    ssf_from_values(&spec_a.values, &spec_b.values, e, eig_tol)
}

/// [`ssf_counting`] from sorted eigenvalues alone.
pub fn ssf_from_values(a: &[f64], b: &[f64], e: f64, eig_tol: f64) -> SsfValue {
    let na = a.partition_point(|&v| v <= e) as i64;
    let nb = b.partition_point(|&v| v <= e) as i64;
    let near = |vs: &[f64]| vs.iter().any(|v| (v - e).abs() <= eig_tol);
    SsfValue { xi: na - nb, degenerate: near(a) || near(b) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndexResult {
    /// Eigenvalues of `T` in `[1 − kernel_tol, 1]` (and above, from rounding).
    pub dim_ker_plus: usize,
    /// Eigenvalues in `[−1, −1 + kernel_tol]`.
    pub dim_ker_minus: usize,
    pub theta: i64,
    /// Eigenvalues with `|t| ∈ [1 − 2·kernel_tol, 1 − kernel_tol)`: too close
    /// to call.
    pub ambiguous: usize,
}

/// `θ = dim ker(T − 1) − dim ker(T + 1)` with kernels resolved at
/// `kernel_tol`.
pub fn index_of_pair(t: &ShiftOperator, kernel_tol: f64) -> IndexResult {
    let plus = t.eigenvalues.iter().filter(|&&x| x >= 1.0 - kernel_tol).count();
    let minus = t.eigenvalues.iter().filter(|&&x| x <= -1.0 + kernel_tol).count();
    let ambiguous = t
        .eigenvalues
        .iter()
        .filter(|&&x| {
            let a = x.abs();
            a >= 1.0 - 2.0 * kernel_tol && a < 1.0 - kernel_tol
        })
        .count();
    IndexResult { dim_ker_plus: plus, dim_ker_minus: minus, theta: plus as i64 - minus as i64, ambiguous }
}

/// `max |P² − P|` and `max |P − Pᵀ|`.
pub fn projection_residual(p: &Mat) -> f64 {
    p.matmul(p).sub(p).max_abs().max(p.asymmetry())
}

fn check_projection(p: &Mat, which: &'static str, tol: f64) -> Result<()> {
    let residual = projection_residual(p);
    if !(residual <= tol) {
        return Err(Error::NotProjection { which, residual });
    }
    Ok(())
}

fn power(m: &Mat, n: u32) -> Mat {
    let mut out = Mat::identity(m.rows());
    for _ in 0..n {
        out = out.matmul(m);
    }
    out
}

/// Max-norm residuals of
/// `(P−Q)^{2n−1} = (PQᶜ)ⁿ − (PᶜQ)ⁿ` and `(P−Q)^{2n} = (PQᶜP)ⁿ + (PᶜQPᶜ)ⁿ`.
pub fn projection_power_identities(p: &Mat, q: &Mat, n: u32, tol: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if p.rows() != q.rows() || !p.is_square() || !q.is_square() {
        return Err(Error::DimensionMismatch { expected: p.rows(), found: q.rows() });
    }
    check_projection(p, "P", tol)?;
    check_projection(q, "Q", tol)?;
    let id = Mat::identity(p.rows());
    let pc = id.sub(p);
    let qc = id.sub(q);
    let d = p.sub(q);
    let odd_lhs = power(&d, 2 * n - 1);
    let odd_rhs = power(&p.matmul(&qc), n).sub(&power(&pc.matmul(q), n));
    let even_lhs = power(&d, 2 * n);
    let even_rhs = power(&p.matmul(&qc).matmul(p), n).add(&power(&pc.matmul(q).matmul(&pc), n));
    Ok((odd_lhs.sub(&odd_rhs).max_abs(), even_lhs.sub(&even_rhs).max_abs()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignDefiniteReport {
    pub alpha: i32,
    pub index: IndexResult,
    /// `dim ker(T + α)`, zero for a sign-definite pair.
    pub dim_ker_opposite: usize,
    /// `dim ker(T − α)`.
    pub dim_ker_aligned: usize,
    /// `1 ∈ σ(T²)` at `kernel_tol`.
    pub one_in_spectrum_of_square: bool,
    pub opposite_kernel_empty: bool,
    pub theta_matches_kernel: bool,
    pub zero_equivalence: bool,
    pub degenerate: bool,
}

impl SignDefiniteReport {
    pub fn holds(&self) -> bool {
        self.opposite_kernel_empty && self.theta_matches_kernel && self.zero_equivalence
    }
}

/// Checks the kernel structure of `T(E, A, B)` for `α(B − A) ⪰ 0`.
pub fn sign_definite_checks(
    spec_a: &SpectralData,
    spec_b: &SpectralData,
    e: f64,
    alpha: i32,
    kernel_tol: f64,
    eig_tol: f64,
) -> Result<SignDefiniteReport> {
    if alpha != 1 && alpha != -1 {
        return Err(Error::param("alpha", "must be +1 or -1"));
    }
    let a = Mat::from_spectral(&spec_a.vectors, &spec_a.values);
    let b = Mat::from_spectral(&spec_b.vectors, &spec_b.values);
    let mut diff = b.sub(&a).scale(alpha as f64);
    // symmetrize away reconstruction noise before testing definiteness
    diff = diff.add(&diff.transpose()).scale(0.5);
    let min_eigenvalue = symmetric_eigenvalues(&diff)?.first().copied().unwrap_or(0.0);
    let scale = a.max_abs().max(b.max_abs()).max(1.0);
    if min_eigenvalue < -eig_tol * scale {
        return Err(Error::NotSignDefinite { alpha, min_eigenvalue });
    }
    let t = shift_operator(spec_a, spec_b, e, eig_tol)?;
    let index = index_of_pair(&t, kernel_tol);
    let (aligned, opposite) = if alpha == 1 {
        (index.dim_ker_plus, index.dim_ker_minus)
    } else {
        (index.dim_ker_minus, index.dim_ker_plus)
    };
    let one_in_sq = t.norm() >= 1.0 - kernel_tol;
    Ok(SignDefiniteReport {
        alpha,
        index,
        dim_ker_opposite: opposite,
        dim_ker_aligned: aligned,
        one_in_spectrum_of_square: one_in_sq,
        opposite_kernel_empty: opposite == 0,
        theta_matches_kernel: index.theta == alpha as i64 * aligned as i64,
        zero_equivalence: one_in_sq == (index.theta != 0),
        degenerate: t.degenerate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KreinReport {
    /// `|Tr(f(A) − f(B)) + ∫ f′ξ|` on the given grid.
    pub residual: f64,
    /// The same on the grid with every cell bisected.
    pub refined_residual: f64,
    pub trace_difference: f64,
}

/// Krein trace-formula residual for a continuous `f` whose derivative is
/// supported in the grid span. `ξ` is sampled at cell midpoints and `f′`
/// is integrated exactly on each cell.
///
/// A grid is too coarse when some cell holds two or more eigenvalues of
/// `A` and `B` together; refining such a cell can change the sampled
/// step pattern of `ξ` arbitrarily.
pub fn krein_residual(spec_a: &SpectralData, spec_b: &SpectralData, f: &BvFunction, grid: &[f64]) -> Result<KreinReport> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("grid", "needs at least two strictly increasing points"));
    }
    if !f.jumps().is_empty() {
        return Err(Error::param("f", "Krein residual needs a continuous function"));
    }
    let (g0, g1) = (grid[0], grid[grid.len() - 1]);
    if let (Some(&k0), Some(&k1)) = (f.knots().first(), f.knots().last()) {
        if k0 < g0 || k1 > g1 {
            return Err(Error::param("grid", "must span the support of f′"));
        }
    }
    let mut all: Vec<f64> = spec_a.values.iter().chain(&spec_b.values).copied().collect();
    all.sort_by(f64::total_cmp);
    for w in grid.windows(2) {
        let inside = all.partition_point(|&v| v < w[1]) - all.partition_point(|&v| v <= w[0]);
        if inside >= 2 {
            return Err(Error::Precondition(alloc::format!(
                "Krein grid too coarse: cell [{}, {}] holds {inside} eigenvalues",
                w[0],
                w[1]
            )));
        }
    }
    let fa: Vec<f64> = spec_a.values.iter().map(|&x| f.eval(x)).collect();
    let fb: Vec<f64> = spec_b.values.iter().map(|&x| f.eval(x)).collect();
    let trace_difference = pairwise_sum(&fa) - pairwise_sum(&fb);
    let integral = |grid: &[f64]| -> f64 {
        let terms: Vec<f64> = grid
            .windows(2)
            .map(|w| {
                let xi = ssf_from_values(&spec_a.values, &spec_b.values, 0.5 * (w[0] + w[1]), 0.0).xi as f64;
                xi * (f.eval(w[1]) - f.eval(w[0]))
            })
            .collect();
        pairwise_sum(&terms)
    };
    let residual = (trace_difference + integral(grid)).abs();
    let mut fine = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        fine.extend([w[0], 0.5 * (w[0] + w[1])]);
    }
    fine.push(g1);
    let refined_residual = (trace_difference + integral(&fine)).abs();
    Ok(KreinReport { residual, refined_residual, trace_difference })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BirmanSolomyakReport {
    /// `∫_I ξ(E, H, H + W) dE`, exact for the step function `ξ`.
    pub lhs: f64,
    /// `∫₀¹ Tr(W 1_I(H + sW)) ds` by the midpoint rule.
    pub rhs: f64,
    pub residual: f64,
    /// Residual with the coupling grid doubled.
    pub refined_residual: f64,
    /// Refinement made the residual worse, a sign that an eigenvalue path
    /// crosses `∂I` badly for this grid.
    pub unstable: bool,
}

/// `∫_{e1}^{e2} (N_A − N_B) dE` from sorted eigenvalues.
pub fn ssf_integral(a: &[f64], b: &[f64], interval: (f64, f64)) -> f64 {
    let (e1, e2) = interval;
    let mass = |vs: &[f64]| -> f64 {
        let terms: Vec<f64> = vs.iter().map(|&l| (e2 - l.max(e1)).max(0.0)).collect();
        pairwise_sum(&terms)
    };
    mass(a) - mass(b)
}

/// Both sides of the coupling-constant identity for `I = (e1, e2]` and
/// a diagonal perturbation `W`, with `n_s` coupling cells.
pub fn birman_solomyak(h: &Mat, w: &[f64], interval: (f64, f64), n_s: usize) -> Result<BirmanSolomyakReport> {
    let (e1, e2) = interval;
    if !(e1 < e2) {
        return Err(Error::param("interval", "needs e1 < e2"));
    }
    if n_s == 0 {
        return Err(Error::param("grid", "needs at least one cell"));
    }
    if w.len() != h.rows() {
        return Err(Error::DimensionMismatch { expected: h.rows(), found: w.len() });
    }
    let spec_h = symmetric_eigenvalues(h)?;
    let spec_hw = symmetric_eigenvalues(&add_diagonal(h, w, 1.0))?;
    let lhs = ssf_integral(&spec_h, &spec_hw, interval);
    let rhs_at = |ns: usize| -> Result<f64> {
        let ds = 1.0 / ns as f64;
        let mut terms = Vec::with_capacity(ns);
        for k in 0..ns {
            let s = (k as f64 + 0.5) * ds;
            let e = symmetric_eigen(&add_diagonal(h, w, s))?;
            let mut tr = 0.0;
            for (m, &lam) in e.values.iter().enumerate() {
                if lam > e1 && lam <= e2 {
                    for (x, &wx) in w.iter().enumerate() {
                        let v = e.vectors[(x, m)];
                        tr += wx * v * v;
                    }
                }
            }
            terms.push(tr * ds);
        }
        Ok(pairwise_sum(&terms))
    };
    let rhs = rhs_at(n_s)?;
    let residual = (lhs - rhs).abs();
    let refined_residual = (lhs - rhs_at(2 * n_s)?).abs();
    Ok(BirmanSolomyakReport { lhs, rhs, residual, refined_residual, unstable: refined_residual > residual })
}

/// [`birman_solomyak`] for the configured `H` and `W` at `τ = 1`.
pub fn birman_solomyak_residual(
    config: &ModelConfig,
    omega: &DisorderRealization,
    interval: (f64, f64),
    n_s: usize,
) -> Result<BirmanSolomyakReport> {
    let h = build_hamiltonian(config, omega)?;
    let mut w = alloc::vec![0.0; h.dim()];
    for e in &config.perturbation {
        let i = h.index_of(e.site).ok_or(Error::SupportOverflow { site: e.site })?;
        w[i] += e.value;
    }
    birman_solomyak(h.matrix(), &w, interval, n_s)
}

fn add_diagonal(h: &Mat, w: &[f64], s: f64) -> Mat {
    let mut m = h.clone();
    for (i, &wi) in w.iter().enumerate() {
        m[(i, i)] += s * wi;
    }
    m
}

/// Counting-function degeneracy for either operator.
pub fn energy_is_degenerate(spec_a: &SpectralData, spec_b: &SpectralData, e: f64, eig_tol: f64) -> bool {
    counting_function(spec_a, e, eig_tol).degenerate || counting_function(spec_b, e, eig_tol).degenerate
}
