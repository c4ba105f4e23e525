//! Monte Carlo disorder averages and the scans built on them.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::funcalc::{jump_degeneracy, BvFunction};
use crate::linalg::{pairwise_sum, symmetric_eigenvalues, BandedLu, Complex64, Mat};
use crate::model::{
    apply_perturbation, build_hamiltonian, sample_realization, site_distance, BoxRegion, DisorderRealization, Hamiltonian,
    ModelConfig, Site,
};
use crate::overlap::{ground_state_overlap, infinite_volume_overlap_proxy, overlap_lower_bound};
use crate::shift::{index_of_pair, shift_operator, ssf_from_values};
use crate::spectral::{schatten_norm, SpectralData};
use crate::stats::{
    critical_value, fit_exponential_decay, paired_difference_interval, weighted_line, DecayFit, EstimatorResult,
    Proportion, ScanPoint, DEFAULT_CONFIDENCE,
};

/// Default imaginary parts for the fractional-moment scan; the maximum over
/// this grid stands in for the supremum over `η ≠ 0`.
pub const DEFAULT_ETAS: [f64; 5] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];
pub const DEFAULT_MOMENT: f64 = 0.5;

/// A pair of lattice sites `(a, b)`.
pub type SitePair = (Site, Site);

/// Evaluates `statistic` on realizations `0..n` and returns the per-index
/// values in order. The first failing realization (by index) aborts the
/// run and is named in the error.
pub fn map_realizations<X, T, F>(config: &ModelConfig, n: usize, exec: &X, statistic: F) -> Result<Vec<T>>
where
    X: Executor,
    T: Send,
    F: Fn(&ModelConfig, &DisorderRealization) -> Result<T> + Sync + Send,
{
    let seed = config.seed;
    let out = exec.map_indexed(n, |i| {
        let omega = sample_realization(config, i as u64);
        statistic(config, &omega)
    });
    out.into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Realization { seed, index: i as u64, source: Box::new(e) }))
        .collect()
}

/// Mean and standard error of a scalar statistic over realizations `0..n`.
pub fn mc_expectation<X, F>(name: &str, config: &ModelConfig, n: usize, exec: &X, statistic: F) -> Result<EstimatorResult>
where
    X: Executor,
    F: Fn(&ModelConfig, &DisorderRealization) -> Result<f64> + Sync + Send,
{
    let samples = map_realizations(config, n, exec, statistic)?;
    EstimatorResult::from_samples(name, &samples, config.seed, DEFAULT_CONFIDENCE)
}

/// Like [`mc_expectation`] for a statistic returning one value per column.
pub fn mc_table<X, F>(config: &ModelConfig, n: usize, exec: &X, names: &[&str], statistic: F) -> Result<Vec<EstimatorResult>>
where
    X: Executor,
    F: Fn(&ModelConfig, &DisorderRealization) -> Result<Vec<f64>> + Sync + Send,
{
    let rows = map_realizations(config, n, exec, statistic)?;
    summarize_columns(&rows, names, config.seed)
}

pub(crate) fn summarize_columns(rows: &[Vec<f64>], names: &[&str], seed: u64) -> Result<Vec<EstimatorResult>> {
    let cols = names.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch { expected: cols, found: bad.len() });
    }
    (0..cols)
        .map(|c| {
            let column: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            EstimatorResult::from_samples(names[c], &column, seed, DEFAULT_CONFIDENCE)
        })
        .collect()
}

/// Column `c` of `rows` with excluded (`None`) entries dropped.
fn column(rows: &[Vec<Option<f64>>], c: usize) -> Vec<f64> {
    rows.iter().filter_map(|r| r[c]).collect()
}

fn scan_point(name: &str, abscissa: f64, samples: &[f64], seed: u64) -> Result<ScanPoint> {
    let r = EstimatorResult::from_samples(name, samples, seed, DEFAULT_CONFIDENCE)?;
    Ok(ScanPoint { abscissa, mean: r.mean, stderr: r.stderr, n: r.n_realizations, floor_limited: false })
}

/// Pairs `(a, a + d·e₁)` placed symmetrically about the origin, one per
/// distance.
pub fn centered_pairs(distances: &[i64]) -> Vec<SitePair> {
    distances
        .iter()
        .map(|&d| {
            let a = -(d / 2);
            ([a, 0], [a + d, 0])
        })
        .collect()
}

/// Pairs `(−k·e₁, k·e₁)`, one per offset.
pub fn mirrored_pairs(offsets: &[i64]) -> Vec<SitePair> {
    offsets.iter().map(|&k| ([-k, 0], [k, 0])).collect()
}

fn check_pairs(region: &BoxRegion, pairs: &[SitePair]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::param("pairs", "no site pairs given"));
    }
    for &(a, b) in pairs {
        for s in [a, b] {
            if !region.contains(s) {
                return Err(Error::param("pairs", alloc::format!("site {s:?} lies outside {region}")));
            }
        }
    }
    Ok(())
}

fn pair_indices(h: &Hamiltonian, pairs: &[SitePair]) -> Result<Vec<(usize, usize)>> {
    pairs
        .iter()
        .map(|&(a, b)| {
            let ia = h.index_of(a).ok_or(Error::SupportOverflow { site: a })?;
            let ib = h.index_of(b).ok_or(Error::SupportOverflow { site: b })?;
            Ok((ia, ib))
        })
        .collect()
}

/// Resolvent entries `G(a, b)` for every pair from one factorization,
/// solving once per distinct column.
fn resolvent_entries(h: &Hamiltonian, z: Complex64, idx: &[(usize, usize)]) -> Result<Vec<Complex64>> {
    let lu = BandedLu::factor_shifted(h.matrix(), h.bandwidth(), z)?;
    let mut columns: Vec<(usize, Vec<Complex64>)> = Vec::new();
    let mut out = Vec::with_capacity(idx.len());
    for &(a, b) in idx {
        let k = match columns.iter().position(|(c, _)| *c == b) {
            Some(k) => k,
            None => {
                columns.push((b, lu.inverse_column(b)));
                columns.len() - 1
            }
        };
        out.push(columns[k].1[a]);
    }
    Ok(out)
}

fn perturbed_pair(config: &ModelConfig, omega: &DisorderRealization) -> Result<(Hamiltonian, Hamiltonian)> {
    let h = build_hamiltonian(config, omega)?;
    let ht = apply_perturbation(&h, config)?;
    Ok((h, ht))
}

fn perturbation_support(config: &ModelConfig) -> Vec<Site> {
    config.perturbation.iter().filter(|e| e.value != 0.0).map(|e| e.site).collect()
}

/// Sup-norm distance from `x` to a site set (to the origin when empty).
fn distance_to_set(x: Site, set: &[Site]) -> i64 {
    if set.is_empty() {
        return site_distance(x, [0, 0]);
    }
    set.iter().map(|&s| site_distance(x, s)).min().unwrap_or(0)
}

fn check_f_i(f: &BvFunction) -> Result<()> {
    use crate::funcalc::FunctionClass;
    match f.class() {
        FunctionClass::General => Err(Error::param("f", "must vanish above some energy")),
        _ => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FmbScan {
    pub fit: DecayFit,
    /// Ordinates of pairs at distance zero, reported but not fitted.
    pub diagonal: Vec<ScanPoint>,
    /// The `η` attaining the maximum, one per pair in input order.
    pub eta_of_max: Vec<f64>,
}

/// `max_η 𝔼[|G_{E+iη}(a, b)|^s]` per pair, fitted against `|a − b|`.
pub fn fmb_scan<X: Executor>(
    config: &ModelConfig,
    energy: f64,
    etas: &[f64],
    s: f64,
    pairs: &[SitePair],
    n: usize,
    exec: &X,
) -> Result<FmbScan> {
    config.validate()?;
    if etas.is_empty() || etas.iter().any(|&e| e == 0.0 || !e.is_finite()) {
        return Err(Error::param("etas", "imaginary parts must be finite and nonzero"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::param("s", "fractional moment must lie in (0, 1)"));
    }
    check_pairs(&config.region(), pairs)?;
    let np = pairs.len();
    let rows = map_realizations(config, n, exec, |cfg, omega| {
        let h = build_hamiltonian(cfg, omega)?;
        let idx = pair_indices(&h, pairs)?;
        let mut out = Vec::with_capacity(etas.len() * np);
        for &eta in etas {
            for g in resolvent_entries(&h, Complex64::new(energy, eta), &idx)? {
                out.push(libm::pow(g.norm(), s));
            }
        }
        Ok(out)
    })?;
    let mut points = Vec::new();
    let mut diagonal = Vec::new();
    let mut eta_of_max = Vec::with_capacity(np);
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let distance = site_distance(a, b) as f64;
        let mut best: Option<(ScanPoint, f64)> = None;
        for (k, &eta) in etas.iter().enumerate() {
            let samples: Vec<f64> = rows.iter().map(|r| r[k * np + p]).collect();
            let point = scan_point("fmb", distance, &samples, config.seed)?;
            if best.as_ref().is_none_or(|(b, _)| point.mean > b.mean) {
                best = Some((point, eta));
            }
        }
        let (point, eta) = best.expect("eta grid is nonempty");
        eta_of_max.push(eta);
        if distance == 0.0 {
            diagonal.push(point);
        } else {
            points.push(point);
        }
    }
    Ok(FmbScan { fit: fit_exponential_decay(points), diagonal, eta_of_max })
}

/// `𝔼[‖χ_a (f(H) − f(H^τ)) χ_b‖_p]` per pair, fitted against
/// `dist(a, supp W) + dist(b, supp W)`. Realizations with an eigenvalue
/// within `eig_tol` of a jump of `f` are left out.
pub fn kernel_decay_scan<X: Executor>(
    config: &ModelConfig,
    f: &BvFunction,
    p: f64,
    pairs: &[SitePair],
    n: usize,
    exec: &X,
) -> Result<DecayFit> {
    config.validate()?;
    check_f_i(f)?;
    check_pairs(&config.region(), pairs)?;
    let eig_tol = config.tolerances.eig_tol;
    let rows = map_realizations(config, n, exec, |cfg, omega| {
        let (h, ht) = perturbed_pair(cfg, omega)?;
        let (sa, sb) = (SpectralData::of_matrix(h.matrix())?, SpectralData::of_matrix(ht.matrix())?);
        if jump_degeneracy(&sa, f, eig_tol) || jump_degeneracy(&sb, f, eig_tol) {
            return Ok(alloc::vec![None; pairs.len()]);
        }
        pair_indices(&h, pairs)?
            .into_iter()
            .map(|(a, b)| {
                let d = sa.apply_block(|x| f.eval(x), &[a], &[b]).sub(&sb.apply_block(|x| f.eval(x), &[a], &[b]));
                schatten_norm(&d, p).map(Some)
            })
            .collect()
    })?;
    let support = perturbation_support(config);
    let mut points = Vec::with_capacity(pairs.len());
    for (c, &(a, b)) in pairs.iter().enumerate() {
        let x = (distance_to_set(a, &support) + distance_to_set(b, &support)) as f64;
        points.push(scan_point("kernel", x, &column(&rows, c), config.seed)?);
    }
    Ok(fit_exponential_decay(points))
}

/// `𝔼[‖χ_a (f(H^τ_G) − f(H^τ_Λ)) χ_b‖_p]` for a sub-box `G` of the
/// configured box `Λ`, fitted against `dist(a, ∂G) + dist(b, ∂G)`.
pub fn boundary_decay_scan<X: Executor>(
    config: &ModelConfig,
    f: &BvFunction,
    p: f64,
    subbox: &BoxRegion,
    pairs: &[SitePair],
    n: usize,
    exec: &X,
) -> Result<DecayFit> {
    config.validate()?;
    check_f_i(f)?;
    if subbox.dim != config.dimension || !config.region().contains_box(&subbox.expanded(1)) {
        return Err(Error::param("subbox", "needs a margin of at least one site inside the box"));
    }
    check_pairs(subbox, pairs)?;
    let eig_tol = config.tolerances.eig_tol;
    let rows = map_realizations(config, n, exec, |cfg, omega| {
        let (_, ht) = perturbed_pair(cfg, omega)?;
        let hg = ht.restrict(subbox)?;
        let (sl, sg) = (SpectralData::of_matrix(ht.matrix())?, SpectralData::of_matrix(hg.matrix())?);
        if jump_degeneracy(&sl, f, eig_tol) || jump_degeneracy(&sg, f, eig_tol) {
            return Ok(alloc::vec![None; pairs.len()]);
        }
        let outer = pair_indices(&ht, pairs)?;
        let inner = pair_indices(&hg, pairs)?;
        outer
            .into_iter()
            .zip(inner)
            .map(|((a, b), (ga, gb))| {
                let d = sg.apply_block(|x| f.eval(x), &[ga], &[gb]).sub(&sl.apply_block(|x| f.eval(x), &[a], &[b]));
                schatten_norm(&d, p).map(Some)
            })
            .collect()
    })?;
    let mut points = Vec::with_capacity(pairs.len());
    for (c, &(a, b)) in pairs.iter().enumerate() {
        let x = (subbox.boundary_distance(a) + subbox.boundary_distance(b)) as f64;
        points.push(scan_point("boundary", x, &column(&rows, c), config.seed)?);
    }
    Ok(fit_exponential_decay(points))
}

/// What a volume-convergence scan compares against the largest box.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvergenceTarget {
    /// `‖(f(H_L) − f(H_L^τ)) − χ_L (f(H) − f(H^τ)) χ_L‖_p`.
    Kernel { f: BvFunction, p: f64 },
    /// `|ξ_L(E) − ξ(E)|`.
    Ssf { energy: f64 },
    /// `|S_L(E) − S(E)|` for the finite-volume ground-state overlaps.
    Overlap { energy: f64 },
}

impl ConvergenceTarget {
    pub fn kind(&self) -> &'static str {
        match self {
            ConvergenceTarget::Kernel { .. } => "kernel-volume",
            ConvergenceTarget::Ssf { .. } => "ssf-volume",
            ConvergenceTarget::Overlap { .. } => "overlap-volume",
        }
    }
}

/// Per side length, the mean discrepancy between the centered `L`-box and
/// the largest box in `lengths` (the proxy), fitted against `L`. Boxes are
/// nested restrictions of the same realization.
pub fn convergence_scan<X: Executor>(
    target: &ConvergenceTarget,
    config: &ModelConfig,
    lengths: &[usize],
    n: usize,
    exec: &X,
) -> Result<DecayFit> {
    if lengths.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: lengths.len() });
    }
    if lengths.windows(2).any(|w| w[0] > w[1]) || lengths[0] == 0 {
        return Err(Error::param("lengths", "side lengths must be positive and ascending"));
    }
    let proxy = config.clone().with_sites(*lengths.last().expect("nonempty"));
    proxy.validate()?;
    let boxes: Vec<BoxRegion> = lengths.iter().map(|&l| BoxRegion::centered(proxy.dimension, l)).collect();
    for e in &proxy.perturbation {
        if let Some(b) = boxes.iter().find(|b| !b.contains(e.site)) {
            return Err(Error::param("lengths", alloc::format!("W at {:?} lies outside {b}", e.site)));
        }
    }
    if let ConvergenceTarget::Kernel { f, .. } = target {
        check_f_i(f)?;
    }
    let eig_tol = proxy.tolerances.eig_tol;
    let rows = map_realizations(&proxy, n, exec, |cfg, omega| {
        let (h, ht) = perturbed_pair(cfg, omega)?;
        match target {
            ConvergenceTarget::Ssf { energy } => {
                let xi = |a: &Hamiltonian, b: &Hamiltonian| -> Result<(i64, bool)> {
                    let v = ssf_from_values(&symmetric_eigenvalues(a.matrix())?, &symmetric_eigenvalues(b.matrix())?, *energy, eig_tol);
                    Ok((v.xi, v.degenerate))
                };
                let (full, full_deg) = xi(&h, &ht)?;
                boxes
                    .iter()
                    .map(|b| {
                        let (x, deg) = xi(&h.restrict(b)?, &ht.restrict(b)?)?;
                        Ok((!deg && !full_deg).then(|| (x - full).abs() as f64))
                    })
                    .collect()
            }
            ConvergenceTarget::Overlap { energy } => {
                let overlap = |a: &Hamiltonian, b: &Hamiltonian| -> Result<(f64, bool)> {
                    let s = ground_state_overlap(
                        &SpectralData::of_matrix(a.matrix())?,
                        &SpectralData::of_matrix(b.matrix())?,
                        *energy,
                        eig_tol,
                    )?;
                    Ok((s.value, s.degenerate))
                };
                let (full, full_deg) = overlap(&h, &ht)?;
                boxes
                    .iter()
                    .map(|b| {
                        let (s, deg) = overlap(&h.restrict(b)?, &ht.restrict(b)?)?;
                        Ok((!deg && !full_deg).then(|| (s - full).abs()))
                    })
                    .collect()
            }
            ConvergenceTarget::Kernel { f, p } => {
                let kernel = |a: &Hamiltonian, b: &Hamiltonian| -> Result<Option<Mat>> {
                    let (sa, sb) = (SpectralData::of_matrix(a.matrix())?, SpectralData::of_matrix(b.matrix())?);
                    if jump_degeneracy(&sa, f, eig_tol) || jump_degeneracy(&sb, f, eig_tol) {
                        return Ok(None);
                    }
                    Ok(Some(sa.apply(|x| f.eval(x)).sub(&sb.apply(|x| f.eval(x)))))
                };
                let full = kernel(&h, &ht)?;
                boxes
                    .iter()
                    .map(|b| {
                        let (hl, htl) = (h.restrict(b)?, ht.restrict(b)?);
                        let (Some(full), Some(local)) = (full.as_ref(), kernel(&hl, &htl)?) else {
                            return Ok(None);
                        };
                        let idx: Vec<usize> = b.sites().map(|s| h.index_of(s).expect("nested box")).collect();
                        schatten_norm(&local.sub(&full.select(&idx, &idx)), *p).map(Some)
                    })
                    .collect()
            }
        }
    })?;
    let mut points = Vec::with_capacity(lengths.len());
    for (c, &l) in lengths.iter().enumerate() {
        points.push(scan_point(target.kind(), l as f64, &column(&rows, c), proxy.seed)?);
    }
    Ok(fit_exponential_decay(points))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HoelderBound {
    pub alpha: f64,
    /// Smallest `C` with `modulus ≤ C·|ΔE|^α` on the wider half of the
    /// separations.
    pub constant: f64,
    /// Separations where `modulus − z·stderr` exceeds `C·|ΔE|^α`.
    pub violations: usize,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HoelderReport {
    /// `𝔼[‖T(E) − T(E′)‖₁]` with abscissa `|E − E′|`, one per grid pair.
    pub points: Vec<ScanPoint>,
    pub energy_pairs: Vec<(f64, f64)>,
    /// Least-squares slope of `log modulus` against `log |E − E′|`.
    pub exponent: Option<f64>,
    pub exponent_interval: Option<(f64, f64)>,
    pub bounds: Vec<HoelderBound>,
}

/// Empirical modulus of continuity of `E ↦ T(E)` in trace norm.
pub fn hoelder_scan<X: Executor>(
    config: &ModelConfig,
    energies: &[f64],
    alphas: &[f64],
    n: usize,
    exec: &X,
) -> Result<HoelderReport> {
    config.validate()?;
    if energies.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: energies.len() });
    }
    if alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::param("alphas", "exponents must lie in (0, 1]"));
    }
    let mut energy_pairs = Vec::new();
    for i in 0..energies.len() {
        for j in i + 1..energies.len() {
            energy_pairs.push((i, j));
        }
    }
    let eig_tol = config.tolerances.eig_tol;
    let rows = map_realizations(config, n, exec, |cfg, omega| {
        let (h, ht) = perturbed_pair(cfg, omega)?;
        let (sa, sb) = (SpectralData::of_matrix(h.matrix())?, SpectralData::of_matrix(ht.matrix())?);
        let shifts = energies
            .iter()
            .map(|&e| shift_operator(&sa, &sb, e, eig_tol))
            .collect::<Result<Vec<_>>>()?;
        energy_pairs
            .iter()
            .map(|&(i, j)| {
                if shifts[i].degenerate || shifts[j].degenerate {
                    return Ok(None);
                }
                let d = shifts[i].matrix.sub(&shifts[j].matrix);
                let abs: Vec<f64> = symmetric_eigenvalues(&d)?.iter().map(|x| x.abs()).collect();
                Ok(Some(pairwise_sum(&abs)))
            })
            .collect()
    })?;
    let mut points = Vec::with_capacity(energy_pairs.len());
    for (c, &(i, j)) in energy_pairs.iter().enumerate() {
        points.push(scan_point("hoelder", (energies[i] - energies[j]).abs(), &column(&rows, c), config.seed)?);
    }
    let z = critical_value(DEFAULT_CONFIDENCE);
    let usable: Vec<&ScanPoint> = points.iter().filter(|p| p.mean > 0.0 && p.abscissa > 0.0).collect();
    let (exponent, exponent_interval) = if usable.len() >= 2 {
        let xs: Vec<f64> = usable.iter().map(|p| libm::log(p.abscissa)).collect();
        let ys: Vec<f64> = usable.iter().map(|p| libm::log(p.mean)).collect();
        let ws: Vec<f64> = if usable.iter().any(|p| p.stderr == 0.0) {
            alloc::vec![1.0; usable.len()]
        } else {
            usable.iter().map(|p| (p.mean / p.stderr) * (p.mean / p.stderr)).collect()
        };
        let line = weighted_line(&xs, &ys, &ws);
        (Some(line.slope), Some((line.slope - z * line.slope_stderr, line.slope + z * line.slope_stderr)))
    } else {
        (None, None)
    };
    let mut separations: Vec<f64> = points.iter().map(|p| p.abscissa).filter(|&x| x > 0.0).collect();
    separations.sort_by(f64::total_cmp);
    let median = separations.get(separations.len() / 2).copied().unwrap_or(0.0);
    let bounds = alphas
        .iter()
        .map(|&alpha| {
            let constant = points
                .iter()
                .filter(|p| p.abscissa >= median && p.abscissa > 0.0)
                .map(|p| p.mean / libm::pow(p.abscissa, alpha))
                .fold(0.0, f64::max);
            let violations = points
                .iter()
                .filter(|p| p.mean - z * p.stderr > constant * libm::pow(p.abscissa, alpha))
                .count();
            HoelderBound { alpha, constant, violations, holds: violations == 0 }
        })
        .collect();
    Ok(HoelderReport {
        points,
        energy_pairs: energy_pairs.iter().map(|&(i, j)| (energies[i], energies[j])).collect(),
        exponent,
        exponent_interval,
        bounds,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AoReport {
    pub energy: f64,
    pub tau: f64,
    /// `ℙ[θ ≠ 0]`.
    pub theta_nonzero: Proportion,
    /// `ℙ[S(E) = 0]`, from the zero flag of the overlap proxy.
    pub overlap_zero: Proportion,
    /// `p̂₁ − p̂₂` with its paired interval.
    pub difference: f64,
    pub difference_interval: (f64, f64),
    pub agree: bool,
    pub mean_overlap: EstimatorResult,
    /// Realizations with `‖T‖ < 1 − kernel_tol`, where the lower bound on
    /// `S⁴` applies.
    pub lower_bound_checked: usize,
    pub lower_bound_violations: usize,
    /// Eigenvalues of `T` inside the ambiguous band, summed over realizations.
    pub ambiguous: usize,
    /// Realizations left out because `E` sat on an eigenvalue.
    pub degenerate: usize,
    pub sign: Option<i32>,
}

/// Relative slack on `log S⁴` when testing the lower bound, to absorb
/// rounding in the eigenvalues of `T`.
const LOWER_BOUND_SLACK: f64 = 1e-10;

/// Anderson-orthogonality probabilities at energy `E` on the configured
/// box, taken as the proxy for infinite volume.
pub fn ao_probability<X: Executor>(
    config: &ModelConfig,
    energy: f64,
    n: usize,
    zero_threshold: f64,
    kernel_tol: f64,
    exec: &X,
) -> Result<AoReport> {
    config.validate()?;
    let eig_tol = config.tolerances.eig_tol;
    struct Sample {
        theta_nonzero: bool,
        zero: bool,
        overlap: f64,
        bound: Option<bool>,
        ambiguous: usize,
    }
    let samples = map_realizations(config, n, exec, |cfg, omega| {
        let (h, ht) = perturbed_pair(cfg, omega)?;
        let (sa, sb) = (SpectralData::of_matrix(h.matrix())?, SpectralData::of_matrix(ht.matrix())?);
        let t = shift_operator(&sa, &sb, energy, eig_tol)?;
        if t.degenerate {
            return Ok(None);
        }
        let index = index_of_pair(&t, kernel_tol);
        let s = infinite_volume_overlap_proxy(&t, kernel_tol, zero_threshold);
        let bound = (t.norm() < 1.0 - kernel_tol).then(|| {
            let norm = t.norm();
            let rhs = -t.hs_norm_squared() / (1.0 - norm * norm);
            debug_assert!(overlap_lower_bound(&t).is_some());
            4.0 * s.log_value >= rhs - LOWER_BOUND_SLACK * (1.0 + rhs.abs())
        });
        Ok(Some(Sample { theta_nonzero: index.theta != 0, zero: s.zero_flag, overlap: s.value, bound, ambiguous: index.ambiguous }))
    })?;
    let degenerate = samples.iter().filter(|s| s.is_none()).count();
    let used: Vec<Sample> = samples.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let m = used.len();
    let p1 = Proportion::wilson(used.iter().filter(|s| s.theta_nonzero).count(), m, DEFAULT_CONFIDENCE);
    let p2 = Proportion::wilson(used.iter().filter(|s| s.zero).count(), m, DEFAULT_CONFIDENCE);
    let pairs: Vec<(bool, bool)> = used.iter().map(|s| (s.theta_nonzero, s.zero)).collect();
    let (difference, difference_interval) = paired_difference_interval(&pairs, DEFAULT_CONFIDENCE);
    let overlaps: Vec<f64> = used.iter().map(|s| s.overlap).collect();
    let mean_overlap = EstimatorResult::from_samples("overlap", &overlaps, config.seed, DEFAULT_CONFIDENCE)?;
    Ok(AoReport {
        energy,
        tau: config.perturbation_strength,
        theta_nonzero: p1,
        overlap_zero: p2,
        difference,
        difference_interval,
        agree: difference_interval.0 <= 0.0 && 0.0 <= difference_interval.1,
        mean_overlap,
        lower_bound_checked: used.iter().filter(|s| s.bound.is_some()).count(),
        lower_bound_violations: used.iter().filter(|s| s.bound == Some(false)).count(),
        ambiguous: used.iter().map(|s| s.ambiguous).sum(),
        degenerate,
        sign: config.perturbation_sign(),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WegnerRow {
    pub length: f64,
    pub sites_per_side: usize,
    pub count: EstimatorResult,
    /// `𝔼[Tr 1_I(H_L)] / (|I|·L^d)`, zero for `|I| = 0`.
    pub ratio: f64,
    pub ratio_stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WegnerReport {
    pub center: f64,
    pub rows: Vec<WegnerRow>,
    /// Without disorder the counts are step functions of `|I|`.
    pub applicable: bool,
    /// Ratios at a fixed volume agree within three combined stderr.
    pub linear_in_length: bool,
    /// Doubling `L` multiplies every count by `2^d` within three combined
    /// stderr.
    pub linear_in_volume: bool,
    pub note: Option<String>,
}

/// `𝔼[Tr 1_I(H_L)]` for `I = [c − ℓ/2, c + ℓ/2]` at the configured `L`
/// and at `2L`.
pub fn wegner_check<X: Executor>(config: &ModelConfig, center: f64, lengths: &[f64], n: usize, exec: &X) -> Result<WegnerReport> {
    config.validate()?;
    if lengths.is_empty() || lengths.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(Error::param("lengths", "interval lengths must be finite and nonnegative"));
    }
    let sides = [config.sites_per_side, 2 * config.sites_per_side];
    let mut rows = Vec::new();
    for &side in &sides {
        let cfg = config.clone().with_sites(side);
        let volume = cfg.volume() as f64;
        let counts = map_realizations(&cfg, n, exec, |c, omega| {
            let values = symmetric_eigenvalues(build_hamiltonian(c, omega)?.matrix())?;
            Ok(lengths
                .iter()
                .map(|&l| {
                    let (lo, hi) = (center - l / 2.0, center + l / 2.0);
                    (values.partition_point(|&v| v <= hi) - values.partition_point(|&v| v < lo)) as f64
                })
                .collect::<Vec<f64>>())
        })?;
        for (k, &l) in lengths.iter().enumerate() {
            let samples: Vec<f64> = counts.iter().map(|r| r[k]).collect();
            let count = EstimatorResult::from_samples("wegner", &samples, cfg.seed, DEFAULT_CONFIDENCE)?;
            let scale = l * volume;
            let (ratio, ratio_stderr) = if l > 0.0 { (count.mean / scale, count.stderr / scale) } else { (0.0, 0.0) };
            rows.push(WegnerRow { length: l, sites_per_side: side, count, ratio, ratio_stderr });
        }
    }
    let nl = lengths.len();
    let mut linear_in_length = true;
    for half in rows.chunks(nl) {
        let positive: Vec<&WegnerRow> = half.iter().filter(|r| r.length > 0.0).collect();
        for (i, a) in positive.iter().enumerate() {
            for b in &positive[i + 1..] {
                let tol = 3.0 * libm::sqrt(a.ratio_stderr * a.ratio_stderr + b.ratio_stderr * b.ratio_stderr);
                if (a.ratio - b.ratio).abs() > tol {
                    linear_in_length = false;
                }
            }
        }
    }
    let factor = libm::pow(2.0, config.dimension as f64);
    let linear_in_volume = (0..nl).all(|k| {
        let (small, big) = (&rows[k].count, &rows[nl + k].count);
        let tol = 3.0 * libm::sqrt(big.stderr * big.stderr + factor * factor * small.stderr * small.stderr);
        (big.mean - factor * small.mean).abs() <= tol
    });
    let applicable = config.coupling > 0.0;
    Ok(WegnerReport {
        center,
        rows,
        applicable,
        linear_in_length,
        linear_in_volume,
        note: (!applicable).then(|| "no-disorder regime, Wegner not applicable".into()),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CombesThomasReport {
    pub energy: f64,
    pub floor: f64,
    /// Ordinates are `max` over realizations of `|G_E(a, b)|`, with zero
    /// stderr.
    pub fit: DecayFit,
    /// Decay rate per site of the free one-dimensional resolvent at this
    /// distance below the floor, when the configuration is free.
    pub free_rate: Option<f64>,
}

/// Decay rate per site of the Green function of `−Δ_h + c` on ℤ at
/// energy `c − δ`: `cosh κ = 1 + h²δ/2`.
pub fn free_resolvent_rate(delta: f64, spacing: f64) -> f64 {
    libm::acosh(1.0 + spacing * spacing * delta / 2.0)
}

/// Pathwise resolvent decay at a real energy below the spectral floor.
pub fn combes_thomas_check<X: Executor>(
    config: &ModelConfig,
    energy: f64,
    pairs: &[SitePair],
    n: usize,
    exec: &X,
) -> Result<CombesThomasReport> {
    config.validate()?;
    if config.volume() < 2 {
        return Err(Error::Precondition("a one-site box has no pairs of distinct sites to compare".into()));
    }
    check_pairs(&config.region(), pairs)?;
    let floor = apply_perturbation(&build_hamiltonian(config, &sample_realization(config, 0))?, config)?.floor;
    if energy > floor - 0.5 {
        return Err(Error::Precondition(alloc::format!(
            "energy {energy} is closer than 1/2 to the spectral floor {floor}"
        )));
    }
    let rows = map_realizations(config, n, exec, |cfg, omega| {
        let (_, ht) = perturbed_pair(cfg, omega)?;
        let idx = pair_indices(&ht, pairs)?;
        Ok(resolvent_entries(&ht, Complex64::new(energy, 0.0), &idx)?.iter().map(|g| g.norm()).collect::<Vec<f64>>())
    })?;
    let points = pairs
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| a != b)
        .map(|(c, &(a, b))| ScanPoint {
            abscissa: site_distance(a, b) as f64,
            mean: rows.iter().map(|r| r[c]).fold(0.0, f64::max),
            stderr: 0.0,
            n,
            floor_limited: false,
        })
        .collect();
    let background_constant = config.background.windows(2).all(|w| w[0] == w[1]);
    let unperturbed = config.perturbation.iter().all(|e| e.value == 0.0) || config.perturbation_strength == 0.0;
    let free = config.coupling == 0.0 && config.dimension == 1 && background_constant && unperturbed;
    Ok(CombesThomasReport {
        energy,
        floor,
        fit: fit_exponential_decay(points),
        free_rate: free.then(|| free_resolvent_rate(floor - energy, config.lattice_spacing)),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SsfRow {
    pub energy: f64,
    pub xi: EstimatorResult,
    /// `#{λ ∈ (E − δ, E + δ]} / (2δ L^d)` averaged.
    pub dos: EstimatorResult,
    /// The lower end of the `ξ` interval and the density estimate are both
    /// positive.
    pub positive: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SsfPositivityReport {
    pub rows: Vec<SsfRow>,
    /// Sampled `ξ < 0`, impossible for `W ≥ 0`.
    pub negative_samples: usize,
    pub degenerate: usize,
}

/// Checks `W ≥ C·u(· − k) > 0` for some anchor `k` and `ρ_− > 0`.
pub fn check_ssf_hypothesis(config: &ModelConfig) -> Result<()> {
    if config.perturbation.iter().any(|e| e.value < 0.0) {
        return Err(Error::Precondition("W must be nonnegative".into()));
    }
    if config.single_site_law.density_lower_bound() <= 0.0 {
        return Err(Error::Precondition("the single-site density must be bounded below".into()));
    }
    let bump: Vec<Site> = config.bump_profile.iter().filter(|e| e.value > 0.0).map(|e| e.site).collect();
    let anchored = bump.first().is_some_and(|&b0| {
        config.perturbation.iter().filter(|e| e.value > 0.0).any(|e| {
            let k = [e.site[0] - b0[0], e.site[1] - b0[1]];
            bump.iter().all(|&b| config.perturbation_at([b[0] + k[0], b[1] + k[1]]) > 0.0)
        })
    });
    if !anchored {
        return Err(Error::Precondition("W must dominate a positive multiple of a translated bump".into()));
    }
    Ok(())
}

/// `𝔼[ξ(E)]` on an energy grid with a finite-difference density of states
/// of width `2δ` alongside.
pub fn ssf_positivity_scan<X: Executor>(
    config: &ModelConfig,
    energies: &[f64],
    delta: f64,
    n: usize,
    exec: &X,
) -> Result<SsfPositivityReport> {
    config.validate()?;
    check_ssf_hypothesis(config)?;
    if !(delta > 0.0) {
        return Err(Error::param("delta", "density window must be positive"));
    }
    let eig_tol = config.tolerances.eig_tol;
    let volume = config.volume() as f64;
    let rows = map_realizations(config, n, exec, |cfg, omega| {
        let (h, ht) = perturbed_pair(cfg, omega)?;
        let (a, b) = (symmetric_eigenvalues(h.matrix())?, symmetric_eigenvalues(ht.matrix())?);
        Ok(energies
            .iter()
            .map(|&e| {
                let v = ssf_from_values(&a, &b, e, eig_tol);
                let dos = (a.partition_point(|&x| x <= e + delta) - a.partition_point(|&x| x <= e - delta)) as f64
                    / (2.0 * delta * volume);
                ((!v.degenerate).then_some(v.xi as f64), dos)
            })
            .collect::<Vec<_>>())
    })?;
    let mut out = Vec::with_capacity(energies.len());
    let mut negative_samples = 0;
    let mut degenerate = 0;
    for (c, &e) in energies.iter().enumerate() {
        let xs: Vec<f64> = rows.iter().filter_map(|r| r[c].0).collect();
        negative_samples += xs.iter().filter(|&&x| x < 0.0).count();
        degenerate += rows.len() - xs.len();
        let dos: Vec<f64> = rows.iter().map(|r| r[c].1).collect();
        let xi = EstimatorResult::from_samples("ssf", &xs, config.seed, DEFAULT_CONFIDENCE)?;
        let dos = EstimatorResult::from_samples("dos", &dos, config.seed, DEFAULT_CONFIDENCE)?;
        let positive = xi.confidence_interval.0 > 0.0 && dos.mean > 0.0;
        out.push(SsfRow { energy: e, xi, dos, positive });
    }
    Ok(SsfPositivityReport { rows: out, negative_samples, degenerate })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UcpReport {
    /// `𝔼[Tr(1_Γ f(H))]`.
    pub trace: EstimatorResult,
    /// `𝔼[Tr f(H)] / L^d`, the density-of-states weighted integral of `f`.
    pub dos_weighted: EstimatorResult,
    pub positive: bool,
    pub dos_positive: bool,
    /// Positive weighted integral implies positive localized trace.
    pub implication_holds: bool,
}

/// Values of `f` at its knots, on a fine grid inside every piece, and in
/// both tails.
fn probe_points(f: &BvFunction) -> Vec<f64> {
    let knots = f.knots();
    let mut xs = Vec::new();
    if let (Some(&first), Some(&last)) = (knots.first(), knots.last()) {
        xs.push(first - 1.0);
        xs.push(last + 1.0);
    } else {
        xs.push(0.0);
    }
    for w in knots.windows(2) {
        for k in 0..=16 {
            xs.push(w[0] + (w[1] - w[0]) * k as f64 / 16.0);
        }
    }
    xs.extend_from_slice(knots);
    xs
}

/// Sign implication of unique continuation: `Tr(1_Γ f(H))` is positive
/// whenever the density-of-states weighted integral of `f` is.
pub fn ucp_positivity_check<X: Executor>(
    config: &ModelConfig,
    gamma: &[Site],
    f: &BvFunction,
    energy: f64,
    n: usize,
    exec: &X,
) -> Result<UcpReport> {
    config.validate()?;
    if gamma.is_empty() {
        return Err(Error::param("gamma", "site set must be nonempty"));
    }
    let region = config.region();
    if let Some(s) = gamma.iter().find(|&&s| !region.contains(s)) {
        return Err(Error::param("gamma", alloc::format!("site {s:?} lies outside {region}")));
    }
    for x in probe_points(f) {
        let v = f.eval(x);
        if v < 0.0 || (x > energy && v != 0.0) {
            return Err(Error::Precondition(alloc::format!("f must be nonnegative and vanish above {energy}")));
        }
    }
    let volume = config.volume() as f64;
    let rows = map_realizations(config, n, exec, |cfg, omega| {
        let h = build_hamiltonian(cfg, omega)?;
        let spec = SpectralData::of_matrix(h.matrix())?;
        let idx: Vec<usize> = h.indices_of(gamma)?;
        let weights: Vec<f64> = spec.values.iter().map(|&x| f.eval(x)).collect();
        let local: Vec<f64> = (0..spec.dim())
            .map(|k| {
                let w = weights[k];
                if w == 0.0 {
                    return 0.0;
                }
                w * idx.iter().map(|&i| spec.component(i, k) * spec.component(i, k)).sum::<f64>()
            })
            .collect();
        Ok(alloc::vec![pairwise_sum(&local), pairwise_sum(&weights) / volume])
    })?;
    let cols = summarize_columns(&rows, &["ucp-trace", "dos-weighted"], config.seed)?;
    let (trace, dos_weighted) = (cols[0].clone(), cols[1].clone());
    let positive = trace.confidence_interval.0 > 0.0;
    let dos_positive = dos_weighted.confidence_interval.0 > 0.0;
    Ok(UcpReport { trace, dos_weighted, positive, dos_positive, implication_holds: !dos_positive || positive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;
    use crate::model::StencilEntry;

    fn delta_w(value: f64) -> Vec<StencilEntry> {
        alloc::vec![StencilEntry::new([0, 0], value)]
    }

    #[test]
    fn constant_and_site_statistics() {
        let cfg = ModelConfig::chain(4, 1.0).with_seed(5);
        let c = mc_expectation("c", &cfg, 20, &Serial, |_, _| Ok(2.0)).unwrap();
        assert_eq!((c.mean, c.stderr), (2.0, 0.0));
        let w = mc_expectation("omega0", &cfg, 10_000, &Serial, |_, o| Ok(o.omega_at([0, 0]).unwrap())).unwrap();
        assert!((w.mean - 0.5).abs() <= 4.0 * w.stderr, "{w:?}");
    }

    #[test]
    fn failing_realization_is_named() {
        let cfg = ModelConfig::chain(4, 1.0).with_seed(9);
        let err = mc_expectation("x", &cfg, 10, &Serial, |_, o| {
            if o.index == 3 {
                Err(Error::Precondition("boom".into()))
            } else {
                Ok(1.0)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::Realization { seed: 9, index: 3, .. }));
    }

    #[test]
    fn fmb_scan_free_chain_decays() {
        let cfg = ModelConfig::chain(60, 0.0);
        let pairs = centered_pairs(&[0, 2, 4, 6, 8, 10]);
        let scan = fmb_scan(&cfg, -1.0, &DEFAULT_ETAS, 0.5, &pairs, 2, &Serial).unwrap();
        assert_eq!(scan.diagonal.len(), 1);
        assert_eq!(scan.fit.points.len(), 5);
        assert!(scan.fit.decays(0.99), "{:?}", scan.fit);
        let expected = 0.5 * free_resolvent_rate(1.0, 1.0);
        assert!((scan.fit.mu().unwrap() - expected).abs() < 0.02 * expected);
        assert!(fmb_scan(&cfg, -1.0, &[1.0, 0.0], 0.5, &pairs, 2, &Serial).is_err());
        assert!(fmb_scan(&cfg, -1.0, &DEFAULT_ETAS, 1.0, &pairs, 2, &Serial).is_err());
    }

    #[test]
    fn kernel_scan_vanishes_without_perturbation() {
        let cfg = ModelConfig::chain(30, 2.0).with_perturbation(delta_w(1.0), 0.0);
        let f = BvFunction::indicator(2.0);
        let fit = kernel_decay_scan(&cfg, &f, 1.0, &mirrored_pairs(&[0, 1, 2, 3]), 5, &Serial).unwrap();
        assert_eq!(fit.status, crate::stats::FitStatus::IdenticallyZero);
        assert!(kernel_decay_scan(&cfg, &BvFunction::constant(1.0), 1.0, &mirrored_pairs(&[0]), 1, &Serial).is_err());
    }

    #[test]
    fn kernel_ordinates_bounded_by_total_variation() {
        let cfg = ModelConfig::chain(30, 3.0).with_perturbation(delta_w(1.0), 1.0);
        let f = BvFunction::indicator(2.5);
        let fit = kernel_decay_scan(&cfg, &f, 1.0, &mirrored_pairs(&[0, 1, 2, 4, 6]), 20, &Serial).unwrap();
        for p in &fit.points {
            assert!(p.mean <= 2.0 * f.total_variation());
        }
    }

    #[test]
    fn boundary_scan_margin() {
        let cfg = ModelConfig::chain(20, 2.0).with_perturbation(delta_w(1.0), 1.0);
        let f = BvFunction::indicator(2.0);
        let pairs = mirrored_pairs(&[0, 1, 2]);
        assert!(boundary_decay_scan(&cfg, &f, 1.0, &cfg.region(), &pairs, 2, &Serial).is_err());
        let sub = cfg.region().expanded(-1);
        let fit = boundary_decay_scan(&cfg, &f, 1.0, &sub, &pairs, 4, &Serial).unwrap();
        assert_eq!(fit.points.len(), 3);
    }

    #[test]
    fn convergence_trivial_cases() {
        let cfg = ModelConfig::chain(30, 3.0).with_perturbation(delta_w(1.0), 1.0);
        for target in [
            ConvergenceTarget::Ssf { energy: 2.0 },
            ConvergenceTarget::Overlap { energy: 2.0 },
            ConvergenceTarget::Kernel { f: BvFunction::indicator(2.0), p: 1.0 },
        ] {
            let same = convergence_scan(&target, &cfg, &[20, 20, 20], 3, &Serial).unwrap();
            assert!(same.points.iter().all(|p| p.mean == 0.0));
            let zero = convergence_scan(&target, &cfg.clone().with_strength(0.0), &[10, 16, 20], 3, &Serial).unwrap();
            assert!(zero.points.iter().all(|p| p.mean == 0.0), "{}", target.kind());
        }
        let err = convergence_scan(&ConvergenceTarget::Ssf { energy: 2.0 }, &cfg, &[10, 20], 3, &Serial);
        assert!(matches!(err, Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn hoelder_trivial_cases() {
        let cfg = ModelConfig::chain(20, 3.0).with_perturbation(delta_w(1.0), 1.0);
        let r = hoelder_scan(&cfg, &[1.5, 1.5, 2.5], &[0.5], 4, &Serial).unwrap();
        assert_eq!(r.points[0].mean, 0.0);
        let zero = hoelder_scan(&cfg.clone().with_strength(0.0), &[1.0, 2.0, 3.0], &[0.5, 1.0], 4, &Serial).unwrap();
        assert!(zero.points.iter().all(|p| p.mean == 0.0));
        assert!(zero.exponent.is_none());
        assert!(zero.bounds.iter().all(|b| b.holds));
    }

    #[test]
    fn ao_probability_limits() {
        let cfg = ModelConfig::chain(12, 3.0).with_perturbation(delta_w(1.0), 0.0);
        let r = ao_probability(&cfg, 2.0, 20, 1e-300, 1e-6, &Serial).unwrap();
        assert_eq!((r.theta_nonzero.estimate, r.overlap_zero.estimate), (0.0, 0.0));
        assert_eq!(r.mean_overlap.mean, 1.0);

        // a huge bump on the middle site of three always lifts the lowest
        // eigenvalue (≈ 0.59) above E
        let toy = ModelConfig::chain(3, 0.1).with_perturbation(delta_w(100.0), 1.0);
        let r = ao_probability(&toy, 0.75, 30, 1e-300, 1e-6, &Serial).unwrap();
        assert_eq!(r.theta_nonzero.estimate, 1.0);
        assert!(r.agree);
    }

    #[test]
    fn wegner_cases() {
        let cfg = ModelConfig::chain(40, 2.0);
        let r = wegner_check(&cfg, 2.0, &[0.0, 0.5, 1.0], 200, &Serial).unwrap();
        assert_eq!(r.rows[0].count.mean, 0.0);
        assert!(r.applicable);
        assert!(r.linear_in_volume, "{:?}", r.rows);
        let free = wegner_check(&ModelConfig::chain(40, 0.0), 2.0, &[0.5], 3, &Serial).unwrap();
        assert!(!free.applicable);
        assert!(free.note.is_some());
    }

    #[test]
    fn combes_thomas_cases() {
        let one = ModelConfig::chain(1, 1.0);
        assert!(combes_thomas_check(&one, -1.0, &centered_pairs(&[0]), 2, &Serial).is_err());
        let pairs = centered_pairs(&[2, 4, 6, 8, 10, 12]);
        let free = ModelConfig::chain(61, 0.0);
        assert!(combes_thomas_check(&free, -0.3, &pairs, 2, &Serial).is_err());
        let r = combes_thomas_check(&free, -1.0, &pairs, 2, &Serial).unwrap();
        let rate = r.free_rate.unwrap();
        assert!((r.fit.mu().unwrap() - rate).abs() <= 0.05 * rate);
        let disordered = ModelConfig::chain(61, 1.0);
        let r = combes_thomas_check(&disordered, -1.0, &pairs, 20, &Serial).unwrap();
        assert!(r.fit.decays(0.95));
        assert!(r.free_rate.is_none());
    }

    #[test]
    fn ssf_positivity_cases() {
        let cfg = ModelConfig::chain(20, 2.0).with_perturbation(delta_w(1.0), 0.0);
        let r = ssf_positivity_scan(&cfg, &[1.0, 2.0], 0.2, 10, &Serial).unwrap();
        assert!(r.rows.iter().all(|row| row.xi.mean == 0.0));
        let on = cfg.clone().with_strength(1.0);
        let r = ssf_positivity_scan(&on, &[1.0, 2.0, 3.0], 0.2, 30, &Serial).unwrap();
        assert_eq!(r.negative_samples, 0);
        let bad = cfg.clone().with_perturbation(delta_w(-1.0), 1.0);
        assert!(ssf_positivity_scan(&bad, &[1.0], 0.2, 2, &Serial).is_err());
        let off_bump = cfg.clone().with_perturbation(Vec::new(), 1.0);
        assert!(ssf_positivity_scan(&off_bump, &[1.0], 0.2, 2, &Serial).is_err());
    }

    #[test]
    fn ucp_cases() {
        let cfg = ModelConfig::chain(20, 2.0);
        let all: Vec<Site> = cfg.region().sites().collect();
        let zero = ucp_positivity_check(&cfg, &all, &BvFunction::zero(), 3.0, 5, &Serial).unwrap();
        assert_eq!(zero.trace.mean, 0.0);
        let f = BvFunction::interval(1.0, 2.0).unwrap();
        let full = ucp_positivity_check(&cfg, &all, &f, 2.0, 10, &Serial).unwrap();
        let direct = mc_expectation("tr", &cfg, 10, &Serial, |c, o| {
            let v = symmetric_eigenvalues(build_hamiltonian(c, o)?.matrix())?;
            Ok(v.iter().map(|&x| f.eval(x)).sum())
        })
        .unwrap();
        assert!((full.trace.mean - direct.mean).abs() < 1e-10);
        assert!(ucp_positivity_check(&cfg, &all, &f, 1.5, 2, &Serial).is_err());
        assert!(ucp_positivity_check(&cfg, &all, &f.scale(-1.0), 2.0, 2, &Serial).is_err());
    }
}
