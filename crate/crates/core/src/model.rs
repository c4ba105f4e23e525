//! Alloy-type lattice Hamiltonians.
//!
//! `H = −Δ_h + V₀ + λ Σ_k ω_k u(· − k)` on a box of lattice sites with
//! Dirichlet (matrix-truncation) boundary conditions, and the perturbed
//! operator `H^τ = H + τW`. Sites carry physical integer coordinates
//! centered on the origin, so boxes of different sizes are nested and a
//! disorder realization assigns the same coupling to a site in every box.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::site_uniform;

/// Lattice coordinates; the second component is zero in one dimension.
pub type Site = [i64; 2];

/// Axis-aligned box of lattice sites, bounds inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxRegion {
    pub dim: usize,
    pub lo: Site,
    pub hi: Site,
}

impl BoxRegion {
    /// Box of `side` sites per axis about the origin:
    /// coordinates `−⌊side/2⌋ ..= side − 1 − ⌊side/2⌋`.
    pub fn centered(dim: usize, side: usize) -> Self {
        let lo = -((side / 2) as i64);
        let hi = lo + side as i64 - 1;
        let (lo1, hi1) = if dim == 2 { (lo, hi) } else { (0, 0) };
        BoxRegion { dim, lo: [lo, lo1], hi: [hi, hi1] }
    }

    pub fn new(dim: usize, lo: Site, hi: Site) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::param("dim", "must be 1 or 2"));
        }
        let (lo, hi) = if dim == 1 { ([lo[0], 0], [hi[0], 0]) } else { (lo, hi) };
        if lo[0] > hi[0] || lo[1] > hi[1] {
            return Err(Error::SubboxOutOfRange { lo, hi });
        }
        Ok(BoxRegion { dim, lo, hi })
    }

    pub fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.extent(0) * self.extent(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, site: Site) -> bool {
        (0..2).all(|a| site[a] >= self.lo[a] && site[a] <= self.hi[a])
    }

    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        self.contains(other.lo) && self.contains(other.hi)
    }

    /// Row-major index with axis 0 running fastest.
    pub fn index_of(&self, site: Site) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        let i0 = (site[0] - self.lo[0]) as usize;
        let i1 = (site[1] - self.lo[1]) as usize;
        Some(i0 + self.extent(0) * i1)
    }

    pub fn site_of(&self, index: usize) -> Site {
        let n0 = self.extent(0);
        [self.lo[0] + (index % n0) as i64, self.lo[1] + (index / n0) as i64]
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len()).map(move |i| self.site_of(i))
    }

    /// The box grown by `r` sites along every active axis.
    pub fn expanded(&self, r: i64) -> BoxRegion {
        let mut out = *self;
        for a in 0..self.dim {
            out.lo[a] -= r;
            out.hi[a] += r;
        }
        out
    }

    /// Sup-norm distance from `site` to the nearest lattice site outside
    /// the box (inside), or to the nearest site inside the box (outside).
    pub fn boundary_distance(&self, site: Site) -> i64 {
        if self.contains(site) {
            (0..self.dim)
                .map(|a| (site[a] - self.lo[a] + 1).min(self.hi[a] - site[a] + 1))
                .min()
                .unwrap_or(0)
        } else {
            (0..self.dim)
                .map(|a| {
                    if site[a] < self.lo[a] {
                        self.lo[a] - site[a]
                    } else if site[a] > self.hi[a] {
                        site[a] - self.hi[a]
                    } else {
                        0
                    }
                })
                .max()
                .unwrap_or(0)
        }
    }
}

/// Sup-norm lattice distance.
pub fn site_distance(a: Site, b: Site) -> i64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

/// One entry of a compactly supported lattice function.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct StencilEntry {
    #[cfg_attr(feature = "serde", serde(with = "site_repr"))]
    pub site: Site,
    pub value: f64,
}

impl StencilEntry {
    pub fn new(site: Site, value: f64) -> Self {
        Self { site, value }
    }
}

/// Single-site distribution of the couplings `ω_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum SingleSiteLaw {
    /// Uniform on `[lo, hi] ⊆ [0, 1]`; `lo == hi` is a point mass.
    Uniform { lo: f64, hi: f64 },
}

impl Default for SingleSiteLaw {
    fn default() -> Self {
        SingleSiteLaw::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl SingleSiteLaw {
    pub fn sample(&self, u: f64) -> f64 {
        match *self {
            SingleSiteLaw::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }

    /// Essential infimum of the density on `[0, 1]` (zero unless the law
    /// is the full uniform distribution).
    pub fn density_lower_bound(&self) -> f64 {
        match *self {
            SingleSiteLaw::Uniform { lo, hi } if lo == 0.0 && hi == 1.0 => 1.0,
            SingleSiteLaw::Uniform { .. } => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SingleSiteLaw::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 1.0) {
                    return Err(Error::config("single_site_law", "uniform bounds must satisfy 0 <= lo <= hi <= 1"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Tolerances {
    /// Eigenvalue resolution; energies closer than this to an eigenvalue
    /// are flagged as degenerate.
    pub eig_tol: f64,
    /// Width of the band `[1 − kernel_tol, 1]` treated as the ±1 kernel of
    /// a shift operator.
    pub kernel_tol: f64,
    /// Agreement tolerance for traces and determinants.
    pub det_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eig_tol: 1e-10, kernel_tol: 1e-6, det_tol: 1e-8 }
    }
}

/// Full description of one experiment's operator ensemble.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ModelConfig {
    pub dimension: usize,
    pub sites_per_side: usize,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub lattice_spacing: f64,
    pub coupling: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub perturbation_strength: f64,
    /// Periodic background: `P` values in 1D, `P × P` row-major in 2D,
    /// with `P` dividing `sites_per_side`.
    #[cfg_attr(feature = "serde", serde(default = "zero_background"))]
    pub background: Vec<f64>,
    /// Single-site bump `u` as offsets from its anchor site.
    #[cfg_attr(feature = "serde", serde(default = "indicator_bump"))]
    pub bump_profile: Vec<StencilEntry>,
    /// Perturbation `W` at absolute sites.
    #[cfg_attr(feature = "serde", serde(default))]
    pub perturbation: Vec<StencilEntry>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub single_site_law: SingleSiteLaw,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub tolerances: Tolerances,
}

#[cfg(feature = "serde")]
fn one() -> f64 {
    1.0
}

#[cfg(feature = "serde")]
fn zero_background() -> Vec<f64> {
    vec![0.0]
}

#[cfg(feature = "serde")]
fn indicator_bump() -> Vec<StencilEntry> {
    vec![StencilEntry::new([0, 0], 1.0)]
}

impl ModelConfig {
    /// One-dimensional model with single-site bumps, uniform couplings and
    /// no background.
    pub fn chain(sites: usize, coupling: f64) -> Self {
        ModelConfig {
            dimension: 1,
            sites_per_side: sites,
            lattice_spacing: 1.0,
            coupling,
            perturbation_strength: 0.0,
            background: vec![0.0],
            bump_profile: vec![StencilEntry::new([0, 0], 1.0)],
            perturbation: Vec::new(),
            single_site_law: SingleSiteLaw::default(),
            seed: 0,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_perturbation(mut self, entries: Vec<StencilEntry>, strength: f64) -> Self {
        self.perturbation = entries;
        self.perturbation_strength = strength;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sites(mut self, sites: usize) -> Self {
        self.sites_per_side = sites;
        self
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.perturbation_strength = strength;
        self
    }

    pub fn region(&self) -> BoxRegion {
        BoxRegion::centered(self.dimension, self.sites_per_side)
    }

    /// Number of lattice sites `L^d`.
    pub fn volume(&self) -> usize {
        self.region().len()
    }

    /// Period of the background table along each axis.
    pub fn background_period(&self) -> usize {
        match self.dimension {
            2 => libm::round(libm::sqrt(self.background.len() as f64)) as usize,
            _ => self.background.len(),
        }
    }

    pub fn background_at(&self, site: Site) -> f64 {
        let p = self.background_period() as i64;
        let i0 = site[0].rem_euclid(p) as usize;
        if self.dimension == 2 {
            let i1 = site[1].rem_euclid(p) as usize;
            self.background[i0 + self.background_period() * i1]
        } else {
            self.background[i0]
        }
    }

    pub fn perturbation_at(&self, site: Site) -> f64 {
        self.perturbation.iter().filter(|e| e.site == site).map(|e| e.value).sum()
    }

    /// Covering constant `Σ_k u(x − k)`, the same at every lattice site.
    pub fn covering_constant(&self) -> f64 {
        self.bump_profile.iter().map(|e| e.value).sum()
    }

    /// Largest sup-norm offset in the bump stencil.
    pub fn bump_reach(&self) -> i64 {
        self.bump_profile.iter().map(|e| e.site[0].abs().max(e.site[1].abs())).max().unwrap_or(0)
    }

    /// Whether `W ≥ 0`, `W ≤ 0`, or neither.
    pub fn perturbation_sign(&self) -> Option<i32> {
        let values: Vec<f64> = self.perturbation.iter().map(|e| e.value).collect();
        if values.iter().all(|&v| v >= 0.0) {
            Some(1)
        } else if values.iter().all(|&v| v <= 0.0) {
            Some(-1)
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dimension) {
            return Err(Error::config("dimension", "must be 1 or 2"));
        }
        if self.sites_per_side == 0 {
            return Err(Error::config("sites_per_side", "must be positive"));
        }
        if !(self.lattice_spacing.is_finite() && self.lattice_spacing > 0.0) {
            return Err(Error::config("lattice_spacing", "must be positive"));
        }
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::config("coupling", "must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.perturbation_strength) {
            return Err(Error::config("perturbation_strength", "must lie in [0, 1]"));
        }
        let p = self.background_period();
        let expected = if self.dimension == 2 { p * p } else { p };
        if p == 0 || expected != self.background.len() {
            return Err(Error::config("background", "table must hold P (1D) or P*P (2D) values"));
        }
        if !self.sites_per_side.is_multiple_of(p) {
            return Err(Error::config("background", "period must divide sites_per_side"));
        }
        if self.background.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("background", "values must be finite"));
        }
        if self.bump_profile.is_empty() || self.bump_profile.iter().any(|e| !(e.value >= 0.0 && e.value.is_finite())) {
            return Err(Error::config("bump_profile", "must be a nonempty nonnegative stencil"));
        }
        if !(self.covering_constant() > 0.0) {
            return Err(Error::config("bump_profile", "covering condition fails: stencil sums to zero"));
        }
        self.single_site_law.validate()?;
        let region = self.region();
        for e in self.bump_profile.iter().chain(&self.perturbation) {
            if self.dimension == 1 && e.site[1] != 0 {
                return Err(Error::config("bump_profile", "1D stencils take one coordinate"));
            }
        }
        for e in &self.perturbation {
            if !e.value.is_finite() {
                return Err(Error::config("perturbation", "values must be finite"));
            }
            if !region.contains(e.site) {
                return Err(Error::SupportOverflow { site: e.site });
            }
        }
        let t = &self.tolerances;
        if !(t.eig_tol > 0.0 && t.kernel_tol > 0.0 && t.det_tol > 0.0) || t.kernel_tol >= 0.5 {
            return Err(Error::config("tolerances", "must be positive (kernel_tol < 0.5)"));
        }
        Ok(())
    }
}

/// Couplings `ω_k` on a box, addressed by physical site.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderRealization {
    region: BoxRegion,
    omega: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

impl DisorderRealization {
    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn values(&self) -> &[f64] {
        &self.omega
    }

    pub fn omega_at(&self, site: Site) -> Option<f64> {
        self.region.index_of(site).map(|i| self.omega[i])
    }

    /// `(seed, realization_index)` that regenerates this realization.
    pub fn seed_path(&self) -> (u64, u64) {
        (self.seed, self.index)
    }
}

/// Draws the couplings for realization `index` on the configured box,
/// grown by the bump reach so that bumps anchored just outside the box
/// still contribute.
pub fn sample_realization(config: &ModelConfig, index: u64) -> DisorderRealization {
    let region = config.region().expanded(config.bump_reach());
    let omega = region
        .sites()
        .map(|site| config.single_site_law.sample(site_uniform(config.seed, index, site)))
        .collect();
    DisorderRealization { region, omega, seed: config.seed, index }
}

/// A real symmetric lattice operator on a box.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    matrix: Mat,
    region: BoxRegion,
    /// Lower bound `E₀` for the spectrum of every operator in the family.
    pub floor: f64,
    bandwidth: usize,
}

impl Hamiltonian {
    /// Wraps an explicit symmetric matrix on a 1D box `0..n`.
    pub fn from_matrix(matrix: Mat, floor: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch { expected: matrix.rows(), found: matrix.cols() });
        }
        if matrix.asymmetry() != 0.0 {
            return Err(Error::param("matrix", "must be exactly symmetric"));
        }
        let n = matrix.rows() as i64;
        let region = BoxRegion { dim: 1, lo: [0, 0], hi: [n - 1, 0] };
        let bandwidth = matrix.bandwidth();
        Ok(Hamiltonian { matrix, region, floor, bandwidth })
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn index_of(&self, site: Site) -> Option<usize> {
        self.region.index_of(site)
    }

    /// Matrix indices of the listed sites; every site must be in the box.
    pub fn indices_of(&self, sites: &[Site]) -> Result<Vec<usize>> {
        sites
            .iter()
            .map(|&s| self.region.index_of(s).ok_or(Error::SubboxOutOfRange { lo: s, hi: s }))
            .collect()
    }

    /// Principal submatrix on a sub-box (Dirichlet restriction).
    pub fn restrict(&self, subbox: &BoxRegion) -> Result<Hamiltonian> {
        if subbox.dim != self.region.dim || !self.region.contains_box(subbox) {
            return Err(Error::SubboxOutOfRange { lo: subbox.lo, hi: subbox.hi });
        }
        let idx: Vec<usize> = subbox.sites().map(|s| self.region.index_of(s).expect("contained")).collect();
        let matrix = self.matrix.select(&idx, &idx);
        let bandwidth = matrix.bandwidth();
        Ok(Hamiltonian { matrix, region: *subbox, floor: self.floor, bandwidth })
    }
}

/// `H = −Δ_h + V₀ + λ Σ_k ω_k u_k` on the configured box.
pub fn build_hamiltonian(config: &ModelConfig, omega: &DisorderRealization) -> Result<Hamiltonian> {
    config.validate()?;
    let region = config.region();
    let needed = region.expanded(config.bump_reach());
    if omega.region.dim != config.dimension || !omega.region.contains_box(&needed) {
        return Err(Error::DimensionMismatch { expected: needed.len(), found: omega.region.len() });
    }
    let n = region.len();
    let inv_h2 = 1.0 / (config.lattice_spacing * config.lattice_spacing);
    let mut m = Mat::zeros(n, n);
    let mut floor = f64::INFINITY;
    for (i, site) in region.sites().enumerate() {
        let disorder: f64 = config
            .bump_profile
            .iter()
            .map(|e| {
                let anchor = [site[0] - e.site[0], site[1] - e.site[1]];
                e.value * omega.omega_at(anchor).expect("covered by expanded region")
            })
            .sum();
        let v0 = config.background_at(site);
        m[(i, i)] = 2.0 * config.dimension as f64 * inv_h2 + v0 + config.coupling * disorder;
        floor = floor.min(v0).min(v0 + config.perturbation_at(site));
        for axis in 0..config.dimension {
            let mut next = site;
            next[axis] += 1;
            if let Some(j) = region.index_of(next) {
                m[(i, j)] = -inv_h2;
                m[(j, i)] = -inv_h2;
            }
        }
    }
    let bandwidth = if config.dimension == 2 { region.extent(0) } else { 1 }.min(n.saturating_sub(1));
    Ok(Hamiltonian { matrix: m, region, floor, bandwidth })
}

/// `H^τ = H + τ·diag(W)` with `τ` and `W` from the config.
pub fn apply_perturbation(h: &Hamiltonian, config: &ModelConfig) -> Result<Hamiltonian> {
    perturb(h, &config.perturbation, config.perturbation_strength)
}

/// `H + τ·diag(W)` for an explicit stencil and strength.
pub fn perturb(h: &Hamiltonian, w: &[StencilEntry], tau: f64) -> Result<Hamiltonian> {
    let mut out = h.clone();
    for e in w {
        let i = h.region.index_of(e.site).ok_or(Error::SupportOverflow { site: e.site })?;
        out.matrix[(i, i)] += tau * e.value;
        if e.value < 0.0 {
            // keep E₀ a lower bound for every τ ∈ [0, 1]
            out.floor = out.floor.min(h.floor + e.value);
        }
    }
    Ok(out)
}

/// Dirichlet restriction of `H` to a sub-box.
pub fn restrict_dirichlet(config: &ModelConfig, omega: &DisorderRealization, subbox: &BoxRegion) -> Result<Hamiltonian> {
    build_hamiltonian(config, omega)?.restrict(subbox)
}

impl core::fmt::Display for BoxRegion {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.dim == 1 {
            write!(f, "[{}, {}]", self.lo[0], self.hi[0])
        } else {
            write!(f, "[{}, {}]x[{}, {}]", self.lo[0], self.hi[0], self.lo[1], self.hi[1])
        }
    }
}

impl BoxRegion {
    pub fn describe(&self) -> alloc::string::String {
        self.to_string()
    }
}

#[cfg(feature = "serde")]
mod site_repr {
    use super::Site;
    use alloc::vec::Vec;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(site: &Site, s: S) -> Result<S::Ok, S::Error> {
        if site[1] == 0 {
            s.collect_seq([site[0]])
        } else {
            s.collect_seq(site.iter())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Site, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        match v.as_slice() {
            [x] => Ok([*x, 0]),
            [x, y] => Ok([*x, *y]),
            _ => Err(D::Error::custom("site must have one or two coordinates")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigenvalues;
    use core::f64::consts::PI;

    #[test]
    fn centered_boxes_nest() {
        let small = BoxRegion::centered(1, 40);
        let big = BoxRegion::centered(1, 200);
        assert_eq!(small.lo[0], -20);
        assert_eq!(small.hi[0], 19);
        assert!(big.contains_box(&small));
        assert!(small.contains([0, 0]));
        let b2 = BoxRegion::centered(2, 3);
        assert_eq!(b2.len(), 9);
        for i in 0..9 {
            assert_eq!(b2.index_of(b2.site_of(i)), Some(i));
        }
    }

    #[test]
    fn boundary_distance_inside_and_outside() {
        let g = BoxRegion::new(1, [-5, 0], [5, 0]).unwrap();
        assert_eq!(g.boundary_distance([0, 0]), 6);
        assert_eq!(g.boundary_distance([5, 0]), 1);
        assert_eq!(g.boundary_distance([7, 0]), 2);
    }

    #[test]
    fn free_laplacian_l3() {
        let cfg = ModelConfig::chain(3, 0.0);
        let h = build_hamiltonian(&cfg, &sample_realization(&cfg, 0)).unwrap();
        let expect = Mat::from_rows(&[&[2.0, -1.0, 0.0], &[-1.0, 2.0, -1.0], &[0.0, -1.0, 2.0]]);
        assert_eq!(h.matrix(), &expect);
        let vals = symmetric_eigenvalues(h.matrix()).unwrap();
        for (m, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * libm::cos((m + 1) as f64 * PI / 4.0);
            assert!((v - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_background_shifts_spectrum() {
        let base = ModelConfig::chain(6, 0.0);
        let mut shifted = base.clone();
        shifted.background = vec![0.75];
        let e0 = symmetric_eigenvalues(build_hamiltonian(&base, &sample_realization(&base, 0)).unwrap().matrix()).unwrap();
        let h1 = build_hamiltonian(&shifted, &sample_realization(&shifted, 0)).unwrap();
        assert_eq!(h1.floor, 0.75);
        let e1 = symmetric_eigenvalues(h1.matrix()).unwrap();
        for (a, b) in e0.iter().zip(&e1) {
            assert!((b - a - 0.75).abs() < 1e-13);
        }
    }

    #[test]
    fn point_mass_law() {
        let mut cfg = ModelConfig::chain(5, 1.0);
        cfg.single_site_law = SingleSiteLaw::Uniform { lo: 0.5, hi: 0.5 };
        let w = sample_realization(&cfg, 0);
        assert!(w.values().iter().all(|&x| x == 0.5));
    }

    #[test]
    fn realization_is_reproducible() {
        let cfg = ModelConfig::chain(10, 1.0).with_seed(7);
        assert_eq!(sample_realization(&cfg, 3), sample_realization(&cfg, 3));
        assert_ne!(sample_realization(&cfg, 3).values(), sample_realization(&cfg, 4).values());
    }

    #[test]
    fn assembly_matches_site_by_site_oracle() {
        let mut cfg = ModelConfig::chain(12, 1.0).with_seed(99);
        cfg.background = vec![0.1, -0.2, 0.3];
        let w = sample_realization(&cfg, 5);
        let h = build_hamiltonian(&cfg, &w).unwrap();
        // naive oracle: coordinates -6..=5, independent draws
        for (i, x) in (-6i64..=5).enumerate() {
            let omega = crate::rng::site_uniform(99, 5, [x, 0]);
            let v0 = [0.1, -0.2, 0.3][x.rem_euclid(3) as usize];
            assert_eq!(h.matrix()[(i, i)], 2.0 + v0 + omega);
            if i + 1 < 12 {
                assert_eq!(h.matrix()[(i, i + 1)], -1.0);
            }
        }
    }

    #[test]
    fn multi_site_bump_uses_neighbouring_couplings() {
        let mut cfg = ModelConfig::chain(4, 2.0).with_seed(1);
        cfg.bump_profile = vec![StencilEntry::new([0, 0], 1.0), StencilEntry::new([1, 0], 0.5)];
        let w = sample_realization(&cfg, 0);
        let h = build_hamiltonian(&cfg, &w).unwrap();
        // site x feels ω_x·1 + ω_{x−1}·0.5; x = −2 needs ω_{−3} from outside the box
        let om = |x: i64| w.omega_at([x, 0]).unwrap();
        assert!((h.matrix()[(0, 0)] - (2.0 + 2.0 * (om(-2) + 0.5 * om(-3)))).abs() < 1e-15);
    }

    #[test]
    fn perturbation_updates_single_entry() {
        let cfg = ModelConfig::chain(5, 1.0).with_perturbation(vec![StencilEntry::new([0, 0], 0.7)], 1.0);
        let h = build_hamiltonian(&cfg, &sample_realization(&cfg, 0)).unwrap();
        let ht = apply_perturbation(&h, &cfg).unwrap();
        let diff = ht.matrix().sub(h.matrix());
        let idx = h.index_of([0, 0]).unwrap();
        assert!((diff[(idx, idx)] - 0.7).abs() < 1e-15);
        assert_eq!(diff.max_abs(), diff[(idx, idx)]);
        let zero = apply_perturbation(&h, &cfg.clone().with_strength(0.0)).unwrap();
        assert_eq!(zero.matrix(), h.matrix());
    }

    #[test]
    fn perturbation_outside_box_is_rejected() {
        let cfg = ModelConfig::chain(5, 1.0);
        let h = build_hamiltonian(&cfg, &sample_realization(&cfg, 0)).unwrap();
        assert!(matches!(perturb(&h, &[StencilEntry::new([9, 0], 1.0)], 1.0), Err(Error::SupportOverflow { .. })));
        let bad = cfg.with_perturbation(vec![StencilEntry::new([9, 0], 1.0)], 1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn monotone_in_tau_for_positive_w() {
        let cfg = ModelConfig::chain(30, 3.0)
            .with_seed(4)
            .with_perturbation(vec![StencilEntry::new([0, 0], 1.0), StencilEntry::new([2, 0], 0.5)], 1.0);
        let h = build_hamiltonian(&cfg, &sample_realization(&cfg, 0)).unwrap();
        let lo = symmetric_eigenvalues(perturb(&h, &cfg.perturbation, 0.3).unwrap().matrix()).unwrap();
        let hi = symmetric_eigenvalues(perturb(&h, &cfg.perturbation, 0.7).unwrap().matrix()).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            assert!(*b >= a - 1e-12);
        }
    }

    #[test]
    fn restriction_matches_rebuild_on_half_box() {
        let cfg = ModelConfig::chain(20, 2.0).with_seed(3);
        let w = sample_realization(&cfg, 1);
        let full = build_hamiltonian(&cfg, &w).unwrap();
        assert_eq!(full.restrict(full.region()).unwrap(), full);
        let left = BoxRegion::new(1, [-10, 0], [-1, 0]).unwrap();
        let sub = restrict_dirichlet(&cfg, &w, &left).unwrap();
        // rebuild oracle: entries from the same couplings, truncated hopping
        for (i, x) in (-10i64..=-1).enumerate() {
            assert_eq!(sub.matrix()[(i, i)], 2.0 + 2.0 * w.omega_at([x, 0]).unwrap());
        }
        assert_eq!(sub.matrix().bandwidth(), 1);
        let full_min = symmetric_eigenvalues(full.matrix()).unwrap()[0];
        let sub_min = symmetric_eigenvalues(sub.matrix()).unwrap()[0];
        assert!(sub_min >= full_min - 1e-12);
        let outside = BoxRegion::new(1, [-30, 0], [0, 0]).unwrap();
        assert!(restrict_dirichlet(&cfg, &w, &outside).is_err());
    }

    #[test]
    fn spectral_floor_holds_in_two_dimensions() {
        let mut cfg = ModelConfig::chain(6, 1.5).with_seed(8);
        cfg.dimension = 2;
        cfg.background = vec![0.0, -0.3, 0.2, 0.1];
        cfg.perturbation = vec![StencilEntry::new([0, 0], -0.8), StencilEntry::new([1, 1], 0.4)];
        cfg.validate().unwrap();
        let h = build_hamiltonian(&cfg, &sample_realization(&cfg, 2)).unwrap();
        assert_eq!(h.matrix().asymmetry(), 0.0);
        assert_eq!(h.bandwidth(), 6);
        assert!(h.matrix().bandwidth() <= 6);
        for tau in [0.0, 0.5, 1.0] {
            let ht = perturb(&h, &cfg.perturbation, tau).unwrap();
            let min = symmetric_eigenvalues(ht.matrix()).unwrap()[0];
            assert!(min >= h.floor - 1e-12, "tau {tau}: {min} < {}", h.floor);
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let good = ModelConfig::chain(6, 1.0);
        good.validate().unwrap();
        let mut c = good.clone();
        c.background = vec![0.0; 4];
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.bump_profile = vec![StencilEntry::new([0, 0], -1.0)];
        assert!(c.validate().is_err());
        let mut c = good.clone();
        c.single_site_law = SingleSiteLaw::Uniform { lo: 0.2, hi: 1.3 };
        assert!(c.validate().is_err());
        let mut c = good;
        c.perturbation_strength = 1.5;
        assert!(c.validate().is_err());
    }
}
