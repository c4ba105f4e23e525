//! Functions of bounded variation and two ways of applying them to a
//! Hamiltonian: the spectral theorem, and a Helffer–Sjöstrand quadrature
//! of resolvents.
//!
//! A [`BvFunction`] is stored in canonical form: strictly increasing knots,
//! a cubic on every interval between knots, and constant tails. Functions
//! are left-continuous, so the value at a knot is the left limit and
//! `1_{(−∞,E]}` takes the value 1 at `E`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, BandedLu, Complex64, Mat};
use crate::model::Hamiltonian;
use crate::spectral::{LocalBlock, SpectralData};

/// Building block for [`BvFunction::from_components`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum Component {
    /// `height · 1_{(−∞, at]}`.
    Step { at: f64, height: f64 },
    /// `height` on `(−∞, from]`, falling to 0 on `[to, ∞)` along the cubic
    /// smoothstep.
    Ramp { from: f64, to: f64, height: f64 },
    /// Piecewise-linear interpolation of `(x, y)` points with constant
    /// extension beyond both ends.
    Table { points: Vec<(f64, f64)> },
}

impl Component {
    fn knots(&self, out: &mut Vec<f64>) {
        match self {
            Component::Step { at, .. } => out.push(*at),
            Component::Ramp { from, to, .. } => out.extend([*from, *to]),
            Component::Table { points } => out.extend(points.iter().map(|p| p.0)),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            Component::Step { at, height } if !finite(&[*at, *height]) => Err(Error::param("step", "must be finite")),
            Component::Ramp { from, to, height } => {
                if !finite(&[*from, *to, *height]) || from >= to {
                    Err(Error::param("ramp", "needs finite from < to"))
                } else {
                    Ok(())
                }
            }
            Component::Table { points } => {
                if points.is_empty() || points.iter().any(|p| !finite(&[p.0, p.1])) {
                    return Err(Error::param("table", "needs at least one finite point"));
                }
                if points.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::param("table", "abscissae must be strictly increasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn left_tail(&self) -> f64 {
        match self {
            Component::Step { height, .. } | Component::Ramp { height, .. } => *height,
            Component::Table { points } => points[0].1,
        }
    }

    fn right_tail(&self) -> f64 {
        match self {
            Component::Step { .. } | Component::Ramp { .. } => 0.0,
            Component::Table { points } => points[points.len() - 1].1,
        }
    }

    /// Exact `(f(x), f(x+))`.
    fn limits(&self, x: f64) -> (f64, f64) {
        match self {
            Component::Step { at, height } => {
                let v = |inside: bool| if inside { *height } else { 0.0 };
                (v(x <= *at), v(x < *at))
            }
            Component::Ramp { from, to, height } => {
                let v = if x <= *from {
                    *height
                } else if x >= *to {
                    0.0
                } else {
                    let s = (x - from) / (to - from);
                    height * (1.0 - s * s * (3.0 - 2.0 * s))
                };
                (v, v)
            }
            Component::Table { points } => {
                let n = points.len();
                let v = if x <= points[0].0 {
                    points[0].1
                } else if x >= points[n - 1].0 {
                    points[n - 1].1
                } else {
                    let i = points.partition_point(|p| p.0 <= x) - 1;
                    let (x0, y0) = points[i];
                    if x == x0 {
                        y0
                    } else {
                        let (x1, y1) = points[i + 1];
                        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                    }
                };
                (v, v)
            }
        }
    }

    /// Cubic in `t = x − a` agreeing with the component on `(a, b)`, where
    /// `(a, b)` contains no knot of the component.
    fn piece(&self, a: f64, b: f64) -> [f64; 4] {
        match self {
            Component::Step { at, height } => {
                if b <= *at {
                    [*height, 0.0, 0.0, 0.0]
                } else {
                    [0.0; 4]
                }
            }
            Component::Ramp { from, to, height } => {
                if b <= *from {
                    [*height, 0.0, 0.0, 0.0]
                } else if a >= *to {
                    [0.0; 4]
                } else {
                    // h(1 − S(s)), S(s) = 3s² − 2s³, s = (x − from)/L
                    let l = to - from;
                    let s = (a - from) / l;
                    let c0 = 1.0 - (3.0 * s * s - 2.0 * s * s * s);
                    let c1 = -(6.0 * s - 6.0 * s * s) / l;
                    let c2 = -(6.0 - 12.0 * s) / (2.0 * l * l);
                    let c3 = 2.0 / (l * l * l);
                    [height * c0, height * c1, height * c2, height * c3]
                }
            }
            Component::Table { points } => {
                let n = points.len();
                if b <= points[0].0 {
                    return [points[0].1, 0.0, 0.0, 0.0];
                }
                if a >= points[n - 1].0 {
                    return [points[n - 1].1, 0.0, 0.0, 0.0];
                }
                let i = points.partition_point(|p| p.0 <= a) - 1;
                let (x0, y0) = points[i];
                let (x1, y1) = points[i + 1];
                let slope = (y1 - y0) / (x1 - x0);
                [y0 + slope * (a - x0), slope, 0.0, 0.0]
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FunctionClass {
    /// Compactly supported; support contained in `[lo, hi]`.
    CompactSupport { lo: f64, hi: f64 },
    /// Constant below `lo` and identically zero from `hi` on.
    Interval { lo: f64, hi: f64 },
    /// Nonzero right tail.
    General,
}

/// Left-continuous piecewise-cubic function of bounded variation.
#[derive(Clone, Debug, PartialEq)]
pub struct BvFunction {
    knots: Vec<f64>,
    pieces: Vec<[f64; 4]>,
    /// `(f(k), f(k+))` at each knot, kept exact so that continuous
    /// functions have no rounding-level jumps.
    limits: Vec<(f64, f64)>,
    left: f64,
    right: f64,
}

#[inline]
fn poly(c: &[f64; 4], t: f64) -> f64 {
    ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
}

#[inline]
fn poly_antiderivative(c: &[f64; 4], t: f64) -> f64 {
    (((c[3] / 4.0 * t + c[2] / 3.0) * t + c[1] / 2.0) * t + c[0]) * t
}

/// Re-expands a cubic about `t = shift`.
fn taylor_shift(c: &[f64; 4], shift: f64) -> [f64; 4] {
    let s = shift;
    [
        poly(c, s),
        c[1] + 2.0 * c[2] * s + 3.0 * c[3] * s * s,
        c[2] + 3.0 * c[3] * s,
        c[3],
    ]
}

/// Roots of `p'` strictly inside `(0, len)`, ascending.
fn derivative_roots(c: &[f64; 4], len: f64) -> Vec<f64> {
    // p'(t) = c1 + 2c2 t + 3c3 t²
    let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    let mut roots = Vec::new();
    if qa == 0.0 {
        if qb != 0.0 {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = libm::sqrt(disc);
            // stable form
            let q = -0.5 * (qb + if qb >= 0.0 { sq } else { -sq });
            if q != 0.0 {
                roots.push(qc / q);
            }
            roots.push(q / qa);
        }
    }
    roots.retain(|&r| r > 0.0 && r < len);
    roots.sort_by(f64::total_cmp);
    roots
}

impl BvFunction {
    pub fn constant(value: f64) -> Self {
        BvFunction { knots: Vec::new(), pieces: Vec::new(), limits: Vec::new(), left: value, right: value }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// `1_{(−∞, e]}`.
    pub fn indicator(e: f64) -> Self {
        Self::from_components(&[Component::Step { at: e, height: 1.0 }]).expect("finite step")
    }

    /// `1_{(e1, e2]}`.
    pub fn interval(e1: f64, e2: f64) -> Result<Self> {
        if !(e1 < e2) {
            return Err(Error::param("interval", "needs e1 < e2"));
        }
        Self::from_components(&[Component::Step { at: e2, height: 1.0 }, Component::Step { at: e1, height: -1.0 }])
    }

    /// Smoothed `1_{(−∞, e]}`: 1 below `e − width/2`, 0 above `e + width/2`.
    pub fn ramp(e: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::param("ramp", "width must be positive"));
        }
        Self::from_components(&[Component::Ramp { from: e - width / 2.0, to: e + width / 2.0, height: 1.0 }])
    }

    /// Piecewise-linear through `points`, extended constantly.
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::from_components(&[Component::Table { points }])
    }

    pub fn from_components(components: &[Component]) -> Result<Self> {
        let mut knots = Vec::new();
        for c in components {
            c.validate()?;
            c.knots(&mut knots);
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let pieces = knots
            .windows(2)
            .map(|w| {
                let mut acc = [0.0; 4];
                for c in components {
                    let p = c.piece(w[0], w[1]);
                    for k in 0..4 {
                        acc[k] += p[k];
                    }
                }
                acc
            })
            .collect();
        let limits = knots
            .iter()
            .map(|&x| components.iter().map(|c| c.limits(x)).fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1)))
            .collect();
        let left = components.iter().map(Component::left_tail).sum();
        let right = components.iter().map(Component::right_tail).sum();
        Ok(BvFunction { knots, pieces, limits, left, right })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `(f(x), f(x+))`.
    fn limits_at(&self, x: f64) -> (f64, f64) {
        match self.knots.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(k) => self.limits[k],
            Err(_) => {
                let v = self.eval(x);
                (v, v)
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.knots.is_empty() || x < self.knots[0] {
            return self.left;
        }
        let last = self.knots.len() - 1;
        if x > self.knots[last] {
            return self.right;
        }
        // x ∈ (knots[i], knots[i+1]], or x is a knot
        let i = self.knots.partition_point(|&k| k < x);
        if self.knots[i] == x {
            return self.limits[i].0;
        }
        poly(&self.pieces[i - 1], x - self.knots[i - 1])
    }

    /// Jump points with heights `f(x+) − f(x)`, skipping zero jumps.
    pub fn jumps(&self) -> Vec<(f64, f64)> {
        self.knots
            .iter()
            .zip(&self.limits)
            .filter_map(|(&x, &(at, after))| (after != at).then_some((x, after - at)))
            .collect()
    }

    /// Interval pieces as `(a, b, coefficients in t = x − a)`.
    fn intervals(&self) -> impl Iterator<Item = (f64, f64, &[f64; 4])> + '_ {
        self.knots.windows(2).zip(&self.pieces).map(|(w, c)| (w[0], w[1], c))
    }

    /// `NTV(f) = Σ|jumps| + Σ ∫|p'|`, exact for the piecewise-cubic form.
    pub fn total_variation(&self) -> f64 {
        let jumps: f64 = self.jumps().iter().map(|j| j.1.abs()).sum();
        let smooth: f64 = self
            .intervals()
            .map(|(a, b, c)| {
                let len = b - a;
                let mut ts = vec![0.0];
                ts.extend(derivative_roots(c, len));
                ts.push(len);
                ts.windows(2).map(|w| (poly(c, w[1]) - poly(c, w[0])).abs()).sum::<f64>()
            })
            .sum();
        jumps + smooth
    }

    /// `∫ |f|` over the support; infinite unless both tails vanish.
    pub fn l1_norm(&self) -> f64 {
        if self.left != 0.0 || self.right != 0.0 {
            return f64::INFINITY;
        }
        self.intervals()
            .map(|(a, b, c)| {
                let len = b - a;
                // split at extrema, then at the (single) root inside each monotone run
                let mut ts = vec![0.0];
                ts.extend(derivative_roots(c, len));
                ts.push(len);
                let mut cuts = vec![0.0];
                for w in ts.windows(2) {
                    let (p0, p1) = (poly(c, w[0]), poly(c, w[1]));
                    if p0 * p1 < 0.0 {
                        cuts.push(bisect_root(c, w[0], w[1]));
                    }
                    cuts.push(w[1]);
                }
                cuts.windows(2)
                    .map(|w| (poly_antiderivative(c, w[1]) - poly_antiderivative(c, w[0])).abs())
                    .sum::<f64>()
            })
            .sum()
    }

    /// Smallest closed interval outside which `f` vanishes, or `None` when a
    /// tail is nonzero. The zero function has no support.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.left != 0.0 || self.right != 0.0 {
            return None;
        }
        let nonzero = |c: &[f64; 4]| c.iter().any(|&x| x != 0.0);
        let first = self.pieces.iter().position(nonzero)?;
        let last = self.pieces.iter().rposition(nonzero)?;
        Some((self.knots[first], self.knots[last + 1]))
    }

    pub fn class(&self) -> FunctionClass {
        if self.right != 0.0 {
            return FunctionClass::General;
        }
        if self.left == 0.0 {
            let (lo, hi) = self.support().unwrap_or((0.0, 0.0));
            return FunctionClass::CompactSupport { lo, hi };
        }
        let last = self.pieces.iter().rposition(|c| c.iter().any(|&x| x != 0.0)).map_or(0, |i| i + 1);
        FunctionClass::Interval { lo: self.knots[0], hi: self.knots[last] }
    }

    /// Whether `f ∈ F_I` for `I = [lo, hi]`: constant on `(−∞, lo]` and zero
    /// on `[hi, ∞)`.
    pub fn in_interval_class(&self, lo: f64, hi: f64) -> bool {
        if self.right != 0.0 {
            return false;
        }
        let grid_ok = self.intervals().all(|(a, b, c)| {
            if b <= lo {
                c[1] == 0.0 && c[2] == 0.0 && c[3] == 0.0 && c[0] == self.left
            } else if a >= hi {
                c.iter().all(|&x| x == 0.0)
            } else {
                true
            }
        });
        let knots_ok = self.jumps().iter().all(|&(x, _)| x >= lo && x < hi);
        grid_ok && knots_ok
    }

    fn on_knots(&self, knots: &[f64]) -> Vec<[f64; 4]> {
        knots
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let mid = 0.5 * (a + b);
                if self.knots.is_empty() || b <= self.knots[0] {
                    [self.left, 0.0, 0.0, 0.0]
                } else if a >= self.knots[self.knots.len() - 1] {
                    [self.right, 0.0, 0.0, 0.0]
                } else {
                    let i = self.knots.partition_point(|&k| k <= mid) - 1;
                    taylor_shift(&self.pieces[i], a - self.knots[i])
                }
            })
            .collect()
    }

    fn merged_knots(&self, other: &[f64]) -> Vec<f64> {
        let mut k: Vec<f64> = self.knots.iter().chain(other).copied().collect();
        k.sort_by(f64::total_cmp);
        k.dedup();
        k
    }

    pub fn add(&self, other: &BvFunction) -> BvFunction {
        let knots = self.merged_knots(&other.knots);
        let a = self.on_knots(&knots);
        let b = other.on_knots(&knots);
        let pieces = a.iter().zip(&b).map(|(p, q)| [p[0] + q[0], p[1] + q[1], p[2] + q[2], p[3] + q[3]]).collect();
        let limits = knots
            .iter()
            .map(|&x| {
                let (p, q) = (self.limits_at(x), other.limits_at(x));
                (p.0 + q.0, p.1 + q.1)
            })
            .collect();
        BvFunction { knots, pieces, limits, left: self.left + other.left, right: self.right + other.right }
    }

    pub fn scale(&self, s: f64) -> BvFunction {
        BvFunction {
            knots: self.knots.clone(),
            pieces: self.pieces.iter().map(|c| c.map(|x| s * x)).collect(),
            limits: self.limits.iter().map(|&(a, b)| (s * a, s * b)).collect(),
            left: s * self.left,
            right: s * self.right,
        }
    }

    /// `f · 1_{(c, ∞)}`.
    pub fn truncate_below(&self, c: f64) -> BvFunction {
        let knots = self.merged_knots(&[c]);
        let mut pieces = self.on_knots(&knots);
        for (i, w) in knots.windows(2).enumerate() {
            if w[1] <= c {
                pieces[i] = [0.0; 4];
            }
        }
        let limits = knots
            .iter()
            .map(|&x| match x.total_cmp(&c) {
                core::cmp::Ordering::Less => (0.0, 0.0),
                core::cmp::Ordering::Equal => (0.0, self.limits_at(x).1),
                core::cmp::Ordering::Greater => self.limits_at(x),
            })
            .collect();
        BvFunction { knots, pieces, limits, left: 0.0, right: self.right }
    }

    /// `(∫ f, f(b−) − f(a+))` over `[a, b]` inside interval piece `i`.
    fn cell_moments(&self, i: usize, a: f64, b: f64) -> (f64, f64) {
        let c = &self.pieces[i];
        let (ta, tb) = (a - self.knots[i], b - self.knots[i]);
        (poly_antiderivative(c, tb) - poly_antiderivative(c, ta), poly(c, tb) - poly(c, ta))
    }

    /// Two-point Gauss–Legendre nodes and weights for `∫ p' g` over `[a, b]`.
    fn cell_gauss(&self, i: usize, a: f64, b: f64) -> [(f64, f64); 2] {
        let c = &self.pieces[i];
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let off = half / libm::sqrt(3.0);
        [mid - off, mid + off].map(|x| {
            let t = x - self.knots[i];
            (x, (c[1] + (2.0 * c[2] + 3.0 * c[3] * t) * t) * half)
        })
    }
}

fn bisect_root(c: &[f64; 4], mut lo: f64, mut hi: f64) -> f64 {
    let flo = poly(c, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (poly(c, mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Result of the spectral-theorem oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionValue {
    pub matrix: Mat,
    /// Some eigenvalue lies within `eig_tol` of a jump of `f`.
    pub degenerate: bool,
}

/// `V f(Λ) Vᵀ`.
pub fn apply_function_spectral(spec: &SpectralData, f: &BvFunction, eig_tol: f64) -> FunctionValue {
    FunctionValue { matrix: spec.apply(|x| f.eval(x)), degenerate: jump_degeneracy(spec, f, eig_tol) }
}

/// Whether any jump of `f` lies within `tol` of an eigenvalue.
pub fn jump_degeneracy(spec: &SpectralData, f: &BvFunction, tol: f64) -> bool {
    f.jumps().iter().any(|&(x, _)| spec.distance_to_spectrum(x) <= tol)
}

/// Smooth plateau profile: 1 on `[−1, 1]`, 0 outside `(−2, 2)`, with
/// `max |g′| = 2` at `|x| = 3/2`.
pub fn cutoff_profile(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let (p, q) = (psi(2.0 - a), psi(a - 1.0));
        p / (p + q)
    }
}

pub fn cutoff_profile_derivative(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 || a >= 2.0 {
        return 0.0;
    }
    let t = a - 1.0;
    let (p, q) = (psi(1.0 - t), psi(t));
    let d = -(p * q) * (1.0 / ((1.0 - t) * (1.0 - t)) + 1.0 / (t * t)) / ((p + q) * (p + q));
    if x < 0.0 {
        -d
    } else {
        d
    }
}

pub const CUTOFF_MAX_SLOPE: f64 = 2.0;

#[inline]
fn psi(t: f64) -> f64 {
    if t > 0.0 {
        libm::exp(-1.0 / t)
    } else {
        0.0
    }
}

/// Cutoff `Ξ(x, y) = g((x − c)/w) g(y/w)` for a function supported in
/// `[c − w/2, c + w/2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub center: f64,
    pub scale: f64,
}

impl Cutoff {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        cutoff_profile((x - self.center) / self.scale) * cutoff_profile(y / self.scale)
    }

    /// `Ξ` vanishes for `|y| ≥ δ`.
    pub fn delta(&self) -> f64 {
        2.0 * self.scale
    }

    /// Lower bound for `‖∇Ξ‖_∞`, attained on the plateau edge.
    pub fn gradient_sup(&self) -> f64 {
        CUTOFF_MAX_SLOPE / self.scale
    }
}

/// Quadrature node in the upper half-plane. Its mirror `(x, −y)` carries
/// the conjugate weight; both are implied by one entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsNode {
    pub x: f64,
    pub y: f64,
    pub weight: Complex64,
}

/// Discretization of `ζ_f` for a compactly supported `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct HsQuadrature {
    pub nodes: Vec<HsNode>,
    pub cutoff: Cutoff,
    pub y_min: f64,
    pub resolution: f64,
    /// Jump points of `f`, checked against the spectrum before use.
    pub jumps: Vec<f64>,
    total_variation: f64,
    l1_norm: f64,
}

impl HsQuadrature {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of nodes counting mirrors.
    pub fn len(&self) -> usize {
        2 * self.nodes.len()
    }

    /// `∫ d|ζ_f|` as seen by the quadrature.
    pub fn total_abs_weight(&self) -> f64 {
        2.0 * self.nodes.iter().map(|n| n.weight.norm()).sum::<f64>()
    }

    /// `2δ(NTV(f)‖Ξ‖_∞ + 2‖f‖₁‖∇Ξ‖_∞)`, the `s = 1` bound on `∫ d|ζ_f|`.
    pub fn weight_bound(&self) -> f64 {
        2.0 * self.cutoff.delta() * (self.total_variation + 2.0 * self.l1_norm * self.cutoff.gradient_sup())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsOptions {
    pub gap_tol: f64,
    pub y_min: f64,
    pub resolution: f64,
}

impl HsOptions {
    /// `gap_tol = 1e−6 · diameter`, `y_min = gap_tol/10`, resolution 1.
    pub fn for_spectrum(values: &[f64]) -> Self {
        let diameter = match (values.first(), values.last()) {
            (Some(lo), Some(hi)) if hi > lo => hi - lo,
            _ => 1.0,
        };
        let gap_tol = 1e-6 * diameter;
        HsOptions { gap_tol, y_min: gap_tol / 10.0, resolution: 1.0 }
    }

    /// One refinement step: doubled resolution, halved `y_min`.
    pub fn refined(&self) -> Self {
        HsOptions { gap_tol: self.gap_tol, y_min: self.y_min / 2.0, resolution: 2.0 * self.resolution }
    }
}

// Base node densities at resolution 1.
const JUMP_NODES_PER_EFOLD: f64 = 8.0;
const EDGE_X_CELLS: f64 = 32.0;
const EDGE_Y_CELLS: f64 = 16.0;
const SMOOTH_NODES_PER_EFOLD: f64 = 8.0;
const SMOOTH_STRIP: f64 = 1e-3;
const LORENTZ_CELLS: f64 = 2.0;

/// Quadrature for `ζ_f` with the cutoff `Ξ` fitted to `supp f`.
///
/// Nodes cover `|y| ≥ y_min`. The jump part `df(x) dy Ξ` uses a midpoint
/// rule in `log y` on each jump line; the smooth part of `df` uses levels
/// in `log y` with two-point Gauss cells in `x` whose width shrinks with `y`
/// so that the resolvent stays resolved; the part `f (∂_x + i∂_y)Ξ`, which lives on
/// `w ≤ |y| ≤ 2w`, uses a tensor midpoint grid aligned with the knots.
/// The thin strip below the lowest level of each part is represented by
/// one node on its edge.
pub fn hs_measure(f: &BvFunction, y_min: f64, resolution: f64) -> Result<HsQuadrature> {
    if !(y_min > 0.0 && y_min.is_finite()) {
        return Err(Error::param("y_min", "must be positive"));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::param("resolution", "must be positive"));
    }
    let r = resolution;
    let Some((lo, hi)) = f.support() else {
        if f.left == 0.0 && f.right == 0.0 {
            return Ok(HsQuadrature {
                nodes: Vec::new(),
                cutoff: Cutoff { center: 0.0, scale: 1.0 },
                y_min,
                resolution,
                jumps: Vec::new(),
                total_variation: 0.0,
                l1_norm: 0.0,
            });
        }
        return Err(Error::param("f", "Helffer–Sjöstrand quadrature needs compact support; truncate first"));
    };
    let w = hi - lo;
    let cutoff = Cutoff { center: 0.5 * (lo + hi), scale: w };
    if y_min >= w {
        return Err(Error::param("y_min", "must be smaller than the support width"));
    }
    let mut nodes = Vec::new();
    let jumps = f.jumps();

    // jump lines
    let t_lo = libm::log(y_min);
    let t_hi = libm::log(2.0 * w);
    let ny = libm::ceil(JUMP_NODES_PER_EFOLD * r * (t_hi - t_lo)) as usize;
    let dt = (t_hi - t_lo) / ny as f64;
    for &(x, d) in &jumps {
        for k in 0..ny {
            let y = libm::exp(t_lo + (k as f64 + 0.5) * dt);
            let g = cutoff_profile(y / w);
            if g != 0.0 {
                nodes.push(HsNode { x, y, weight: Complex64::new(d * g * y * dt, 0.0) });
            }
        }
        nodes.push(HsNode { x, y: y_min, weight: Complex64::new(d * y_min, 0.0) });
    }

    // smooth part of df
    let smooth: Vec<(usize, f64, f64)> = f
        .intervals()
        .enumerate()
        .filter(|(_, (a, b, c))| *b > lo && *a < hi && (c[1] != 0.0 || c[2] != 0.0 || c[3] != 0.0))
        .map(|(i, (a, b, _))| (i, a, b))
        .collect();
    if !smooth.is_empty() {
        let y_s = (SMOOTH_STRIP * w / r).max(y_min);
        let s_lo = libm::log(y_s);
        let ns = libm::ceil(SMOOTH_NODES_PER_EFOLD * r * (t_hi - s_lo)).max(1.0) as usize;
        let ds = (t_hi - s_lo) / ns as f64;
        let dx_max = w / (EDGE_X_CELLS * r);
        let level = |y: f64, dy_weight: f64, nodes: &mut Vec<HsNode>| {
            let dx = (y / (LORENTZ_CELLS * r)).min(dx_max);
            for &(i, a, b) in &smooth {
                let m = libm::ceil((b - a) / dx).max(1.0) as usize;
                let h = (b - a) / m as f64;
                for j in 0..m {
                    let (xa, xb) = (a + j as f64 * h, a + (j + 1) as f64 * h);
                    for (x, df) in f.cell_gauss(i, xa, xb) {
                        if df != 0.0 {
                            nodes.push(HsNode { x, y, weight: Complex64::new(df * dy_weight, 0.0) });
                        }
                    }
                }
            }
        };
        for k in 0..ns {
            let y = libm::exp(s_lo + (k as f64 + 0.5) * ds);
            let g = cutoff_profile(y / w);
            if g != 0.0 {
                level(y, g * y * ds, &mut nodes);
            }
        }
        level(y_s, y_s, &mut nodes);
    }

    // f (∂_x + i∂_y)Ξ; on supp f only the y-derivative survives
    let nyc = libm::ceil(EDGE_Y_CELLS * r) as usize;
    let hy = w / nyc as f64;
    let dx_target = w / (EDGE_X_CELLS * r);
    for (i, (a, b, c)) in f.intervals().enumerate() {
        if b <= lo || a >= hi || c.iter().all(|&x| x == 0.0) {
            continue;
        }
        let m = libm::ceil((b - a) / dx_target).max(1.0) as usize;
        let h = (b - a) / m as f64;
        for j in 0..m {
            let (xa, xb) = (a + j as f64 * h, a + (j + 1) as f64 * h);
            let (mass, _) = f.cell_moments(i, xa, xb);
            if mass == 0.0 {
                continue;
            }
            for k in 0..nyc {
                let y = w + (k as f64 + 0.5) * hy;
                let dg = cutoff_profile_derivative(y / w) / w;
                nodes.push(HsNode { x: 0.5 * (xa + xb), y, weight: Complex64::new(0.0, mass * dg * hy) });
            }
        }
    }

    Ok(HsQuadrature {
        nodes,
        cutoff,
        y_min,
        resolution,
        jumps: jumps.iter().map(|j| j.0).collect(),
        total_variation: f.total_variation(),
        l1_norm: f.l1_norm(),
    })
}

/// `(1/2π) Σ_j w_j χ_a R_{x_j+iy_j}(H) χ_b`.
///
/// Refuses when a jump of `f` lies within `gap_tol` of an eigenvalue.
pub fn apply_function_hs(h: &Hamiltonian, quad: &HsQuadrature, a: &[usize], b: &[usize], gap_tol: f64) -> Result<LocalBlock> {
    let n = h.dim();
    if let Some(&bad) = a.iter().chain(b).find(|&&i| i >= n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad + 1 });
    }
    if !quad.jumps.is_empty() {
        let values = symmetric_eigenvalues(h.matrix())?;
        for &x in &quad.jumps {
            let d = values.iter().map(|v| (v - x).abs()).fold(f64::INFINITY, f64::min);
            if d < gap_tol {
                return Err(Error::GapViolation { jump: x, distance: d, gap_tol });
            }
        }
    }
    let mut acc = Mat::zeros(a.len(), b.len());
    for node in &quad.nodes {
        let lu = BandedLu::factor_shifted(h.matrix(), h.bandwidth(), Complex64::new(node.x, node.y))?;
        for (j, &col) in b.iter().enumerate() {
            let x = lu.inverse_column(col);
            for (i, &row) in a.iter().enumerate() {
                // w R + conj(w) conj(R) = 2 Re(w R)
                acc[(i, j)] += (node.weight * x[row]).re;
            }
        }
    }
    Ok(LocalBlock::from_real(a, b, &acc.scale(1.0 / core::f64::consts::PI)))
}
