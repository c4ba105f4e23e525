//! Sample statistics, confidence intervals and exponential-decay fits.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Inverse of [`normal_cdf`] by safeguarded Newton iteration.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must be in (0, 1)");
    let (mut lo, mut hi) = (-40.0, 40.0);
    let mut x: f64 = 0.0;
    for _ in 0..200 {
        let f = normal_cdf(x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let pdf = libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI);
        let mut next = x - f / pdf;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

/// Two-sided critical value `z` with `P(|Z| ≤ z) = level`.
pub fn critical_value(level: f64) -> f64 {
    normal_quantile(0.5 + 0.5 * level)
}

/// Monte Carlo mean with normal-approximation confidence interval.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimatorResult {
    pub statistic: String,
    pub mean: f64,
    pub stderr: f64,
    pub n_realizations: usize,
    pub confidence_level: f64,
    pub confidence_interval: (f64, f64),
    pub seed: u64,
}

impl EstimatorResult {
    /// Summarizes samples taken in realization order. The standard error
    /// is the sample standard deviation over `√n`, and zero for `n = 1`.
    pub fn from_samples(statistic: &str, samples: &[f64], seed: u64, level: f64) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite { statistic: statistic.into(), value: *bad });
        }
        let mean = pairwise_sum(samples) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
            libm::sqrt(pairwise_sum(&dev) / (n - 1) as f64 / n as f64)
        } else {
            0.0
        };
        let z = critical_value(level);
        Ok(EstimatorResult {
            statistic: statistic.into(),
            mean,
            stderr,
            n_realizations: n,
            confidence_level: level,
            confidence_interval: (mean - z * stderr, mean + z * stderr),
            seed,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.confidence_interval.0 <= x && x <= self.confidence_interval.1
    }
}

/// Binomial proportion with a Wilson score interval.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Proportion {
    pub successes: usize,
    pub n: usize,
    pub estimate: f64,
    pub interval: (f64, f64),
}

impl Proportion {
    pub fn wilson(successes: usize, n: usize, level: f64) -> Self {
        assert!(successes <= n && n > 0);
        let z = critical_value(level);
        let nf = n as f64;
        let p = successes as f64 / nf;
        let z2 = z * z;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = z * libm::sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)) / denom;
        // the bounds are exactly 0 and 1 at the extremes; do not let rounding move them
        let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
        let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
        Proportion { successes, n, estimate: p, interval: (lo, hi) }
    }

    pub fn strictly_inside_unit(&self) -> bool {
        self.interval.0 > 0.0 && self.interval.1 < 1.0
    }
}

/// Normal-approximation interval for `p₁ − p₂` from paired indicators
/// (each realization contributes one `(a, b)` pair).
pub fn paired_difference_interval(pairs: &[(bool, bool)], level: f64) -> (f64, (f64, f64)) {
    let n = pairs.len() as f64;
    let d: Vec<f64> = pairs.iter().map(|&(a, b)| a as u8 as f64 - b as u8 as f64).collect();
    let mean = pairwise_sum(&d) / n;
    let var = if pairs.len() > 1 {
        let dev: Vec<f64> = d.iter().map(|x| (x - mean) * (x - mean)).collect();
        pairwise_sum(&dev) / (n - 1.0)
    } else {
        0.0
    };
    let half = critical_value(level) * libm::sqrt(var / n);
    (mean, (mean - half, mean + half))
}

/// One row of a scan table.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScanPoint {
    pub abscissa: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    /// Mean below three standard errors, or outside the fit window.
    pub floor_limited: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpFit {
    /// Fitted `log C` in `mean ≈ C e^{−μx}`.
    pub log_c: f64,
    pub mu: f64,
    pub mu_stderr: f64,
    pub r_squared: f64,
    /// First and last abscissa used.
    pub window: (f64, f64),
    pub points_used: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FitStatus {
    Fitted,
    /// Every ordinate is exactly zero.
    IdenticallyZero,
    /// Fewer than three points above the noise floor.
    TooFewPoints,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    pub points: Vec<ScanPoint>,
    pub status: FitStatus,
    pub fit: Option<ExpFit>,
    /// Set when no fit succeeded, `R² < 0.5`, or `μ ≤ 0`.
    pub no_fmb_evidence: bool,
}

impl DecayFit {
    pub fn mu(&self) -> Option<f64> {
        self.fit.map(|f| f.mu)
    }

    pub fn r_squared(&self) -> Option<f64> {
        self.fit.map(|f| f.r_squared)
    }

    /// Whether the fit shows decay with at least the given quality.
    pub fn decays(&self, min_r_squared: f64) -> bool {
        self.fit.is_some_and(|f| f.mu > 0.0 && f.r_squared >= min_r_squared)
    }
}

/// Fits `log mean = log C − μ x` by weighted least squares.
///
/// Points are visited in order of increasing abscissa. The window stops
/// at the first point with `mean < 3·stderr` (or `mean ≤ 0`); that point
/// and all later ones are flagged and left out. Weights are the inverse
/// variances `(mean/stderr)²` of the log-means, or uniform if any used
/// point has zero standard error.
pub fn fit_exponential_decay(mut points: Vec<ScanPoint>) -> DecayFit {
    points.sort_by(|a, b| a.abscissa.total_cmp(&b.abscissa));
    if points.iter().all(|p| p.mean == 0.0) {
        for p in &mut points {
            p.floor_limited = true;
        }
        return DecayFit { points, status: FitStatus::IdenticallyZero, fit: None, no_fmb_evidence: true };
    }
    let mut end = points.len();
    for (i, p) in points.iter().enumerate() {
        if !(p.mean > 0.0 && p.mean >= 3.0 * p.stderr) {
            end = i;
            break;
        }
    }
    for (i, p) in points.iter_mut().enumerate() {
        p.floor_limited = i >= end;
    }
    if end < 3 {
        return DecayFit { points, status: FitStatus::TooFewPoints, fit: None, no_fmb_evidence: true };
    }
    let used = &points[..end];
    let xs: Vec<f64> = used.iter().map(|p| p.abscissa).collect();
    let ys: Vec<f64> = used.iter().map(|p| libm::log(p.mean)).collect();
    let weights: Vec<f64> = if used.iter().any(|p| p.stderr == 0.0) {
        alloc::vec![1.0; end]
    } else {
        used.iter().map(|p| (p.mean / p.stderr) * (p.mean / p.stderr)).collect()
    };
    let line = weighted_line(&xs, &ys, &weights);
    let fit = ExpFit {
        log_c: line.intercept,
        mu: -line.slope,
        mu_stderr: line.slope_stderr,
        r_squared: line.r_squared,
        window: (xs[0], xs[end - 1]),
        points_used: end,
    };
    let no_fmb_evidence = !(fit.r_squared >= 0.5 && fit.mu > 0.0);
    DecayFit { points, status: FitStatus::Fitted, fit: Some(fit), no_fmb_evidence }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub intercept: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

/// Weighted least-squares line `y ≈ intercept + slope·x`.
pub fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> Line {
    let m = xs.len();
    assert!(m >= 2 && ys.len() == m && ws.len() == m);
    let wsum = pairwise_sum(ws);
    let xbar = pairwise_sum(&zip_map(xs, ws, |x, w| w * x)) / wsum;
    let ybar = pairwise_sum(&zip_map(ys, ws, |y, w| w * y)) / wsum;
    let sxx = pairwise_sum(&zip_map(xs, ws, |x, w| w * (x - xbar) * (x - xbar)));
    let sxy: f64 = pairwise_sum(&(0..m).map(|i| ws[i] * (xs[i] - xbar) * (ys[i] - ybar)).collect::<Vec<_>>());
    let syy = pairwise_sum(&zip_map(ys, ws, |y, w| w * (y - ybar) * (y - ybar)));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ybar - slope * xbar;
    let ss_res = pairwise_sum(
        &(0..m).map(|i| ws[i] * (ys[i] - intercept - slope * xs[i]) * (ys[i] - intercept - slope * xs[i])).collect::<Vec<_>>(),
    );
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let slope_stderr = if m > 2 && sxx > 0.0 { libm::sqrt(ss_res / (m - 2) as f64 / sxx) } else { 0.0 };
    Line { intercept, slope, slope_stderr, r_squared }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}
