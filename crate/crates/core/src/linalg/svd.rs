//! Singular values by one-sided (Hestenes) Jacobi rotations. Accurate for
//! small singular values, which the Schatten quasi-norms with `p < 1` weigh
//! heavily.

use alloc::vec::Vec;

use super::{CMat, Mat};

const MAX_SWEEPS: usize = 80;

/// Singular values in non-increasing order.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    // Work on columns of the taller orientation, stored column-major.
    let tall = if a.rows() >= a.cols() { a.clone() } else { a.transpose() };
    let (m, n) = (tall.rows(), tall.cols());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| tall.column(j)).collect();

    let tol = f64::EPSILON * (m as f64);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (alpha, beta, gamma) = {
                    let (ci, cj) = (&cols[i], &cols[j]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for k in 0..m {
                        alpha += ci[k] * ci[k];
                        beta += cj[k] * cj[k];
                        gamma += ci[k] * cj[k];
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= tol * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                let (left, right) = cols.split_at_mut(j);
                let (ci, cj) = (&mut left[i], &mut right[0]);
                for k in 0..m {
                    let x = ci[k];
                    let y = cj[k];
                    ci[k] = c * x - s * y;
                    cj[k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| libm::sqrt(c.iter().map(|x| x * x).sum())).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest singular value of a complex matrix.
pub fn complex_operator_norm(a: &CMat) -> f64 {
    if a.rows() == 0 || a.cols() == 0 {
        return 0.0;
    }
    if a.rows() == 1 && a.cols() == 1 {
        return a[(0, 0)].norm();
    }
    singular_values(&a.real_embedding()).first().copied().unwrap_or(0.0)
}
