//! Symmetric eigensolver: Householder tridiagonalization followed by the
//! implicit QL iteration (EISPACK `tred2`/`tql2`). Tridiagonal input skips
//! the reduction.

use alloc::vec;
use alloc::vec::Vec;

use super::Mat;
use crate::error::{Error, Result};

/// Eigenvalues in ascending order with eigenvectors as matrix columns.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

pub fn symmetric_eigen(a: &Mat) -> Result<SymmetricEigen> {
    let (values, vectors) = solve(a, true)?;
    Ok(SymmetricEigen { values, vectors: vectors.expect("vectors requested") })
}

pub fn symmetric_eigenvalues(a: &Mat) -> Result<Vec<f64>> {
    Ok(solve(a, false)?.0)
}

fn solve(a: &Mat, want_vectors: bool) -> Result<(Vec<f64>, Option<Mat>)> {
    assert!(a.is_square(), "eigensolver needs a square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(|| Mat::zeros(0, 0))));
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    // `vt` holds eigenvectors as rows so the QL rotations walk contiguous memory.
    let mut vt;
    if a.bandwidth() <= 1 {
        for i in 0..n {
            d[i] = a[(i, i)];
            if i > 0 {
                e[i] = a[(i, i - 1)];
            }
        }
        vt = Mat::identity(n);
    } else {
        let mut v = a.clone();
        tred2(&mut v, &mut d, &mut e);
        vt = v.transpose();
    }
    tql2(&mut d, &mut e, if want_vectors { Some(&mut vt) } else { None })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let vectors = want_vectors.then(|| {
        let mut v = Mat::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            let row = vt.row(k);
            // sign convention: first non-negligible component positive
            let pivot = row.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(1.0);
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for i in 0..n {
                v[(i, col)] = sign * row[i];
            }
        }
        v
    });
    Ok((values, vectors))
}

fn tred2(v: &mut Mat, d: &mut [f64], e: &mut [f64]) {
    let n = v.rows();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)` where `e[i]` couples `i − 1`
/// and `i`. Rotations are applied to the rows of `vt`.
fn tql2(d: &mut [f64], e: &mut [f64], mut vt: Option<&mut Mat>) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let max_sweeps = 60 * n.max(1);
    let mut sweeps = 0usize;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                sweeps += 1;
                if sweeps > max_sweeps {
                    return Err(Error::EigenConvergence { residual: e[l].abs() });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(vt) = vt.as_deref_mut() {
                        rotate_rows(vt, i, c, s);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_rows(vt: &mut Mat, i: usize, c: f64, s: f64) {
    let n = vt.cols();
    let data = vt.as_mut_slice();
    let (lo, hi) = data.split_at_mut((i + 1) * n);
    let row_i = &mut lo[i * n..];
    let row_next = &mut hi[..n];
    for (a, b) in row_i.iter_mut().zip(row_next.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}
