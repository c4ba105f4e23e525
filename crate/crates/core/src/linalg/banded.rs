//! Complex banded LU with partial pivoting, in the storage layout of
//! LAPACK `zgbtrf`: row `i` keeps columns `i − kl ..= i + ku + kl`, the
//! extra `kl` super-diagonals absorbing pivoting fill-in.

use alloc::vec;
use alloc::vec::Vec;

use super::{Complex64, Mat};
use crate::error::{Error, Result};

/// Factorization of `A − z·I` for a real banded `A` and complex shift `z`.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factors `a − shift·I`. `bandwidth` must bound `|i − j|` for every
    /// nonzero entry of `a`.
    pub fn factor_shifted(a: &Mat, bandwidth: usize, shift: Complex64) -> Result<Self> {
        assert!(a.is_square());
        let n = a.rows();
        let kl = bandwidth.min(n.saturating_sub(1));
        let ku = kl;
        let width = 2 * kl + ku + 1;
        let zero = Complex64::new(0.0, 0.0);
        let mut lu = BandedLu { n, kl, ku, width, band: vec![zero; n * width], pivots: vec![0; n] };
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                let mut v = Complex64::new(a[(i, j)], 0.0);
                if i == j {
                    v -= shift;
                }
                *lu.at_mut(i, j) = v;
            }
        }
        lu.factor()?;
        Ok(lu)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.band[self.slot(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        let s = self.slot(i, j);
        &mut self.band[s]
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.ku + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).norm();
            for i in k + 1..=last_row {
                let v = self.at(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularShift { index: k });
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.band.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            for i in k + 1..=last_row {
                let l = self.at(i, k) / pivot;
                *self.at_mut(i, k) = l;
                if l == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=last_col {
                    let u = self.at(k, j);
                    *self.at_mut(i, j) -= l * u;
                }
            }
        }
        Ok(())
    }

    /// Solves in place.
    pub fn solve(&self, rhs: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                rhs.swap(k, p);
            }
            let bk = rhs[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                rhs[i] -= self.at(i, k) * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for j in i + 1..=(i + self.ku + self.kl).min(n - 1) {
                s -= self.at(i, j) * rhs[j];
            }
            rhs[i] = s / self.at(i, i);
        }
    }

    /// Column `j` of `(A − z)⁻¹`.
    pub fn inverse_column(&self, j: usize) -> Vec<Complex64> {
        let mut e = vec![Complex64::new(0.0, 0.0); self.n];
        e[j] = Complex64::new(1.0, 0.0);
        self.solve(&mut e);
        e
    }
}
