use super::Mat;

/// `log|det A|` together with the sign of the determinant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDet {
    /// `−∞` when a pivot is exactly zero.
    pub log_abs: f64,
    /// `+1`, `−1`, or `0` for an exactly singular matrix.
    pub sign: f64,
}

/// Partial-pivoting LU, accumulated in log-space so that determinants far
/// below the floating-point range stay representable.
pub fn log_abs_det(a: &Mat) -> LogDet {
    assert!(a.is_square());
    let n = a.rows();
    let mut m = a.clone();
    let mut log_abs = 0.0;
    let mut sign = 1.0;
    for k in 0..n {
        let mut p = k;
        let mut best = m[(k, k)].abs();
        for i in k + 1..n {
            let v = m[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return LogDet { log_abs: f64::NEG_INFINITY, sign: 0.0 };
        }
        if p != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(p, j)];
                m[(p, j)] = tmp;
            }
            sign = -sign;
        }
        let pivot = m[(k, k)];
        if pivot < 0.0 {
            sign = -sign;
        }
        log_abs += libm::log(pivot.abs());
        for i in k + 1..n {
            let l = m[(i, k)] / pivot;
            if l == 0.0 {
                continue;
            }
            for j in k + 1..n {
                m[(i, j)] -= l * m[(k, j)];
            }
        }
    }
    LogDet { log_abs, sign }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_determinants() {
        let a = Mat::from_rows(&[&[0.0, 2.0], &[3.0, 1.0]]);
        let d = log_abs_det(&a);
        assert_eq!(d.sign, -1.0);
        assert!((libm::exp(d.log_abs) - 6.0).abs() < 1e-13);

        let singular = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(log_abs_det(&singular).sign, 0.0);
        assert_eq!(log_abs_det(&Mat::zeros(0, 0)).log_abs, 0.0);
    }

    #[test]
    fn no_underflow_for_tiny_products() {
        let a = Mat::from_diag(&[1e-200; 4]);
        let d = log_abs_det(&a);
        assert!((d.log_abs - 4.0 * libm::log(1e-200)).abs() < 1e-9);
    }
}
