//! Minimal dense matrix support for the small (p x p) systems the engine
//! solves: Cholesky factorization, SPD log-determinants and inverses.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math;
use crate::Result;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Mat { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if math::abs(self.get(i, j) - self.get(j, i)) > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Restriction to the given row/column index set (square matrices).
    pub fn principal_submatrix(&self, idx: &[usize]) -> Mat {
        let d = idx.len();
        let mut out = Mat::zeros(d, d);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.add_to(i, j, aik * other.get(k, j));
                }
            }
        }
        out
    }

    /// Lower-triangular Cholesky factor, or `None` if the matrix is not
    /// numerically positive-definite.
    pub fn cholesky(&self) -> Option<Mat> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return None;
                    }
                    l.set(i, i, math::sqrt(sum));
                } else {
                    l.set(i, j, sum / l.get(j, j));
                }
            }
        }
        Some(l)
    }

    /// Log-determinant of an SPD matrix via Cholesky.
    pub fn spd_log_det(&self, context: &str) -> Result<f64> {
        let l = self.cholesky().ok_or_else(|| Error::NotPositiveDefinite {
            context: String::from(context),
        })?;
        let mut acc = 0.0;
        for i in 0..self.rows {
            acc += math::ln(l.get(i, i));
        }
        Ok(2.0 * acc)
    }

    /// Inverse of an SPD matrix via Cholesky, together with the
    /// log-determinant and a cheap condition estimate (squared ratio of the
    /// extreme Cholesky diagonal entries).
    pub fn spd_inverse(&self, context: &str) -> Result<SpdFactorization> {
        let n = self.rows;
        let l = self.cholesky().ok_or_else(|| Error::NotPositiveDefinite {
            context: String::from(context),
        })?;
        let mut log_det = 0.0;
        let mut dmax = f64::NEG_INFINITY;
        let mut dmin = f64::INFINITY;
        for i in 0..n {
            let d = l.get(i, i);
            log_det += math::ln(d);
            dmax = dmax.max(d);
            dmin = dmin.min(d);
        }
        log_det *= 2.0;
        let condition = (dmax / dmin) * (dmax / dmin);

        // inv = L^-T L^-1, built column by column from L y = e_j.
        let mut inv = Mat::zeros(n, n);
        let mut y = vec![0.0; n];
        for j in 0..n {
            for i in 0..n {
                let mut sum = if i == j { 1.0 } else { 0.0 };
                for k in 0..i {
                    sum -= l.get(i, k) * y[k];
                }
                y[i] = sum / l.get(i, i);
            }
            // back substitution: L^T x = y
            for i in (0..n).rev() {
                let mut sum = y[i];
                for k in (i + 1)..n {
                    sum -= l.get(k, i) * inv.get(k, j);
                }
                inv.set(i, j, sum / l.get(i, i));
            }
        }
        // enforce exact symmetry of the result
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (inv.get(i, j) + inv.get(j, i));
                inv.set(i, j, v);
                inv.set(j, i, v);
            }
        }
        Ok(SpdFactorization { inverse: inv, log_det, condition })
    }

    /// Solve `A x = b` for SPD `A`.
    pub fn spd_solve(&self, b: &[f64], context: &str) -> Result<Vec<f64>> {
        let n = self.rows;
        assert_eq!(b.len(), n);
        let l = self.cholesky().ok_or_else(|| Error::NotPositiveDefinite {
            context: String::from(context),
        })?;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= l.get(i, k) * y[k];
            }
            y[i] = sum / l.get(i, i);
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l.get(k, i) * x[k];
            }
            x[i] = sum / l.get(i, i);
        }
        Ok(x)
    }

    /// Check symmetry and report the first offending pair on failure.
    pub fn require_symmetric(&self, tol: f64, context: &str) -> Result<()> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                context: format!("{context}: {}x{} is not square", self.rows, self.cols),
            });
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if math::abs(self.get(i, j) - self.get(j, i)) > tol {
                    return Err(Error::InvalidParameter {
                        context: format!("{context}: asymmetric at ({i}, {j})"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Result of an SPD factorization: inverse, log-determinant and a condition
/// estimate.
pub struct SpdFactorization {
    pub inverse: Mat,
    pub log_det: f64,
    pub condition: f64,
}
