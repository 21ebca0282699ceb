//! Minimal dense complex-matrix support: only the operations the modem,
//! channel, and detection paths actually need. Row-major storage.

use num_complex::Complex64;

use crate::error::{AfdmError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(AfdmError::LengthMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<Complex64>()
            })
            .collect())
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(AfdmError::LengthMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let orow = other.row(k);
                let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn conj_transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entrywise absolute difference; matrices must be same-shaped.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix.
pub struct Cholesky {
    l: Matrix,
}

/// Factor `g = L L^H`. Only the lower triangle of `g` is read.
pub fn cholesky(mut g: Matrix) -> Result<Cholesky> {
    assert_eq!(g.rows, g.cols, "cholesky needs a square matrix");
    let n = g.rows;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = g[(i, j)];
            let (ri, rj) = (i * n, j * n);
            for k in 0..j {
                let lik = g.data[ri + k];
                let ljk = g.data[rj + k];
                sum -= lik * ljk.conj();
            }
            if i == j {
                let pivot = sum.re;
                if pivot <= 0.0 || !pivot.is_finite() {
                    return Err(AfdmError::NotPositiveDefinite { index: i, pivot });
                }
                g[(i, i)] = Complex64::new(pivot.sqrt(), 0.0);
            } else {
                g[(i, j)] = sum / g[(j, j)].re;
            }
        }
        // Zero the strict upper triangle so the factor is self-describing.
        for j in i + 1..n {
            g[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok(Cholesky { l: g })
}

impl Cholesky {
    /// Solve `L L^H x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.l.rows;
        if b.len() != n {
            return Err(AfdmError::LengthMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut x = b.to_vec();
        for i in 0..n {
            let mut sum = x[i];
            let row = self.l.row(i);
            for k in 0..i {
                sum -= row[k] * x[k];
            }
            x[i] = sum / row[i].re;
        }
        for i in (0..n).rev() {
            let mut sum = x[i];
            for (k, &xk) in x.iter().enumerate().skip(i + 1) {
                sum -= self.l[(k, i)].conj() * xk;
            }
            x[i] = sum / self.l[(i, i)].re;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cholesky_solves_hermitian_system() {
        // G = A^H A + I for a fixed small A: Hermitian positive definite.
        let a = Matrix::from_fn(3, 3, |r, cc| {
            c((r * 3 + cc) as f64 * 0.17, (r as f64) - cc as f64 * 0.4)
        });
        let mut g = a.conj_transpose().mul(&a).unwrap();
        for i in 0..3 {
            g[(i, i)] += c(1.0, 0.0);
        }
        let b = vec![c(1.0, -2.0), c(0.5, 0.25), c(-3.0, 1.0)];
        let x = cholesky(g.clone()).unwrap().solve(&b).unwrap();
        let r = g.mul_vec(&x).unwrap();
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).norm() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut g = Matrix::identity(2);
        g[(1, 1)] = c(-1.0, 0.0);
        assert!(matches!(
            cholesky(g),
            Err(AfdmError::NotPositiveDefinite { index: 1, .. })
        ));
    }

    #[test]
    fn mul_vec_checks_length() {
        let m = Matrix::identity(3);
        assert!(m.mul_vec(&[c(1.0, 0.0)]).is_err());
    }
}
