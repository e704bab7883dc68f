//! Dense complex linear algebra.
//!
//! Everything here is deliberately small: a row-major matrix with a column
//! normalization flag, the Richardson map used by every thresholding solver,
//! and a Tikhonov-regularized least squares solve through the normal
//! equations.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexVector = Vec<Complex64>;

/// Columns whose norm falls below this are treated as zero.
const ZERO_COLUMN_NORM: f64 = 1e-300;

/// Condition estimate above which an unregularized normal-equation system is
/// reported as singular.
const SINGULAR_CONDITION: f64 = 1e14;

/// Dense `rows x cols` complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    normalized: bool,
}

impl ComplexMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            normalized: false,
        })
    }

    /// Builds a matrix from a closure evaluated at every `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_row_major(rows, cols, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::from_fn(n, n, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })?;
        m.normalized = true;
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_row_major(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, col: usize) -> ComplexVector {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            for (s, v) in sq.iter_mut().zip(row) {
                *s += v.norm_sqr();
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// Copy restricted to the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: self.cols,
            });
        }
        let mut out = Self::from_fn(self.rows, cols.len(), |i, j| self.get(i, cols[j]))?;
        out.normalized = self.normalized;
        Ok(out)
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `A x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<ComplexVector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a matrix with {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, v)| a * v).sum())
            .collect())
    }

    /// `A x` touching only the nonzero entries of `x`.
    pub fn apply_sparse(&self, x: &[Complex64]) -> Result<ComplexVector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a matrix with {} columns",
                x.len(),
                self.cols
            )));
        }
        let nz: Vec<(usize, Complex64)> = x
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(|(j, &v)| (j, v))
            .collect();
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| nz.iter().map(|&(j, v)| row[j] * v).sum())
            .collect())
    }

    /// `A^* y`.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Result<ComplexVector> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for a matrix with {} rows",
                y.len(),
                self.rows
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * yi;
            }
        }
        Ok(out)
    }

    /// Hermitian Gram matrix `A^* A` as a row-major `cols x cols` buffer.
    pub fn gram(&self) -> Vec<Complex64> {
        let n = self.cols;
        let mut g = vec![Complex64::new(0.0, 0.0); n * n];
        for row in self.data.chunks_exact(n) {
            for i in 0..n {
                let ai = row[i].conj();
                if ai == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let gi = &mut g[i * n..(i + 1) * n];
                for j in i..n {
                    gi[j] += ai * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g[i * n + j] = g[j * n + i].conj();
            }
        }
        g
    }
}

/// Rescales every column to unit Euclidean norm and sets the normalized flag.
pub fn normalize_columns(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let norms = a.column_norms();
    if let Some(j) = norms.iter().position(|&n| n < ZERO_COLUMN_NORM) {
        return Err(Error::ZeroColumn(j));
    }
    let inv: Vec<f64> = norms.iter().map(|n| 1.0 / n).collect();
    let data = a
        .data
        .chunks_exact(a.cols)
        .flat_map(|row| row.iter().zip(&inv).map(|(v, s)| v * s))
        .collect();
    Ok(ComplexMatrix {
        rows: a.rows,
        cols: a.cols,
        data,
        normalized: true,
    })
}

/// The Richardson map `x + A^*(b - A x)`.
pub fn residual_map(a: &ComplexMatrix, x: &[Complex64], b: &[Complex64]) -> Result<ComplexVector> {
    if b.len() != a.rows {
        return Err(Error::DimensionMismatch(format!(
            "data of length {} for a matrix with {} rows",
            b.len(),
            a.rows
        )));
    }
    let ax = a.apply(x)?;
    let r: ComplexVector = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let back = a.apply_adjoint(&r)?;
    Ok(x.iter().zip(back).map(|(xi, gi)| xi + gi).collect())
}

/// Regularization used when the caller does not supply one: `1e-3 ||A||_F^2 / N`.
pub fn default_lambda(a: &ComplexMatrix) -> f64 {
    1e-3 * a.frobenius_norm_sqr() / a.cols as f64
}

/// Minimizer of `||A x - b||^2 + lambda ||x||^2` through the normal equations
/// `(A^*A + lambda I) x = A^*b`, solved by a complex Cholesky factorization.
pub fn tikhonov_least_squares(a: &ComplexMatrix, b: &[Complex64], lambda: f64) -> Result<ComplexVector> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let rhs = a.apply_adjoint(b)?;
    let n = a.cols;
    let mut g = a.gram();
    for i in 0..n {
        g[i * n + i] += lambda;
    }
    let factor = cholesky_in_place(&mut g, n)?;
    if lambda == 0.0 && factor.condition_estimate > SINGULAR_CONDITION {
        return Err(Error::SingularSystem(factor.condition_estimate));
    }
    Ok(cholesky_solve(&g, n, &rhs))
}

struct CholeskyInfo {
    condition_estimate: f64,
}

/// Overwrites the lower triangle of a Hermitian positive definite matrix with
/// its Cholesky factor `L` (so that `G = L L^*`).
fn cholesky_in_place(g: &mut [Complex64], n: usize) -> Result<CholeskyInfo> {
    let scale = (0..n).map(|i| g[i * n + i].re).fold(0.0_f64, f64::max);
    let mut min_pivot = f64::INFINITY;
    let mut max_pivot = 0.0_f64;
    for j in 0..n {
        let mut d = g[j * n + j].re;
        for k in 0..j {
            d -= g[j * n + k].norm_sqr();
        }
        if !(d > scale * f64::EPSILON * n as f64) {
            return Err(Error::SingularSystem(f64::INFINITY));
        }
        let ljj = d.sqrt();
        min_pivot = min_pivot.min(ljj);
        max_pivot = max_pivot.max(ljj);
        g[j * n + j] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = g[i * n + j];
            for k in 0..j {
                s -= g[i * n + k] * g[j * n + k].conj();
            }
            g[i * n + j] = s / ljj;
        }
    }
    let ratio = max_pivot / min_pivot;
    Ok(CholeskyInfo {
        condition_estimate: ratio * ratio,
    })
}

fn cholesky_solve(l: &[Complex64], n: usize, rhs: &[Complex64]) -> ComplexVector {
    let mut y = rhs.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i].re;
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i].conj() * y[k];
        }
        y[i] = s / l[i * n + i].re;
    }
    y
}

pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn norm1(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

pub fn norm_inf(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn sub(a: &[Complex64], b: &[Complex64]) -> ComplexVector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `<x, y> = sum conj(x_i) y_i`.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}
