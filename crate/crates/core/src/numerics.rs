//! Dense linear algebra kernel: vectors, packed symmetric matrices and
//! Cholesky factorization.
//!
//! Matrices here are small (a few hundred rows at most) and dense, so
//! everything is stored contiguously and factored in place.

use std::ops::{Deref, Index};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Real vector with finite entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector<T>(Vec<T>);

impl<T: Real> Vector<T> {
    pub fn new(entries: Vec<T>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite(i));
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![T::zero(); n])
    }

    pub fn from_f64(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        check_dim(self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(&a, &b)| a * b).sum())
    }

    pub fn norm_inf(&self) -> T {
        self.0.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn norm2(&self) -> T {
        self.0.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: T, other: &Self) -> Result<Self> {
        check_dim(self.len(), other.len())?;
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(&a, &b)| a + alpha * b).collect(),
        ))
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self(self.0.iter().map(|&v| v * alpha).collect())
    }

    /// Component-wise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        check_dim(self.len(), other.len())?;
        Ok(Self(self.0.iter().zip(&other.0).map(|(&a, &b)| a * b).collect()))
    }
}

impl<T> Deref for Vector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Symmetric matrix stored as its packed lower triangle (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    lower: Vec<T>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, lower: vec![T::zero(); dim * (dim + 1) / 2] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); dim])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from a dense row-major square matrix, reading only its lower triangle.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            check_dim(dim, row.len())?;
            for j in 0..=i {
                if !row[j].is_finite() {
                    return Err(NumericsError::NonFinite(i * dim + j));
                }
                m.set(i, j, row[j]);
            }
        }
        Ok(m)
    }

    pub fn from_f64_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<T>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| T::lit(v)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.lower[packed(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.lower[packed(i, j)] = v;
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self { dim: self.dim, lower: self.lower.iter().map(|&v| v * alpha).collect() }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        Ok(Self {
            dim: self.dim,
            lower: self
                .lower
                .iter()
                .zip(&other.lower)
                .map(|(&a, &b)| alpha * a + beta * b)
                .collect(),
        })
    }

    /// `diag(d) · self · diag(d)`.
    pub fn congruence_diag(&self, d: &[T]) -> Result<Self> {
        check_dim(self.dim, d.len())?;
        let mut out = self.clone();
        for i in 0..self.dim {
            for j in 0..=i {
                out.set(i, j, d[i] * self.get(i, j) * d[j]);
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &Vector<T>) -> Result<Vector<T>> {
        check_dim(self.dim, x.len())?;
        let out = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum())
            .collect();
        Ok(Vector(out))
    }

    pub fn max_abs_diagonal(&self) -> T {
        (0..self.dim).fold(T::zero(), |m, i| m.max(self.get(i, i).abs()))
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ` equal to the source matrix.
///
/// Holding one is the positive-definiteness certificate for its source.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor<T> {
    lower: SymMatrix<T>,
}

impl<T: Real> CholeskyFactor<T> {
    pub fn dim(&self) -> usize {
        self.lower.dim
    }

    /// Entry `(i, j)` of the lower factor (zero above the diagonal).
    pub fn lower(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.lower.get(i, j)
        }
    }

    /// Solves `L·Lᵀ·y = rhs` by forward then back substitution.
    pub fn solve(&self, rhs: &Vector<T>) -> Result<Vector<T>> {
        check_dim(self.dim(), rhs.len())?;
        let n = self.dim();
        let mut y = rhs.0.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.lower.get(i, k) * y[k];
            }
            y[i] = s / self.lower.get(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - self.lower.get(k, i) * y[k];
            }
            y[i] = s / self.lower.get(i, i);
        }
        Ok(Vector(y))
    }

    /// `diag(A⁻¹)` for the factored matrix `A`, one unit-vector solve per column.
    pub fn inverse_diagonal(&self) -> Vector<T> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n);
        let mut e = Vector::zeros(n);
        for i in 0..n {
            e.0[i] = T::one();
            let col = self.solve(&e).expect("dimension checked");
            out.push(col[i]);
            e.0[i] = T::zero();
        }
        Vector(out)
    }

    /// Reconstructs `L·Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix<T> {
        let n = self.dim();
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let s = (0..=j).map(|k| self.lower.get(i, k) * self.lower.get(j, k)).sum();
                m.set(i, j, s);
            }
        }
        m
    }
}

/// Factors a symmetric matrix, failing when a pivot drops below
/// `1e-12 · max|diag|` (the matrix is then not numerically positive definite).
pub fn cholesky<T: Real>(m: &SymMatrix<T>) -> Result<CholeskyFactor<T>> {
    let n = m.dim;
    let tol = T::rel_tol(1e-12) * m.max_abs_diagonal();
    let mut l = SymMatrix::zeros(n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            let v = l.get(j, k);
            d = d - v * v;
        }
        if !(d > tol) || d <= T::zero() {
            return Err(NumericsError::NotPositiveDefinite { row: j, pivot: d.as_f64() });
        }
        let ljj = d.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s = s - l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(CholeskyFactor { lower: l })
}

pub fn solve<T: Real>(f: &CholeskyFactor<T>, rhs: &Vector<T>) -> Result<Vector<T>> {
    f.solve(rhs)
}

pub fn inverse_diagonal<T: Real>(f: &CholeskyFactor<T>) -> Vector<T> {
    f.inverse_diagonal()
}

/// `xᵀ·m·x` as the plain double sum.
pub fn quad_form<T: Real>(m: &SymMatrix<T>, x: &[T]) -> Result<T> {
    check_dim(m.dim, x.len())?;
    let mut s = T::zero();
    for i in 0..m.dim {
        for j in 0..m.dim {
            s = s + x[i] * m.get(i, j) * x[j];
        }
    }
    Ok(s)
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(NumericsError::DimensionMismatch { expected, found })
    }
}
