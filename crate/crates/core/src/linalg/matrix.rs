use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Index;

use crate::error::{Error, Result};

/// Largest Kronecker product (per side) that [`Matrix::kron`] will materialize.
pub const KRON_CAP: usize = 4096;

/// Dense double-precision matrix in row-major order.
///
/// Every constructed matrix has positive dimensions and finite entries.
/// Operations that could overflow return [`Error::NonFinite`] instead of a
/// poisoned result.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for v in self.row(i) {
                write!(f, "{v:>12.6e} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows, cols });
    }
    Ok(())
}

fn all_finite(data: &[f64]) -> bool {
    data.iter().all(|v| v.is_finite())
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        if !all_finite(&data) {
            return Err(Error::NonFinite { op: "new" });
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for results whose finiteness has been established
    /// by construction (copies, permutations, rotations of finite data).
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert!(rows > 0 && cols > 0);
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    /// Like `from_raw` but verifies finiteness, for arithmetic results.
    pub(crate) fn checked(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        op: &'static str,
    ) -> Result<Self> {
        if !all_finite(&data) {
            return Err(Error::NonFinite { op });
        }
        Ok(Self::from_raw(rows, cols, data))
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    /// # Panics
    /// If `n` is zero.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        check_dims(rows, cols)?;
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        check_dims(r, c)?;
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            let row = row.as_ref();
            if row.len() != c {
                return Err(Error::LengthMismatch {
                    rows: r,
                    cols: c,
                    len: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(rows, cols)?;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn diag(values: &[f64]) -> Result<Self> {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Column vector holding `values`.
    pub fn column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self::from_raw(self.cols, self.rows, data)
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(self.mismatch("matmul", rhs));
        }
        let (n, k, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[p * m..(p + 1) * m];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Self::checked(n, m, out, "matmul")
    }

    /// `selfᵀ · rhs` without forming the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(self.mismatch("t_matmul", rhs));
        }
        let (k, n, m) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; n * m];
        for p in 0..k {
            let lhs_row = self.row(p);
            let rhs_row = rhs.row(p);
            for (i, &a) in lhs_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out[i * m..(i + 1) * m].iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Self::checked(n, m, out, "t_matmul")
    }

    /// `self · rhsᵀ` without forming the transpose.
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(self.mismatch("matmul_t", rhs));
        }
        let (n, m) = (self.rows, rhs.rows);
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let a = self.row(i);
            for j in 0..m {
                out.push(dot(a, rhs.row(j)));
            }
        }
        Self::checked(n, m, out, "matmul_t")
    }

    pub fn frobenius_norm(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        // Scaled accumulation keeps huge entries from overflowing the sum.
        let sum: f64 = self.data.iter().map(|v| (v / scale) * (v / scale)).sum();
        scale * libm::sqrt(sum)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Column-stacking vectorization: the columns of `self` stacked top to
    /// bottom, as an `(rows*cols) x 1` column.
    pub fn vec(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self::from_raw(self.data.len(), 1, data)
    }

    /// Inverse of [`Matrix::vec`].
    pub fn unvec(v: &Matrix, rows: usize, cols: usize) -> Result<Self> {
        check_dims(rows, cols)?;
        if v.data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                rows,
                cols,
                len: v.data.len(),
            });
        }
        let mut out = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                out.set(i, j, v.data[j * rows + i]);
            }
        }
        Ok(out)
    }

    /// Kronecker product `self ⊗ rhs`, refused beyond [`KRON_CAP`].
    pub fn kron(&self, rhs: &Matrix) -> Result<Self> {
        self.kron_with_cap(rhs, KRON_CAP)
    }

    pub fn kron_with_cap(&self, rhs: &Matrix, cap: usize) -> Result<Self> {
        let rows = self.rows.saturating_mul(rhs.rows);
        let cols = self.cols.saturating_mul(rhs.cols);
        if rows > cap || cols > cap {
            return Err(Error::KroneckerCap { rows, cols, cap });
        }
        let mut out = vec![0.0; rows * cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for p in 0..rhs.rows {
                    let base = (i * rhs.rows + p) * cols + j * rhs.cols;
                    for (o, b) in out[base..base + rhs.cols].iter_mut().zip(rhs.row(p)) {
                        *o = a * b;
                    }
                }
            }
        }
        Self::checked(rows, cols, out, "kron")
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Self> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Self> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    /// `self - eta * rhs`.
    pub fn sub_scaled(&self, rhs: &Matrix, eta: f64) -> Result<Self> {
        self.zip_with(rhs, "sub_scaled", |a, b| a - eta * b)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::checked(
            self.rows,
            self.cols,
            self.data.iter().map(|v| v * c).collect(),
            "scale",
        )
    }

    /// Frobenius inner product `Σ_ij self_ij · rhs_ij`.
    pub fn inner(&self, rhs: &Matrix) -> Result<f64> {
        if self.shape() != rhs.shape() {
            return Err(self.mismatch("inner", rhs));
        }
        Ok(dot(&self.data, &rhs.data))
    }

    pub fn trace(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                op: "trace",
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok((0..self.rows).map(|i| self.get(i, i)).sum())
    }

    /// `(S + Sᵀ)/2`.
    pub fn symmetrize(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                op: "symmetrize",
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut out = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        Ok(out)
    }

    /// Largest `|S_ij − S_ji|`; zero for symmetric input.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows.min(self.cols) {
            for j in (i + 1)..self.rows.min(self.cols) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `self + c·I`.
    pub fn shift_diagonal(&self, c: f64) -> Result<Self> {
        let mut out = self.clone();
        for i in 0..self.rows.min(self.cols) {
            let v = out.get(i, i) + c;
            out.set(i, i, v);
        }
        Self::checked(out.rows, out.cols, out.data, "shift_diagonal")
    }

    /// Applies `f` entrywise.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::checked(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f(v)).collect(),
            "map",
        )
    }

    fn zip_with(
        &self,
        rhs: &Matrix,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(self.mismatch(op, rhs));
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::checked(self.rows, self.cols, data, op)
    }

    pub(crate) fn mismatch(&self, op: &'static str, rhs: &Matrix) -> Error {
        Error::DimensionMismatch {
            op,
            left_rows: self.rows,
            left_cols: self.cols,
            right_rows: rhs.rows,
            right_cols: rhs.cols,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
