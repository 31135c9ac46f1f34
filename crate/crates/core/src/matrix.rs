//! Row-major dense matrices and the exact reference matrix-vector product.

use crate::error::{check_len, Error, Result};
use crate::perm::Permutation;
use crate::scalar::{dot, Scalar};

/// Dense row-major matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix {
            n_rows,
            n_cols,
            data: vec![T::zero(); n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Wraps a row-major buffer, rejecting wrong lengths and NaN/Inf entries.
    pub fn from_vec(n_rows: usize, n_cols: usize, data: Vec<T>) -> Result<Self> {
        check_len("DenseMatrix::from_vec", n_rows * n_cols, data.len())?;
        if let Some(bad) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(DenseMatrix {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn from_fn(
        n_rows: usize,
        n_cols: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(n_rows, n_cols, data)
    }

    /// Builds a matrix from rows of equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            check_len("DenseMatrix::from_rows", n_cols, r.len())?;
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), n_cols, data)
    }

    // Crate-internal constructor for buffers produced by finite arithmetic.
    pub(crate) fn from_parts(n_rows: usize, n_cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), n_rows * n_cols);
        DenseMatrix {
            n_rows,
            n_cols,
            data,
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n_cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.n_cols.max(1)).take(self.n_rows)
    }

    pub fn transpose(&self) -> Self {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.n_cols {
            for i in 0..self.n_rows {
                out.push(self.get(i, j));
            }
        }
        Self::from_parts(self.n_cols, self.n_rows, out)
    }

    /// Exact dense product `K f`.
    pub fn matvec(&self, f: &[T]) -> Result<Vec<T>> {
        check_len("matvec input", self.n_cols, f.len())?;
        Ok(self.rows().map(|r| dot(r, f)).collect())
    }

    /// `Kᵀ g`
    pub fn matvec_transpose(&self, g: &[T]) -> Result<Vec<T>> {
        check_len("matvec_transpose input", self.n_rows, g.len())?;
        let mut out = vec![T::zero(); self.n_cols];
        for (r, &gi) in self.rows().zip(g) {
            for (o, &k) in out.iter_mut().zip(r) {
                *o += k * gi;
            }
        }
        Ok(out)
    }

    /// `self * other`
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_len("matmul inner dimension", self.n_cols, other.n_rows)?;
        let mut out = vec![T::zero(); self.n_rows * other.n_cols];
        for i in 0..self.n_rows {
            let orow = &mut out[i * other.n_cols..(i + 1) * other.n_cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != T::zero() {
                    for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                        *o += a * b;
                    }
                }
            }
        }
        Ok(Self::from_parts(self.n_rows, other.n_cols, out))
    }

    /// Gathers `K[rows[i]][cols[j]]`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let r = self.row(i);
            out.extend(cols.iter().map(|&j| r[j]));
        }
        Self::from_parts(rows.len(), cols.len(), out)
    }

    /// Contiguous block `K[r0..r1, c0..c1]`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        let mut out = Vec::with_capacity((r1 - r0) * (c1 - c0));
        for i in r0..r1 {
            out.extend_from_slice(&self.row(i)[c0..c1]);
        }
        Self::from_parts(r1 - r0, c1 - c0, out)
    }

    /// `output[i][j] = K[row_perm[i]][col_perm[j]]`.
    pub fn permute(&self, row_perm: &Permutation, col_perm: &Permutation) -> Result<Self> {
        check_len("permute rows", self.n_rows, row_perm.len())?;
        check_len("permute cols", self.n_cols, col_perm.len())?;
        Ok(self.submatrix(row_perm.as_slice(), col_perm.as_slice()))
    }

    pub fn frobenius_norm(&self) -> T {
        crate::scalar::norm2(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_parts(
            self.n_rows,
            self.n_cols,
            self.data.iter().map(|&x| x * s).collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_len("sub rows", self.n_rows, other.n_rows)?;
        check_len("sub cols", self.n_cols, other.n_cols)?;
        Ok(Self::from_parts(
            self.n_rows,
            self.n_cols,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        ))
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix::from_parts(
            self.n_rows,
            self.n_cols,
            self.data.iter().map(|&x| U::lit(x.as_f64())).collect(),
        )
    }

    /// Largest `|K[i][j] - K[j][i]|`; `None` when not square.
    pub fn asymmetry(&self) -> Option<T> {
        if self.n_rows != self.n_cols {
            return None;
        }
        let mut worst = T::zero();
        for i in 0..self.n_rows {
            for j in i + 1..self.n_cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        Some(worst)
    }
}

/// Exact dense product; the reference every fast apply is checked against.
pub fn matvec<T: Scalar>(k: &DenseMatrix<T>, f: &[T]) -> Result<Vec<T>> {
    k.matvec(f)
}

/// Free-function form of [`DenseMatrix::permute`].
pub fn permute_matrix<T: Scalar>(
    k: &DenseMatrix<T>,
    row_perm: &Permutation,
    col_perm: &Permutation,
) -> Result<DenseMatrix<T>> {
    k.permute(row_perm, col_perm)
}
