//! Compressed sparse row storage for complex operators.
//!
//! Entries within a row are kept sorted by column and explicit zeros are
//! dropped, so two matrices built from the same triplets always have
//! identical storage.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self::from_triplets(
            diag.len(),
            diag.len(),
            diag.iter().enumerate().map(|(i, &v)| (i, i, v)),
        )
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed. Panics on out-of-range indices.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of range");
            *rows[r].entry(c).or_insert(ZERO) += v;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != ZERO {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let (r, c) = m.shape();
        Self::from_triplets(
            r,
            c,
            (0..r).flat_map(|i| (0..c).map(move |j| (i, j, m[(i, j)]))),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        match self.indices[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => ZERO,
        }
    }

    pub fn validate(&self) -> bool {
        self.indptr.len() == self.nrows + 1
            && self.indptr.windows(2).all(|w| w[0] <= w[1])
            && *self.indptr.last().unwrap() == self.indices.len()
            && self.indices.len() == self.values.len()
            && self.indices.iter().all(|&c| c < self.ncols)
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Self {
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.iter().map(|(r, c, v)| (r, c, f(v))),
        )
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.iter().map(|(r, c, v)| (c, r, v.conj())),
        )
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.iter().map(|(r, c, v)| (c, r, v)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(self.nrows, self.ncols, self.iter().chain(other.iter()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale_re(-1.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut trip = Vec::new();
        for r in 0..self.nrows {
            let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    *acc.entry(c).or_insert(ZERO) += a * b;
                }
            }
            trip.extend(acc.into_iter().map(|(c, v)| (r, c, v)));
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (nr, nc) = (self.nrows * other.nrows, self.ncols * other.ncols);
        let trip = self.iter().flat_map(|(r1, c1, a)| {
            other
                .iter()
                .map(move |(r2, c2, b)| (r1 * other.nrows + r2, c1 * other.ncols + c2, a * b))
        });
        Self::from_triplets(nr, nc, trip)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.nrows];
        self.mul_vec_acc(x, C64::new(1.0, 0.0), &mut y);
        y
    }

    /// `y += alpha * A x`.
    pub fn mul_vec_acc(&self, x: &[C64], alpha: C64, y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * x[self.indices[k]];
            }
            *yr += alpha * s;
        }
    }

    pub fn mul_dvec(&self, x: &DVector<C64>) -> DVector<C64> {
        DVector::from_vec(self.mul_vec(x.as_slice()))
    }

    /// `A * B` for dense `B`.
    pub fn mul_dense(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        assert_eq!(self.ncols, b.nrows());
        let mut out = DMatrix::zeros(self.nrows, b.ncols());
        for j in 0..b.ncols() {
            let col = b.column(j);
            for r in 0..self.nrows {
                let mut s = ZERO;
                for k in self.indptr[r]..self.indptr[r + 1] {
                    s += self.values[k] * col[self.indices[k]];
                }
                out[(r, j)] = s;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Dense restriction to the given rows and columns.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<C64> {
        let mut pos = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            pos[c] = j;
        }
        let mut m = DMatrix::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if pos[c] != usize::MAX {
                    m[(i, pos[c])] = v;
                }
            }
        }
        m
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute row sum; an upper bound on the spectral norm of
    /// Hermitian matrices.
    pub fn inf_norm(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max |A - A†|` over entries.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Largest entrywise difference between two matrices of equal shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }
}
