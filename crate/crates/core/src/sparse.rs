//! Minimal complex CSR matrix with deterministic entry ordering.
//!
//! Rows are stored contiguously with column indices sorted ascending, so
//! every construction path (triplets, products, Kronecker products) yields a
//! bit-reproducible layout and bit-reproducible matrix-vector products.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Compressed sparse row matrix over `Complex64`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets. Duplicate entries are summed;
    /// exact zeros are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Self {
        let mut t: Vec<(usize, usize, Complex64)> = triplets
            .into_iter()
            .inspect(|&(r, c, _)| {
                assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            })
            .collect();
        t.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(t.len());
        let mut rows = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_idx.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(c);
            values.push(v);
        }
        // Drop entries that summed to exactly zero.
        let mut kept_cols = Vec::with_capacity(col_idx.len());
        let mut kept_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.iter().zip(&col_idx).zip(&values) {
            if v.re != 0.0 || v.im != 0.0 {
                row_ptr[r + 1] += 1;
                kept_cols.push(*c);
                kept_vals.push(*v);
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx: kept_cols,
            values: kept_vals,
        }
    }

    /// All-zero matrix.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![Complex64::new(1.0, 0.0); n],
        }
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

    /// Iterate stored entries as (row, col, value) in deterministic order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.iter().map(|(r, c, v)| (c, r, v.conj())),
        )
    }

    /// Transpose without conjugation.
    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.iter().map(|(r, c, v)| (c, r, v)),
        )
    }

    /// Entry-wise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.conj();
        }
        out
    }

    /// Entry-wise scaling by a complex factor.
    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out
    }

    /// Sum of two matrices of identical shape.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            let (mut i, ie) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let (mut j, je) = (other.row_ptr[r], other.row_ptr[r + 1]);
            let mut push = |c: usize, v: Complex64| {
                if v.re != 0.0 || v.im != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            };
            while i < ie && j < je {
                match self.col_idx[i].cmp(&other.col_idx[j]) {
                    std::cmp::Ordering::Less => {
                        push(self.col_idx[i], self.values[i]);
                        i += 1;
                    }
                    std::cmp::Ordering::Greater => {
                        push(other.col_idx[j], other.values[j]);
                        j += 1;
                    }
                    std::cmp::Ordering::Equal => {
                        push(self.col_idx[i], self.values[i] + other.values[j]);
                        i += 1;
                        j += 1;
                    }
                }
            }
            while i < ie {
                push(self.col_idx[i], self.values[i]);
                i += 1;
            }
            while j < je {
                push(other.col_idx[j], other.values[j]);
                j += 1;
            }
            row_ptr[r + 1] = col_idx.len();
        }
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Sparse matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "matmul shape mismatch");
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        // Dense scratch row; touched columns tracked and sorted per row.
        let mut scratch = vec![Complex64::new(0.0, 0.0); other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let a = self.values[k];
                let mid = self.col_idx[k];
                for l in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                    let c = other.col_idx[l];
                    if scratch[c].re == 0.0 && scratch[c].im == 0.0 {
                        touched.push(c);
                    }
                    scratch[c] += a * other.values[l];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                let v = scratch[c];
                if v.re != 0.0 || v.im != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
                scratch[c] = Complex64::new(0.0, 0.0);
            }
            touched.clear();
            row_ptr[r + 1] = col_idx.len();
        }
        Self {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let nrows = self.nrows * other.nrows;
        let ncols = self.ncols * other.ncols;
        let nnz = self.nnz() * other.nnz();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for ra in 0..self.nrows {
            for rb in 0..other.nrows {
                for ka in self.row_ptr[ra]..self.row_ptr[ra + 1] {
                    let ca = self.col_idx[ka];
                    let va = self.values[ka];
                    for kb in other.row_ptr[rb]..other.row_ptr[rb + 1] {
                        col_idx.push(ca * other.ncols + other.col_idx[kb]);
                        values.push(va * other.values[kb]);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// `y = A x` into a caller-provided buffer. Serial and bit-deterministic.
    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr = row_dot(
                &self.values[self.row_ptr[r]..self.row_ptr[r + 1]],
                &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]],
                x,
            );
        }
    }

    /// `A x` as a fresh vector.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    /// Parallel `y = A x`, row-partitioned. Each row is accumulated serially,
    /// so the result is bitwise identical to [`Self::matvec_into`].
    pub fn par_matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        use rayon::prelude::*;
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        if self.nrows < 2048 {
            return self.matvec_into(x, y);
        }
        let chunk = self.nrows.div_ceil(rayon::current_num_threads().max(1) * 4);
        y.par_chunks_mut(chunk).enumerate().for_each(|(ci, ys)| {
            let r0 = ci * chunk;
            for (dr, yv) in ys.iter_mut().enumerate() {
                let r = r0 + dr;
                *yv = row_dot(
                    &self.values[self.row_ptr[r]..self.row_ptr[r + 1]],
                    &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]],
                    x,
                );
            }
        });
    }

    /// Dense copy.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Sparsify a dense matrix, keeping entries with |v| > `tol`.
    pub fn from_dense(m: &DMatrix<Complex64>, tol: f64) -> Self {
        Self::from_triplets(
            m.nrows(),
            m.ncols(),
            (0..m.nrows()).flat_map(|r| {
                (0..m.ncols()).filter_map(move |c| {
                    let v = m[(r, c)];
                    (v.norm() > tol).then_some((r, c, v))
                })
            }),
        )
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> Complex64 {
        self.iter()
            .filter(|&(r, c, _)| r == c)
            .map(|(_, _, v)| v)
            .sum()
    }

    /// max_ij |A_ij - conj(A_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.dagger())
            .values
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute row sum (induced infinity norm).
    pub fn norm_inf(&self) -> f64 {
        let mut best = 0.0f64;
        for r in 0..self.nrows {
            let s: f64 = (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(|k| self.values[k].norm())
                .sum();
            best = best.max(s);
        }
        best
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

#[inline]
fn row_dot(vals: &[Complex64], cols: &[usize], x: &[Complex64]) -> Complex64 {
    let mut re = 0.0f64;
    let mut im = 0.0f64;
    for (v, &c) in vals.iter().zip(cols) {
        let xv = x[c];
        re += v.re * xv.re - v.im * xv.im;
        im += v.re * xv.im + v.im * xv.re;
    }
    Complex64::new(re, im)
}
