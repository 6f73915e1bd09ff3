//! Dense row-major matrices and the handful of f64 kernels everything else
//! is built from.
//!
//! All reductions run in a fixed order per output element, so results are
//! bitwise identical regardless of how many rayon workers are active: a
//! parallel split only ever distributes whole output rows.

use rayon::prelude::*;

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wrap an existing row-major buffer. Panics if the length is inconsistent.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match {rows}x{cols}");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Horizontal concatenation: `[self | other]`.
    pub fn hcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "row count mismatch in hcat");
        let cols = self.cols + other.cols;
        let mut out = Mat::zeros(self.rows, cols);
        for r in 0..self.rows {
            out.row_mut(r)[..self.cols].copy_from_slice(self.row(r));
            out.row_mut(r)[self.cols..].copy_from_slice(other.row(r));
        }
        out
    }

    /// Split columns at `at`, returning (left, right).
    pub fn split_cols(&self, at: usize) -> (Mat, Mat) {
        assert!(at <= self.cols);
        let mut left = Mat::zeros(self.rows, at);
        let mut right = Mat::zeros(self.rows, self.cols - at);
        for r in 0..self.rows {
            left.row_mut(r).copy_from_slice(&self.row(r)[..at]);
            right.row_mut(r).copy_from_slice(&self.row(r)[at..]);
        }
        (left, right)
    }
}

/// Dot product with four independent accumulators so LLVM vectorizes it.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let chunks = a.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..chunks {
        let j = i * 4;
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for j in chunks * 4..a.len() {
        s += a[j] * b[j];
    }
    s
}

/// `y += alpha * x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

/// `A (m x k) * B^T` with `B (n x k)`, producing `(m x n)`.
///
/// Both operands are traversed along contiguous rows.
pub fn matmul_nt(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols(), b.cols(), "inner dimension mismatch");
    let (m, n) = (a.rows(), b.rows());
    let mut out = Mat::zeros(m, n);
    let bref = b;
    out.data
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(r, out_row)| {
            let ar = a.row(r);
            for (c, slot) in out_row.iter_mut().enumerate() {
                *slot = dot(ar, bref.row(c));
            }
        });
    out
}

/// `A (m x k) * B (k x n)`, producing `(m x n)`, via row-wise axpy accumulation.
pub fn matmul_nn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.cols(), b.rows(), "inner dimension mismatch");
    let (m, n) = (a.rows(), b.cols());
    let mut out = Mat::zeros(m, n);
    out.data
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(r, out_row)| {
            let ar = a.row(r);
            for (k, &aik) in ar.iter().enumerate() {
                axpy(aik, b.row(k), out_row);
            }
        });
    out
}

/// `A^T (m x k)^T * B (k x n)` with `A (k x m)`, producing `(m x n)`.
///
/// Used for weight gradients: the sum over the k (batch) axis runs in index
/// order for every output row.
pub fn matmul_tn(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.rows(), b.rows(), "outer dimension mismatch");
    let (m, n) = (a.cols(), b.cols());
    let mut out = Mat::zeros(m, n);
    out.data
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(r, out_row)| {
            for k in 0..a.rows() {
                axpy(a.get(k, r), b.row(k), out_row);
            }
        });
    out
}

/// `M (m x n) * v (n)`, producing a length-m vector.
pub fn matvec(m: &Mat, v: &[f64]) -> Vec<f64> {
    assert_eq!(m.cols(), v.len(), "matvec dimension mismatch");
    (0..m.rows()).map(|r| dot(m.row(r), v)).collect()
}

/// Column sums of `a`, one value per column.
pub fn col_sums(a: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; a.cols()];
    for r in 0..a.rows() {
        for (s, v) in out.iter_mut().zip(a.row(r)) {
            *s += v;
        }
    }
    out
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scale `v` to unit Euclidean norm; returns the original norm.
pub fn normalize_in_place(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        let inv = 1.0 / n;
        for x in v.iter_mut() {
            *x *= inv;
        }
    }
    n
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        s += d * d;
    }
    s.sqrt()
}

/// Mean of a set of rows.
pub fn mean_of_rows(rows: &[&[f64]]) -> Vec<f64> {
    assert!(!rows.is_empty());
    let dim = rows[0].len();
    let mut out = vec![0.0; dim];
    for r in rows {
        axpy(1.0, r, &mut out);
    }
    let inv = 1.0 / rows.len() as f64;
    for v in out.iter_mut() {
        *v *= inv;
    }
    out
}

/// Round every entry through f32, so the value is exactly representable in
/// the 32-bit on-disk encoding.
pub fn snap_f32(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = *x as f32 as f64;
    }
}
