//! Minimal dense linear algebra: row-major matrices and sample batches.
//!
//! Everything is 64-bit; gradient checking at 1e-6 relative tolerance does
//! not survive single precision. Sizes here top out at a few hundred, so the
//! plain triple loop in [`Matrix::matmul`] is fast enough and keeps results
//! reproducible.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Shape or content violation in a linear-algebra operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LaError {
    /// Operand shapes do not line up for `op`.
    DimMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// Backing data length does not equal rows * cols.
    BadLength {
        rows: usize,
        cols: usize,
        len: usize,
    },
    /// External input contained NaN or infinity at flat index `index`.
    NonFinite { index: usize },
    /// A batch must contain at least one sample.
    EmptyBatch,
}

impl fmt::Display for LaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LaError::DimMismatch { op, left, right } => write!(
                f,
                "{op}: shapes {}x{} and {}x{} do not conform",
                left.0, left.1, right.0, right.1
            ),
            LaError::BadLength { rows, cols, len } => write!(
                f,
                "data length {len} does not match {rows}x{cols} = {}",
                rows * cols
            ),
            LaError::NonFinite { index } => {
                write!(f, "non-finite entry at flat index {index}")
            }
            LaError::EmptyBatch => write!(f, "batch must contain at least one sample"),
        }
    }
}

impl core::error::Error for LaError {}

fn check_finite(data: &[f64]) -> Result<(), LaError> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(LaError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Dense row-major matrix of 64-bit floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix. Both dimensions must be positive.
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data, rejecting bad lengths and
    /// non-finite entries. This is the constructor for external input;
    /// internal mutation relies on debug assertions instead.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix, LaError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(LaError::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Matrix { rows, cols, data })
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        debug_assert!(r < self.rows);
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        debug_assert!(v.is_finite());
        self.data[r * self.cols + c] = v;
    }

    /// Standard product; `self.cols` must equal `rhs.rows`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix, LaError> {
        if self.cols != rhs.rows {
            return Err(LaError::DimMismatch {
                op: "matmul",
                left: (self.rows, self.cols),
                right: (rhs.rows, rhs.cols),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Exact involution: `transpose(transpose(a)) == a`.
    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }
}

/// Mini-batch of samples, one per row. Always holds at least one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Batch {
    /// All-zero batch of `n` samples with `dim` features each.
    pub fn zeros(n: usize, dim: usize) -> Batch {
        assert!(n > 0, "batch must contain at least one sample");
        assert!(dim > 0, "samples must have at least one feature");
        Batch {
            n,
            dim,
            data: vec![0.0; n * dim],
        }
    }

    /// Builds a batch from row-major data, rejecting empty batches, bad
    /// lengths, and non-finite entries.
    pub fn from_vec(n: usize, dim: usize, data: Vec<f64>) -> Result<Batch, LaError> {
        if n == 0 {
            return Err(LaError::EmptyBatch);
        }
        if dim == 0 || data.len() != n * dim {
            return Err(LaError::BadLength {
                rows: n,
                cols: dim,
                len: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Batch { n, dim, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, s: usize) -> &[f64] {
        debug_assert!(s < self.n);
        &self.data[s * self.dim..(s + 1) * self.dim]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        debug_assert!(s < self.n);
        &mut self.data[s * self.dim..(s + 1) * self.dim]
    }

    pub fn get(&self, s: usize, k: usize) -> f64 {
        debug_assert!(s < self.n && k < self.dim);
        self.data[s * self.dim + k]
    }

    pub fn set(&mut self, s: usize, k: usize, v: f64) {
        debug_assert!(s < self.n && k < self.dim);
        self.data[s * self.dim + k] = v;
    }

    /// New batch with `f` applied to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Batch {
        Batch {
            n: self.n,
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Entry-wise combination for [`elementwise`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElemOp {
    Add,
    Sub,
    Mul,
}

/// Applies `w . x_i + b` to every sample row `x_i`; `w` is `out x in`.
pub fn affine_batch(x: &Batch, w: &Matrix, b: &[f64]) -> Result<Batch, LaError> {
    if x.dim != w.cols() {
        return Err(LaError::DimMismatch {
            op: "affine_batch",
            left: (x.n, x.dim),
            right: (w.rows(), w.cols()),
        });
    }
    if b.len() != w.rows() {
        return Err(LaError::DimMismatch {
            op: "affine_batch bias",
            left: (w.rows(), w.cols()),
            right: (b.len(), 1),
        });
    }
    let out_dim = w.rows();
    let mut out = Batch::zeros(x.n, out_dim);
    for s in 0..x.n {
        let xs = x.row(s);
        for (r, &bias) in b.iter().enumerate() {
            let wr = w.row(r);
            let mut acc = bias;
            for (wv, xv) in wr.iter().zip(xs) {
                acc += wv * xv;
            }
            out.data[s * out_dim + r] = acc;
        }
    }
    Ok(out)
}

/// Entry-wise `op` over two equally shaped batches.
pub fn elementwise(op: ElemOp, a: &Batch, b: &Batch) -> Result<Batch, LaError> {
    if a.n != b.n || a.dim != b.dim {
        return Err(LaError::DimMismatch {
            op: "elementwise",
            left: (a.n, a.dim),
            right: (b.n, b.dim),
        });
    }
    let data = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| match op {
            ElemOp::Add => x + y,
            ElemOp::Sub => x - y,
            ElemOp::Mul => x * y,
        })
        .collect();
    Ok(Batch {
        n: a.n,
        dim: a.dim,
        data,
    })
}

/// Mean over every entry of the batch.
pub fn reduce_mean(a: &Batch) -> f64 {
    let sum: f64 = a.data.iter().sum();
    sum / a.data.len() as f64
}
