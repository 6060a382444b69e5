//! Dense row-major matrices of `f64`.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

/// Errors from shape-checked tensor operations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op}: data length {len} does not match shape {rows}x{cols}")]
    LengthMismatch {
        op: &'static str,
        len: usize,
        rows: usize,
        cols: usize,
    },
    #[error("{op}: row mask selects no rows")]
    EmptyMask { op: &'static str },
    #[error("{op}: row index {row} out of bounds for {rows} rows")]
    RowOutOfBounds {
        op: &'static str,
        row: usize,
        rows: usize,
    },
    #[error("{op}: non-finite value in parameter '{name}'")]
    NonFinite { op: &'static str, name: alloc::string::String },
    #[error("{op}: expected a 1x1 tensor, got {shape:?}")]
    NotScalar { op: &'static str, shape: (usize, usize) },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::LengthMismatch {
                op: "from_vec",
                len: data.len(),
                rows,
                cols,
            });
        }
        Ok(Tensor { rows, cols, data })
    }

    /// 1xN row vector.
    pub fn row_vector(data: Vec<f64>) -> Self {
        Tensor {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor, TensorError> {
        if self.cols != rhs.rows {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let mut out = Tensor::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rrow = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, r) in orow.iter_mut().zip(rrow.iter()) {
                    *o += a * r;
                }
            }
        }
        Ok(out)
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub fn matmul_transpose_rhs(&self, rhs: &Tensor) -> Result<Tensor, TensorError> {
        if self.cols != rhs.cols {
            return Err(TensorError::ShapeMismatch {
                op: "matmul_transpose_rhs",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let mut out = Tensor::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            for j in 0..rhs.rows {
                let brow = rhs.row(j);
                let mut s = 0.0;
                for (a, b) in arow.iter().zip(brow.iter()) {
                    s += a * b;
                }
                out.data[i * rhs.rows + j] = s;
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn transpose_matmul(&self, rhs: &Tensor) -> Result<Tensor, TensorError> {
        if self.rows != rhs.rows {
            return Err(TensorError::ShapeMismatch {
                op: "transpose_matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let mut out = Tensor::zeros(self.cols, rhs.cols);
        for r in 0..self.rows {
            let arow = self.row(r);
            let brow = rhs.row(r);
            for i in 0..self.cols {
                let a = arow[i];
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(brow.iter()) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Elementwise addition into `self`.
    pub fn add_assign(&mut self, rhs: &Tensor) -> Result<(), TensorError> {
        if self.shape() != rhs.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "add_assign",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(rhs.data.iter()) {
            *a += b;
        }
        Ok(())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent matmul oracle with a different loop order.
    fn naive_matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let mut out = Tensor::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn matmul_small_case() {
        // [1,2] · [[1],[1]] = [3]
        let a = Tensor::row_vector(vec![1.0, 2.0]);
        let b = Tensor::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert_eq!(c.get(0, 0), 3.0);
    }

    #[test]
    fn matmul_matches_naive_oracle() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let a = Tensor::from_vec(3, 4, (0..12).map(|_| next()).collect()).unwrap();
        let b = Tensor::from_vec(4, 2, (0..8).map(|_| next()).collect()).unwrap();
        let got = a.matmul(&b).unwrap();
        let want = naive_matmul(&a, &b);
        for (g, w) in got.data().iter().zip(want.data().iter()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_variants_match_explicit_transpose() {
        let a = Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::from_vec(2, 3, vec![0.5, -1.0, 2.0, 1.5, 0.0, -2.0]).unwrap();
        // aᵀ·b == naive with explicit transpose
        let mut at = Tensor::zeros(3, 2);
        for i in 0..2 {
            for j in 0..3 {
                at.set(j, i, a.get(i, j));
            }
        }
        let want = naive_matmul(&at, &b);
        let got = a.transpose_matmul(&b).unwrap();
        assert_eq!(got, want);

        // a·bᵀ
        let mut bt = Tensor::zeros(3, 2);
        for i in 0..2 {
            for j in 0..3 {
                bt.set(j, i, b.get(i, j));
            }
        }
        let want = naive_matmul(&a, &bt);
        let got = a.matmul_transpose_rhs(&b).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err();
        match err {
            TensorError::ShapeMismatch { lhs, rhs, .. } => {
                assert_eq!(lhs, (2, 3));
                assert_eq!(rhs, (2, 3));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
