//! Compressed sparse row matrices built from coordinate triplets.
//!
//! Problem files exchange matrices as `(row, col, value)` triplets with
//! 0-based indices; internally we compress to CSR once and keep it immutable.

use crate::error::{Result, SolverError};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from triplets. Duplicate entries are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= rows || c >= cols {
                return Err(SolverError::DimensionMismatch(format!(
                    "triplet ({r},{c}) out of bounds for {rows}x{cols}"
                )));
            }
        }
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }

        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let col_idx = merged.iter().map(|e| e.1).collect();
        let values = merged.iter().map(|e| e.2).collect();
        Ok(CsrMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// out = M * x
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for r in 0..self.rows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            out[r] = acc;
        }
    }

    /// out = M^T * x
    pub fn matvec_transpose(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for r in 0..self.rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[k]] += self.values[k] * xr;
            }
        }
    }

    /// Gram product M^T * M, materialized as CSR. Used by the instance
    /// generator where the factor has few rows.
    pub fn gram(&self) -> CsrMatrix {
        let n = self.cols;
        // (M^T M)[i][j] = sum_r M[r][i] M[r][j]: accumulate row-outer products.
        let mut result_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut row_entries: Vec<(usize, f64)> = Vec::new();
        for r in 0..self.rows {
            row_entries.clear();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row_entries.push((self.col_idx[k], self.values[k]));
            }
            for &(i, vi) in &row_entries {
                for &(j, vj) in &row_entries {
                    result_rows[i].push((j, vi * vj));
                }
            }
        }
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for (i, row) in result_rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|e| e.0);
            let mut it = row.iter().peekable();
            while let Some(&(j, v)) = it.next() {
                let mut acc = v;
                while let Some(&&(j2, v2)) = it.peek() {
                    if j2 == j {
                        acc += v2;
                        it.next();
                    } else {
                        break;
                    }
                }
                triplets.push((i, j, acc));
            }
        }
        CsrMatrix::from_triplets(n, n, &triplets).expect("gram triplets in bounds")
    }

    /// Extracts the triplet representation (row-major order).
    pub fn to_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.push((r, self.col_idx[k], self.values[k]));
            }
        }
        out
    }

    /// Dense sub-block M[r0..r1, c0..c1] as a column-major nalgebra matrix.
    pub fn dense_block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(r1 - r0, c1 - c0);
        for r in r0..r1 {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                if c >= c0 && c < c1 {
                    m[(r - r0, c - c0)] = self.values[k];
                }
            }
        }
        m
    }
}
