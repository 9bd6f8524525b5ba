//! Compressed sparse row matrices over node vectors.

use nalgebra::DMatrix;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a square matrix from per-row `(column, value)` lists.
    /// Duplicate columns within a row are summed.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(rows.len(), n);
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut last = usize::MAX;
            for (c, v) in row {
                debug_assert!(c < n);
                if c == last {
                    *values.last_mut().expect("previous entry") += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = c;
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { n, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Row-parallel product; each row is summed sequentially so results do not
    /// depend on the thread count.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        y.par_iter_mut().enumerate().with_min_len(256).for_each(|(i, yi)| {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        });
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                rows[c].push((i, v));
            }
        }
        CsrMatrix::from_rows(self.n, rows)
    }

    /// `D_l A D_r` for diagonal scalings.
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            for idx in self.indptr[i]..self.indptr[i + 1] {
                out.values[idx] *= left[i] * right[self.indices[idx]];
            }
        }
        out
    }

    /// Returns `(A + Aᵀ)/2` and the max-abs entry of `(A − Aᵀ)/2`.
    pub fn symmetrize(&self) -> (CsrMatrix, f64) {
        let t = self.transpose();
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row: Vec<(usize, f64)> = self
                .row(i)
                .map(|(c, v)| (c, 0.5 * v))
                .chain(t.row(i).map(|(c, v)| (c, 0.5 * v)))
                .collect();
            rows.push(row);
        }
        let sym = CsrMatrix::from_rows(self.n, rows);
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row: Vec<(usize, f64)> = self
                .row(i)
                .map(|(c, v)| (c, 0.5 * v))
                .chain(t.row(i).map(|(c, v)| (c, -0.5 * v)))
                .collect();
            rows.push(row);
        }
        let skew = CsrMatrix::from_rows(self.n, rows);
        let asym = skew.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (sym, asym)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Upper bound on the spectral radius (max absolute row sum).
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                m[(i, c)] += v;
            }
        }
        m
    }
}
