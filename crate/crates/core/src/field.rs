//! Grid-sampled scalar, covector and symmetric-tensor fields.
//!
//! All tensors are stored with lower indices, node-major with components
//! innermost. Symmetric tensors keep the `n(n+1)/2` upper-triangle
//! components in row order: `(0,0), (0,1), .., (0,n-1), (1,1), ..`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Packed position of component `(i, j)` of a symmetric `n x n` tensor.
#[inline]
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

#[inline]
pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn check_values(values: &[f64], expected: usize) -> Result<()> {
    if values.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: values.len(),
        });
    }
    if let Some(node) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { node });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        check_values(&values, grid.len())?;
        Ok(ScalarField { grid, values })
    }

    /// Builds a field without the finiteness scan; callers guarantee the length.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let len = grid.len();
        ScalarField::from_raw(grid, vec![value; len])
    }

    /// Samples `f` at node coordinates.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.coordinates(i))).collect();
        ScalarField::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        same_grid(&self.grid, &other.grid)?;
        Ok(ScalarField::from_raw(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovectorField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl CovectorField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        check_values(&values, grid.len() * grid.dim())?;
        Ok(CovectorField { grid, values })
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * grid.dim());
        CovectorField { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let len = grid.len() * grid.dim();
        CovectorField::from_raw(grid, vec![0.0; len])
    }

    /// Assembles a covector from its per-axis component fields.
    pub fn from_components(grid: Arc<Grid>, comps: &[Vec<f64>]) -> Self {
        let n = grid.dim();
        let mut values = vec![0.0; grid.len() * n];
        for (a, comp) in comps.iter().enumerate() {
            for (p, &v) in comp.iter().enumerate() {
                values[p * n + a] = v;
            }
        }
        CovectorField::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, node: usize, i: usize) -> f64 {
        self.values[node * self.grid.dim() + i]
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        let n = self.grid.dim();
        (0..self.grid.len()).map(|p| self.values[p * n + i]).collect()
    }

    pub fn axpy(&self, s: f64, other: &CovectorField) -> Result<CovectorField> {
        same_grid(&self.grid, &other.grid)?;
        Ok(CovectorField::from_raw(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl SymTensorField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        check_values(&values, grid.len() * sym_len(grid.dim()))?;
        Ok(SymTensorField { grid, values })
    }

    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * sym_len(grid.dim()));
        SymTensorField { grid, values }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let len = grid.len() * sym_len(grid.dim());
        SymTensorField::from_raw(grid, vec![0.0; len])
    }

    /// Kronecker delta at every node.
    pub fn identity(grid: Arc<Grid>) -> Self {
        let n = grid.dim();
        let mut t = SymTensorField::zeros(grid);
        for p in 0..t.grid.len() {
            for i in 0..n {
                t.set(p, i, i, 1.0);
            }
        }
        t
    }

    /// Samples `f(x, i, j)` for `i <= j`.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64], usize, usize) -> f64) -> Result<Self> {
        let n = grid.dim();
        let m = sym_len(n);
        let mut values = vec![0.0; grid.len() * m];
        for p in 0..grid.len() {
            let x = grid.coordinates(p);
            for i in 0..n {
                for j in i..n {
                    values[p * m + sym_index(n, i, j)] = f(&x, i, j);
                }
            }
        }
        SymTensorField::new(grid, values)
    }

    /// Assembles a tensor from full component fields `comps[i][j]`, symmetrizing.
    pub fn from_components(grid: Arc<Grid>, comps: &[Vec<Vec<f64>>]) -> Self {
        let n = grid.dim();
        let m = sym_len(n);
        let mut values = vec![0.0; grid.len() * m];
        for p in 0..grid.len() {
            for i in 0..n {
                for j in i..n {
                    values[p * m + sym_index(n, i, j)] = 0.5 * (comps[i][j][p] + comps[j][i][p]);
                }
            }
        }
        SymTensorField::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, node: usize, i: usize, j: usize) -> f64 {
        let n = self.grid.dim();
        self.values[node * sym_len(n) + sym_index(n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, node: usize, i: usize, j: usize, v: f64) {
        let n = self.grid.dim();
        self.values[node * sym_len(n) + sym_index(n, i, j)] = v;
    }

    /// Component `(i, j)` as a node vector.
    pub fn component(&self, i: usize, j: usize) -> Vec<f64> {
        let n = self.grid.dim();
        let m = sym_len(n);
        let k = sym_index(n, i, j);
        (0..self.grid.len()).map(|p| self.values[p * m + k]).collect()
    }

    /// Full `n x n` matrix at one node.
    pub fn matrix_at(&self, node: usize) -> DMatrix<f64> {
        let n = self.grid.dim();
        DMatrix::from_fn(n, n, |i, j| self.at(node, i, j))
    }

    pub fn scale(&self, s: f64) -> SymTensorField {
        SymTensorField::from_raw(self.grid.clone(), self.values.iter().map(|v| s * v).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &SymTensorField) -> Result<SymTensorField> {
        same_grid(&self.grid, &other.grid)?;
        Ok(SymTensorField::from_raw(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        ))
    }

    /// Multiplies the tensor at every node by the scalar field.
    pub fn scale_pointwise(&self, f: &ScalarField) -> Result<SymTensorField> {
        same_grid(&self.grid, f.grid())?;
        let m = sym_len(self.grid.dim());
        let mut values = self.values.clone();
        for (p, chunk) in values.chunks_mut(m).enumerate() {
            let s = f.values()[p];
            chunk.iter_mut().for_each(|v| *v *= s);
        }
        Ok(SymTensorField::from_raw(self.grid.clone(), values))
    }

    /// Symmetric outer product `a ⊗ b + b ⊗ a` halved; `a ⊗ a` when equal.
    pub fn sym_outer(a: &CovectorField, b: &CovectorField) -> Result<SymTensorField> {
        same_grid(a.grid(), b.grid())?;
        let grid = a.grid().clone();
        let n = grid.dim();
        let mut t = SymTensorField::zeros(grid.clone());
        for p in 0..grid.len() {
            for i in 0..n {
                for j in i..n {
                    t.set(p, i, j, 0.5 * (a.at(p, i) * b.at(p, j) + a.at(p, j) * b.at(p, i)));
                }
            }
        }
        Ok(t)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Christoffel symbols of the second kind `Γ^k_{ij}`, stored `[k][i][j]` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ChristoffelField {
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        let n = grid.dim();
        debug_assert_eq!(values.len(), grid.len() * n * n * n);
        ChristoffelField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let n = self.grid.dim();
        self.values[((node * n + k) * n + i) * n + j]
    }

    pub fn component(&self, k: usize, i: usize, j: usize) -> Vec<f64> {
        (0..self.grid.len()).map(|p| self.at(p, k, i, j)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Smallest admissible ratio of smallest to largest metric eigenvalue.
pub const SPD_RELATIVE_THRESHOLD: f64 = 1e-12;

/// Symmetric positive-definite metric with cached inverse and volume density.
#[derive(Debug, Clone)]
pub struct MetricField {
    tensor: SymTensorField,
    inverse: SymTensorField,
    sqrt_det: Vec<f64>,
}

impl MetricField {
    /// Validates positive definiteness node by node.
    pub fn new(tensor: SymTensorField) -> Result<Self> {
        let grid = tensor.grid().clone();
        let n = grid.dim();
        let mut inverse = SymTensorField::zeros(grid.clone());
        let mut sqrt_det = Vec::with_capacity(grid.len());
        for p in 0..grid.len() {
            let m = tensor.matrix_at(p);
            let eig = SymmetricEigen::new(m);
            let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min > SPD_RELATIVE_THRESHOLD * max) || max <= 0.0 {
                return Err(Error::SingularMetric {
                    node: p,
                    min_eigenvalue: min,
                });
            }
            sqrt_det.push(eig.eigenvalues.iter().product::<f64>().sqrt());
            let q = &eig.eigenvectors;
            for i in 0..n {
                for j in i..n {
                    let v: f64 = (0..n)
                        .map(|k| q[(i, k)] * q[(j, k)] / eig.eigenvalues[k])
                        .sum();
                    inverse.set(p, i, j, v);
                }
            }
        }
        Ok(MetricField {
            tensor,
            inverse,
            sqrt_det,
        })
    }

    pub fn flat(grid: Arc<Grid>) -> Self {
        MetricField::new(SymTensorField::identity(grid)).expect("identity metric is valid")
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.tensor.grid()
    }

    pub fn dim(&self) -> usize {
        self.grid().dim()
    }

    pub fn tensor(&self) -> &SymTensorField {
        &self.tensor
    }

    pub fn inverse(&self) -> &SymTensorField {
        &self.inverse
    }

    #[inline]
    pub fn g(&self, node: usize, i: usize, j: usize) -> f64 {
        self.tensor.at(node, i, j)
    }

    #[inline]
    pub fn ginv(&self, node: usize, i: usize, j: usize) -> f64 {
        self.inverse.at(node, i, j)
    }

    pub fn sqrt_det(&self) -> &[f64] {
        &self.sqrt_det
    }

    /// `c * g` for a constant `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<MetricField> {
        MetricField::new(self.tensor.scale(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DiffScheme;

    #[test]
    fn packed_indices_cover_upper_triangle() {
        for n in 3..6 {
            let mut seen = vec![false; sym_len(n)];
            for i in 0..n {
                for j in i..n {
                    let k = sym_index(n, i, j);
                    assert_eq!(k, sym_index(n, j, i));
                    assert!(!seen[k]);
                    seen[k] = true;
                }
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }

    #[test]
    fn rejects_indefinite_and_non_finite() {
        let grid = Grid::unit(3, 4, DiffScheme::Fd2).unwrap();
        let t = SymTensorField::from_fn(grid.clone(), |x, i, j| {
            if i == j && i == 2 && x[0] > 0.5 {
                -1.0
            } else if i == j {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        assert!(matches!(MetricField::new(t), Err(Error::SingularMetric { .. })));
        assert!(matches!(
            ScalarField::new(grid.clone(), vec![f64::NAN; grid.len()]),
            Err(Error::NonFinite { node: 0 })
        ));
        assert!(matches!(
            ScalarField::new(grid, vec![0.0; 3]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn inverse_and_density_of_diagonal_metric() {
        let grid = Grid::unit(3, 4, DiffScheme::Fd2).unwrap();
        let t = SymTensorField::from_fn(grid, |_, i, j| if i == j { (i + 1) as f64 } else { 0.0 })
            .unwrap();
        let g = MetricField::new(t).unwrap();
        assert!((g.ginv(5, 2, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.sqrt_det()[7] - 6f64.sqrt()).abs() < 1e-14);
    }
}
