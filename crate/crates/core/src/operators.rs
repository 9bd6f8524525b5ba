//! The operator `P_{g,c} = −Δ_g + c R_g` as a symmetric matrix, and its low spectrum.
//!
//! The pointwise operator `L` is assembled from the grid stencils in Hessian
//! form, `L f = −g^ij(∂_i∂_j f − Γ^k_ij ∂_k f) + c R f`. With the quadrature
//! weights `W = cell volume · √det g`, the solver works on
//! `Ã = sym(W^{1/2} L W^{−1/2})`; the discarded antisymmetric part is kept as
//! a diagnostic. Eigenvectors are returned as `x = W^{−1/2} y`, so they are
//! orthonormal in `L²(dV_g)`.

use std::io::Write;
use std::ops::Range;
use std::sync::Arc;

use crate::eigen::{self, EigenSettings};
use crate::error::{Error, Result};
use crate::field::{same_grid, MetricField, ScalarField};
use crate::geometry::{self, christoffel, conformal_rescale, curvature, scalar_curvature};
use crate::grid::Grid;
use crate::sparse::CsrMatrix;

/// `c_n = (n − 2) / (4(n − 1))`, the coupling that makes `−Δ + cR` conformally covariant.
pub fn coupling_constant(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::DimensionTooSmall(n));
    }
    Ok((n as f64 - 2.0) / (4.0 * (n as f64 - 1.0)))
}

/// Whether `c` is one of the couplings excluded by the genericity argument.
pub fn is_excluded_coupling(c: f64) -> bool {
    c == 0.0 || c == 0.5
}

#[derive(Debug, Clone)]
pub struct OperatorPair {
    grid: Arc<Grid>,
    /// `sym(W^{1/2} L W^{−1/2})`.
    matrix: CsrMatrix,
    weights: Vec<f64>,
    sqrt_weights: Vec<f64>,
    c: f64,
    asymmetry: f64,
}

impl OperatorPair {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Mass weights `W`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coupling(&self) -> f64 {
        self.c
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Largest entry of the antisymmetric part removed during symmetrization.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    /// Set when `c ∈ {0, 1/2}`.
    pub fn excluded_coupling(&self) -> bool {
        is_excluded_coupling(self.c)
    }

    /// `W^{−1/2} Ã W^{1/2} x`, the symmetrized operator acting on node values.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let y: Vec<f64> = x.iter().zip(&self.sqrt_weights).map(|(a, s)| a * s).collect();
        self.matrix
            .matvec(&y)
            .into_iter()
            .zip(&self.sqrt_weights)
            .map(|(a, s)| a / s)
            .collect()
    }
}

/// Pointwise operator matrix `L` (unsymmetrized).
pub fn raw_matrix(g: &MetricField, c: f64) -> CsrMatrix {
    let grid = g.grid().clone();
    let n = grid.dim();
    let gamma = christoffel(g);
    let r = scalar_curvature(g);
    let rows = (0..grid.len())
        .map(|p| {
            let mut row: Vec<(usize, f64)> = Vec::new();
            let mut diag = c * r.values()[p];
            // First-order coefficients b_k = g^ij Γ^k_ij.
            for k in 0..n {
                let bk: f64 = (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| g.ginv(p, i, j) * gamma.at(p, k, i, j))
                    .sum();
                if bk != 0.0 {
                    for &(o, w) in grid.first_stencil(k) {
                        row.push((grid.shifted(p, k, o), bk * w));
                        diag -= bk * w;
                    }
                }
            }
            for i in 0..n {
                let a = -g.ginv(p, i, i);
                for &(o, w) in grid.second_stencil(i) {
                    row.push((grid.shifted(p, i, o), a * w));
                    diag -= a * w;
                }
                for j in (i + 1)..n {
                    let a = -2.0 * g.ginv(p, i, j);
                    if a == 0.0 {
                        continue;
                    }
                    for &(oi, wi) in grid.first_stencil(i) {
                        let pi = grid.shifted(p, i, oi);
                        for &(oj, wj) in grid.first_stencil(j) {
                            let w = a * wi * wj;
                            row.push((grid.shifted(pi, j, oj), w));
                            row.push((pi, -w));
                            row.push((grid.shifted(p, j, oj), -w));
                            diag += w;
                        }
                    }
                }
            }
            row.push((p, diag));
            row
        })
        .collect();
    CsrMatrix::from_rows(grid.len(), rows)
}

/// Assembles the symmetric form of `−Δ_g + c R_g`.
pub fn assemble(g: &MetricField, c: f64) -> Result<OperatorPair> {
    if !c.is_finite() {
        return Err(Error::InvalidParameters(format!("coupling constant {c} is not finite")));
    }
    let raw = raw_matrix(g, c);
    let weights = geometry::volume_element(g).into_values();
    let sqrt_weights: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let inv: Vec<f64> = sqrt_weights.iter().map(|s| 1.0 / s).collect();
    let (matrix, asymmetry) = raw.scale_rows_cols(&sqrt_weights, &inv).symmetrize();
    Ok(OperatorPair { grid: g.grid().clone(), matrix, weights, sqrt_weights, c, asymmetry })
}

/// `(−Δ_g + c R_g) f` evaluated pointwise with the tensor calculus routines.
pub fn apply_pointwise(g: &MetricField, c: f64, f: &ScalarField) -> Result<ScalarField> {
    same_grid(g.grid(), f.grid())?;
    let curv = curvature(g);
    let lap = geometry::laplace_with(g, &curv.christoffel, f);
    Ok(ScalarField::from_raw(
        g.grid().clone(),
        lap.values()
            .iter()
            .zip(curv.scalar.values())
            .zip(f.values())
            .map(|((l, r), v)| -l + c * r * v)
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignCounts {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl SignCounts {
    pub fn of(values: &[f64], tau: f64) -> Self {
        let mut counts = SignCounts { negative: 0, zero: 0, positive: 0 };
        for &v in values {
            if v.abs() < tau {
                counts.zero += 1;
            } else if v < 0.0 {
                counts.negative += 1;
            } else {
                counts.positive += 1;
            }
        }
        counts
    }
}

/// Default kernel tolerance `max(1e-8, κ h^p scale)` with `κ = 1`, where `h` is the
/// relative grid spacing, `p` the scheme order and `scale` the largest `|λ|` computed.
pub fn default_kernel_tol(grid: &Grid, scale: f64) -> f64 {
    let p = grid.scheme().order() as i32;
    (grid.relative_spacing().powi(p) * scale).max(1e-8)
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub grid: Arc<Grid>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal in `L²(dV_g)`.
    pub eigenvectors: Vec<ScalarField>,
    /// `‖Ã y − λ y‖` for the symmetric problem.
    pub residuals: Vec<f64>,
    pub kernel_tol: f64,
    pub counts: SignCounts,
    pub iterations: usize,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn kernel_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.eigenvalues[i].abs() < self.kernel_tol).collect()
    }

    /// Pairs with `|λ| < τ`.
    pub fn restrict_to_kernel(&self) -> SpectralDecomposition {
        let idx = self.kernel_indices();
        let eigenvalues: Vec<f64> = idx.iter().map(|&i| self.eigenvalues[i]).collect();
        SpectralDecomposition {
            grid: self.grid.clone(),
            counts: SignCounts::of(&eigenvalues, self.kernel_tol),
            eigenvectors: idx.iter().map(|&i| self.eigenvectors[i].clone()).collect(),
            residuals: idx.iter().map(|&i| self.residuals[i]).collect(),
            eigenvalues,
            kernel_tol: self.kernel_tol,
            iterations: self.iterations,
        }
    }

    /// Maximal runs of consecutive eigenvalues separated by gaps below `τ`.
    pub fn clusters(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.len() {
            if i == self.len() || self.eigenvalues[i] - self.eigenvalues[i - 1] >= self.kernel_tol {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// `index,eigenvalue,residual` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,eigenvalue,residual")?;
        for i in 0..self.len() {
            writeln!(w, "{i},{:.17e},{:.6e}", self.eigenvalues[i], self.residuals[i])?;
        }
        Ok(())
    }
}

/// The `k` algebraically smallest eigenpairs of `A x = λ W x`.
///
/// `tau` overrides the default kernel tolerance used for the sign counts.
pub fn eig_lowest(
    op: &OperatorPair,
    k: usize,
    tau: Option<f64>,
    settings: &EigenSettings,
) -> Result<SpectralDecomposition> {
    let pairs = eigen::lowest(&op.matrix, k, settings)?;
    let scale = pairs.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let kernel_tol = match tau {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(Error::InvalidParameters(format!("kernel tolerance {t} must be positive"))),
        None => default_kernel_tol(&op.grid, scale),
    };
    let eigenvectors = pairs
        .vectors
        .into_iter()
        .map(|y| {
            let x = y.iter().zip(&op.sqrt_weights).map(|(a, s)| a / s).collect();
            ScalarField::from_raw(op.grid.clone(), x)
        })
        .collect();
    Ok(SpectralDecomposition {
        grid: op.grid.clone(),
        counts: SignCounts::of(&pairs.values, kernel_tol),
        eigenvalues: pairs.values,
        eigenvectors,
        residuals: pairs.residuals,
        kernel_tol,
        iterations: pairs.iterations,
    })
}

/// Eigenpairs of `−Δ_g + c R_g` with `|λ| < τ`; the window is grown until it
/// extends past `τ`.
pub fn kernel(
    g: &MetricField,
    c: f64,
    tau: Option<f64>,
    settings: &EigenSettings,
) -> Result<SpectralDecomposition> {
    let op = assemble(g, c)?;
    let n = g.grid().len();
    let mut k = n.min(8);
    loop {
        let spec = eig_lowest(&op, k, tau, settings)?;
        let last = *spec.eigenvalues.last().expect("k >= 1");
        if last >= spec.kernel_tol || k == n {
            return Ok(spec.restrict_to_kernel());
        }
        k = n.min(2 * k);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountBelow {
    pub count: usize,
    /// True when the computed window never reached `s`, so `count` is only a lower bound.
    pub truncated: bool,
    pub largest_computed: f64,
}

/// Number of eigenvalues of `−Δ_g + c R_g` strictly below `s`, growing the
/// window up to `max_k` eigenpairs.
pub fn count_below(
    g: &MetricField,
    c: f64,
    s: f64,
    max_k: usize,
    settings: &EigenSettings,
) -> Result<CountBelow> {
    if !s.is_finite() {
        return Err(Error::InvalidParameters(format!("threshold {s} is not finite")));
    }
    let op = assemble(g, c)?;
    let cap = max_k.clamp(1, g.grid().len());
    let mut k = cap.min(8);
    loop {
        let pairs = eigen::lowest(&op.matrix, k, settings)?;
        let last = *pairs.values.last().expect("k >= 1");
        let count = pairs.values.iter().filter(|&&v| v < s).count();
        if last >= s || k == g.grid().len() {
            return Ok(CountBelow { count, truncated: false, largest_computed: last });
        }
        if k == cap {
            return Ok(CountBelow { count, truncated: true, largest_computed: last });
        }
        k = cap.min(2 * k);
    }
}

#[derive(Debug, Clone)]
pub struct ConformalReport {
    pub before: SpectralDecomposition,
    pub after: SpectralDecomposition,
    pub counts_agree: bool,
    /// `‖Y_ĝ(u^{−1}φ)‖ / ‖u^{−1}φ‖` in `L²(dV_ĝ)` for each near-zero eigenfunction `φ` of `Y_g`.
    pub kernel_residuals: Vec<f64>,
    pub kernel_tol: f64,
}

/// Compares the low spectra of `Y_g` and `Y_ĝ` for `ĝ = u^{4/(n−2)} g`.
///
/// With `tau = None` the larger of the two default tolerances is used for both counts.
pub fn conformal_covariance_check(
    g: &MetricField,
    u: &ScalarField,
    k: usize,
    tau: Option<f64>,
    settings: &EigenSettings,
) -> Result<ConformalReport> {
    let c = coupling_constant(g.dim())?;
    let gh = conformal_rescale(g, u)?;
    let before = eig_lowest(&assemble(g, c)?, k, tau, settings)?;
    let after = eig_lowest(&assemble(&gh, c)?, k, tau, settings)?;
    let kernel_tol = tau.unwrap_or(before.kernel_tol.max(after.kernel_tol));
    let before = with_tol(before, kernel_tol);
    let after = with_tol(after, kernel_tol);
    let kernel_residuals = before
        .kernel_indices()
        .into_iter()
        .map(|i| {
            let psi = before.eigenvectors[i].zip_map(u, |p, u| p / u)?;
            let y = apply_pointwise(&gh, c, &psi)?;
            Ok((geometry::l2_inner(&gh, &y, &y)? / geometry::l2_inner(&gh, &psi, &psi)?).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConformalReport {
        counts_agree: before.counts == after.counts,
        before,
        after,
        kernel_residuals,
        kernel_tol,
    })
}

fn with_tol(mut spec: SpectralDecomposition, tau: f64) -> SpectralDecomposition {
    spec.kernel_tol = tau;
    spec.counts = SignCounts::of(&spec.eigenvalues, tau);
    spec
}
