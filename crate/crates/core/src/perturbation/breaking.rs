//! The projected operator `Q_{g₀,h}` on the kernel, the explicit kernel-breaking
//! direction, and the procedure that removes the kernel one dimension at a time.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::eigen::EigenSettings;
use crate::error::{Error, Result};
use crate::field::{same_grid, MetricField, ScalarField, SymTensorField};
use crate::geometry::{
    curvature, gradient, hessian_with, inner_covector, l2_inner, l2_inner_tensor,
    trace_unchecked, traceless_unchecked,
};
use crate::operators::{is_excluded_coupling, kernel};
use crate::perturbation::variation::{dot_laplacian, dot_scalar_curvature};

/// `Q_ab = ∫ ψ_a (c Ṙ − Δ̇) ψ_b dV` in an `L²`-orthonormal kernel basis, symmetrized.
#[derive(Debug, Clone)]
pub struct QMatrix {
    pub entries: Vec<Vec<f64>>,
    pub basis: Vec<ScalarField>,
    /// Largest entry of the antisymmetric part that was averaged away.
    pub asymmetry: f64,
}

impl QMatrix {
    pub fn multiplicity(&self) -> usize {
        self.entries.len()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = self.multiplicity();
        let mat = DMatrix::from_fn(m, m, |i, j| self.entries[i][j]);
        let mut v: Vec<f64> = SymmetricEigen::new(mat).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// `Q` for an explicit basis of (near-)kernel eigenfunctions.
pub fn q_matrix(g: &MetricField, h: &SymTensorField, c: f64, basis: &[ScalarField]) -> Result<QMatrix> {
    if basis.is_empty() {
        return Err(Error::EmptyKernel);
    }
    let rdot = dot_scalar_curvature(g, h)?;
    let images = basis
        .iter()
        .map(|psi| {
            let ld = dot_laplacian(g, h, psi)?;
            rdot.zip_map(psi, |r, p| c * r * p)?.zip_map(&ld, |a, b| a - b)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = basis.len();
    let mut raw = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..m {
            raw[a][b] = l2_inner(g, &basis[a], &images[b])?;
        }
    }
    let mut asymmetry = 0.0f64;
    let entries = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    asymmetry = asymmetry.max(0.5 * (raw[a][b] - raw[b][a]).abs());
                    0.5 * (raw[a][b] + raw[b][a])
                })
                .collect()
        })
        .collect();
    Ok(QMatrix { entries, basis: basis.to_vec(), asymmetry })
}

/// `Q_{g,h}` on the numerical kernel `{|λ| < τ}` of `−Δ_g + c R_g`.
pub fn q_operator(
    g: &MetricField,
    h: &SymTensorField,
    c: f64,
    tau: Option<f64>,
    settings: &EigenSettings,
) -> Result<QMatrix> {
    let ker = kernel(g, c, tau, settings)?;
    if ker.is_empty() {
        return Err(Error::EmptyKernel);
    }
    q_matrix(g, h, c, &ker.eigenvectors)
}

/// Derivatives at `t = 0` of the eigenvalue branches leaving zero along `g + t h`.
pub fn eigenvalue_derivatives(
    g: &MetricField,
    h: &SymTensorField,
    c: f64,
    tau: Option<f64>,
    settings: &EigenSettings,
) -> Result<Vec<f64>> {
    Ok(q_operator(g, h, c, tau, settings)?.eigenvalues())
}

fn check_coupling(c: f64) -> Result<()> {
    if is_excluded_coupling(c) || !c.is_finite() {
        return Err(Error::DisallowedCoupling(c));
    }
    Ok(())
}

/// The untraced integrand `c ψ (2∇²ψ − ψ Ric) + (2c − 1) dψ⊗dψ`.
fn pairing_tensor(g: &MetricField, psi: &ScalarField, c: f64) -> SymTensorField {
    let curv = curvature(g);
    let hess = hessian_with(g, &curv.christoffel, psi);
    let dpsi = gradient(psi);
    let dd = SymTensorField::sym_outer(&dpsi, &dpsi).expect("same grid");
    let n = g.dim();
    let mut out = SymTensorField::zeros(g.grid().clone());
    for p in 0..g.grid().len() {
        let s = psi.values()[p];
        for i in 0..n {
            for j in i..n {
                let v = c * s * (2.0 * hess.at(p, i, j) - s * curv.ricci.at(p, i, j))
                    + (2.0 * c - 1.0) * dd.at(p, i, j);
                out.set(p, i, j, v);
            }
        }
    }
    out
}

/// `h* = c ψ (2∇̊²ψ − ψ R̊ic) + (2c − 1)(dψ⊗dψ)°`, where `°` is the `g`-traceless part.
///
/// Pairing a traceless `h` with `h*` gives `((cṘ − Δ̇)ψ, ψ)`, so deforming along
/// `h*` moves the eigenvalue of `ψ` at rate `‖h*‖² / ‖ψ‖²`.
pub fn kernel_breaking_tensor(g: &MetricField, psi: &ScalarField, c: f64) -> Result<SymTensorField> {
    check_coupling(c)?;
    same_grid(g.grid(), psi.grid())?;
    Ok(traceless_unchecked(g, &pairing_tensor(g, psi, c)))
}

/// Max-norm residual of `∇²ψ² = 2(ψ∇²ψ + dψ⊗dψ)`.
pub fn hessian_square_residual(g: &MetricField, psi: &ScalarField) -> Result<f64> {
    same_grid(g.grid(), psi.grid())?;
    let curv = curvature(g);
    let sq = psi.map(|v| v * v);
    let lhs = hessian_with(g, &curv.christoffel, &sq);
    let hess = hessian_with(g, &curv.christoffel, psi);
    let dpsi = gradient(psi);
    let dd = SymTensorField::sym_outer(&dpsi, &dpsi)?;
    let rhs = hess.scale_pointwise(psi)?.axpy(1.0, &dd)?.scale(2.0);
    Ok(lhs.axpy(-1.0, &rhs)?.max_abs())
}

/// Four evaluations of `A = ((cṘ − Δ̇)ψ, ψ)` for traceless `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// `((cṘ − Δ̇)ψ, ψ)` from the variation formulas.
    pub direct: f64,
    /// `∫⟨h, −cψ² Ric + c ∇²ψ² − dψ⊗dψ⟩`, before the Hessian identity is applied.
    pub square_form: f64,
    /// `∫⟨h, cψ(2∇²ψ − ψ Ric) + (2c − 1) dψ⊗dψ⟩`.
    pub expanded: f64,
    /// `∫⟨h, h*⟩` with the traceless `h*`.
    pub traceless_form: f64,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

impl IdentityReport {
    /// Largest pairwise relative disagreement among `direct`, `expanded` and `traceless_form`.
    pub fn max_relative_residual(&self) -> f64 {
        let v = [self.direct, self.expanded, self.traceless_form];
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in (i + 1)..3 {
                worst = worst.max(relative_gap(v[i], v[j]));
            }
        }
        worst
    }

    pub fn residuals(&self) -> [(&'static str, f64); 3] {
        [
            ("direct-expanded", relative_gap(self.direct, self.expanded)),
            ("direct-traceless", relative_gap(self.direct, self.traceless_form)),
            ("expanded-traceless", relative_gap(self.expanded, self.traceless_form)),
        ]
    }
}

/// Evaluates `A` along the integration-by-parts chain. `h` must be `g`-traceless
/// up to `1e-8` relative to its size.
pub fn derivative_identity_check(
    g: &MetricField,
    psi: &ScalarField,
    h: &SymTensorField,
    c: f64,
) -> Result<IdentityReport> {
    same_grid(g.grid(), psi.grid())?;
    same_grid(g.grid(), h.grid())?;
    let max_trace = trace_unchecked(g, h).max_abs();
    if max_trace > 1e-8 * h.max_abs().max(1e-300) && max_trace > 1e-14 {
        return Err(Error::NotTraceless { max_trace });
    }
    let rdot = dot_scalar_curvature(g, h)?;
    let ld = dot_laplacian(g, h, psi)?;
    let image = rdot.zip_map(psi, |r, p| c * r * p)?.zip_map(&ld, |a, b| a - b)?;
    let direct = l2_inner(g, psi, &image)?;

    let curv = curvature(g);
    let sq = psi.map(|v| v * v);
    let hess_sq = hessian_with(g, &curv.christoffel, &sq);
    let dpsi = gradient(psi);
    let dd = SymTensorField::sym_outer(&dpsi, &dpsi)?;
    let square_integrand = curv
        .ricci
        .scale_pointwise(&sq)?
        .scale(-c)
        .axpy(c, &hess_sq)?
        .axpy(-1.0, &dd)?;
    let square_form = l2_inner_tensor(g, h, &square_integrand)?;

    let full = pairing_tensor(g, psi, c);
    let expanded = l2_inner_tensor(g, h, &full)?;
    let traceless_form = l2_inner_tensor(g, h, &traceless_unchecked(g, &full))?;
    Ok(IdentityReport { direct, square_form, expanded, traceless_form })
}

/// Sign-change cells of `ψ` and the size of `|dψ|_g` there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalReport {
    pub nodal_cells: usize,
    pub total_cells: usize,
    /// Minimum and median of `|dψ|_g` over nodal cells; `None` when `ψ` keeps its sign.
    pub min_gradient: Option<f64>,
    pub median_gradient: Option<f64>,
    /// Fraction of nodal cells with `|dψ|_g < threshold · max |dψ|_g`.
    pub below_fraction: f64,
    pub threshold: f64,
}

/// Locates grid cells whose corners carry both signs of `ψ` and samples
/// `|dψ|_g` at the corner closest to the nodal set.
pub fn nodal_diagnostics(g: &MetricField, psi: &ScalarField, threshold: f64) -> Result<NodalReport> {
    same_grid(g.grid(), psi.grid())?;
    let v = psi.values();
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if hi - lo <= 1e-14 * hi.abs().max(lo.abs()).max(1.0) {
        return Err(Error::ConstantField);
    }
    let grid = g.grid();
    let n = grid.dim();
    let dpsi = gradient(psi);
    let norm = inner_covector(g, &dpsi, &dpsi)?.map(f64::sqrt);
    let max_norm = norm.max_abs();
    let mut samples = Vec::new();
    for p in 0..grid.len() {
        let mut pos = false;
        let mut neg = false;
        let mut closest = p;
        for corner in 0..(1usize << n) {
            let mut q = p;
            for a in 0..n {
                if corner & (1 << a) != 0 {
                    q = grid.shifted(q, a, 1);
                }
            }
            pos |= v[q] >= 0.0;
            neg |= v[q] <= 0.0;
            if v[q].abs() < v[closest].abs() {
                closest = q;
            }
        }
        if pos && neg {
            samples.push(norm.values()[closest]);
        }
    }
    let cut = threshold * max_norm;
    let below = samples.iter().filter(|&&s| s < cut).count();
    let below_fraction = if samples.is_empty() { 0.0 } else { below as f64 / samples.len() as f64 };
    samples.sort_by(f64::total_cmp);
    Ok(NodalReport {
        nodal_cells: samples.len(),
        total_cells: grid.len(),
        min_gradient: samples.first().copied(),
        median_gradient: (!samples.is_empty()).then(|| samples[samples.len() / 2]),
        below_fraction,
        threshold,
    })
}

#[derive(Debug, Clone)]
pub struct BreakStep {
    pub multiplicity_before: usize,
    pub multiplicity_after: usize,
    pub t: f64,
    /// `‖h*‖_{L²}` of the chosen direction.
    pub direction_norm: f64,
}

#[derive(Debug, Clone)]
pub struct BreakResult {
    pub metric: MetricField,
    /// Kernel multiplicity before each step and after the last one.
    pub multiplicities: Vec<usize>,
    pub steps: Vec<BreakStep>,
}

impl BreakResult {
    /// `step,multiplicity,t` rows; `t` is empty on the final row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,multiplicity,t")?;
        for (i, m) in self.multiplicities.iter().enumerate() {
            match self.steps.get(i) {
                Some(s) => writeln!(w, "{i},{m},{:.17e}", s.t)?,
                None => writeln!(w, "{i},{m},")?,
            }
        }
        Ok(())
    }
}

/// `‖h*‖_{L²}` at or below which no first-order direction is available.
pub const DEGENERATE_NORM: f64 = 1e-10;

/// Number of halvings of `ε` tried by the line search.
pub const LINE_SEARCH_LEVELS: usize = 20;

/// Removes the kernel of `−Δ_g + c R_g` by successive deformations along `h*`.
///
/// Each round picks the kernel eigenfunction with the largest `‖h*‖` and tries
/// `t = ±ε 2^{−j}`, `j = 0..20`, largest first, accepting the first `t` whose
/// re-solved kernel is strictly smaller.
pub fn break_kernel(
    g0: &MetricField,
    c: f64,
    tau: f64,
    epsilon: f64,
    settings: &EigenSettings,
) -> Result<BreakResult> {
    check_coupling(c)?;
    if !(tau > 0.0 && epsilon > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "tolerance {tau} and step bound {epsilon} must be positive"
        )));
    }
    let mut g = g0.clone();
    let mut multiplicities = Vec::new();
    let mut steps = Vec::new();
    loop {
        let ker = kernel(&g, c, Some(tau), settings)?;
        let m = ker.len();
        multiplicities.push(m);
        if m == 0 {
            return Ok(BreakResult { metric: g, multiplicities, steps });
        }
        let mut best: Option<(f64, SymTensorField)> = None;
        for psi in &ker.eigenvectors {
            let hs = kernel_breaking_tensor(&g, psi, c)?;
            let norm = l2_inner_tensor(&g, &hs, &hs)?.sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, hs));
            }
        }
        let (norm, hs) = best.expect("kernel is nonempty");
        if norm <= DEGENERATE_NORM {
            return Err(Error::FirstOrderDegenerate { max_norm: norm });
        }
        let mut accepted = None;
        'search: for j in 0..LINE_SEARCH_LEVELS {
            let mag = epsilon * 0.5f64.powi(j as i32);
            for t in [mag, -mag] {
                let Ok(gt) = MetricField::new(g.tensor().axpy(t, &hs)?) else {
                    continue;
                };
                let mt = kernel(&gt, c, Some(tau), settings)?.len();
                if mt < m {
                    accepted = Some((t, gt, mt));
                    break 'search;
                }
            }
        }
        match accepted {
            Some((t, gt, mt)) => {
                steps.push(BreakStep { multiplicity_before: m, multiplicity_after: mt, t, direction_norm: norm });
                g = gt;
            }
            None => {
                let q = q_matrix(&g, &hs, c, &ker.eigenvectors)?;
                return Err(Error::LineSearchFailure { multiplicity: m, epsilon, q_matrix: q.entries });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::eigen::SolverChoice;
    use crate::geometry::trace;
    use crate::grid::{DiffScheme, Grid};
    use crate::recipes::{random_metric, random_scalar, random_tensor};

    fn dense() -> EigenSettings {
        EigenSettings { solver: SolverChoice::Dense, ..Default::default() }
    }

    #[test]
    fn flat_torus_q_vanishes_and_breaking_is_degenerate() {
        let grid = Grid::unit(3, 6, DiffScheme::Fd4).unwrap();
        let g = MetricField::flat(grid.clone());
        let h = random_tensor(&grid, 3, 0.2, 1);
        let q = q_operator(&g, &h, 0.125, Some(1e-6), &dense()).unwrap();
        assert_eq!(q.multiplicity(), 1);
        assert!(q.entries[0][0].abs() < 1e-10);
        let psi = ScalarField::constant(grid.clone(), 1.0);
        assert_eq!(kernel_breaking_tensor(&g, &psi, 0.125).unwrap().max_abs(), 0.0);
        assert!(matches!(
            break_kernel(&g, 0.125, 1e-6, 0.05, &dense()),
            Err(Error::FirstOrderDegenerate { .. })
        ));
    }

    #[test]
    fn excluded_couplings_are_rejected() {
        let grid = Grid::unit(3, 4, DiffScheme::Fd4).unwrap();
        let g = MetricField::flat(grid.clone());
        let psi = ScalarField::constant(grid, 1.0);
        for c in [0.0, 0.5] {
            assert!(matches!(kernel_breaking_tensor(&g, &psi, c), Err(Error::DisallowedCoupling(_))));
            assert!(matches!(break_kernel(&g, c, 1e-6, 0.1, &dense()), Err(Error::DisallowedCoupling(_))));
        }
    }

    #[test]
    fn empty_kernel_is_returned_unchanged() {
        let grid = Grid::unit(3, 6, DiffScheme::Fd4).unwrap();
        let g = random_metric(&grid, 5, 0.1, 1).unwrap();
        let res = break_kernel(&g, 0.3, 1e-6, 0.1, &dense()).unwrap();
        assert_eq!(res.multiplicities, vec![0]);
        assert!(res.steps.is_empty());
        assert_eq!(res.metric.tensor().values(), g.tensor().values());
    }

    #[test]
    fn h_star_is_traceless_and_identity_chain_closes() {
        let grid = Grid::unit(3, 8, DiffScheme::Spectral).unwrap();
        let g = random_metric(&grid, 11, 0.12, 1).unwrap();
        let psi = random_scalar(&grid, 12, 1.0, 1);
        let c = 0.125;
        let hs = kernel_breaking_tensor(&g, &psi, c).unwrap();
        assert!(trace(&g, &hs).unwrap().max_abs() <= 1e-12 * hs.max_abs());
        let rep = derivative_identity_check(&g, &psi, &hs, c).unwrap();
        let norm2 = l2_inner_tensor(&g, &hs, &hs).unwrap();
        assert!((rep.traceless_form - norm2).abs() <= 1e-12 * norm2);
        assert!(rep.max_relative_residual() < 1e-4, "{rep:?}");
        let zero = SymTensorField::zeros(grid.clone());
        let rep0 = derivative_identity_check(&g, &psi, &zero, c).unwrap();
        assert_eq!(rep0.max_relative_residual(), 0.0);
        let not_traceless = SymTensorField::identity(grid);
        assert!(matches!(
            derivative_identity_check(&g, &psi, &not_traceless, c),
            Err(Error::NotTraceless { .. })
        ));
    }

    #[test]
    fn hessian_square_identity_spectral() {
        let grid = Grid::unit(3, 16, DiffScheme::Spectral).unwrap();
        let g = random_metric(&grid, 21, 0.1, 1).unwrap();
        let psi = ScalarField::from_fn(grid.clone(), |x| {
            (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + 0.5 * (2.0 * PI * (x[1] + x[2])).sin()
        })
        .unwrap();
        assert!(hessian_square_residual(&g, &psi).unwrap() < 1e-6);
    }

    #[test]
    fn nodal_diagnostics_of_explicit_functions() {
        let grid = Grid::unit(3, 16, DiffScheme::Spectral).unwrap();
        let g = MetricField::flat(grid.clone());
        let s = ScalarField::from_fn(grid.clone(), |x| (2.0 * PI * x[0]).sin()).unwrap();
        let rep = nodal_diagnostics(&g, &s, 0.05).unwrap();
        assert!(rep.nodal_cells > 0);
        assert!((rep.min_gradient.unwrap() - 2.0 * PI).abs() < 1e-9);
        assert_eq!(rep.below_fraction, 0.0);
        let p = ScalarField::from_fn(grid.clone(), |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin())
            .unwrap();
        let rep = nodal_diagnostics(&g, &p, 0.05).unwrap();
        assert!(rep.below_fraction > 0.0 && rep.below_fraction < 0.25, "{rep:?}");
        let c = ScalarField::constant(grid, 1.0);
        assert!(matches!(nodal_diagnostics(&g, &c, 0.05), Err(Error::ConstantField)));
    }
}
