//! First variations of scalar curvature and the Laplacian, and linear metric curves.

use std::fmt;
use std::sync::Arc;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::field::{same_grid, MetricField, ScalarField, SymTensorField};
use crate::geometry::{
    curvature, divergence_with, double_divergence_with, gradient, hessian_with,
    inner_covector, inner_unchecked, laplace_with, trace_unchecked,
};

/// `Ṙ = −⟨h, Ric⟩ + δ²h − Δ tr h`, the derivative of `R_{g+th}` at `t = 0`.
pub fn dot_scalar_curvature(g: &MetricField, h: &SymTensorField) -> Result<ScalarField> {
    same_grid(g.grid(), h.grid())?;
    let curv = curvature(g);
    let ric_term = inner_unchecked(g, h, &curv.ricci);
    let dd = double_divergence_with(g, &curv.christoffel, h);
    let lap_tr = laplace_with(g, &curv.christoffel, &trace_unchecked(g, h));
    Ok(ScalarField::from_raw(
        g.grid().clone(),
        (0..g.grid().len())
            .map(|p| -ric_term.values()[p] + dd.values()[p] - lap_tr.values()[p])
            .collect(),
    ))
}

/// `Δ̇f = −⟨h, ∇²f⟩ + ⟨δh + ½ d tr h, df⟩`, the derivative of `Δ_{g+th} f` at `t = 0`.
pub fn dot_laplacian(g: &MetricField, h: &SymTensorField, f: &ScalarField) -> Result<ScalarField> {
    same_grid(g.grid(), h.grid())?;
    same_grid(g.grid(), f.grid())?;
    let curv = curvature(g);
    let hess = hessian_with(g, &curv.christoffel, f);
    let delta_h = divergence_with(g, &curv.christoffel, h);
    let dtr = gradient(&trace_unchecked(g, h));
    let beta = delta_h.axpy(0.5, &dtr)?;
    let pair = inner_covector(g, &beta, &gradient(f))?;
    let hh = inner_unchecked(g, h, &hess);
    Ok(ScalarField::from_raw(
        g.grid().clone(),
        hh.values().iter().zip(pair.values()).map(|(a, b)| b - a).collect(),
    ))
}

type Evaluator = Arc<dyn Fn(f64) -> Result<MetricField> + Send + Sync>;

/// A curve of metrics through `g₀` with initial velocity `h`.
///
/// The default evaluator is the straight line `g₀ + t h`; any other analytic
/// curve with the same base point and velocity can be plugged in.
#[derive(Clone)]
pub struct MetricCurve {
    base: MetricField,
    direction: SymTensorField,
    evaluator: Option<Evaluator>,
    range: (f64, f64),
}

impl fmt::Debug for MetricCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricCurve")
            .field("range", &self.range)
            .field("custom_evaluator", &self.evaluator.is_some())
            .finish()
    }
}

impl MetricCurve {
    pub fn linear(base: MetricField, direction: SymTensorField) -> Result<Self> {
        same_grid(base.grid(), direction.grid())?;
        let range = spd_range(&base, &direction);
        Ok(MetricCurve { base, direction, evaluator: None, range })
    }

    /// Curve with a custom evaluator; `f(0)` must be the base metric.
    pub fn with_evaluator(
        base: MetricField,
        direction: SymTensorField,
        f: impl Fn(f64) -> Result<MetricField> + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut curve = MetricCurve::linear(base, direction)?;
        curve.evaluator = Some(Arc::new(f));
        Ok(curve)
    }

    pub fn base(&self) -> &MetricField {
        &self.base
    }

    pub fn direction(&self) -> &SymTensorField {
        &self.direction
    }

    /// Open interval `(t_min, t_max)` on which `g₀ + t h` stays positive definite.
    pub fn spd_range(&self) -> (f64, f64) {
        self.range
    }

    pub fn at(&self, t: f64) -> Result<MetricField> {
        if t == 0.0 {
            return Ok(self.base.clone());
        }
        if let Some(f) = &self.evaluator {
            return f(t).map_err(|e| match e {
                Error::SingularMetric { .. } => Error::SpdViolation { t },
                other => other,
            });
        }
        if !(t > self.range.0 && t < self.range.1) {
            return Err(Error::SpdViolation { t });
        }
        MetricField::new(self.base.tensor().axpy(t, &self.direction)?)
            .map_err(|_| Error::SpdViolation { t })
    }
}

/// Pointwise generalized eigenvalues `μ` of `h` relative to `g₀` bound the
/// admissible `t`: `1 + t μ > 0` for every node and every `μ`.
fn spd_range(g: &MetricField, h: &SymTensorField) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for p in 0..g.grid().len() {
        let chol = g
            .tensor()
            .matrix_at(p)
            .cholesky()
            .expect("metric is positive definite");
        let l_inv = chol.l().try_inverse().expect("triangular factor is invertible");
        let m = &l_inv * h.matrix_at(p) * l_inv.transpose();
        for mu in SymmetricEigen::new(m).eigenvalues.iter() {
            if *mu < 0.0 {
                hi = hi.min(-1.0 / mu);
            } else if *mu > 0.0 {
                lo = lo.max(-1.0 / mu);
            }
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{integrate, laplace_beltrami, ricci, scalar_curvature};
    use crate::grid::{DiffScheme, Grid};
    use crate::recipes::{random_metric, random_scalar, random_tensor};

    #[test]
    fn homothety_direction() {
        let grid = Grid::unit(3, 8, DiffScheme::Spectral).unwrap();
        let g = random_metric(&grid, 4, 0.15, 1).unwrap();
        let r = scalar_curvature(&g);
        let rdot = dot_scalar_curvature(&g, g.tensor()).unwrap();
        for (a, b) in rdot.values().iter().zip(r.values()) {
            assert!((a + b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
        let f = random_scalar(&grid, 1, 1.0, 2);
        let ld = dot_laplacian(&g, g.tensor(), &f).unwrap();
        let l = laplace_beltrami(&g, &f).unwrap();
        for (a, b) in ld.values().iter().zip(l.values()) {
            assert!((a + b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        let c = ScalarField::constant(grid.clone(), 3.0);
        assert_eq!(dot_laplacian(&g, &random_tensor(&grid, 2, 0.3, 1), &c).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn integrated_scalar_curvature_variation_for_traceless_h() {
        let grid = Grid::unit(3, 12, DiffScheme::Spectral).unwrap();
        let g = random_metric(&grid, 7, 0.15, 1).unwrap();
        let h = crate::geometry::traceless(&g, &random_tensor(&grid, 8, 0.3, 1)).unwrap();
        let lhs = integrate(&g, &dot_scalar_curvature(&g, &h).unwrap()).unwrap();
        let rhs = -integrate(&g, &inner_unchecked(&g, &h, &ricci(&g))).unwrap();
        assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn linear_in_direction() {
        let grid = Grid::unit(3, 6, DiffScheme::Fd4).unwrap();
        let g = random_metric(&grid, 1, 0.1, 1).unwrap();
        let h1 = random_tensor(&grid, 2, 0.2, 1);
        let h2 = random_tensor(&grid, 3, 0.2, 1);
        let sum = h1.axpy(2.5, &h2).unwrap();
        let a = dot_scalar_curvature(&g, &h1).unwrap();
        let b = dot_scalar_curvature(&g, &h2).unwrap();
        let s = dot_scalar_curvature(&g, &sum).unwrap();
        for p in 0..grid.len() {
            let e = a.values()[p] + 2.5 * b.values()[p];
            assert!((s.values()[p] - e).abs() < 1e-10 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn curve_range_and_evaluation() {
        let grid = Grid::unit(3, 4, DiffScheme::Fd4).unwrap();
        let g = MetricField::flat(grid.clone());
        let h = SymTensorField::from_fn(grid.clone(), |_, i, j| {
            if i == j && i == 0 {
                -0.5
            } else {
                0.0
            }
        })
        .unwrap();
        let curve = MetricCurve::linear(g.clone(), h).unwrap();
        let (lo, hi) = curve.spd_range();
        assert_eq!(lo, f64::NEG_INFINITY);
        assert!((hi - 2.0).abs() < 1e-14);
        assert!(curve.at(1.9).is_ok());
        assert!(matches!(curve.at(2.5), Err(Error::SpdViolation { .. })));
        assert_eq!(curve.at(0.0).unwrap().tensor().values(), g.tensor().values());
        let homothety = MetricCurve::with_evaluator(g.clone(), g.tensor().clone(), {
            let g = g.clone();
            move |t| g.scaled(1.0 + t)
        })
        .unwrap();
        assert!((homothety.at(1.0).unwrap().g(0, 0, 0) - 2.0).abs() < 1e-14);
    }
}
