//! Kernel fixtures, first-order eigenvalue velocities and kernel breaking on small grids.

use yamabe_core::eigen::EigenSettings;
use yamabe_core::geometry::{scalar_curvature, laplace_beltrami, traceless};
use yamabe_core::operators::{coupling_constant, conformal_covariance_check, kernel};
use yamabe_core::perturbation::*;
use yamabe_core::recipes::{conformal_factor, random_metric, random_scalar, random_tensor};
use yamabe_core::{DiffScheme, Grid, MetricField, ScalarField, SymTensorField};

const C3: f64 = 0.125;

/// Central difference in `s`, Richardson-extrapolated to remove the `s²` term.
fn parameter_derivative(
    g: &MetricField,
    h: &SymTensorField,
    s: f64,
    f: impl Fn(&MetricField) -> ScalarField,
) -> Vec<f64> {
    let central = |s: f64| -> Vec<f64> {
        let plus = f(&MetricField::new(g.tensor().axpy(s, h).unwrap()).unwrap());
        let minus = f(&MetricField::new(g.tensor().axpy(-s, h).unwrap()).unwrap());
        plus.values().iter().zip(minus.values()).map(|(a, b)| (a - b) / (2.0 * s)).collect()
    };
    let (coarse, fine) = (central(s), central(s / 2.0));
    coarse.iter().zip(&fine).map(|(a, b)| (4.0 * b - a) / 3.0).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn variation_formulas_match_parameter_differences() {
    for seed in 0..3 {
        let mut errs = Vec::new();
        for n in [12, 24] {
            let grid = Grid::unit(3, n, DiffScheme::Fd4).unwrap();
            let g = random_metric(&grid, seed, 0.1, 1).unwrap();
            let h = random_tensor(&grid, seed + 100, 0.3, 1);
            let f = random_scalar(&grid, seed + 200, 1.0, 1);
            let rdot = dot_scalar_curvature(&g, &h).unwrap();
            let fd = parameter_derivative(&g, &h, 1e-2, scalar_curvature);
            let ldot = dot_laplacian(&g, &h, &f).unwrap();
            let fdl = parameter_derivative(&g, &h, 1e-2, |m| laplace_beltrami(m, &f).unwrap());
            errs.push((
                max_diff(rdot.values(), &fd) / rdot.max_abs(),
                max_diff(ldot.values(), &fdl) / ldot.max_abs(),
            ));
        }
        // Halving the spacing should cut a fourth-order error by about 16.
        assert!(errs[0].0 / errs[1].0 > 11.0, "{errs:?}");
        assert!(errs[0].1 / errs[1].1 > 11.0, "{errs:?}");
    }
}

#[test]
fn conformal_kernel_transport_refines() {
    let residual = |n: usize| {
        let grid = Grid::unit(3, n, DiffScheme::Spectral).unwrap();
        let g = MetricField::flat(grid.clone());
        let u = conformal_factor(&grid, 3, 0.3, 1).unwrap();
        let rep = conformal_covariance_check(&g, &u, 4, Some(1e-4), &EigenSettings::default()).unwrap();
        assert!(rep.counts_agree);
        assert_eq!(rep.before.counts.zero, 1);
        rep.kernel_residuals[0]
    };
    let (r8, r12) = (residual(8), residual(12));
    assert!(r12 < 0.1 * r8, "{r8} {r12}");
}

#[test]
fn coarse_fixture_pipeline() {
    let settings = EigenSettings::default();
    let recipe = CrossingRecipe { seed: 1, ..Default::default() };
    let (curve, km) = recipe.build(C3, &settings).unwrap();
    assert!(km.eigenvalue.abs() < recipe.value_tol);
    assert!(km.t > 0.0 && km.t < curve.spd_range().1);

    let g = &km.metric;
    let spectrum = kernel(g, C3, Some(1e-6), &settings).unwrap();
    assert_eq!(spectrum.counts.zero, 1);

    // First-order velocity of the crossing branch against a tracked difference.
    let h = curve.direction();
    let q = q_matrix(g, h, C3, std::slice::from_ref(&km.psi)).unwrap();
    let s = 1e-3;
    let trace = track_branch(&curve, C3, &[km.t, km.t + s], recipe.branch + 2, &settings).unwrap();
    let slope = (trace.values[1][recipe.branch] - trace.values[0][recipe.branch]) / s;
    assert!((slope - q.entries[0][0]).abs() < 5e-2, "{slope} vs {:?}", q.entries);

    let hs = kernel_breaking_tensor(g, &km.psi, C3).unwrap();
    let rep = derivative_identity_check(g, &km.psi, &traceless(g, h).unwrap(), C3).unwrap();
    assert!(rep.max_relative_residual() < 1e-2, "{rep:?}");
    assert!(hs.max_abs() > 0.0);

    let nodal = nodal_diagnostics(g, &km.psi, 1e-3).unwrap();
    assert!(nodal.nodal_cells > 0);

    let broken = break_kernel(g, C3, 1e-6, 0.05, &settings).unwrap();
    assert_eq!(broken.multiplicities, vec![1, 0]);
    let after = kernel(&broken.metric, C3, Some(1e-6), &settings).unwrap();
    assert_eq!(after.counts.zero, 0);
}

#[test]
fn flat_torus_is_first_order_degenerate() {
    let grid = Grid::unit(3, 6, DiffScheme::Spectral).unwrap();
    let g = MetricField::flat(grid);
    let err = break_kernel(&g, coupling_constant(3).unwrap(), 1e-8, 0.05, &EigenSettings::default()).unwrap_err();
    assert!(matches!(err, yamabe_core::Error::FirstOrderDegenerate { .. }), "{err}");
}
