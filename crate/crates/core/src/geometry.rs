//! Discrete Riemannian tensor calculus on periodic grids.
//!
//! Every operation evaluates the classical coordinate formula pointwise,
//! with spatial derivatives taken by the grid's stencil. Indices are raised
//! with the cached pointwise inverse of the metric.

use crate::error::{Error, Result};
use crate::field::{
    same_grid, sym_index, sym_len, ChristoffelField, CovectorField, MetricField, ScalarField,
    SymTensorField,
};

/// Levi-Civita connection `Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
pub fn christoffel(g: &MetricField) -> ChristoffelField {
    let grid = g.grid().clone();
    let n = grid.dim();
    let m = sym_len(n);
    // dg[l][sym(i,j)] = ∂_l g_ij
    let dg: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|l| {
            (0..m)
                .map(|s| {
                    let comp: Vec<f64> = (0..grid.len()).map(|p| g.tensor().values()[p * m + s]).collect();
                    grid.d1(l, &comp)
                })
                .collect()
        })
        .collect();

    let mut values = vec![0.0; grid.len() * n * n * n];
    let mut lowered = vec![0.0; n];
    for p in 0..grid.len() {
        for i in 0..n {
            for j in i..n {
                // Γ_{l,ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
                for (l, low) in lowered.iter_mut().enumerate() {
                    *low = 0.5
                        * (dg[i][sym_index(n, j, l)][p] + dg[j][sym_index(n, i, l)][p]
                            - dg[l][sym_index(n, i, j)][p]);
                }
                for k in 0..n {
                    let v: f64 = (0..n).map(|l| g.ginv(p, k, l) * lowered[l]).sum();
                    values[((p * n + k) * n + i) * n + j] = v;
                    values[((p * n + k) * n + j) * n + i] = v;
                }
            }
        }
    }
    ChristoffelField::from_raw(grid, values)
}

/// Ricci tensor from the connection and its grid derivatives:
/// `R_ij = ∂_k Γ^k_ij − ∂_j Γ^k_ik + Γ^k_kl Γ^l_ij − Γ^k_jl Γ^l_ik`.
pub fn ricci(g: &MetricField) -> SymTensorField {
    ricci_with(g, &christoffel(g))
}

pub(crate) fn ricci_with(g: &MetricField, gamma: &ChristoffelField) -> SymTensorField {
    let grid = g.grid().clone();
    let n = grid.dim();
    let len = grid.len();

    // contracted[i] = Γ^k_ik
    let contracted: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..len).map(|p| (0..n).map(|k| gamma.at(p, k, i, k)).sum()).collect())
        .collect();
    // dcontracted[j][i] = ∂_j Γ^k_ik
    let dcontracted: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|j| contracted.iter().map(|c| grid.d1(j, c)).collect())
        .collect();

    let mut comps = vec![vec![vec![0.0; len]; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut acc = vec![0.0; len];
            for k in 0..n {
                let d = grid.d1(k, &gamma.component(k, i, j));
                acc.iter_mut().zip(&d).for_each(|(a, d)| *a += d);
            }
            for (p, a) in acc.iter_mut().enumerate() {
                *a -= dcontracted[j][i][p];
                let mut quad = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        quad += gamma.at(p, k, k, l) * gamma.at(p, l, i, j)
                            - gamma.at(p, k, j, l) * gamma.at(p, l, i, k);
                    }
                }
                *a += quad;
            }
            comps[i][j] = acc.clone();
            comps[j][i] = acc;
        }
    }
    SymTensorField::from_components(grid, &comps)
}

/// `R = g^ij R_ij`.
pub fn scalar_curvature(g: &MetricField) -> ScalarField {
    trace_unchecked(g, &ricci(g))
}

/// Christoffel symbols, Ricci tensor and scalar curvature computed together.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub christoffel: ChristoffelField,
    pub ricci: SymTensorField,
    pub scalar: ScalarField,
}

pub fn curvature(g: &MetricField) -> Curvature {
    let christoffel = christoffel(g);
    let ricci = ricci_with(g, &christoffel);
    let scalar = trace_unchecked(g, &ricci);
    Curvature {
        christoffel,
        ricci,
        scalar,
    }
}

/// Differential `df`.
pub fn gradient(f: &ScalarField) -> CovectorField {
    let grid = f.grid().clone();
    let comps: Vec<Vec<f64>> = (0..grid.dim()).map(|a| grid.d1(a, f.values())).collect();
    CovectorField::from_components(grid, &comps)
}

/// Covariant Hessian `∂_i∂_j f − Γ^k_ij ∂_k f`.
pub fn hessian(g: &MetricField, f: &ScalarField) -> Result<SymTensorField> {
    same_grid(g.grid(), f.grid())?;
    Ok(hessian_with(g, &christoffel(g), f))
}

pub(crate) fn hessian_with(g: &MetricField, gamma: &ChristoffelField, f: &ScalarField) -> SymTensorField {
    let grid = g.grid().clone();
    let n = grid.dim();
    let df: Vec<Vec<f64>> = (0..n).map(|a| grid.d1(a, f.values())).collect();
    let mut out = SymTensorField::zeros(grid.clone());
    for i in 0..n {
        for j in i..n {
            let dd = if i == j {
                grid.d2(i, f.values())
            } else {
                grid.d1(i, &df[j])
            };
            for p in 0..grid.len() {
                let conn: f64 = (0..n).map(|k| gamma.at(p, k, i, j) * df[k][p]).sum();
                out.set(p, i, j, dd[p] - conn);
            }
        }
    }
    out
}

/// Laplace–Beltrami operator, the analyst's sign: `Δ f = g^ij ∇_i∇_j f`, so `−Δ ≥ 0`.
pub fn laplace_beltrami(g: &MetricField, f: &ScalarField) -> Result<ScalarField> {
    Ok(trace_unchecked(g, &hessian(g, f)?))
}

pub(crate) fn laplace_with(g: &MetricField, gamma: &ChristoffelField, f: &ScalarField) -> ScalarField {
    trace_unchecked(g, &hessian_with(g, gamma, f))
}

/// Symmetrized covariant derivative of a 1-form, `½(∇_iα_j + ∇_jα_i)`.
///
/// Pairing with a symmetric tensor only sees this part of `∇α`.
pub fn sym_covariant_derivative(g: &MetricField, alpha: &CovectorField) -> Result<SymTensorField> {
    same_grid(g.grid(), alpha.grid())?;
    let gamma = christoffel(g);
    let grid = g.grid().clone();
    let n = grid.dim();
    let comps: Vec<Vec<f64>> = (0..n).map(|a| alpha.component(a)).collect();
    // d[i][j] = ∂_i α_j
    let d: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| comps.iter().map(|c| grid.d1(i, c)).collect())
        .collect();
    let mut out = SymTensorField::zeros(grid.clone());
    for p in 0..grid.len() {
        for i in 0..n {
            for j in i..n {
                let conn: f64 = (0..n).map(|k| gamma.at(p, k, i, j) * alpha.at(p, k)).sum();
                out.set(p, i, j, 0.5 * (d[i][j][p] + d[j][i][p]) - conn);
            }
        }
    }
    Ok(out)
}

/// Formal adjoint of `∇` on symmetric 2-tensors:
/// `(δT)_j = −g^ik (∂_k T_ij − Γ^l_ki T_lj − Γ^l_kj T_il)`.
pub fn divergence(g: &MetricField, t: &SymTensorField) -> Result<CovectorField> {
    same_grid(g.grid(), t.grid())?;
    Ok(divergence_with(g, &christoffel(g), t))
}

pub(crate) fn divergence_with(g: &MetricField, gamma: &ChristoffelField, t: &SymTensorField) -> CovectorField {
    let grid = g.grid().clone();
    let n = grid.dim();
    let m = sym_len(n);
    // dt[k][sym(i,j)] = ∂_k T_ij
    let dt: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|k| (0..m).map(|s| {
            let comp: Vec<f64> = (0..grid.len()).map(|p| t.values()[p * m + s]).collect();
            grid.d1(k, &comp)
        }).collect())
        .collect();
    let mut out = vec![0.0; grid.len() * n];
    for p in 0..grid.len() {
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for k in 0..n {
                    let gik = g.ginv(p, i, k);
                    if gik == 0.0 {
                        continue;
                    }
                    let mut cov = dt[k][sym_index(n, i, j)][p];
                    for l in 0..n {
                        cov -= gamma.at(p, l, k, i) * t.at(p, l, j) + gamma.at(p, l, k, j) * t.at(p, i, l);
                    }
                    acc += gik * cov;
                }
            }
            out[p * n + j] = -acc;
        }
    }
    CovectorField::from_raw(grid, out)
}

/// Formal adjoint of `d` on 1-forms: `δβ = −g^ij (∂_i β_j − Γ^k_ij β_k)`.
pub fn codifferential(g: &MetricField, beta: &CovectorField) -> Result<ScalarField> {
    same_grid(g.grid(), beta.grid())?;
    Ok(codifferential_with(g, &christoffel(g), beta))
}

pub(crate) fn codifferential_with(g: &MetricField, gamma: &ChristoffelField, beta: &CovectorField) -> ScalarField {
    let grid = g.grid().clone();
    let n = grid.dim();
    let comps: Vec<Vec<f64>> = (0..n).map(|a| beta.component(a)).collect();
    let d: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| comps.iter().map(|c| grid.d1(i, c)).collect())
        .collect();
    let values = (0..grid.len())
        .map(|p| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let conn: f64 = (0..n).map(|k| gamma.at(p, k, i, j) * beta.at(p, k)).sum();
                    acc += g.ginv(p, i, j) * (d[i][j][p] - conn);
                }
            }
            -acc
        })
        .collect();
    ScalarField::from_raw(grid, values)
}

/// `δ²h = δ(δh)`, the formal adjoint of the Hessian.
pub fn double_divergence(g: &MetricField, h: &SymTensorField) -> Result<ScalarField> {
    same_grid(g.grid(), h.grid())?;
    let gamma = christoffel(g);
    Ok(double_divergence_with(g, &gamma, h))
}

pub(crate) fn double_divergence_with(g: &MetricField, gamma: &ChristoffelField, h: &SymTensorField) -> ScalarField {
    codifferential_with(g, gamma, &divergence_with(g, gamma, h))
}

/// `tr_g h = g^ij h_ij`.
pub fn trace(g: &MetricField, h: &SymTensorField) -> Result<ScalarField> {
    same_grid(g.grid(), h.grid())?;
    Ok(trace_unchecked(g, h))
}

pub(crate) fn trace_unchecked(g: &MetricField, h: &SymTensorField) -> ScalarField {
    let grid = g.grid().clone();
    let n = grid.dim();
    let values = (0..grid.len())
        .map(|p| {
            let mut acc = 0.0;
            for i in 0..n {
                acc += g.ginv(p, i, i) * h.at(p, i, i);
                for j in i + 1..n {
                    acc += 2.0 * g.ginv(p, i, j) * h.at(p, i, j);
                }
            }
            acc
        })
        .collect();
    ScalarField::from_raw(grid, values)
}

/// Pointwise `⟨A, B⟩ = g^ia g^jb A_ij B_ab`.
pub fn inner(g: &MetricField, a: &SymTensorField, b: &SymTensorField) -> Result<ScalarField> {
    same_grid(g.grid(), a.grid())?;
    same_grid(g.grid(), b.grid())?;
    Ok(inner_unchecked(g, a, b))
}

pub(crate) fn inner_unchecked(g: &MetricField, a: &SymTensorField, b: &SymTensorField) -> ScalarField {
    let grid = g.grid().clone();
    let n = grid.dim();
    let mut raised = vec![0.0; n * n];
    let values = (0..grid.len())
        .map(|p| {
            // raised = g^-1 A g^-1
            for i in 0..n {
                for j in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        let gik = g.ginv(p, i, k);
                        for l in 0..n {
                            acc += gik * a.at(p, k, l) * g.ginv(p, l, j);
                        }
                    }
                    raised[i * n + j] = acc;
                }
            }
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += raised[i * n + j] * b.at(p, i, j);
                }
            }
            acc
        })
        .collect();
    ScalarField::from_raw(grid, values)
}

/// Pointwise `⟨α, β⟩ = g^ij α_i β_j`.
pub fn inner_covector(g: &MetricField, a: &CovectorField, b: &CovectorField) -> Result<ScalarField> {
    same_grid(g.grid(), a.grid())?;
    same_grid(g.grid(), b.grid())?;
    let grid = g.grid().clone();
    let n = grid.dim();
    let values = (0..grid.len())
        .map(|p| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += g.ginv(p, i, j) * a.at(p, i) * b.at(p, j);
                }
            }
            acc
        })
        .collect();
    Ok(ScalarField::from_raw(grid, values))
}

/// Traceless part `V − (1/n) tr_g V g`.
pub fn traceless(g: &MetricField, v: &SymTensorField) -> Result<SymTensorField> {
    same_grid(g.grid(), v.grid())?;
    Ok(traceless_unchecked(g, v))
}

pub(crate) fn traceless_unchecked(g: &MetricField, v: &SymTensorField) -> SymTensorField {
    let n = g.dim();
    let tr = trace_unchecked(g, v);
    let mut out = v.clone();
    for p in 0..g.grid().len() {
        let s = tr.values()[p] / n as f64;
        for i in 0..n {
            for j in i..n {
                out.set(p, i, j, v.at(p, i, j) - s * g.g(p, i, j));
            }
        }
    }
    out
}

/// Quadrature weight per node: cell volume times `√det g`.
pub fn volume_element(g: &MetricField) -> ScalarField {
    let cell = g.grid().cell_volume();
    ScalarField::from_raw(g.grid().clone(), g.sqrt_det().iter().map(|s| cell * s).collect())
}

pub fn volume(g: &MetricField) -> f64 {
    volume_element(g).values().iter().sum()
}

/// `∫ f₁ f₂ dV_g` by the periodic trapezoidal rule.
pub fn l2_inner(g: &MetricField, f1: &ScalarField, f2: &ScalarField) -> Result<f64> {
    same_grid(g.grid(), f1.grid())?;
    same_grid(g.grid(), f2.grid())?;
    Ok(weighted_sum(g, f1.values().iter().zip(f2.values()).map(|(a, b)| a * b)))
}

/// `∫ f dV_g`.
pub fn integrate(g: &MetricField, f: &ScalarField) -> Result<f64> {
    same_grid(g.grid(), f.grid())?;
    Ok(weighted_sum(g, f.values().iter().copied()))
}

/// `∫ ⟨A, B⟩ dV_g`.
pub fn l2_inner_tensor(g: &MetricField, a: &SymTensorField, b: &SymTensorField) -> Result<f64> {
    let pointwise = inner(g, a, b)?;
    Ok(weighted_sum(g, pointwise.values().iter().copied()))
}

/// `∫ ⟨α, β⟩ dV_g`.
pub fn l2_inner_covector(g: &MetricField, a: &CovectorField, b: &CovectorField) -> Result<f64> {
    let pointwise = inner_covector(g, a, b)?;
    Ok(weighted_sum(g, pointwise.values().iter().copied()))
}

fn weighted_sum(g: &MetricField, values: impl Iterator<Item = f64>) -> f64 {
    let cell = g.grid().cell_volume();
    values.zip(g.sqrt_det()).map(|(v, s)| v * s).sum::<f64>() * cell
}

/// `ĝ = u^{4/(n−2)} g` for a positive conformal factor `u`.
pub fn conformal_rescale(g: &MetricField, u: &ScalarField) -> Result<MetricField> {
    same_grid(g.grid(), u.grid())?;
    if let Some((node, &value)) = u.values().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositiveConformalFactor { node, value });
    }
    let n = g.dim() as f64;
    let factor = u.map(|v| v.powf(4.0 / (n - 2.0)));
    MetricField::new(g.tensor().scale_pointwise(&factor)?)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::{DiffScheme, Grid};

    fn conformal_metric(grid: &std::sync::Arc<Grid>, phi: impl Fn(&[f64]) -> f64) -> MetricField {
        let t = SymTensorField::from_fn(grid.clone(), |x, i, j| {
            if i == j {
                (2.0 * phi(x)).exp()
            } else {
                0.0
            }
        })
        .unwrap();
        MetricField::new(t).unwrap()
    }

    #[test]
    fn flat_metric_has_vanishing_curvature_exactly() {
        let grid = Grid::new(vec![6, 5, 4], vec![1.0, 2.0, 3.0], DiffScheme::Fd4).unwrap();
        let g = MetricField::flat(grid.clone()).scaled(2.5).unwrap();
        let c = curvature(&g);
        assert_eq!(c.christoffel.max_abs(), 0.0);
        assert_eq!(c.ricci.max_abs(), 0.0);
        assert_eq!(c.scalar.max_abs(), 0.0);
    }

    #[test]
    fn trace_identities() {
        let grid = Grid::unit(3, 5, DiffScheme::Fd4).unwrap();
        let g = conformal_metric(&grid, |x| 0.2 * (2.0 * PI * x[0]).sin());
        let tr = trace(&g, g.tensor()).unwrap();
        assert!(tr.values().iter().all(|v| (v - 3.0).abs() < 1e-13));
        let tl = traceless(&g, g.tensor()).unwrap();
        assert!(tl.max_abs() < 1e-14);
        let h = SymTensorField::from_fn(grid.clone(), |x, i, j| (x[i] + 2.0 * x[j]).cos()).unwrap();
        let a = inner(&g, &h, g.tensor()).unwrap();
        let b = trace(&g, &h).unwrap();
        for (a, b) in a.values().iter().zip(b.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        let tl = traceless(&g, &h).unwrap();
        assert!(trace(&g, &tl).unwrap().max_abs() < 1e-13);
        let tl2 = traceless(&g, &tl).unwrap();
        for (a, b) in tl.values().iter().zip(tl2.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn metric_is_divergence_free() {
        let grid = Grid::unit(3, 8, DiffScheme::Fd4).unwrap();
        let t = SymTensorField::from_fn(grid.clone(), |x, i, j| {
            let base = if i == j { 1.0 } else { 0.0 };
            base + 0.1 * (2.0 * PI * (x[0] + (i + j) as f64 * x[1])).sin()
        })
        .unwrap();
        let g = MetricField::new(t).unwrap();
        let d = divergence(&g, g.tensor()).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn volume_and_l2_of_flat_unit_torus() {
        let grid = Grid::unit(3, 8, DiffScheme::Fd4).unwrap();
        let g = MetricField::flat(grid.clone());
        assert!((volume(&g) - 1.0).abs() < 1e-14);
        let s = ScalarField::from_fn(grid.clone(), |x| (2.0 * PI * x[0]).sin()).unwrap();
        assert!((l2_inner(&g, &s, &s).unwrap() - 0.5).abs() < 1e-14);
        let g3 = g.scaled(3.0).unwrap();
        assert!((volume(&g3) - 3f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn laplacian_of_fourier_mode() {
        let grid = Grid::unit(3, 12, DiffScheme::Spectral).unwrap();
        let g = MetricField::flat(grid.clone());
        let f = ScalarField::from_fn(grid.clone(), |x| (2.0 * PI * x[0]).sin()).unwrap();
        let lf = laplace_beltrami(&g, &f).unwrap();
        for (l, f) in lf.values().iter().zip(f.values()) {
            assert!((l + 4.0 * PI * PI * f).abs() < 1e-10);
        }
        let c = ScalarField::constant(grid, 2.0);
        assert_eq!(laplace_beltrami(&g, &c).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn conformal_rescale_rejects_non_positive_factor() {
        let grid = Grid::unit(3, 4, DiffScheme::Fd4).unwrap();
        let g = MetricField::flat(grid.clone());
        let mut u = vec![1.0; grid.len()];
        u[3] = 0.0;
        let u = ScalarField::new(grid.clone(), u).unwrap();
        assert!(matches!(
            conformal_rescale(&g, &u),
            Err(Error::NonPositiveConformalFactor { node: 3, .. })
        ));
        let c = ScalarField::constant(grid, 2.0);
        let gc = conformal_rescale(&g, &c).unwrap();
        assert!((gc.g(0, 1, 1) - 16.0).abs() < 1e-14);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = Grid::unit(3, 4, DiffScheme::Fd4).unwrap();
        let b = Grid::unit(3, 6, DiffScheme::Fd4).unwrap();
        let g = MetricField::flat(a);
        let f = ScalarField::constant(b, 1.0);
        assert!(matches!(hessian(&g, &f), Err(Error::GridMismatch)));
    }
}
