//! Lowest eigenpairs of a real symmetric sparse matrix.
//!
//! Small problems go to a dense symmetric eigensolver. Larger ones use a
//! thick-restarted block Krylov (block Lanczos with full reorthogonalization
//! and Rayleigh–Ritz extraction). Starting blocks come from a seeded ChaCha
//! generator, so results are reproducible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    #[default]
    Auto,
    Dense,
    ShiftInvert,
    Iterative,
}

#[derive(Debug, Clone)]
pub struct EigenSettings {
    pub solver: SolverChoice,
    pub seed: u64,
    /// Residual tolerance relative to the matrix norm bound.
    pub tol: f64,
    pub max_restarts: usize,
    /// `Auto` uses the full dense solver up to this many nodes,
    pub dense_max_nodes: usize,
    /// then shift-invert with a dense factorization up to this many,
    /// and the unshifted block Krylov solver beyond.
    pub shift_invert_max_nodes: usize,
}

impl Default for EigenSettings {
    fn default() -> Self {
        EigenSettings {
            solver: SolverChoice::Auto,
            seed: 0,
            tol: 1e-10,
            max_restarts: 400,
            dense_max_nodes: 600,
            shift_invert_max_nodes: 4096,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal in the Euclidean inner product.
    pub vectors: Vec<Vec<f64>>,
    /// `‖A v − λ v‖` per pair.
    pub residuals: Vec<f64>,
    /// Restart count for the iterative solver, 0 for dense.
    pub iterations: usize,
}

pub fn lowest(a: &CsrMatrix, k: usize, settings: &EigenSettings) -> Result<EigenPairs> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidParameters(format!(
            "requested {k} eigenpairs of a {n}-node operator"
        )));
    }
    let choice = match settings.solver {
        SolverChoice::Auto if n <= settings.dense_max_nodes => SolverChoice::Dense,
        SolverChoice::Auto if n <= settings.shift_invert_max_nodes => SolverChoice::ShiftInvert,
        SolverChoice::Auto => SolverChoice::Iterative,
        other => other,
    };
    // Krylov blocks need room to work; tiny or near-full requests are cheaper dense.
    if choice == SolverChoice::Dense || 3 * block_size(k) >= n {
        return lowest_dense(a, k);
    }
    match choice {
        SolverChoice::ShiftInvert => lowest_shift_invert(a, k, settings),
        _ => lowest_krylov(a, k, settings),
    }
}

fn residual(a: &CsrMatrix, x: &[f64], lambda: f64) -> f64 {
    let ax = a.matvec(x);
    ax.iter()
        .zip(x)
        .map(|(p, q)| (p - lambda * q).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn lowest_dense(a: &CsrMatrix, k: usize) -> Result<EigenPairs> {
    let eig = SymmetricEigen::new(a.to_dense());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let lambda = eig.eigenvalues[i];
        residuals.push(residual(a, &v, lambda));
        values.push(lambda);
        vectors.push(v);
    }
    Ok(EigenPairs { values, vectors, residuals, iterations: 0 })
}

fn block_size(k: usize) -> usize {
    (k + 4).max(2 * k)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthogonalizes `v` against `basis` twice (classical Gram–Schmidt with
/// reorthogonalization) and returns the norm of the result.
fn orthogonalize(basis: &[Vec<f64>], v: &mut [f64]) -> f64 {
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.par_iter().map(|b| dot(b, v)).collect();
        v.par_iter_mut().enumerate().with_min_len(1024).for_each(|(i, vi)| {
            let s: f64 = basis.iter().zip(&coeffs).map(|(b, c)| c * b[i]).sum();
            *vi -= s;
        });
    }
    norm(v)
}

/// Linear combinations `Σ_j cols[j] * coeff[(j, c)]` for each output column `c`.
fn combine(cols: &[Vec<f64>], coeff: &DMatrix<f64>, take: usize) -> Vec<Vec<f64>> {
    let n = cols[0].len();
    (0..take)
        .into_par_iter()
        .map(|c| {
            let mut out = vec![0.0; n];
            for (j, col) in cols.iter().enumerate() {
                let w = coeff[(j, c)];
                if w != 0.0 {
                    for (o, x) in out.iter_mut().zip(col) {
                        *o += w * x;
                    }
                }
            }
            out
        })
        .collect()
}

fn lowest_krylov(a: &CsrMatrix, k: usize, settings: &EigenSettings) -> Result<EigenPairs> {
    let anorm = a.gershgorin_bound().max(f64::MIN_POSITIVE);
    let (values, vectors, iterations) = krylov(|x| a.matvec(x), a.dim(), anorm, k, settings)?;
    let residuals = vectors.iter().zip(&values).map(|(v, &l)| residual(a, v, l)).collect();
    Ok(EigenPairs { values, vectors, residuals, iterations })
}

/// Shift-invert: block Krylov on `−(A − σI)^{−1}`, whose lowest eigenvalues
/// `−1/(λ − σ)` belong to the lowest `λ` and are well separated from the rest.
/// `σ` is lowered until `A − σI` admits a Cholesky factor, which certifies
/// that it lies below the spectrum.
fn lowest_shift_invert(a: &CsrMatrix, k: usize, settings: &EigenSettings) -> Result<EigenPairs> {
    let n = a.dim();
    let dense = a.to_dense();
    let mut sigma = -(1e-3 * a.gershgorin_bound()).max(1.0);
    let chol = loop {
        let shifted = &dense - DMatrix::from_diagonal_element(n, n, sigma);
        if let Some(c) = shifted.cholesky() {
            break c;
        }
        sigma *= 4.0;
        if !sigma.is_finite() {
            return Err(Error::ConvergenceFailure { residual: f64::INFINITY, iterations: 0 });
        }
    };
    drop(dense);
    let solve = |x: &[f64]| -> Vec<f64> {
        let y = chol.solve(&DVector::from_column_slice(x));
        y.iter().map(|v| -v).collect()
    };
    // ‖(A − σI)^{−1}‖ ≤ 1/(λ_min − σ); the diagonal of the factor bounds it from below.
    let factor = chol.l_dirty();
    let inv_norm = (0..n).map(|i| 1.0 / factor[(i, i)].powi(2)).fold(0.0, f64::max);
    let (theta, vectors, iterations) = krylov(solve, n, inv_norm, k, settings)?;
    let values: Vec<f64> = theta.iter().map(|t| sigma - 1.0 / t).collect();
    let residuals = vectors.iter().zip(&values).map(|(v, &l)| residual(a, v, l)).collect();
    Ok(EigenPairs { values, vectors, residuals, iterations })
}

/// Lowest `k` Ritz pairs of a symmetric operator given by its action.
fn krylov(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    n: usize,
    norm_bound: f64,
    k: usize,
    settings: &EigenSettings,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    let b = block_size(k);
    let m_max = n.min((8 * b).max(160));
    let keep = (m_max / 2).max(b + k).min(m_max - b);
    let target = settings.tol * norm_bound;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let random_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    };

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(m_max);
    let mut h: Vec<Vec<f64>> = Vec::new();
    let mut block: Vec<Vec<f64>> = (0..b).map(|_| random_vec(&mut rng)).collect();
    let mut worst = f64::INFINITY;

    for restart in 0..settings.max_restarts {
        while basis.len() < m_max {
            let mut added = Vec::new();
            for mut v in block.drain(..) {
                if basis.len() >= m_max {
                    break;
                }
                let before = norm(&v);
                let after = orthogonalize(&basis, &mut v);
                if after <= 1e-10 * before || after == 0.0 {
                    continue;
                }
                v.iter_mut().for_each(|x| *x /= after);
                let av = apply(&v);
                let j = basis.len();
                let col: Vec<f64> = basis.par_iter().map(|bv| dot(bv, &av)).collect();
                for (i, hij) in col.into_iter().enumerate() {
                    h[i].push(hij);
                }
                let mut row: Vec<f64> = (0..j).map(|i| h[i][j]).collect();
                row.push(dot(&v, &av));
                h.push(row);
                basis.push(v);
                images.push(av.clone());
                added.push(av);
            }
            if added.is_empty() {
                // Invariant subspace reached: continue from fresh random directions.
                if basis.len() == n {
                    break;
                }
                block = (0..b).map(|_| random_vec(&mut rng)).collect();
            } else {
                block = added;
            }
        }

        let m = basis.len();
        let hm = DMatrix::from_fn(m, m, |i, j| 0.5 * (h[i][j] + h[j][i]));
        let eig = SymmetricEigen::new(hm);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let take = keep.min(m);
        let y = DMatrix::from_fn(m, take, |r, c| eig.eigenvectors[(r, order[c])]);
        let theta: Vec<f64> = order.iter().take(take).map(|&i| eig.eigenvalues[i]).collect();
        let x = combine(&basis, &y, take);
        let ax = combine(&images, &y, take);
        let resid: Vec<Vec<f64>> = x
            .iter()
            .zip(&ax)
            .zip(&theta)
            .map(|((xi, axi), t)| axi.iter().zip(xi).map(|(p, q)| p - t * q).collect())
            .collect();
        let norms: Vec<f64> = resid.iter().map(|r| norm(r)).collect();
        worst = norms[..k].iter().copied().fold(0.0, f64::max);
        if worst <= target || m == n {
            let vectors: Vec<Vec<f64>> = x.into_iter().take(k).collect();
            return Ok((theta[..k].to_vec(), vectors, restart + 1));
        }

        // Thick restart: Ritz vectors become the new basis, residuals of the
        // wanted window drive the next expansion.
        h = (0..take)
            .map(|i| {
                let mut row = vec![0.0; take];
                row[i] = theta[i];
                row
            })
            .collect();
        basis = x;
        images = ax;
        block = resid.into_iter().take(b).collect();
    }
    Err(Error::ConvergenceFailure { residual: worst, iterations: settings.max_restarts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| vec![(i, 2.0), ((i + 1) % n, -1.0), ((i + n - 1) % n, -1.0)])
            .collect();
        CsrMatrix::from_rows(n, rows)
    }

    #[test]
    fn dense_and_krylov_agree_with_closed_form() {
        // Cycle graph Laplacian: eigenvalues 2 − 2cos(2πj/n).
        let n = 600;
        let a = path_laplacian(n);
        let mut exact: Vec<f64> = (0..n)
            .map(|j| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos())
            .collect();
        exact.sort_by(f64::total_cmp);
        let k = 5;
        let dense = lowest(&a, k, &EigenSettings { solver: SolverChoice::Dense, ..Default::default() })
            .unwrap();
        let kry = lowest(
            &a,
            k,
            &EigenSettings { solver: SolverChoice::Iterative, ..Default::default() },
        )
        .unwrap();
        let si = lowest(
            &a,
            k,
            &EigenSettings { solver: SolverChoice::ShiftInvert, ..Default::default() },
        )
        .unwrap();
        for i in 0..k {
            assert!((dense.values[i] - exact[i]).abs() < 1e-10);
            assert!((si.values[i] - exact[i]).abs() < 1e-10, "{} vs {}", si.values[i], exact[i]);
            assert!(si.residuals[i] < 1e-9);
            assert!((kry.values[i] - exact[i]).abs() < 1e-9, "{} vs {}", kry.values[i], exact[i]);
            assert!(kry.residuals[i] < 1e-8);
        }
        for i in 0..k {
            for j in 0..k {
                let d = dot(&kry.vectors[i], &kry.vectors[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn krylov_is_deterministic_for_a_seed() {
        let a = path_laplacian(300);
        let s = EigenSettings { solver: SolverChoice::Iterative, seed: 7, ..Default::default() };
        let r1 = lowest(&a, 3, &s).unwrap();
        let r2 = lowest(&a, 3, &s).unwrap();
        assert_eq!(r1.values, r2.values);
        assert_eq!(r1.vectors, r2.vectors);
    }

    #[test]
    fn rejects_bad_k() {
        let a = path_laplacian(10);
        assert!(lowest(&a, 0, &EigenSettings::default()).is_err());
        assert!(lowest(&a, 11, &EigenSettings::default()).is_err());
    }

    #[test]
    fn exhausted_restarts_report_convergence_failure() {
        let a = path_laplacian(2000);
        let s = EigenSettings {
            solver: SolverChoice::Iterative,
            max_restarts: 1,
            tol: 1e-15,
            ..Default::default()
        };
        assert!(matches!(lowest(&a, 4, &s), Err(Error::ConvergenceFailure { .. })));
    }
}
