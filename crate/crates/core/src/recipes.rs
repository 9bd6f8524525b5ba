//! Seeded smooth fields used as metrics, deformation directions and conformal factors.
//!
//! Every recipe is a finite trigonometric sum whose amplitudes and phases come
//! from a ChaCha generator, so the same seed always reproduces the same field.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField, SymTensorField};
use crate::geometry::traceless;
use crate::grid::Grid;

#[derive(Debug, Clone, Copy)]
struct Mode {
    wave: [i32; 3],
    amplitude: f64,
    phase: f64,
}

/// Integer wave vectors on the first three axes with entries in `[-k, k]`, up to sign.
fn wave_vectors(k: i32) -> Vec<[i32; 3]> {
    let mut out = Vec::new();
    for a in -k..=k {
        for b in -k..=k {
            for c in -k..=k {
                let w = [a, b, c];
                let first = w.iter().copied().find(|&v| v != 0);
                if first.is_some_and(|v| v > 0) {
                    out.push(w);
                }
            }
        }
    }
    out
}

fn random_modes(rng: &mut ChaCha8Rng, max_mode: i32) -> Vec<Mode> {
    wave_vectors(max_mode)
        .into_iter()
        .map(|wave| {
            let decay = 1.0 / (1 + wave.iter().map(|v| v.abs()).sum::<i32>()) as f64;
            Mode {
                wave,
                amplitude: decay * rng.sample::<f64, _>(StandardNormal),
                phase: rng.random_range(0.0..TAU),
            }
        })
        .collect()
}

fn eval_modes(grid: &Grid, modes: &[Mode], x: &[f64]) -> f64 {
    modes
        .iter()
        .map(|m| {
            let arg: f64 = (0..grid.dim().min(3))
                .map(|a| m.wave[a] as f64 * x[a] / grid.period()[a])
                .sum();
            m.amplitude * (TAU * arg + m.phase).cos()
        })
        .sum()
}

fn normalized(values: Vec<f64>) -> Vec<f64> {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        values
    } else {
        values.into_iter().map(|v| v / max).collect()
    }
}

/// Smooth scalar with max-norm `amplitude`, built from wave vectors up to `max_mode`.
pub fn random_scalar(grid: &Arc<Grid>, seed: u64, amplitude: f64, max_mode: i32) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = random_modes(&mut rng, max_mode);
    let values: Vec<f64> = (0..grid.len())
        .map(|p| eval_modes(grid, &modes, &grid.coordinates(p)))
        .collect();
    let values = normalized(values).into_iter().map(|v| amplitude * v).collect();
    ScalarField::from_raw(grid.clone(), values)
}

/// Smooth symmetric tensor whose components each have max-norm `amplitude`.
pub fn random_tensor(grid: &Arc<Grid>, seed: u64, amplitude: f64, max_mode: i32) -> SymTensorField {
    let n = grid.dim();
    let mut comps = vec![vec![Vec::new(); n]; n];
    let mut sub = 0u64;
    for i in 0..n {
        for j in i..n {
            let f = random_scalar(grid, seed.wrapping_mul(1_000_003).wrapping_add(sub), amplitude, max_mode);
            comps[i][j] = f.values().to_vec();
            comps[j][i] = f.into_values();
            sub += 1;
        }
    }
    SymTensorField::from_components(grid.clone(), &comps)
}

/// `δ + random_tensor`; positive definite whenever `amplitude < 1/n`.
pub fn random_metric(grid: &Arc<Grid>, seed: u64, amplitude: f64, max_mode: i32) -> Result<MetricField> {
    let t = random_tensor(grid, seed, amplitude, max_mode);
    let id = SymTensorField::identity(grid.clone());
    MetricField::new(id.axpy(1.0, &t)?)
}

/// Conformal factor `1 + amplitude · φ` with `max |φ| = 1`.
pub fn conformal_factor(grid: &Arc<Grid>, seed: u64, amplitude: f64, max_mode: i32) -> Result<ScalarField> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::InvalidParameters(format!(
            "conformal amplitude {amplitude} must lie in [0, 1)"
        )));
    }
    Ok(random_scalar(grid, seed, amplitude, max_mode).map(|v| 1.0 + v))
}

/// Deformation direction used to manufacture kernel crossings on elongated tori.
///
/// Each component mixes unit-wavelength modes in the two transverse axes
/// (wave vectors (1,0), (0,1), (1,1), (1,−1)) with `coupling`-weighted modes
/// that also vary slowly along the long first axis. The sum is projected to
/// its `g`-traceless part and scaled by `amplitude`.
pub fn traceless_direction(g: &MetricField, seed: u64, amplitude: f64, coupling: f64) -> Result<SymTensorField> {
    let grid = g.grid();
    let n = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let period = grid.period().to_vec();
    let mut comps = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        for j in i..n {
            let mut terms: Vec<(f64, f64, [f64; 3])> = Vec::new();
            for (a, b) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0)] {
                let amp: f64 = rng.sample(StandardNormal);
                let phase = rng.random_range(0.0..TAU);
                terms.push((amp, phase, [0.0, a, b]));
            }
            let mut coupled: Vec<(f64, f64, f64, f64)> = Vec::new();
            for m in [1.0, 2.0] {
                let amp: f64 = rng.sample(StandardNormal);
                let p0 = rng.random_range(0.0..TAU);
                let p1 = rng.random_range(0.0..TAU);
                coupled.push((m, coupling * amp, p0, p1));
            }
            let values: Vec<f64> = (0..grid.len())
                .map(|p| {
                    let x = grid.coordinates(p);
                    let y = x[1] / period[1];
                    let z = x[2] / period[2];
                    let s: f64 = terms
                        .iter()
                        .map(|(amp, ph, w)| amp * (TAU * (w[1] * y + w[2] * z) + ph).cos())
                        .sum();
                    let c: f64 = coupled
                        .iter()
                        .map(|(m, amp, p0, p1)| {
                            amp * (TAU * m * x[0] / period[0] + p0).cos() * (TAU * y + p1).cos()
                        })
                        .sum();
                    amplitude * (s + c)
                })
                .collect();
            comps[i][j] = values.clone();
            comps[j][i] = values;
        }
    }
    traceless(g, &SymTensorField::from_components(grid.clone(), &comps))
}
