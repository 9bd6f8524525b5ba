//! `curvature-check`: scalar curvature of the configured metric, with a
//! closed-form comparison for conformally flat metrics.

use std::f64::consts::TAU;

use yamabe_core::geometry::{integrate, scalar_curvature, volume};
use yamabe_core::io::write_field_csv;
use yamabe_core::perturbation::hessian_square_residual;
use yamabe_core::recipes::random_scalar;
use yamabe_core::{Grid, ScalarField};

use super::subject;
use crate::config::{conformal_exponent, Config, FourierMode, MetricConfig};
use crate::error::CliResult;
use crate::output::Output;

pub fn run(cfg: &Config, out: &Output) -> CliResult<()> {
    let grid = cfg.grid()?;
    let c = cfg.coupling(grid.dim())?;
    let settings = cfg.eigen_settings();
    let g = subject(cfg, c, &settings)?.metric;
    let r = scalar_curvature(&g);
    out.csv("curvature.csv", |w| Ok(write_field_csv(w, &r)?))?;

    let psi = random_scalar(&grid, cfg.seed, 1.0, 1);
    let hess = hessian_square_residual(&g, &psi)?;
    let exact = match &cfg.metric {
        MetricConfig::ConstantConformal { .. } => Some(ScalarField::constant(grid.clone(), 0.0)),
        MetricConfig::ConformalFourier { modes } => Some(ScalarField::from_fn(grid.clone(), |x| {
            conformal_curvature(&grid, modes, x)
        })?),
        _ => None,
    };
    let oracle_error = exact.map(|e| {
        r.values().iter().zip(e.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    });
    out.csv("summary.csv", |w| {
        writeln!(w, "max_abs_curvature,total_curvature,volume,hessian_square_residual,closed_form_error")?;
        let err = oracle_error.map(|e| format!("{e:.6e}")).unwrap_or_default();
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{hess:.6e},{err}",
            r.max_abs(),
            integrate(&g, &r)?,
            volume(&g)
        )?;
        Ok(())
    })?;
    Ok(())
}

/// `R = −e^{−2φ}(2(n−1)Δφ + (n−2)(n−1)|∇φ|²)` for `e^{2φ}δ`, with `φ` the cosine series.
fn conformal_curvature(grid: &Grid, modes: &[FourierMode], x: &[f64]) -> f64 {
    let n = grid.dim();
    let mut grad = vec![0.0; n];
    let mut lap = 0.0;
    for m in modes {
        let kv: Vec<f64> = (0..n).map(|i| TAU * m.wave[i] as f64 / grid.period()[i]).collect();
        let arg: f64 = kv.iter().zip(x).map(|(k, xi)| k * xi).sum::<f64>() + m.phase;
        let k2: f64 = kv.iter().map(|k| k * k).sum();
        for i in 0..n {
            grad[i] -= m.amplitude * kv[i] * arg.sin();
        }
        lap -= m.amplitude * k2 * arg.cos();
    }
    let phi = conformal_exponent(grid, modes, x);
    let nf = n as f64;
    let g2: f64 = grad.iter().map(|v| v * v).sum();
    -(-2.0 * phi).exp() * (2.0 * (nf - 1.0) * lap + (nf - 2.0) * (nf - 1.0) * g2)
}
