//! `perturb`: first-order eigenvalue velocities along a metric direction.
//!
//! Writes the kernel compression `Q`, tracked branches, the self-pairing
//! identity chain and a table of forward-difference slopes against `Q`.

use yamabe_core::geometry::traceless;
use yamabe_core::operators::{assemble, eig_lowest, kernel};
use yamabe_core::perturbation::{derivative_identity_check, q_matrix, track_branch, MetricCurve};
use yamabe_core::recipes::random_tensor;
use yamabe_core::{Error, MetricField, SymTensorField};

use super::subject;
use crate::config::{Config, DirectionConfig};
use crate::error::{CliError, CliResult};
use crate::output::Output;

pub fn run(cfg: &Config, out: &Output) -> CliResult<()> {
    let p = cfg
        .perturb
        .as_ref()
        .ok_or_else(|| CliError::Config("perturb needs a [perturb] table".into()))?;
    let grid = cfg.grid()?;
    let c = cfg.coupling(grid.dim())?;
    let settings = cfg.eigen_settings();
    let subj = subject(cfg, c, &settings)?;
    let g = subj.metric;
    let h = match &p.direction {
        DirectionConfig::Zero {} => SymTensorField::zeros(grid.clone()),
        DirectionConfig::Homothety {} => g.tensor().clone(),
        DirectionConfig::RandomTraceless { amplitude, max_mode, seed } => {
            traceless(&g, &random_tensor(&grid, seed.unwrap_or(cfg.seed), *amplitude, *max_mode))?
        }
        DirectionConfig::Fixture {} => match &subj.crossing {
            Some((curve, _)) => curve.direction().clone(),
            None => return Err(CliError::Config("direction \"fixture\" needs a crossing metric".into())),
        },
    };
    // Every direction is followed along the straight line `g + t h`; the
    // crossing curve is itself linear, so this continues it past the kernel.
    let curve = MetricCurve::linear(g.clone(), h.clone())?;

    let trace = track_branch(&curve, c, &p.ts, p.window, &settings)?;
    out.csv("branches.csv", |w| Ok(trace.write_csv(w)?))?;

    let ker = kernel(&g, c, cfg.solver.tol, &settings)?;
    let q = if ker.is_empty() {
        None
    } else {
        Some(q_matrix(&g, &h, c, &ker.eigenvectors)?)
    };
    out.csv("q_matrix.csv", |w| {
        writeln!(w, "row,col,value")?;
        if let Some(q) = &q {
            for (i, row) in q.entries.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    writeln!(w, "{i},{j},{v:.17e}")?;
                }
            }
        }
        Ok(())
    })?;
    out.csv("q_eigenvalues.csv", |w| {
        writeln!(w, "index,eigenvalue")?;
        if let Some(q) = &q {
            for (i, v) in q.eigenvalues().iter().enumerate() {
                writeln!(w, "{i},{v:.17e}")?;
            }
        }
        Ok(())
    })?;

    out.csv("identity.csv", |w| {
        writeln!(w, "form,value,relative_residual")?;
        if let Some(psi) = ker.eigenvectors.first() {
            let ht = traceless(&g, &h)?;
            if ht.max_abs() > 0.0 {
                let rep = derivative_identity_check(&g, psi, &ht, c)?;
                let scale = rep.direct.abs().max(f64::MIN_POSITIVE);
                for (name, value) in [
                    ("direct", rep.direct),
                    ("square_form", rep.square_form),
                    ("expanded", rep.expanded),
                    ("traceless", rep.traceless_form),
                ] {
                    writeln!(w, "{name},{value:.17e},{:.6e}", (value - rep.direct).abs() / scale)?;
                }
            }
        }
        Ok(())
    })?;

    out.csv("slopes.csv", |w| {
        writeln!(w, "step,slope,q_eigenvalue,error")?;
        if let (Some(q), 1) = (&q, ker.len()) {
            let branch = kernel_branch(&g, c, cfg, p.window)?;
            for &s in &p.slope_steps {
                let tr = track_branch(&curve, c, &[0.0, s], p.window.max(branch + 1), &settings)?;
                let slope = (tr.values[1][branch] - tr.values[0][branch]) / s;
                let qv = q.entries[0][0];
                writeln!(w, "{s:.6e},{slope:.17e},{qv:.17e},{:.6e}", (slope - qv).abs())?;
            }
        }
        Ok(())
    })?;
    Ok(())
}

/// Position of the kernel eigenvalue among the lowest eigenvalues.
fn kernel_branch(g: &MetricField, c: f64, cfg: &Config, window: usize) -> CliResult<usize> {
    let op = assemble(g, c)?;
    let k = (window + 4).min(g.grid().len());
    let spec = eig_lowest(&op, k, cfg.solver.tol, &cfg.eigen_settings())?;
    spec.kernel_indices().first().copied().ok_or(CliError::Core(Error::EmptyKernel))
}
