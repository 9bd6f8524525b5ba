//! `break-kernel`: deform along `h*` until the numerical kernel is empty.

use yamabe_core::io::write_metric;
use yamabe_core::operators::kernel;
use yamabe_core::perturbation::break_kernel;

use super::subject;
use crate::config::Config;
use crate::error::CliResult;
use crate::output::Output;

pub fn run(cfg: &Config, out: &Output) -> CliResult<()> {
    let grid = cfg.grid()?;
    let c = cfg.breaking_coupling(grid.dim())?;
    let settings = cfg.eigen_settings();
    let (epsilon, tol) = match &cfg.break_kernel {
        Some(b) => (b.epsilon, b.tol),
        None => (0.05, None),
    };
    let tau = tol.or(cfg.solver.tol).unwrap_or(1e-6);
    let g = subject(cfg, c, &settings)?.metric;
    let result = break_kernel(&g, c, tau, epsilon, &settings)?;
    out.csv("trace.csv", |w| Ok(result.write_csv(w)?))?;
    let after = kernel(&result.metric, c, Some(tau), &settings)?;
    out.csv("kernel_after.csv", |w| {
        writeln!(w, "kernel_tol,multiplicity")?;
        writeln!(w, "{tau:.6e},{}", after.len())?;
        Ok(())
    })?;
    out.binary("metric.csf", |w| Ok(write_metric(w, &result.metric)?))?;
    Ok(())
}
