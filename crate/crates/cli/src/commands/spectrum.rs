//! `spectrum`: lowest eigenvalues, kernel and sign counts of `−Δ + cR`.

use yamabe_core::io::write_metric;
use yamabe_core::operators::{assemble, count_below, eig_lowest, kernel};

use super::subject;
use crate::config::Config;
use crate::error::CliResult;
use crate::output::Output;

pub fn run(cfg: &Config, out: &Output) -> CliResult<()> {
    let grid = cfg.grid()?;
    let c = cfg.coupling(grid.dim())?;
    let settings = cfg.eigen_settings();
    let g = subject(cfg, c, &settings)?.metric;
    let op = assemble(&g, c)?;
    let k = cfg.solver.k.min(grid.len());
    let spec = eig_lowest(&op, k, cfg.solver.tol, &settings)?;
    out.csv("spectrum.csv", |w| Ok(spec.write_csv(w)?))?;
    out.csv("counts.csv", |w| {
        writeln!(w, "window,negative,zero,positive,kernel_tol,asymmetry")?;
        writeln!(
            w,
            "{k},{},{},{},{:.6e},{:.6e}",
            spec.counts.negative,
            spec.counts.zero,
            spec.counts.positive,
            spec.kernel_tol,
            op.asymmetry()
        )?;
        Ok(())
    })?;
    let ker = kernel(&g, c, cfg.solver.tol, &settings)?;
    out.csv("kernel.csv", |w| Ok(ker.write_csv(w)?))?;
    if let Some(s) = cfg.solver.count_below {
        let cb = count_below(&g, c, s, grid.len(), &settings)?;
        out.csv("count_below.csv", |w| {
            writeln!(w, "threshold,count,truncated,largest_computed")?;
            writeln!(w, "{s:.17e},{},{},{:.17e}", cb.count, cb.truncated, cb.largest_computed)?;
            Ok(())
        })?;
    }
    out.binary("metric.csf", |w| Ok(write_metric(w, &g)?))?;
    Ok(())
}
