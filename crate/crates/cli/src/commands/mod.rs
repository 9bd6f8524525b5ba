//! One module per CLI verb; each writes its artifacts into the output directory.

pub mod break_kernel;
pub mod curvature;
pub mod perturb;
pub mod product;
pub mod spectrum;

use yamabe_core::eigen::EigenSettings;
use yamabe_core::perturbation::{KernelMetric, MetricCurve};
use yamabe_core::MetricField;

use crate::config::Config;
use crate::error::CliResult;

/// The metric a command works on: the configured one, or for a `crossing`
/// recipe the kernel-bearing metric together with its curve.
pub(crate) struct Subject {
    pub metric: MetricField,
    pub crossing: Option<(MetricCurve, KernelMetric)>,
}

pub(crate) fn subject(cfg: &Config, c: f64, settings: &EigenSettings) -> CliResult<Subject> {
    if let Some(recipe) = cfg.crossing_recipe()? {
        let (curve, km) = recipe.build(c, settings)?;
        return Ok(Subject { metric: km.metric.clone(), crossing: Some((curve, km)) });
    }
    let grid = cfg.grid()?;
    Ok(Subject { metric: cfg.plain_metric(&grid)?, crossing: None })
}
