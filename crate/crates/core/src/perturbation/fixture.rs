//! Metrics with a prescribed kernel, manufactured by following a branch to zero.

use crate::eigen::EigenSettings;
use crate::error::Result;
use crate::field::MetricField;
use crate::grid::{DiffScheme, Grid};
use crate::perturbation::branch::{find_kernel_metric, KernelMetric};
use crate::perturbation::variation::MetricCurve;
use crate::recipes::traceless_direction;

/// Recipe for a kernel-bearing metric on an elongated flat torus.
///
/// The long first axis makes the low Laplace spectrum dense near zero; the
/// seeded traceless deformation then pushes branch `branch` through zero.
#[derive(Debug, Clone)]
pub struct CrossingRecipe {
    pub seed: u64,
    /// Nodes per axis; the first axis is the long one.
    pub nodes: [usize; 3],
    pub long_period: f64,
    pub amplitude: f64,
    /// Weight of the modes that vary along the long axis.
    pub coupling: f64,
    pub branch: usize,
    /// Spacing of the coarse parameter scan.
    pub t_step: f64,
    pub value_tol: f64,
    pub scheme: DiffScheme,
}

impl Default for CrossingRecipe {
    fn default() -> Self {
        CrossingRecipe {
            seed: 0,
            nodes: [8, 8, 8],
            long_period: 32.0,
            amplitude: 0.3,
            coupling: 1.0,
            branch: 1,
            t_step: 0.05,
            value_tol: 1e-11,
            scheme: DiffScheme::Spectral,
        }
    }
}

impl CrossingRecipe {
    pub fn curve(&self) -> Result<MetricCurve> {
        let grid = Grid::new(
            self.nodes.to_vec(),
            vec![self.long_period, 1.0, 1.0],
            self.scheme,
        )?;
        let g0 = MetricField::flat(grid);
        let h = traceless_direction(&g0, self.seed, self.amplitude, self.coupling)?;
        MetricCurve::linear(g0, h)
    }

    /// Scan points `0, t_step, …` up to 95% of the positive-definite range.
    pub fn scan(&self, curve: &MetricCurve) -> Vec<f64> {
        let limit = 0.95 * curve.spd_range().1.min(1e6);
        (0..)
            .map(|i| i as f64 * self.t_step)
            .take_while(|&t| t < limit)
            .collect()
    }

    pub fn build(&self, c: f64, settings: &EigenSettings) -> Result<(MetricCurve, KernelMetric)> {
        let curve = self.curve()?;
        let ts = self.scan(&curve);
        let km = find_kernel_metric(&curve, c, self.branch, &ts, self.value_tol, settings)?;
        Ok((curve, km))
    }
}
