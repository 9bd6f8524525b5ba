//! Experiment configuration: a TOML file with one table per concern.
//!
//! Unknown keys are rejected everywhere. Seeds default to the top-level
//! `seed`, which `--seed` overrides.

use std::f64::consts::TAU;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use yamabe_core::eigen::{EigenSettings, SolverChoice};
use yamabe_core::geometry::traceless;
use yamabe_core::operators::{coupling_constant, is_excluded_coupling};
use yamabe_core::perturbation::CrossingRecipe;
use yamabe_core::recipes::random_tensor;
use yamabe_core::{DiffScheme, Grid, MetricField, SymTensorField};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub perturb: Option<PerturbConfig>,
    pub break_kernel: Option<BreakConfig>,
    pub product: Option<ProductConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Fd2,
    Fd4,
    Spectral,
}

impl From<Scheme> for DiffScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Fd2 => DiffScheme::Fd2,
            Scheme::Fd4 => DiffScheme::Fd4,
            Scheme::Spectral => DiffScheme::Spectral,
        }
    }
}

fn default_scheme() -> Scheme {
    Scheme::Fd4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nodes: Vec<usize>,
    /// Per-axis periods; all 1 when omitted.
    pub period: Option<Vec<f64>>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierMode {
    /// Integer wave vector; `cos(2π Σ k_i x_i / L_i + phase)`.
    pub wave: Vec<i32>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one_i32() -> i32 {
    1
}
fn long_period() -> f64 {
    32.0
}
fn crossing_amplitude() -> f64 {
    0.3
}
fn one_f64() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn crossing_step() -> f64 {
    0.05
}
fn crossing_value_tol() -> f64 {
    1e-11
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricConfig {
    /// A struct variant so that stray keys are still rejected.
    Flat {},
    /// `factor · δ`.
    ConstantConformal { factor: f64 },
    /// `e^{2φ} δ` with `φ` a finite cosine series.
    ConformalFourier { modes: Vec<FourierMode> },
    /// `δ + traceless(random smooth tensor)`.
    RandomTraceless {
        amplitude: f64,
        #[serde(default = "one_i32")]
        max_mode: i32,
        seed: Option<u64>,
    },
    /// Kernel-bearing metric found by following a branch through zero on
    /// a torus whose first period is the long axis.
    Crossing {
        seed: Option<u64>,
        #[serde(default = "long_period")]
        long_period: f64,
        #[serde(default = "crossing_amplitude")]
        amplitude: f64,
        #[serde(default = "one_f64")]
        coupling: f64,
        #[serde(default = "one_usize")]
        branch: usize,
        #[serde(default = "crossing_step")]
        t_step: f64,
        #[serde(default = "crossing_value_tol")]
        value_tol: f64,
    },
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig::Flat {}
    }
}

fn default_k() -> usize {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Kernel tolerance `τ`; grid-dependent default when absent.
    pub tol: Option<f64>,
    #[serde(default)]
    pub dense: bool,
    /// Coupling `c` of `−Δ + cR`; `(n−2)/(4(n−1))` when absent.
    pub coupling: Option<f64>,
    /// Also count eigenvalues below this threshold.
    pub count_below: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { k: default_k(), tol: None, dense: false, coupling: None, count_below: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DirectionConfig {
    Zero {},
    /// `h = g`.
    Homothety {},
    RandomTraceless {
        amplitude: f64,
        #[serde(default = "one_i32")]
        max_mode: i32,
        seed: Option<u64>,
    },
    /// The deformation direction of a `crossing` metric.
    Fixture {},
}

fn default_window() -> usize {
    4
}
fn default_slope_steps() -> Vec<f64> {
    vec![1e-3, 5e-4, 2.5e-4]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub direction: DirectionConfig,
    /// Curve parameters for branch tracking, relative to the base metric.
    pub ts: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: usize,
    /// Forward-difference steps for the slope-versus-Q table.
    #[serde(default = "default_slope_steps")]
    pub slope_steps: Vec<f64>,
}

fn default_epsilon() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BreakConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Kernel tolerance; falls back to `solver.tol`, then to `1e-6`.
    pub tol: Option<f64>,
}

fn two() -> usize {
    2
}
fn four() -> usize {
    4
}
fn ten() -> f64 {
    10.0
}
fn default_ks() -> Vec<usize> {
    vec![1, 3, 10]
}
fn twelve() -> f64 {
    12.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductConfig {
    #[serde(default = "two")]
    pub base_dim: usize,
    #[serde(default = "four")]
    pub l_max: usize,
    #[serde(default = "two")]
    pub genus: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Largest fiber eigenvalue kept by the surrogate.
    #[serde(default = "ten")]
    pub cutoff: f64,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    pub sweep: SweepConfig,
    /// Fixed `t` for the rescaled spectra and the precompactness family.
    #[serde(default = "twelve")]
    pub t: f64,
    /// Family members for the precompactness report; `ks` when absent.
    pub family_ks: Option<Vec<usize>>,
}

/// Overrides from the command line, applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dense: bool,
    pub tol: Option<f64>,
}

impl Config {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &Overrides) -> CliResult<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if overrides.dense {
            cfg.solver.dense = true;
        }
        if overrides.tol.is_some() {
            cfg.solver.tol = overrides.tol;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.solver.k == 0 {
            return bad("solver.k must be positive".into());
        }
        if let Some(t) = self.solver.tol {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tolerance {t} must be positive"));
            }
        }
        if let Some(c) = self.solver.coupling {
            if !c.is_finite() {
                return bad(format!("coupling {c} is not finite"));
            }
        }
        if let Some(g) = &self.grid {
            if let Some(p) = &g.period {
                if p.len() != g.nodes.len() {
                    return bad("grid.period must have one entry per axis".into());
                }
            }
        }
        if let MetricConfig::Crossing { .. } = self.metric {
            let grid = self.grid.as_ref().ok_or_else(|| CliError::Config("crossing metric needs [grid]".into()))?;
            if grid.nodes.len() != 3 {
                return bad("crossing metric needs a three-dimensional grid".into());
            }
            if grid.period.is_some() {
                return bad("crossing metric sets its own periods; use metric.long_period".into());
            }
        }
        if let Some(p) = &self.perturb {
            if p.window == 0 || p.ts.is_empty() {
                return bad("perturb needs a positive window and at least one t".into());
            }
            if p.slope_steps.iter().any(|&s| !(s > 0.0)) {
                return bad("perturb.slope_steps must be positive".into());
            }
            if matches!(p.direction, DirectionConfig::Fixture {}) && !matches!(self.metric, MetricConfig::Crossing { .. }) {
                return bad("direction \"fixture\" needs a crossing metric".into());
            }
        }
        if let Some(b) = &self.break_kernel {
            if !(b.epsilon > 0.0) {
                return bad(format!("break_kernel.epsilon {} must be positive", b.epsilon));
            }
        }
        if let Some(p) = &self.product {
            if !(p.sweep.step > 0.0 && p.sweep.stop >= p.sweep.start && p.sweep.start > 0.0) {
                return bad("product.sweep needs 0 < start <= stop and step > 0".into());
            }
            if p.ks.is_empty() {
                return bad("product.ks must not be empty".into());
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<Arc<Grid>> {
        let g = self.grid.as_ref().ok_or_else(|| CliError::Config("missing [grid] table".into()))?;
        let period = match (&self.metric, &g.period) {
            (MetricConfig::Crossing { long_period, .. }, _) => vec![*long_period, 1.0, 1.0],
            (_, Some(p)) => p.clone(),
            (_, None) => vec![1.0; g.nodes.len()],
        };
        Ok(Grid::new(g.nodes.clone(), period, g.scheme.into())?)
    }

    pub fn eigen_settings(&self) -> EigenSettings {
        EigenSettings {
            solver: if self.solver.dense { SolverChoice::Dense } else { SolverChoice::Auto },
            seed: self.seed,
            ..Default::default()
        }
    }

    /// Explicit coupling or the conformal value for the grid dimension.
    pub fn coupling(&self, dim: usize) -> CliResult<f64> {
        match self.solver.coupling {
            Some(c) => Ok(c),
            None => Ok(coupling_constant(dim)?),
        }
    }

    /// Coupling for commands that need a kernel-breaking direction.
    pub fn breaking_coupling(&self, dim: usize) -> CliResult<f64> {
        let c = self.coupling(dim)?;
        if is_excluded_coupling(c) {
            return Err(CliError::Config(format!(
                "coupling c = {c} is excluded: kernel breaking requires c ≠ 0, c ≠ 1/2"
            )));
        }
        Ok(c)
    }

    pub fn crossing_recipe(&self) -> CliResult<Option<CrossingRecipe>> {
        let MetricConfig::Crossing { seed, long_period, amplitude, coupling, branch, t_step, value_tol } = &self.metric else {
            return Ok(None);
        };
        let grid = self.grid.as_ref().ok_or_else(|| CliError::Config("missing [grid] table".into()))?;
        Ok(Some(CrossingRecipe {
            seed: seed.unwrap_or(self.seed),
            nodes: [grid.nodes[0], grid.nodes[1], grid.nodes[2]],
            long_period: *long_period,
            amplitude: *amplitude,
            coupling: *coupling,
            branch: *branch,
            t_step: *t_step,
            value_tol: *value_tol,
            scheme: grid.scheme.into(),
        }))
    }

    /// The configured metric; for `crossing` this is the base of the curve, not the kernel metric.
    pub fn plain_metric(&self, grid: &Arc<Grid>) -> CliResult<MetricField> {
        let n = grid.dim();
        let metric = match &self.metric {
            MetricConfig::Flat {} | MetricConfig::Crossing { .. } => MetricField::flat(grid.clone()),
            MetricConfig::ConstantConformal { factor } => MetricField::flat(grid.clone()).scaled(*factor)?,
            MetricConfig::ConformalFourier { modes } => {
                for m in modes {
                    if m.wave.len() != n {
                        return Err(CliError::Config("wave vectors need one entry per axis".into()));
                    }
                }
                let t = SymTensorField::from_fn(grid.clone(), |x, i, j| {
                    if i == j {
                        (2.0 * conformal_exponent(grid, modes, x)).exp()
                    } else {
                        0.0
                    }
                })?;
                MetricField::new(t)?
            }
            MetricConfig::RandomTraceless { amplitude, max_mode, seed } => {
                let flat = MetricField::flat(grid.clone());
                let h = random_tensor(grid, seed.unwrap_or(self.seed), *amplitude, *max_mode);
                let h = traceless(&flat, &h)?;
                MetricField::new(flat.tensor().axpy(1.0, &h)?)?
            }
        };
        Ok(metric)
    }
}

/// `φ(x) = Σ a cos(2π Σ k_i x_i / L_i + phase)`.
pub fn conformal_exponent(grid: &Grid, modes: &[FourierMode], x: &[f64]) -> f64 {
    modes
        .iter()
        .map(|m| {
            let arg: f64 = m.wave.iter().enumerate().map(|(i, &k)| k as f64 * x[i] / grid.period()[i]).sum();
            m.amplitude * (TAU * arg + m.phase).cos()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let o = Overrides::default();
        assert!(Config::parse("seed = 1\nbogus = 2\n", &o).is_err());
        assert!(Config::parse("[grid]\nnodes = [4,4,4]\nshape = 1\n", &o).is_err());
        assert!(Config::parse("[metric]\nkind = \"flat\"\nfactor = 2.0\n", &o).is_err());
        assert!(Config::parse("[metric]\nkind = \"constant-conformal\"\nfactor = 2.0\n", &o).is_ok());
        assert!(Config::parse("[metric]\nkind = \"flat\"\n", &o).is_ok());
        let p = "[perturb]\nts = [0.0]\ndirection = { kind = \"zero\", amplitude = 1.0 }\n";
        assert!(Config::parse(p, &o).is_err());
    }

    #[test]
    fn overrides_apply() {
        let o = Overrides { seed: Some(9), dense: true, tol: Some(1e-5) };
        let cfg = Config::parse("seed = 1\n", &o).unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(cfg.solver.dense);
        assert_eq!(cfg.solver.tol, Some(1e-5));
    }

    #[test]
    fn excluded_couplings_are_rejected_for_breaking() {
        for c in ["0.0", "0.5"] {
            let cfg = Config::parse(&format!("[solver]\ncoupling = {c}\n"), &Overrides::default()).unwrap();
            let err = cfg.breaking_coupling(3).unwrap_err();
            assert!(err.to_string().contains("c ≠ 0, c ≠ 1/2"));
        }
        let cfg = Config::parse("", &Overrides::default()).unwrap();
        assert_eq!(cfg.breaking_coupling(3).unwrap(), 0.125);
    }

    #[test]
    fn sweep_values_include_endpoints() {
        let s = SweepConfig { start: 1.0, stop: 2.0, step: 0.25 };
        assert_eq!(s.values(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    #[test]
    fn conformal_fourier_metric() {
        let cfg = Config::parse(
            "[grid]\nnodes = [4,4,4]\n[metric]\nkind = \"conformal-fourier\"\nmodes = [{ wave = [1,0,0], amplitude = 0.1 }]\n",
            &Overrides::default(),
        )
        .unwrap();
        let grid = cfg.grid().unwrap();
        let g = cfg.plain_metric(&grid).unwrap();
        assert!((g.g(0, 0, 0) - 0.2f64.exp()).abs() < 1e-14);
    }
}
