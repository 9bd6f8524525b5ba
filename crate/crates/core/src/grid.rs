//! Uniform periodic grids on the flat torus and their derivative stencils.
//!
//! Nodes are stored row-major with the last axis fastest. Every derivative
//! operator is a circulant stencil along one axis and is applied in
//! difference form, `f'(i) = sum_o w_o (f[i + o] - f[i])`, so that constant
//! fields differentiate to exactly zero.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Spatial differentiation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DiffScheme {
    /// Second-order central differences.
    Fd2,
    /// Fourth-order central differences.
    #[default]
    Fd4,
    /// Fourier pseudo-spectral differentiation.
    Spectral,
}

impl DiffScheme {
    /// Consistency order used in tolerance formulas. The spectral scheme
    /// converges faster than any power; 8 is its nominal order.
    pub fn order(self) -> u32 {
        match self {
            DiffScheme::Fd2 => 2,
            DiffScheme::Fd4 => 4,
            DiffScheme::Spectral => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DiffScheme::Fd2 => "fd2",
            DiffScheme::Fd4 => "fd4",
            DiffScheme::Spectral => "spectral",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fd2" => Some(DiffScheme::Fd2),
            "fd4" => Some(DiffScheme::Fd4),
            "spectral" => Some(DiffScheme::Spectral),
            _ => None,
        }
    }
}

/// Circulant stencil: pairs of (forward offset mod N, weight), zero offset omitted.
type Stencil = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct Grid {
    resolution: Vec<usize>,
    period: Vec<f64>,
    scheme: DiffScheme,
    strides: Vec<usize>,
    len: usize,
    first: Vec<Stencil>,
    second: Vec<Stencil>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.resolution == other.resolution
            && self.period == other.period
            && self.scheme == other.scheme
    }
}

impl Grid {
    pub fn new(resolution: Vec<usize>, period: Vec<f64>, scheme: DiffScheme) -> Result<Arc<Grid>> {
        let dim = resolution.len();
        if dim < 3 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if period.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} resolutions but {} periods",
                dim,
                period.len()
            )));
        }
        if let Some(n) = resolution.iter().find(|&&n| n < 4) {
            return Err(Error::InvalidGrid(format!("resolution {n} < 4")));
        }
        if let Some(l) = period.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidGrid(format!("period {l} is not positive")));
        }
        let len = resolution
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::InvalidGrid("node count overflows".into()))?;

        let mut strides = vec![1; dim];
        for a in (0..dim - 1).rev() {
            strides[a] = strides[a + 1] * resolution[a + 1];
        }
        let first = (0..dim)
            .map(|a| first_stencil(scheme, resolution[a], period[a]))
            .collect();
        let second = (0..dim)
            .map(|a| second_stencil(scheme, resolution[a], period[a]))
            .collect();

        Ok(Arc::new(Grid {
            resolution,
            period,
            scheme,
            strides,
            len,
            first,
            second,
        }))
    }

    /// `n`-dimensional grid with `nodes` points per axis on the unit torus.
    pub fn unit(dim: usize, nodes: usize, scheme: DiffScheme) -> Result<Arc<Grid>> {
        Grid::new(vec![nodes; dim], vec![1.0; dim], scheme)
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn period(&self) -> &[f64] {
        &self.period
    }

    pub fn scheme(&self) -> DiffScheme {
        self.scheme
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.period[axis] / self.resolution[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn total_volume(&self) -> f64 {
        self.period.iter().product()
    }

    /// Relative mesh width `max_a 1/N_a`, the `h` of the tolerance formulas.
    pub fn relative_spacing(&self) -> f64 {
        self.resolution
            .iter()
            .map(|&n| 1.0 / n as f64)
            .fold(0.0, f64::max)
    }

    /// Index along `axis` of node `idx`.
    #[inline]
    pub fn index_along(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.resolution[axis]
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.index_along(idx, a)).collect()
    }

    pub fn coordinate(&self, idx: usize, axis: usize) -> f64 {
        self.index_along(idx, axis) as f64 * self.spacing(axis)
    }

    pub fn coordinates(&self, idx: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.coordinate(idx, a)).collect()
    }

    /// Node reached from `idx` by moving `offset` (mod N) cells along `axis`.
    #[inline]
    pub fn shifted(&self, idx: usize, axis: usize, offset: usize) -> usize {
        let n = self.resolution[axis];
        let c = self.index_along(idx, axis);
        let c2 = (c + offset) % n;
        idx + c2 * self.strides[axis] - c * self.strides[axis]
    }

    pub(crate) fn first_stencil(&self, axis: usize) -> &[(usize, f64)] {
        &self.first[axis]
    }

    pub(crate) fn second_stencil(&self, axis: usize) -> &[(usize, f64)] {
        &self.second[axis]
    }

    fn apply(&self, stencil: &[(usize, f64)], axis: usize, f: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.len);
        (0..self.len)
            .map(|i| {
                let fi = f[i];
                stencil
                    .iter()
                    .map(|&(o, w)| w * (f[self.shifted(i, axis, o)] - fi))
                    .sum()
            })
            .collect()
    }

    /// First partial derivative along `axis`.
    pub fn d1(&self, axis: usize, f: &[f64]) -> Vec<f64> {
        self.apply(&self.first[axis], axis, f)
    }

    /// Second partial derivative along `axis` (compact stencil).
    pub fn d2(&self, axis: usize, f: &[f64]) -> Vec<f64> {
        self.apply(&self.second[axis], axis, f)
    }

    /// Mixed second partial `d_a d_b f`; uses the compact stencil when `a == b`.
    pub fn d11(&self, a: usize, b: usize, f: &[f64]) -> Vec<f64> {
        if a == b {
            self.d2(a, f)
        } else {
            self.d1(a, &self.d1(b, f))
        }
    }
}

fn first_stencil(scheme: DiffScheme, n: usize, period: f64) -> Stencil {
    let h = period / n as f64;
    match scheme {
        DiffScheme::Fd2 => vec![(1, 0.5 / h), (n - 1, -0.5 / h)],
        DiffScheme::Fd4 => vec![
            (1, 8.0 / (12.0 * h)),
            (n - 1, -8.0 / (12.0 * h)),
            (2, -1.0 / (12.0 * h)),
            (n - 2, 1.0 / (12.0 * h)),
        ],
        DiffScheme::Spectral => spectral_stencil(n, period, 1),
    }
}

fn second_stencil(scheme: DiffScheme, n: usize, period: f64) -> Stencil {
    let h2 = (period / n as f64).powi(2);
    match scheme {
        DiffScheme::Fd2 => vec![(1, 1.0 / h2), (n - 1, 1.0 / h2)],
        DiffScheme::Fd4 => vec![
            (1, 16.0 / (12.0 * h2)),
            (n - 1, 16.0 / (12.0 * h2)),
            (2, -1.0 / (12.0 * h2)),
            (n - 2, -1.0 / (12.0 * h2)),
        ],
        DiffScheme::Spectral => spectral_stencil(n, period, 2),
    }
}

/// Circulant weights of the Fourier differentiation matrix of order 1 or 2.
///
/// Weight of forward offset `k`: `(1/N) sum_m (i kappa_m)^p exp(-i kappa_m k h)` over the symmetric
/// wavenumber set; the Nyquist mode of an even grid is dropped for `p = 1`.
fn spectral_stencil(n: usize, period: f64, order: u32) -> Stencil {
    let half = n as i64 / 2;
    let modes: Vec<i64> = if n % 2 == 0 {
        (-half + 1..=half).collect()
    } else {
        (-half..=half).collect()
    };
    let mut stencil = Vec::with_capacity(n - 1);
    for k in 1..n {
        let mut w = 0.0;
        for &m in &modes {
            let kappa = 2.0 * PI * m as f64 / period;
            let phase = 2.0 * PI * (m * k as i64) as f64 / n as f64;
            w += match order {
                1 => {
                    if n % 2 == 0 && m == half {
                        0.0
                    } else {
                        kappa * phase.sin()
                    }
                }
                _ => -kappa * kappa * phase.cos(),
            };
        }
        stencil.push((k, w / n as f64));
    }
    stencil
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..grid.len()).map(|i| f(&grid.coordinates(i))).collect()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(
            Grid::new(vec![8, 8], vec![1.0, 1.0], DiffScheme::Fd4),
            Err(Error::DimensionTooSmall(2))
        ));
        assert!(Grid::new(vec![8, 3, 8], vec![1.0; 3], DiffScheme::Fd4).is_err());
        assert!(Grid::new(vec![8; 3], vec![1.0, 0.0, 1.0], DiffScheme::Fd4).is_err());
        assert!(Grid::new(vec![8; 3], vec![1.0; 2], DiffScheme::Fd4).is_err());
    }

    #[test]
    fn indexing_round_trips() {
        let g = Grid::new(vec![4, 5, 6], vec![1.0, 2.0, 3.0], DiffScheme::Fd2).unwrap();
        assert_eq!(g.len(), 120);
        for i in 0..g.len() {
            let mi = g.multi_index(i);
            assert_eq!(mi[0] * 30 + mi[1] * 6 + mi[2], i);
            assert_eq!(g.shifted(g.shifted(i, 1, 1), 1, 4), i);
        }
        assert!((g.cell_volume() - 0.25 * 0.4 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn constants_differentiate_to_exact_zero() {
        for scheme in [DiffScheme::Fd2, DiffScheme::Fd4, DiffScheme::Spectral] {
            let g = Grid::unit(3, 6, scheme).unwrap();
            let f = vec![1.1; g.len()];
            for a in 0..3 {
                assert!(g.d1(a, &f).iter().all(|&v| v == 0.0));
                assert!(g.d2(a, &f).iter().all(|&v| v == 0.0));
                assert!(g.d11(a, (a + 1) % 3, &f).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn spectral_is_exact_on_resolved_modes() {
        for n in [8, 9] {
            let g = Grid::new(vec![n, 4, 4], vec![2.0, 1.0, 1.0], DiffScheme::Spectral).unwrap();
            let k = 2.0 * PI * 3.0 / 2.0;
            let f = sample(&g, |x| (k * x[0]).sin());
            let d1 = g.d1(0, &f);
            let d2 = g.d2(0, &f);
            for i in 0..g.len() {
                let x = g.coordinate(i, 0);
                assert!((d1[i] - k * (k * x).cos()).abs() < 1e-11);
                assert!((d2[i] + k * k * f[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn finite_differences_converge_at_their_order() {
        for (scheme, p) in [(DiffScheme::Fd2, 2.0), (DiffScheme::Fd4, 4.0)] {
            let errs: Vec<f64> = [16usize, 32]
                .iter()
                .map(|&n| {
                    let g = Grid::unit(3, n, scheme).unwrap();
                    let f = sample(&g, |x| (2.0 * PI * x[1]).sin());
                    let d = g.d2(1, &f);
                    d.iter()
                        .zip(&f)
                        .map(|(d, f)| (d + 4.0 * PI * PI * f).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            let rate = (errs[0] / errs[1]).log2();
            assert!((rate - p).abs() < 0.2, "{scheme:?} rate {rate}");
        }
    }
}
