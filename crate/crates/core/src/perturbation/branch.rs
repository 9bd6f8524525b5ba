//! Eigenvalue branches along a metric curve and the search for a zero crossing.

use std::io::Write;

use rayon::prelude::*;

use crate::eigen::EigenSettings;
use crate::error::{Error, Result};
use crate::field::{MetricField, ScalarField};
use crate::geometry::volume_element;
use crate::operators::{assemble, eig_lowest, SpectralDecomposition};
use crate::perturbation::variation::MetricCurve;

/// Extra eigenpairs solved above the tracked window so branches can be
/// matched when levels enter from above.
const MARGIN: usize = 4;

/// Branches whose overlap with their best match falls below this are ambiguous.
pub const MIN_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct BranchTrace {
    pub ts: Vec<f64>,
    /// `values[step][branch]`.
    pub values: Vec<Vec<f64>>,
    /// Overlap of each branch with its predecessor; 1 on the first step.
    pub overlaps: Vec<Vec<f64>>,
    /// `vectors[step][branch]`, orthonormal in `L²(dV_{g(t)})`.
    pub vectors: Vec<Vec<ScalarField>>,
}

impl BranchTrace {
    pub fn branch_count(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn branch(&self, b: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[b]).collect()
    }

    /// First step `s` with `λ_b(t_s)` and `λ_b(t_{s+1})` of opposite sign (or a zero).
    pub fn sign_change(&self, b: usize) -> Option<usize> {
        (0..self.ts.len().saturating_sub(1)).find(|&s| self.values[s][b] * self.values[s + 1][b] <= 0.0)
    }

    /// `t,branch_id,eigenvalue,overlap` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,branch_id,eigenvalue,overlap")?;
        for (s, t) in self.ts.iter().enumerate() {
            for b in 0..self.branch_count() {
                writeln!(w, "{t:.17e},{b},{:.17e},{:.6}", self.values[s][b], self.overlaps[s][b])?;
            }
        }
        Ok(())
    }
}

fn overlap(weights: &[f64], a: &ScalarField, b: &ScalarField) -> f64 {
    weights
        .iter()
        .zip(a.values())
        .zip(b.values())
        .map(|((w, x), y)| w * x * y)
        .sum()
}

fn spectrum_at(
    curve: &MetricCurve,
    c: f64,
    t: f64,
    k: usize,
    settings: &EigenSettings,
) -> Result<(MetricField, SpectralDecomposition)> {
    let g = curve.at(t)?;
    let k = k.min(g.grid().len());
    let spec = eig_lowest(&assemble(&g, c)?, k, None, settings)?;
    Ok((g, spec))
}

/// Groups consecutive branches whose values differ by less than `tol`.
fn clusters(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match out.last_mut() {
            Some(last) if values[i] - values[*last.last().expect("nonempty")] < tol => last.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Follows the lowest `window` eigenvalue branches of `−Δ_{g(t)} + c R_{g(t)}`
/// over `ts`, matching eigenvectors between neighbouring samples by maximal
/// `L²` overlap. Degenerate groups are matched as subspaces and labelled in
/// eigenvalue order.
pub fn track_branch(
    curve: &MetricCurve,
    c: f64,
    ts: &[f64],
    window: usize,
    settings: &EigenSettings,
) -> Result<BranchTrace> {
    if ts.is_empty() || window == 0 {
        return Err(Error::InvalidParameters("empty parameter grid or window".into()));
    }
    let spectra: Vec<(MetricField, SpectralDecomposition)> = ts
        .par_iter()
        .map(|&t| spectrum_at(curve, c, t, window + MARGIN, settings))
        .collect::<Result<_>>()?;
    let window = window.min(spectra[0].1.len());

    let first = &spectra[0].1;
    let mut values = vec![first.eigenvalues[..window].to_vec()];
    let mut overlaps = vec![vec![1.0; window]];
    let mut vectors = vec![first.eigenvectors[..window].to_vec()];
    let mut tol = first.kernel_tol;

    for (step, (g, spec)) in spectra.iter().enumerate().skip(1) {
        let prev_vals = values.last().expect("nonempty");
        let prev_vecs = vectors.last().expect("nonempty");
        let w = volume_element(g).into_values();
        let ov: Vec<Vec<f64>> = prev_vecs
            .iter()
            .map(|v| spec.eigenvectors.iter().map(|u| overlap(&w, v, u)).collect())
            .collect();
        let groups = clusters(prev_vals, tol);
        let mut candidates = Vec::new();
        for (gi, group) in groups.iter().enumerate() {
            let centre = group.iter().map(|&b| prev_vals[b]).sum::<f64>() / group.len() as f64;
            for j in 0..spec.len() {
                let sub = group.iter().map(|&b| ov[b][j].powi(2)).sum::<f64>().sqrt();
                candidates.push((gi, j, sub, (spec.eigenvalues[j] - centre).abs()));
            }
        }
        candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.3.total_cmp(&b.3)));
        let mut taken = vec![false; spec.len()];
        let mut assigned: Vec<Vec<(usize, f64)>> = vec![Vec::new(); groups.len()];
        for (gi, j, sub, _) in candidates {
            if !taken[j] && assigned[gi].len() < groups[gi].len() {
                taken[j] = true;
                assigned[gi].push((j, sub));
            }
        }
        let mut row_vals = vec![0.0; window];
        let mut row_ov = vec![0.0; window];
        let mut row_vecs = prev_vecs.clone();
        for (gi, group) in groups.iter().enumerate() {
            let mut picks = assigned[gi].clone();
            picks.sort_by(|a, b| spec.eigenvalues[a.0].total_cmp(&spec.eigenvalues[b.0]));
            let mut ids = group.clone();
            ids.sort_by(|&a, &b| prev_vals[a].total_cmp(&prev_vals[b]).then(a.cmp(&b)));
            for (slot, &b) in ids.iter().enumerate() {
                let Some(&(j, sub)) = picks.get(slot) else {
                    return Err(Error::BranchAmbiguity { step, branch: b, overlap: 0.0 });
                };
                if sub < MIN_OVERLAP {
                    return Err(Error::BranchAmbiguity { step, branch: b, overlap: sub });
                }
                let sign = if ov[b][j] < 0.0 { -1.0 } else { 1.0 };
                row_vals[b] = spec.eigenvalues[j];
                row_ov[b] = sub;
                row_vecs[b] = spec.eigenvectors[j].scale(sign);
            }
        }
        tol = spec.kernel_tol;
        values.push(row_vals);
        overlaps.push(row_ov);
        vectors.push(row_vecs);
    }
    Ok(BranchTrace { ts: ts.to_vec(), values, overlaps, vectors })
}

#[derive(Debug, Clone)]
pub struct KernelMetric {
    pub t: f64,
    pub metric: MetricField,
    /// Branch eigenvalue at `t`.
    pub eigenvalue: f64,
    /// Branch eigenfunction at `t`, `L²(dV_g)`-normalized.
    pub psi: ScalarField,
    pub trace: BranchTrace,
    pub evaluations: usize,
}

/// Locates `t*` where branch `branch` crosses zero and returns `g(t*)`.
///
/// The branch is tracked over `ts`; the first sign change is refined by a
/// bracketing (Illinois) search until `|λ(t*)| < value_tol`. Each new sample
/// is identified with the branch by eigenvector overlap.
pub fn find_kernel_metric(
    curve: &MetricCurve,
    c: f64,
    branch: usize,
    ts: &[f64],
    value_tol: f64,
    settings: &EigenSettings,
) -> Result<KernelMetric> {
    let window = branch + 2;
    let trace = track_branch(curve, c, ts, window, settings)?;
    if branch >= trace.branch_count() {
        return Err(Error::InvalidParameters(format!("branch {branch} is outside the solved window")));
    }
    let s = trace.sign_change(branch).ok_or(Error::NoSignChange { branch })?;
    let (mut a, mut fa) = (trace.ts[s], trace.values[s][branch]);
    let (mut b, mut fb) = (trace.ts[s + 1], trace.values[s + 1][branch]);
    let mut reference = trace.vectors[s][branch].clone();
    let mut best = if fa.abs() <= fb.abs() {
        (a, fa, trace.vectors[s][branch].clone())
    } else {
        (b, fb, trace.vectors[s + 1][branch].clone())
    };
    let mut evaluations = 0;
    let mut step = 0;
    while best.1.abs() >= value_tol && step < 200 && (b - a).abs() > 1e-15 * a.abs().max(1.0) {
        step += 1;
        let t = if fb != fa { (a * fb - b * fa) / (fb - fa) } else { 0.5 * (a + b) };
        let (g, spec) = spectrum_at(curve, c, t, window + MARGIN, settings)?;
        evaluations += 1;
        let w = volume_element(&g).into_values();
        let (j, ov) = (0..spec.len())
            .map(|j| (j, overlap(&w, &reference, &spec.eigenvectors[j])))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("nonempty spectrum");
        if ov.abs() < MIN_OVERLAP {
            return Err(Error::BranchAmbiguity { step: s, branch, overlap: ov.abs() });
        }
        let ft = spec.eigenvalues[j];
        let psi = spec.eigenvectors[j].scale(ov.signum());
        reference = psi.clone();
        if ft.abs() < best.1.abs() {
            best = (t, ft, psi);
        }
        if ft * fb < 0.0 {
            a = b;
            fa = fb;
        } else {
            fa *= 0.5;
        }
        b = t;
        fb = ft;
    }
    let (t, eigenvalue, psi) = best;
    Ok(KernelMetric { t, metric: curve.at(t)?, eigenvalue, psi, trace, evaluations })
}
