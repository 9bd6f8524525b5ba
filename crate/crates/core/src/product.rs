//! Conformal Laplacian spectra of products `(M × Σ, G ⊕ t⁻¹h)` built from
//! truncated component spectra.
//!
//! The base is a positively curved Yamabe metric (round sphere by default),
//! the fiber a hyperbolic surface (`R = −2`). Products are handled purely
//! through eigenvalue arithmetic: every eigenvalue of `Y` on the product is
//! `μ_i + t λ_j + c_{d+2}(R_G − 2t)`.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::coupling_constant;

/// Low end of the band holding the designated fiber eigenvalues.
pub const BAND_START: f64 = 0.25;

/// A truncated Laplace spectrum with multiplicities folded into the list.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractSpectrum {
    eigenvalues: Vec<f64>,
    dim: usize,
    scalar_curvature: f64,
    truncation_bound: f64,
}

impl AbstractSpectrum {
    /// Every omitted eigenvalue is declared to exceed `truncation_bound`.
    pub fn new(eigenvalues: Vec<f64>, dim: usize, scalar_curvature: f64, truncation_bound: f64) -> Result<Self> {
        if eigenvalues.first() != Some(&0.0) {
            return Err(Error::InvalidParameters("spectrum must start at 0".into()));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) || !scalar_curvature.is_finite() {
            return Err(Error::InvalidParameters("spectrum must be finite".into()));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameters("spectrum must be ascending".into()));
        }
        if eigenvalues.last().is_some_and(|&v| v > truncation_bound) {
            return Err(Error::InvalidParameters(format!(
                "eigenvalue above truncation bound {truncation_bound}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameters("dimension must be positive".into()));
        }
        Ok(AbstractSpectrum { eigenvalues, dim, scalar_curvature, truncation_bound })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scalar_curvature(&self) -> f64 {
        self.scalar_curvature
    }

    pub fn truncation_bound(&self) -> f64 {
        self.truncation_bound
    }

    /// Eigenvalues in the open band `(1/4, 1/4 + ε)`.
    pub fn band(&self, epsilon: f64) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .copied()
            .filter(|&v| v > BAND_START && v < BAND_START + epsilon)
            .collect()
    }

    /// Comment line, column header, one eigenvalue per line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# dim={} scalar_curvature={} truncation_bound={}",
            self.dim, self.scalar_curvature, self.truncation_bound
        )?;
        writeln!(w, "eigenvalue")?;
        for v in &self.eigenvalues {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut dim = None;
        let mut curvature = None;
        let mut bound = None;
        let mut values = Vec::new();
        let mut seen_header = false;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for item in meta.split_whitespace() {
                    let Some((key, value)) = item.split_once('=') else { continue };
                    let bad = || Error::Format(format!("bad header value {item}"));
                    match key {
                        "dim" => dim = Some(value.parse::<usize>().map_err(|_| bad())?),
                        "scalar_curvature" => curvature = Some(value.parse::<f64>().map_err(|_| bad())?),
                        "truncation_bound" => bound = Some(value.parse::<f64>().map_err(|_| bad())?),
                        _ => {}
                    }
                }
                continue;
            }
            if !seen_header {
                if line != "eigenvalue" {
                    return Err(Error::Format(format!("expected column header, found {line}")));
                }
                seen_header = true;
                continue;
            }
            values.push(line.parse::<f64>().map_err(|_| Error::Format(format!("bad eigenvalue {line}")))?);
        }
        let missing = |what: &str| Error::Format(format!("missing {what} in header"));
        AbstractSpectrum::new(
            values,
            dim.ok_or_else(|| missing("dim"))?,
            curvature.ok_or_else(|| missing("scalar_curvature"))?,
            bound.ok_or_else(|| missing("truncation_bound"))?,
        )
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (1..=k.min(n - k)).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

/// Laplace spectrum of the unit round sphere `S^d` up to degree `l_max`.
pub fn sphere_spectrum(d: usize, l_max: usize) -> Result<AbstractSpectrum> {
    if d < 2 {
        return Err(Error::InvalidParameters(format!("sphere dimension {d} must be at least 2")));
    }
    let (d64, mut values) = (d as u64, Vec::new());
    for l in 0..=l_max as u64 {
        // Degree-l harmonic polynomials in d + 1 variables.
        let mult = binomial(l + d64, d64) - if l >= 2 { binomial(l + d64 - 2, d64) } else { 0 };
        let value = (l * (l + d64 - 1)) as f64;
        values.extend(std::iter::repeat_n(value, mult as usize));
    }
    let bound = (l_max * (l_max + d - 1)) as f64;
    AbstractSpectrum::new(values, d, (d * (d - 1)) as f64, bound)
}

/// Synthetic spectrum of a hyperbolic surface of genus `genus` with `k`
/// eigenvalues in `(1/4, 1/4 + ε)` and a Weyl-law tail up to `cutoff`.
///
/// The band values are a prefix of one random stream, so raising `k` keeps
/// the earlier values; the tail comes from a separate stream and does not
/// depend on `k`.
pub fn buser_surrogate_spectrum(k: usize, epsilon: f64, genus: usize, seed: u64, cutoff: f64) -> Result<AbstractSpectrum> {
    if genus < 2 {
        return Err(Error::InvalidParameters(format!("genus {genus} must be at least 2")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0 / 12.0) {
        return Err(Error::InvalidParameters(format!("epsilon {epsilon} must lie in (0, 1/12)")));
    }
    if k == 0 {
        return Err(Error::InvalidParameters("k must be at least 1".into()));
    }
    let top = BAND_START + epsilon;
    if !(cutoff >= top) {
        return Err(Error::InvalidParameters(format!("cutoff {cutoff} lies below the band")));
    }
    let mut band_rng = ChaCha8Rng::seed_from_u64(seed);
    band_rng.set_stream(0);
    let mut values = vec![0.0];
    while values.len() <= k {
        let v = band_rng.random_range(BAND_START..top);
        if v > BAND_START {
            values.push(v);
        }
    }
    // Counting function (γ − 1) λ of a surface with area 4π(γ − 1).
    let mut tail_rng = ChaCha8Rng::seed_from_u64(seed);
    tail_rng.set_stream(1);
    let density = (genus - 1) as f64;
    for j in 0.. {
        let v = (j as f64 + tail_rng.random_range(0.0..1.0)) / density;
        if v > cutoff {
            break;
        }
        if v >= top {
            values.push(v);
        }
    }
    values.sort_by(f64::total_cmp);
    AbstractSpectrum::new(values, 2, -2.0, cutoff)
}

/// Base, fiber and the parameters of the product `G ⊕ t⁻¹h`.
#[derive(Debug, Clone)]
pub struct ProductSpec {
    pub base: AbstractSpectrum,
    pub fiber: AbstractSpectrum,
    pub t: f64,
    pub epsilon: f64,
    pub k: usize,
}

impl ProductSpec {
    pub fn validate(&self) -> Result<()> {
        validate_components(&self.base, &self.fiber, self.epsilon, self.k)?;
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidParameters(format!("t = {} must be positive", self.t)));
        }
        Ok(())
    }

    /// Total dimension `d + 2`.
    pub fn dim(&self) -> usize {
        self.base.dim + 2
    }

    /// Constant shift `c_{d+2}(R_G − 2t)` shared by every product eigenvalue.
    pub fn shift(&self) -> Result<f64> {
        product_shift(&self.base, self.t)
    }

    /// The `k` lowest fiber eigenvalues in `(1/4, 1/4 + ε)`.
    pub fn designated(&self) -> Vec<f64> {
        self.fiber.band(self.epsilon).into_iter().take(self.k).collect()
    }
}

fn validate_components(base: &AbstractSpectrum, fiber: &AbstractSpectrum, epsilon: f64, k: usize) -> Result<()> {
    if base.dim < 2 {
        return Err(Error::InvalidParameters(format!("base dimension {} must be at least 2", base.dim)));
    }
    if !(base.scalar_curvature > 0.0) {
        return Err(Error::InvalidParameters("base scalar curvature must be positive".into()));
    }
    if fiber.dim != 2 || fiber.scalar_curvature != -2.0 {
        return Err(Error::InvalidParameters("fiber must be a hyperbolic surface (dim 2, R = -2)".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameters(format!("epsilon {epsilon} must be positive")));
    }
    let found = fiber.band(epsilon).len();
    if found < k {
        return Err(Error::InvalidParameters(format!(
            "fiber has {found} eigenvalues in the band, need {k}"
        )));
    }
    Ok(())
}

fn product_shift(base: &AbstractSpectrum, t: f64) -> Result<f64> {
    Ok(coupling_constant(base.dim + 2)? * (base.scalar_curvature - 2.0 * t))
}

/// Scalar curvature `R_G − 2t` of `G ⊕ t⁻¹h` when `h` has Gauss curvature −1.
pub fn product_scalar_curvature(spec: &ProductSpec) -> f64 {
    spec.base.scalar_curvature - 2.0 * spec.t
}

/// Checks that no eigenvalue omitted by either truncation can be negative
/// or zero: omitted values are at least `Λ_base + shift` or `t Λ_fiber + shift`.
pub fn check_truncation(spec: &ProductSpec) -> Result<()> {
    let shift = spec.shift()?;
    let margin = 1e-9 * (1.0 + shift.abs());
    let base_floor = spec.base.truncation_bound + shift;
    let fiber_floor = spec.t * spec.fiber.truncation_bound + shift;
    if base_floor <= margin {
        return Err(Error::TruncationInadequate(format!(
            "base bound {} does not clear shift {shift}",
            spec.base.truncation_bound
        )));
    }
    if fiber_floor <= margin {
        return Err(Error::TruncationInadequate(format!(
            "fiber bound {} does not clear shift {shift} at t = {}",
            spec.fiber.truncation_bound, spec.t
        )));
    }
    Ok(())
}

/// Every eigenvalue `μ_i + t λ_j + shift` of the truncated product, ascending.
pub fn product_conformal_spectrum(spec: &ProductSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    check_truncation(spec)?;
    let shift = spec.shift()?;
    let mut out: Vec<f64> = spec
        .base
        .eigenvalues
        .iter()
        .flat_map(|&mu| spec.fiber.eigenvalues.iter().map(move |&la| mu + spec.t * la + shift))
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// `(negative, zero, positive)` counts with zero meaning `|λ| ≤ tol`.
pub fn sign_counts(values: &[f64], tol: f64) -> (usize, usize, usize) {
    values.iter().fold((0, 0, 0), |(n, z, p), &v| {
        if v < -tol {
            (n + 1, z, p)
        } else if v > tol {
            (n, z, p + 1)
        } else {
            (n, z + 1, p)
        }
    })
}

/// One row of an admissibility sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub t: f64,
    /// Designated fiber modes whose product eigenvalue `t λ + shift` is negative.
    pub designated_negative: usize,
    pub admissible: bool,
    /// `t > R_G/2`.
    pub negative_curvature: bool,
    /// `t > R_G/2` and the printed upper bound `t < R_G d/(d − 1 − 4ε(d+1))`.
    pub printed_admissible: bool,
    /// `t > R_G d/(d − 1 − 4ε(d+1))`, the bound obtained by solving the
    /// negativity condition for `t`.
    pub corrected_admissible: bool,
    /// Printed closed form and direct evaluation give different verdicts.
    pub disagreement: bool,
}

#[derive(Debug, Clone)]
pub struct AdmissibleReport {
    pub rows: Vec<SweepRow>,
    /// Swept `t` for which all designated modes are negative.
    pub admissible: Vec<f64>,
    /// `R_G / 2`.
    pub curvature_bound: f64,
    /// `R_G d/(d − 1 − 4ε(d+1))`; the printed form uses it as an upper bound,
    /// solving the negativity condition makes it a lower bound.
    pub closed_form_bound: f64,
    /// Whether `d/(d − 1 − 4ε(d+1)) > 1/2`, the printed compatibility condition.
    pub printed_compatible: bool,
    /// Some swept `t` where the printed inequalities and direct evaluation disagree.
    pub printed_disagrees: bool,
    /// Some swept `t` above the corrected bound that is not admissible.
    pub corrected_violated: bool,
}

/// Direct admissibility of each `t` in `ts` for the `k` designated fiber modes,
/// compared with the closed-form bounds.
pub fn admissible_t(
    base: &AbstractSpectrum,
    fiber: &AbstractSpectrum,
    epsilon: f64,
    k: usize,
    ts: &[f64],
) -> Result<AdmissibleReport> {
    validate_components(base, fiber, epsilon, k)?;
    let d = base.dim as f64;
    let denom = d - 1.0 - 4.0 * epsilon * (d + 1.0);
    if !(denom > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "epsilon {epsilon} must be below (d-1)/(4(d+1))"
        )));
    }
    if ts.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameters("swept t must be positive".into()));
    }
    let r_g = base.scalar_curvature;
    let curvature_bound = r_g / 2.0;
    let closed_form_bound = r_g * d / denom;
    let designated: Vec<f64> = fiber.band(epsilon).into_iter().take(k).collect();
    let rows: Vec<SweepRow> = ts
        .par_iter()
        .map(|&t| {
            let shift = product_shift(base, t)?;
            let designated_negative = designated.iter().filter(|&&la| t * la + shift < 0.0).count();
            let admissible = designated_negative >= k;
            let negative_curvature = t > curvature_bound;
            let printed_admissible = negative_curvature && t < closed_form_bound;
            Ok(SweepRow {
                t,
                designated_negative,
                admissible,
                negative_curvature,
                printed_admissible,
                corrected_admissible: t > closed_form_bound,
                disagreement: printed_admissible != admissible,
            })
        })
        .collect::<Result<_>>()?;
    let admissible: Vec<f64> = rows.iter().filter(|r| r.admissible).map(|r| r.t).collect();
    if admissible.is_empty() {
        let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::EmptyAdmissibleSet { lo, hi });
    }
    Ok(AdmissibleReport {
        printed_disagrees: rows.iter().any(|r| r.disagreement),
        corrected_violated: rows.iter().any(|r| r.corrected_admissible && !r.admissible),
        rows,
        admissible,
        curvature_bound,
        closed_form_bound,
        printed_compatible: d / denom > 0.5,
    })
}

impl AdmissibleReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "t,designated_negative,admissible,negative_curvature,printed_admissible,corrected_admissible,disagreement"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.t,
                r.designated_negative,
                r.admissible,
                r.negative_curvature,
                r.printed_admissible,
                r.corrected_admissible,
                r.disagreement
            )?;
        }
        Ok(())
    }
}

/// Spectrum after the homothety `g → s g` with `s = −R` that normalizes `R ≡ −1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub eigenvalues: Vec<f64>,
    pub scale: f64,
    pub scalar_curvature: f64,
}

pub fn yamabe_rescale(values: &[f64], r_before: f64) -> Result<Rescaled> {
    if !(r_before < 0.0) {
        return Err(Error::NonNegativeScalarCurvature(r_before));
    }
    let scale = -r_before;
    Ok(Rescaled {
        eigenvalues: values.iter().map(|v| v / scale).collect(),
        scale,
        scalar_curvature: -1.0,
    })
}

/// Geometric metadata of one metric in a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub volume: f64,
    pub injectivity_radius: f64,
    /// `−a²` with `Ric ≥ −a²`.
    pub ricci_lower: f64,
    pub diameter: f64,
    pub negative_count: usize,
}

/// Candidate uniform constants `(V, r, a², D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBounds {
    pub volume: f64,
    pub injectivity: f64,
    pub ricci: f64,
    pub diameter: f64,
}

impl UniformBounds {
    /// `Vol ≤ V`, `inj ≥ r > 0`, `Ric ≥ −a²`.
    pub fn volume_injectivity_holds(&self, r: &MetricRecord) -> bool {
        self.injectivity > 0.0
            && r.volume <= self.volume
            && r.injectivity_radius >= self.injectivity
            && r.ricci_lower >= -self.ricci
    }

    /// `diam ≤ D`, `Ric ≥ −a²`.
    pub fn diameter_holds(&self, r: &MetricRecord) -> bool {
        r.diameter <= self.diameter && r.ricci_lower >= -self.ricci
    }

    /// Tightest constants satisfied by every record in `records`.
    pub fn tightest(records: &[MetricRecord]) -> Self {
        let max = |f: fn(&MetricRecord) -> f64| records.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        UniformBounds {
            volume: max(|r| r.volume),
            injectivity: records.iter().map(|r| r.injectivity_radius).fold(f64::INFINITY, f64::min),
            ricci: max(|r| -r.ricci_lower).max(0.0),
            diameter: max(|r| r.diameter),
        }
    }
}

/// Constants fitted to a prefix of the family and the first later record breaking them.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub prefix: usize,
    pub bounds: UniformBounds,
    pub volume_injectivity_broken_at: Option<usize>,
    pub diameter_broken_at: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct PrecompactnessReport {
    /// Declared bounds hold for every record (volume, injectivity, Ricci).
    pub volume_injectivity: bool,
    /// Declared bounds hold for every record (diameter, Ricci).
    pub diameter: bool,
    pub volume_injectivity_failures: Vec<usize>,
    pub diameter_failures: Vec<usize>,
    pub negative_counts: Vec<usize>,
    pub counts_increasing: bool,
    pub injectivity_decreasing: bool,
    pub diameter_increasing: bool,
    pub ladder: Vec<LadderRung>,
    /// Every rung is broken by a later record under both conditions while
    /// the negative count grows: no constants fitted to the family hold
    /// across it.
    pub no_uniform_constants: bool,
}

fn strictly<T: PartialOrd>(v: &[T], up: bool) -> bool {
    v.windows(2).all(|w| if up { w[1] > w[0] } else { w[1] < w[0] })
}

/// Evaluates both precompactness conditions for `declared` over `records`
/// and builds the ladder of tightest constants of each proper prefix.
pub fn check_precompactness(records: &[MetricRecord], declared: &UniformBounds) -> PrecompactnessReport {
    let vi_fail: Vec<usize> = (0..records.len())
        .filter(|&i| !declared.volume_injectivity_holds(&records[i]))
        .collect();
    let d_fail: Vec<usize> = (0..records.len())
        .filter(|&i| !declared.diameter_holds(&records[i]))
        .collect();
    let ladder: Vec<LadderRung> = (1..records.len())
        .map(|prefix| {
            let bounds = UniformBounds::tightest(&records[..prefix]);
            let later = prefix..records.len();
            LadderRung {
                prefix,
                bounds,
                volume_injectivity_broken_at: later.clone().find(|&i| !bounds.volume_injectivity_holds(&records[i])),
                diameter_broken_at: later.clone().find(|&i| !bounds.diameter_holds(&records[i])),
            }
        })
        .collect();
    let counts: Vec<usize> = records.iter().map(|r| r.negative_count).collect();
    let inj: Vec<f64> = records.iter().map(|r| r.injectivity_radius).collect();
    let diam: Vec<f64> = records.iter().map(|r| r.diameter).collect();
    let counts_increasing = strictly(&counts, true);
    let no_uniform_constants = records.len() >= 2
        && counts_increasing
        && ladder
            .iter()
            .all(|r| r.volume_injectivity_broken_at.is_some() && r.diameter_broken_at.is_some());
    PrecompactnessReport {
        volume_injectivity: vi_fail.is_empty(),
        diameter: d_fail.is_empty(),
        volume_injectivity_failures: vi_fail,
        diameter_failures: d_fail,
        negative_counts: counts,
        counts_increasing,
        injectivity_decreasing: strictly(&inj, false),
        diameter_increasing: strictly(&diam, true),
        ladder,
        no_uniform_constants,
    }
}

impl PrecompactnessReport {
    pub fn write_csv<W: Write>(&self, records: &[MetricRecord], mut w: W) -> Result<()> {
        writeln!(
            w,
            "index,volume,injectivity_radius,ricci_lower,diameter,negative_count,volume_injectivity_ok,diameter_ok"
        )?;
        for (i, r) in records.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{},{},{},{}",
                r.volume,
                r.injectivity_radius,
                r.ricci_lower,
                r.diameter,
                r.negative_count,
                !self.volume_injectivity_failures.contains(&i),
                !self.diameter_failures.contains(&i)
            )?;
        }
        Ok(())
    }
}

/// Recipe for the product family `(S^d × Σ, (G ⊕ t⁻¹h_k)/(2t − R_G))`.
#[derive(Debug, Clone)]
pub struct ProductFamily {
    pub base_dim: usize,
    pub l_max: usize,
    pub t: f64,
    pub epsilon: f64,
    pub genus: usize,
    pub seed: u64,
    pub cutoff: f64,
}

/// One member of the family, already rescaled to `R ≡ −1`.
#[derive(Debug, Clone)]
pub struct FamilyMember {
    pub k: usize,
    pub spec: ProductSpec,
    pub rescaled: Rescaled,
    pub counts: (usize, usize, usize),
    pub record: MetricRecord,
}

impl ProductFamily {
    /// Member with `k` designated fiber modes; the fiber's injectivity radius
    /// is declared as `1/k`, shrinking as the band fills up.
    pub fn member(&self, k: usize) -> Result<FamilyMember> {
        let base = sphere_spectrum(self.base_dim, self.l_max)?;
        let fiber = buser_surrogate_spectrum(k, self.epsilon, self.genus, self.seed, self.cutoff)?;
        let spec = ProductSpec { base, fiber, t: self.t, epsilon: self.epsilon, k };
        let values = product_conformal_spectrum(&spec)?;
        let rescaled = yamabe_rescale(&values, product_scalar_curvature(&spec))?;
        let counts = sign_counts(&rescaled.eigenvalues, 1e-12);
        let record = self.record(&spec, rescaled.scale, 1.0 / k as f64, counts.0);
        Ok(FamilyMember { k, spec, rescaled, counts, record })
    }

    pub fn members(&self, ks: &[usize]) -> Result<Vec<FamilyMember>> {
        ks.par_iter().map(|&k| self.member(k)).collect()
    }

    /// Metadata of `s (G ⊕ t⁻¹h)` for the unit sphere `G` and a hyperbolic
    /// `h` with injectivity radius `inj`.
    fn record(&self, spec: &ProductSpec, s: f64, inj: f64, negative_count: usize) -> MetricRecord {
        let d = self.base_dim as f64;
        let t = spec.t;
        let sphere_volume = 2.0 * std::f64::consts::PI.powf((d + 1.0) / 2.0) / gamma_half_integer(self.base_dim + 1);
        let surface_area = 4.0 * std::f64::consts::PI * (self.genus as f64 - 1.0);
        // The collar around a geodesic of length 2·inj has half-width
        // arcsinh(1/sinh(inj)), so the surface is at least twice as wide.
        let fiber_diameter = 2.0 * (1.0 / inj.sinh()).asinh();
        let fiber_scale = s / t;
        MetricRecord {
            volume: s.powf(d / 2.0) * sphere_volume * fiber_scale * surface_area,
            injectivity_radius: (std::f64::consts::PI * s.sqrt()).min(inj * fiber_scale.sqrt()),
            ricci_lower: ((d - 1.0) / s).min(-1.0 / fiber_scale),
            diameter: (s * std::f64::consts::PI.powi(2) + fiber_scale * fiber_diameter.powi(2)).sqrt(),
            negative_count,
        }
    }
}

/// `Γ(m/2)` for a positive integer `m`.
fn gamma_half_integer(m: usize) -> f64 {
    match m {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (m as f64 / 2.0 - 1.0) * gamma_half_integer(m - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fiber(values: &[f64], bound: f64) -> AbstractSpectrum {
        AbstractSpectrum::new(values.to_vec(), 2, -2.0, bound).unwrap()
    }

    #[test]
    fn sphere_spectra() {
        let s = sphere_spectrum(2, 2).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0]);
        assert_eq!(s.scalar_curvature(), 2.0);
        let s = sphere_spectrum(3, 1).unwrap();
        assert_eq!(s.eigenvalues(), &[0.0, 3.0, 3.0, 3.0, 3.0]);
        assert_eq!(s.scalar_curvature(), 6.0);
        for d in 2..8 {
            let s = sphere_spectrum(d, 1).unwrap();
            assert_eq!(s.eigenvalues().iter().filter(|&&v| v == d as f64).count(), d + 1);
        }
        // Degree-2 harmonics: (d+1)(d+2)/2 − 1.
        let s = sphere_spectrum(4, 2).unwrap();
        assert_eq!(s.eigenvalues().iter().filter(|&&v| v == 10.0).count(), 14);
        assert!(sphere_spectrum(1, 3).is_err());
    }

    #[test]
    fn surrogate_contract() {
        let s = buser_surrogate_spectrum(3, 0.05, 2, 7, 10.0).unwrap();
        assert_eq!(s.band(0.05).len(), 3);
        assert_eq!(s.eigenvalues()[0], 0.0);
        assert!(s.eigenvalues()[4..].iter().all(|&v| v >= 0.3));
        assert_eq!(s, buser_surrogate_spectrum(3, 0.05, 2, 7, 10.0).unwrap());
        for genus in [2, 3, 5] {
            let s = buser_surrogate_spectrum(2, 0.05, genus, 1, 10.0).unwrap();
            let tail = s.eigenvalues().iter().filter(|&&v| v >= 0.3).count() as f64;
            let weyl = (genus - 1) as f64 * 10.0;
            assert!(tail > weyl / 2.0 && tail < 2.0 * weyl, "{tail} vs {weyl}");
        }
        let small = buser_surrogate_spectrum(2, 0.05, 2, 9, 10.0).unwrap();
        let large = buser_surrogate_spectrum(5, 0.05, 2, 9, 10.0).unwrap();
        let band = large.band(0.05);
        assert!(small.band(0.05).iter().all(|v| band.contains(v)));
        assert!(buser_surrogate_spectrum(0, 0.05, 2, 0, 10.0).is_err());
        assert!(buser_surrogate_spectrum(1, 0.1, 2, 0, 10.0).is_err());
        assert!(buser_surrogate_spectrum(1, 0.05, 1, 0, 10.0).is_err());
    }

    #[test]
    fn curvature_and_shift() {
        let spec = ProductSpec {
            base: sphere_spectrum(2, 3).unwrap(),
            fiber: fiber(&[0.0, 0.26], 1.0),
            t: 9.0,
            epsilon: 0.05,
            k: 1,
        };
        assert_eq!(product_scalar_curvature(&spec), -16.0);
        assert!((spec.shift().unwrap() + 8.0 / 3.0).abs() < 1e-15);
        let one = ProductSpec { t: 1.0, ..spec.clone() };
        assert_eq!(product_scalar_curvature(&one), 0.0);
        let values = product_conformal_spectrum(&spec).unwrap();
        assert!((values[0] + 8.0 / 3.0).abs() < 1e-15);
        let r = yamabe_rescale(&values, -16.0).unwrap();
        assert!((r.eigenvalues[0] + 1.0 / 6.0).abs() < 1e-15);
        assert!((r.eigenvalues[0] + coupling_constant(4).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn product_matches_brute_force_count() {
        let spec = ProductSpec {
            base: sphere_spectrum(2, 3).unwrap(),
            fiber: fiber(&[0.0, 0.26, 0.27, 0.28], 1.0),
            t: 12.0,
            epsilon: 0.05,
            k: 3,
        };
        let values = product_conformal_spectrum(&spec).unwrap();
        let shift = 2.0 * (2.0 - 24.0) / 12.0;
        let mut brute = 0;
        for l in 0..=3u32 {
            for _ in 0..(2 * l + 1) {
                for la in [0.0, 0.26, 0.27, 0.28] {
                    if (l * (l + 1)) as f64 + 12.0 * la + shift < 0.0 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(sign_counts(&values, 1e-12).0, brute);
        assert_eq!(values.len(), 16 * 4);
    }

    #[test]
    fn truncation_is_enforced() {
        let spec = ProductSpec {
            base: sphere_spectrum(2, 1).unwrap(),
            fiber: fiber(&[0.0, 0.26], 0.26),
            t: 30.0,
            epsilon: 0.05,
            k: 1,
        };
        // Shift is −29/3 while the base only reaches 2.
        assert!(matches!(product_conformal_spectrum(&spec), Err(Error::TruncationInadequate(_))));
    }

    #[test]
    fn admissibility_threshold() {
        // Designated value just inside the band edge puts the threshold just below t = 10.
        let top = 0.3 - 1e-12;
        let f = fiber(&[0.0, 0.26, top], 1.0);
        // t λ + (R − 2t)/6 < 0  ⇔  t > R/(2 − 6λ) for d = 2.
        let threshold = 2.0 / (2.0 - 6.0 * top);
        let base = sphere_spectrum(2, 3).unwrap();
        let ts: Vec<f64> = (1..=60).map(|i| i as f64 * 0.5).collect();
        let rep = admissible_t(&base, &f, 0.05, 2, &ts).unwrap();
        assert!((rep.closed_form_bound - 10.0).abs() < 1e-12);
        assert_eq!(rep.curvature_bound, 1.0);
        for row in &rep.rows {
            assert_eq!(row.admissible, row.t > threshold, "t = {}", row.t);
            assert_eq!(row.corrected_admissible, row.t > 10.0);
        }
        assert!(rep.printed_disagrees);
        assert!(!rep.corrected_violated);
        let boundary = admissible_t(&base, &f, 0.05, 2, &[1.0]);
        assert!(matches!(boundary, Err(Error::EmptyAdmissibleSet { .. })));
        // Threshold d(2t − R)/(4t(d+1)) at t = 12.
        let th: f64 = 2.0 * (24.0 - 2.0) / (4.0 * 12.0 * 3.0);
        assert!((th - 44.0 / 144.0).abs() < 1e-15 && th > 0.3);
    }

    #[test]
    fn rescale_errors_and_identity() {
        assert!(matches!(yamabe_rescale(&[1.0], 0.0), Err(Error::NonNegativeScalarCurvature(_))));
        assert_eq!(yamabe_rescale(&[-2.0, 0.5], -1.0).unwrap().eigenvalues, vec![-2.0, 0.5]);
    }

    #[test]
    fn precompactness_predicates() {
        let rec = |inj: f64, count: usize| MetricRecord {
            volume: 1.0,
            injectivity_radius: inj,
            ricci_lower: -1.0,
            diameter: 2.0,
            negative_count: count,
        };
        let constant: Vec<MetricRecord> = (0..5).map(|_| rec(0.1, 1)).collect();
        let bounds = UniformBounds { volume: 1.0, injectivity: 0.1, ricci: 1.0, diameter: 2.0 };
        let r = check_precompactness(&constant, &bounds);
        assert!(r.volume_injectivity && r.diameter && !r.no_uniform_constants);

        let family = ProductFamily { base_dim: 2, l_max: 4, t: 12.0, epsilon: 0.05, genus: 2, seed: 3, cutoff: 10.0 };
        let members = family.members(&[1, 2, 4, 8, 16]).unwrap();
        let records: Vec<MetricRecord> = members.iter().map(|m| m.record.clone()).collect();
        let report = check_precompactness(&records, &UniformBounds::tightest(&records[..1]));
        assert!(!report.volume_injectivity && !report.diameter);
        assert!(report.counts_increasing && report.injectivity_decreasing && report.diameter_increasing);
        assert!(report.no_uniform_constants);
        for m in &members {
            assert!(m.counts.0 >= m.k);
        }
    }

    #[test]
    fn csv_round_trip() {
        let s = buser_surrogate_spectrum(4, 0.05, 3, 11, 6.0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(AbstractSpectrum::read_csv(buf.as_slice()).unwrap(), s);
        assert!(AbstractSpectrum::read_csv("eigenvalue\n0\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn corrected_bound_is_sufficient(seed in 0u64..100, k in 1usize..6, eps in 0.01f64..0.08, dt in 0.0f64..20.0) {
            let base = sphere_spectrum(2, 2).unwrap();
            let f = buser_surrogate_spectrum(k, eps, 2, seed, 2.0).unwrap();
            let bound = 2.0 * 2.0 / (1.0 - 12.0 * eps);
            let t = bound * (1.0 + 1e-9) + dt;
            let rep = admissible_t(&base, &f, eps, k, &[t]).unwrap();
            prop_assert!(rep.rows[0].admissible);
        }

        #[test]
        fn rescale_preserves_counts(values in proptest::collection::vec(-10.0f64..10.0, 1..40), r in -50.0f64..-0.01) {
            let out = yamabe_rescale(&values, r).unwrap();
            prop_assert_eq!(sign_counts(&values, 0.0), sign_counts(&out.eigenvalues, 0.0));
        }
    }
}
