//! Fourier-Bohr amplitudes, Weyl sums, finite autocorrelation and the
//! extinction analysis of deformed silver-mean sets.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deform::{Atom, DeformationKind, DeformationMap, DiracComb};
use crate::error::{Error, Result};
use crate::quadfield::{dual_coordinates, enumerate_dual, enumerate_dual_box, AlgebraicNumber, Real, DEFAULT_STAR_FACTOR};
use crate::quadrature::integrate_complex;
use crate::summation::{unit_phase, unit_phase_scaled, ComplexSum};

pub const DEFAULT_PANELS: usize = 4096;
pub const DEFAULT_FLOOR: f64 = 1e-8;
pub const AUTOCORRELATION_CAP: usize = 20_000;

/// Normalization `dens / |W| = 1 / covol(L)`, with `covol = 2 sqrt2`.
const NORMALIZATION: f64 = 1.0 / (2.0 * std::f64::consts::SQRT_2);

fn require_dual(k: &AlgebraicNumber) -> Result<()> {
    if dual_coordinates(k).is_none() {
        return Err(Error::NotInDual(k.to_string()));
    }
    Ok(())
}

/// `exp(-2 pi i k x)`, reducing `k x` modulo 1 exactly when both are exact
/// and in double-double when only `x` is.
fn phase(k: Real, x: Real) -> Complex64 {
    match (k, x) {
        (Real::Exact(k), Real::Exact(x)) => {
            if let Ok(p) = k.checked_mul(&x) {
                let n = AlgebraicNumber::integer(p.to_f64().round() as i64);
                if let Ok(r) = p.checked_sub(&n) {
                    return unit_phase(r.to_f64());
                }
            }
            let (hi, lo) = x.to_f64_pair();
            unit_phase_scaled(k.to_f64(), hi, lo)
        }
        (Real::Float(k), Real::Exact(x)) => {
            let (hi, lo) = x.to_f64_pair();
            unit_phase_scaled(k, hi, lo)
        }
        _ => unit_phase(k.value() * x.value()),
    }
}

/// `z / pi = (alpha k - k*) sqrt2`, exact when `alpha` is.
fn sinc_argument(k: &AlgebraicNumber, alpha: Real) -> Result<Real> {
    let diff = alpha.checked_mul(Real::Exact(*k))?.checked_sub(Real::Exact(k.star()))?;
    diff.checked_mul(Real::Exact(AlgebraicNumber::SQRT2))
}

/// `sin z / (2 z)` with `z = pi q`; exact zeros and the `z = 0` limit are
/// decided on `q` itself.
fn half_sinc(q: Real) -> f64 {
    if let Real::Exact(q) = q {
        if q.is_zero() {
            return 0.5;
        }
        if q.is_integer() {
            return 0.0;
        }
    }
    let z = std::f64::consts::PI * q.value();
    if z == 0.0 {
        0.5
    } else {
        z.sin() / (2.0 * z)
    }
}

/// `A(k) = exp(-2 pi i beta k) sin z / (2 z)`, `z = pi (alpha k - k*) sqrt2`.
pub fn amplitude_closed(k: &AlgebraicNumber, alpha: Real, beta: Real) -> Result<Complex64> {
    require_dual(k)?;
    let s = half_sinc(sinc_argument(k, alpha)?);
    Ok(phase(Real::Exact(*k), beta) * s)
}

/// `A(k) = 1/(2 sqrt2) * integral over W of exp(2 pi i (k* y - k theta(y))) dy`,
/// with composite Gauss-Legendre panels split at the breakpoints of `theta`.
pub fn amplitude_quadrature(k: &AlgebraicNumber, map: &DeformationMap, panels: usize) -> Result<Complex64> {
    require_dual(k)?;
    if panels < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 panels, got {panels}")));
    }
    let (kf, ks) = (k.to_f64(), k.star().to_f64());
    let mut pieces = Vec::new();
    for (lo, hi) in map.domain().to_f64() {
        let mut cuts = vec![lo];
        cuts.extend(map.breakpoints_in(lo, hi));
        cuts.push(hi);
        pieces.extend(cuts.windows(2).map(|w| (w[0], w[1])));
    }
    let total: f64 = pieces.iter().map(|(a, b)| b - a).sum();
    let integrand = |y: f64| {
        let t = 2.0 * std::f64::consts::PI * (ks * y - kf * map.eval_f64(y));
        Complex64::new(t.cos(), t.sin())
    };
    let mut acc = ComplexSum::new();
    for (lo, hi) in pieces {
        let n = ((panels as f64 * (hi - lo) / total).round() as usize).max(1);
        acc += integrate_complex(integrand, lo, hi, n);
    }
    Ok(acc.value() * NORMALIZATION)
}

/// `S_r(k) = 1/(2r) sum_x w_x exp(-2 pi i k x)`, compensated.
pub fn weyl_sum(comb: &DiracComb, k: Real) -> Complex64 {
    if comb.radius() <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let s: ComplexSum = comb.atoms().iter().map(|a| a.weight * phase(k, a.position)).collect();
    s.value() / (2.0 * comb.radius())
}

/// `1/(2r) sum_{x,y} conj(w_x) w_y delta_{y - x}`.
pub fn autocorrelation_finite(comb: &DiracComb) -> Result<DiracComb> {
    autocorrelation_with_cap(comb, AUTOCORRELATION_CAP)
}

pub fn autocorrelation_with_cap(comb: &DiracComb, cap: usize) -> Result<DiracComb> {
    let n = comb.len();
    if n > cap {
        return Err(Error::TooManyPoints { points: n, cap });
    }
    let norm = if comb.radius() > 0.0 { 1.0 / (2.0 * comb.radius()) } else { 1.0 };
    let atoms = comb.atoms();
    let mut exact: HashMap<AlgebraicNumber, Complex64> = HashMap::new();
    let mut inexact = Vec::new();
    // products are accumulated raw and normalized once, so integer pair
    // counts stay exact
    for x in atoms {
        for y in atoms {
            let w = x.weight.conj() * y.weight;
            match y.position.checked_sub(x.position)? {
                Real::Exact(d) => *exact.entry(d).or_default() += w,
                d => inexact.push(Atom { position: d, weight: w }),
            }
        }
    }
    inexact.extend(exact.into_iter().map(|(d, w)| Atom {
        position: Real::Exact(d),
        weight: w,
    }));
    let merged = DiracComb::new(inexact, comb.radius());
    let atoms = merged
        .atoms()
        .iter()
        .map(|a| Atom {
            position: a.position,
            weight: a.weight * norm,
        })
        .collect();
    Ok(DiracComb::new(atoms, comb.radius()))
}

/// `sum_d gamma(d) exp(-2 pi i k d)` for a finite comb `gamma`.
pub fn fourier_sum(comb: &DiracComb, k: Real) -> Complex64 {
    comb.atoms()
        .iter()
        .map(|a| a.weight * phase(k, a.position))
        .collect::<ComplexSum>()
        .value()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    ClosedForm,
    Quadrature,
    Empirical,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::ClosedForm => "closed_form",
            Source::Quadrature => "quadrature",
            Source::Empirical => "empirical",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub k: AlgebraicNumber,
    pub amplitude: Complex64,
    pub intensity: f64,
    pub source: Source,
}

/// Bragg peaks sorted by position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub entries: Vec<SpectrumEntry>,
    pub k_max: f64,
    pub intensity_floor: f64,
}

impl Spectrum {
    pub const CSV_HEADER: &'static str = "k_float,k_a,k_b,k_c,amp_re,amp_im,intensity,source";

    pub fn support(&self) -> Vec<AlgebraicNumber> {
        self.entries.iter().map(|e| e.k).collect()
    }

    pub fn intensity_at(&self, k: &AlgebraicNumber) -> Option<f64> {
        self.entries
            .binary_search_by(|e| e.k.cmp(k))
            .ok()
            .map(|i| self.entries[i].intensity)
    }

    pub fn total_intensity(&self) -> f64 {
        let mut s = crate::summation::NeumaierSum::new();
        for e in &self.entries {
            s += e.intensity;
        }
        s.value()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for e in &self.entries {
            writeln!(
                out,
                "{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{}",
                e.k.to_f64(),
                e.k.a(),
                e.k.b(),
                e.k.c(),
                e.amplitude.re,
                e.amplitude.im,
                e.intensity,
                e.source.as_str()
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    /// Bound on `|k*|`; derived from the map and floor when `None`.
    pub star_max: Option<f64>,
    pub panels: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            star_max: None,
            panels: DEFAULT_PANELS,
        }
    }
}

/// Conjugate bound for the scan.
///
/// For affine maps `I(k) <= 1 / (4 z^2)`, so peaks at or above `floor` have
/// `|k*| <= |alpha| k_max + 1 / (2 pi sqrt2 sqrt(floor))`.
pub fn default_star_bound(map: &DeformationMap, k_max: f64, floor: f64) -> f64 {
    let max_slope = map.slopes().into_iter().map(f64::abs).fold(0.0, f64::max);
    match map.kind() {
        DeformationKind::Affine { .. } if floor > 0.0 => {
            max_slope * k_max + 1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::SQRT_2 * floor.sqrt())
        }
        _ => k_max * (DEFAULT_STAR_FACTOR + max_slope),
    }
}

pub fn spectrum_scan(map: &DeformationMap, k_max: f64, floor: f64) -> Result<Spectrum> {
    spectrum_scan_with(map, k_max, floor, ScanOptions::default())
}

/// Analytic Bragg spectrum over `L°` within `|k| <= k_max`: closed form for
/// affine maps on the silver window, quadrature otherwise.
pub fn spectrum_scan_with(map: &DeformationMap, k_max: f64, floor: f64, opts: ScanOptions) -> Result<Spectrum> {
    if !(floor.is_finite() && floor >= 0.0) {
        return Err(Error::InvalidInput(format!("intensity floor must be >= 0, got {floor}")));
    }
    let star_max = opts.star_max.unwrap_or_else(|| default_star_bound(map, k_max, floor));
    let ks = enumerate_dual_box(k_max, star_max)?;
    let closed = match map.kind() {
        DeformationKind::Affine { alpha, beta } if *map.domain() == crate::cutproject::silver_window() => {
            Some((*alpha, *beta))
        }
        _ => None,
    };
    let entries = ks
        .par_iter()
        .map(|k| -> Result<Option<SpectrumEntry>> {
            let (amplitude, intensity, source) = match closed {
                Some((alpha, beta)) => {
                    let s = half_sinc(sinc_argument(k, alpha)?);
                    (phase(Real::Exact(*k), beta) * s, s * s, Source::ClosedForm)
                }
                None => {
                    let a = amplitude_quadrature(k, map, opts.panels)?;
                    (a, a.norm_sqr(), Source::Quadrature)
                }
            };
            Ok((intensity >= floor && intensity > 0.0).then_some(SpectrumEntry {
                k: *k,
                amplitude,
                intensity,
                source,
            }))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(Spectrum {
        entries,
        k_max,
        intensity_floor: floor,
    })
}

/// `|S_r(k)|^2` at the given wave numbers.
pub fn empirical_spectrum(comb: &DiracComb, ks: &[AlgebraicNumber], k_max: f64) -> Spectrum {
    let mut ks = ks.to_vec();
    ks.sort();
    ks.dedup();
    let entries = ks
        .par_iter()
        .map(|k| {
            let amplitude = weyl_sum(comb, Real::Exact(*k));
            SpectrumEntry {
                k: *k,
                amplitude,
                intensity: amplitude.norm_sqr(),
                source: Source::Empirical,
            }
        })
        .collect();
    Spectrum {
        entries,
        k_max,
        intensity_floor: 0.0,
    }
}

/// The lattice spanned by a set of `L°` elements in `(m, n)` coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rank", rename_all = "snake_case")]
pub enum SupportSpan {
    Zero,
    /// `Z g` for the single generator `g`.
    One { generator: AlgebraicNumber },
    /// Basis in Hermite normal form; `index` is the index in `L°`.
    Two { basis: [AlgebraicNumber; 2], index: u64 },
}

impl SupportSpan {
    pub fn is_half_integers(&self) -> bool {
        matches!(self, SupportSpan::One { generator } if generator.abs() == AlgebraicNumber::rational(1, 2).unwrap())
    }

    pub fn is_full_dual(&self) -> bool {
        matches!(self, SupportSpan::Two { index: 1, .. })
    }
}

impl fmt::Display for SupportSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_half_integers() {
            return write!(f, "(1/2)Z");
        }
        if self.is_full_dual() {
            return write!(f, "L°");
        }
        match self {
            SupportSpan::Zero => write!(f, "{{0}}"),
            SupportSpan::One { generator } => write!(f, "Z*{generator}"),
            SupportSpan::Two { basis, index } => write!(f, "Z*{} + Z*{} (index {index})", basis[0], basis[1]),
        }
    }
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        return (a.abs(), a.signum(), 0);
    }
    let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
    (g, y, x - a.div_euclid(b) * y)
}

fn gcd(a: i128, b: i128) -> i128 {
    ext_gcd(a, b).0
}

/// Z-span of `(m, n)` vectors in Hermite normal form.
pub fn span_of(coords: &[(i64, i64)]) -> Result<SupportSpan> {
    let vs: Vec<(i128, i128)> = coords.iter().map(|&(m, n)| (m as i128, n as i128)).collect();
    let elem = |m: i128, n: i128| -> Result<AlgebraicNumber> {
        crate::quadfield::dual_element(
            i64::try_from(m).map_err(|_| Error::Overflow)?,
            i64::try_from(n).map_err(|_| Error::Overflow)?,
        )
    };
    // v has second coordinate d = gcd of all n
    let mut v = (0i128, 0i128);
    for &(m, n) in &vs {
        let (g, x, y) = ext_gcd(v.1, n);
        if g == 0 {
            continue;
        }
        v = (x * v.0 + y * m, g);
    }
    let d = v.1;
    let mut g = 0i128;
    for &(m, n) in &vs {
        let kernel_m = if d == 0 { m } else { m - (n / d) * v.0 };
        g = gcd(g, kernel_m);
    }
    Ok(match (g, d) {
        (0, 0) => SupportSpan::Zero,
        (g, 0) => SupportSpan::One { generator: elem(g, 0)? },
        (0, d) => SupportSpan::One { generator: elem(v.0, d)? },
        (g, d) => SupportSpan::Two {
            basis: [elem(g, 0)?, elem(v.0.rem_euclid(g), d)?],
            index: u64::try_from(g * d).map_err(|_| Error::Overflow)?,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionReport {
    pub alpha: AlgebraicNumber,
    pub k_max: f64,
    /// `k` in `L°` where `z / pi` is a nonzero integer.
    pub extinctions: Vec<AlgebraicNumber>,
    pub survivors: usize,
    pub span: SupportSpan,
}

/// Exact scan of the enumerated part of `L°` for systematic zeros of `sin z`.
pub fn extinction_report(alpha: &AlgebraicNumber, k_max: f64) -> Result<ExtinctionReport> {
    let mut extinctions = Vec::new();
    let mut coords = Vec::new();
    for k in enumerate_dual(k_max)? {
        let q = sinc_argument(&k, Real::Exact(*alpha))?
            .exact()
            .expect("exact alpha gives exact argument");
        if !q.is_zero() && q.is_integer() {
            extinctions.push(k);
        } else {
            coords.push(dual_coordinates(&k).expect("enumerated k lies in the dual"));
        }
    }
    Ok(ExtinctionReport {
        alpha: *alpha,
        k_max,
        survivors: coords.len(),
        span: span_of(&coords)?,
        extinctions,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub k: AlgebraicNumber,
    pub empirical: Complex64,
    pub analytic: Complex64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub max_error: f64,
    pub rms_error: f64,
}

impl Comparison {
    pub const CSV_HEADER: &'static str = "k_float,k_a,k_b,k_c,empirical_re,empirical_im,analytic_re,analytic_im,error";

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.k.to_f64(),
                r.k.a(),
                r.k.b(),
                r.k.c(),
                r.empirical.re,
                r.empirical.im,
                r.analytic.re,
                r.analytic.im,
                r.error
            )?;
        }
        Ok(())
    }
}

/// The amplitude of `map` at `k`, closed form when available.
pub fn amplitude(k: &AlgebraicNumber, map: &DeformationMap) -> Result<Complex64> {
    match map.kind() {
        DeformationKind::Affine { alpha, beta } if *map.domain() == crate::cutproject::silver_window() => {
            amplitude_closed(k, *alpha, *beta)
        }
        _ => amplitude_quadrature(k, map, DEFAULT_PANELS),
    }
}

/// `|S_r(k) - A(k)|` per `k`, with max and RMS.
pub fn compare_empirical_analytic(comb: &DiracComb, map: &DeformationMap, ks: &[AlgebraicNumber]) -> Result<Comparison> {
    let rows = ks
        .par_iter()
        .map(|k| {
            let analytic = amplitude(k, map)?;
            let empirical = weyl_sum(comb, Real::Exact(*k));
            Ok(ComparisonRow {
                k: *k,
                empirical,
                analytic,
                error: (empirical - analytic).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    let rms_error = if rows.is_empty() {
        0.0
    } else {
        (rows.iter().map(|r| r.error * r.error).sum::<f64>() / rows.len() as f64).sqrt()
    };
    Ok(Comparison {
        rows,
        max_error,
        rms_error,
    })
}

/// The first `n` elements of `L°` ordered by `(|k|, k)`, from the default
/// enumeration box.
pub fn first_dual_elements(n: usize) -> Result<Vec<AlgebraicNumber>> {
    let mut k_max = 1.0;
    loop {
        let mut ks = enumerate_dual(k_max)?;
        if ks.len() >= n {
            ks.sort_by(|a, b| a.abs().cmp(&b.abs()).then(a.cmp(b)));
            ks.truncate(n);
            return Ok(ks);
        }
        k_max *= 2.0;
    }
}
