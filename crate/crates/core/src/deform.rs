//! Deformed model sets `{x + theta(x*)}` and deformations of finite Dirac
//! combs by translation-equivariant kernel rules.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutproject::{silver_window, silver_windows, Window};
use crate::error::{Error, Result};
use crate::quadfield::{AlgebraicNumber, Real};
use crate::substitution::{LabeledPatch, Letter, SubstitutionRule};
use crate::summation::ComplexSum;

/// Float positions closer than this are merged into one atom.
pub const MERGE_TOL: f64 = 1e-12;
/// Rounding quantum for local configuration keys.
pub const CONFIG_QUANTUM: f64 = 1e-9;

/// The deformation function on the window; zero off the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DeformationKind {
    /// `theta(y) = alpha * y + beta`.
    #[serde(rename = "affine")]
    Affine { alpha: Real, beta: Real },
    /// Linear interpolation between `(y, theta(y))` breakpoints.
    #[serde(rename = "pwl")]
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeformationMap {
    kind: DeformationKind,
    domain: Window,
}

impl DeformationMap {
    /// Affine map on the silver-mean window.
    pub fn affine(alpha: impl Into<Real>, beta: impl Into<Real>) -> Self {
        DeformationMap {
            kind: DeformationKind::Affine {
                alpha: alpha.into(),
                beta: beta.into(),
            },
            domain: silver_window(),
        }
    }

    /// Piecewise-linear map on the silver-mean window.
    pub fn piecewise_linear(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(DeformationKind::PiecewiseLinear { points }, silver_window())
    }

    pub fn new(kind: DeformationKind, domain: Window) -> Result<Self> {
        if let DeformationKind::PiecewiseLinear { points } = &kind {
            if points.len() < 2 {
                return Err(Error::InvalidInput("need at least two breakpoints".into()));
            }
            if points.iter().any(|(y, v)| !y.is_finite() || !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite breakpoint".into()));
            }
            if points.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::InvalidInput("breakpoints must be strictly increasing".into()));
            }
            let (lo, hi) = domain.hull().to_f64();
            if points[0].0 > lo || points[points.len() - 1].0 < hi {
                return Err(Error::InvalidInput(format!(
                    "breakpoints must cover the window [{lo}, {hi}]"
                )));
            }
        }
        Ok(DeformationMap { kind, domain })
    }

    pub fn kind(&self) -> &DeformationKind {
        &self.kind
    }

    pub fn domain(&self) -> &Window {
        &self.domain
    }

    pub fn affine_params(&self) -> Option<(Real, Real)> {
        match self.kind {
            DeformationKind::Affine { alpha, beta } => Some((alpha, beta)),
            DeformationKind::PiecewiseLinear { .. } => None,
        }
    }

    /// `theta(y)` for `y` in the domain, exact when possible.
    pub fn eval(&self, y: &AlgebraicNumber) -> Result<Real> {
        if !self.domain.contains(y)? {
            return Err(Error::OutsideDomain(y.to_f64()));
        }
        match &self.kind {
            DeformationKind::Affine { alpha, beta } => {
                alpha.checked_mul(Real::Exact(*y))?.checked_add(*beta)
            }
            DeformationKind::PiecewiseLinear { points } => Ok(Real::Float(pwl_eval(points, y.to_f64()))),
        }
    }

    /// Float evaluation; zero off the window.
    pub fn eval_f64(&self, y: f64) -> f64 {
        if !self.domain.contains_f64(y) {
            return 0.0;
        }
        match &self.kind {
            DeformationKind::Affine { alpha, beta } => alpha.value() * y + beta.value(),
            DeformationKind::PiecewiseLinear { points } => pwl_eval(points, y),
        }
    }

    /// Interior breakpoints strictly inside `(lo, hi)`.
    pub fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        match &self.kind {
            DeformationKind::Affine { .. } => Vec::new(),
            DeformationKind::PiecewiseLinear { points } => {
                points.iter().map(|p| p.0).filter(|&y| y > lo && y < hi).collect()
            }
        }
    }

    pub fn slopes(&self) -> Vec<f64> {
        match &self.kind {
            DeformationKind::Affine { alpha, .. } => vec![alpha.value()],
            DeformationKind::PiecewiseLinear { points } => points
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                .collect(),
        }
    }

    /// Points where the extrema of `theta` over the window can occur.
    fn extremal_samples(&self) -> Vec<f64> {
        let mut ys: Vec<f64> = self.domain.to_f64().into_iter().flat_map(|(a, b)| [a, b]).collect();
        for (lo, hi) in self.domain.to_f64() {
            ys.extend(self.breakpoints_in(lo, hi));
        }
        ys
    }

    /// `max |theta|` over the window.
    pub fn sup_abs(&self) -> f64 {
        self.extremal_samples()
            .into_iter()
            .map(|y| self.eval_f64(y).abs())
            .fold(0.0, f64::max)
    }

    /// `max theta - min theta` over the window.
    pub fn spread(&self) -> f64 {
        let vals: Vec<f64> = self.extremal_samples().into_iter().map(|y| self.eval_f64(y)).collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}

fn pwl_eval(points: &[(f64, f64)], y: f64) -> f64 {
    let i = points.partition_point(|p| p.0 < y);
    if i < points.len() && points[i].0 == y {
        return points[i].1;
    }
    if i == 0 {
        return points[0].1;
    }
    if i == points.len() {
        return points[points.len() - 1].1;
    }
    let (y0, v0) = points[i - 1];
    let (y1, v1) = points[i];
    v0 + (v1 - v0) * (y - y0) / (y1 - y0)
}

/// A weighted point mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub position: Real,
    pub weight: Complex64,
}

impl Atom {
    pub fn unit(position: impl Into<Real>) -> Self {
        Atom {
            position: position.into(),
            weight: Complex64::new(1.0, 0.0),
        }
    }
}

/// A finite Dirac comb observed on `[-radius, radius]`.
///
/// `edge` is the width of the band at each end of the observation interval
/// where the comb is not a faithful restriction of an infinite structure
/// (points that moved in or out under deformations, translations or kernels).
#[derive(Clone, Debug, PartialEq)]
pub struct DiracComb {
    atoms: Vec<Atom>,
    radius: f64,
    edge: f64,
}

impl DiracComb {
    /// Sorts atoms and merges coincident positions by adding weights.
    pub fn new(mut atoms: Vec<Atom>, radius: f64) -> Self {
        atoms.sort_by(|x, y| x.position.total_cmp(&y.position));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.position.coincides(&a.position, MERGE_TOL) => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        DiracComb {
            atoms: merged,
            radius,
            edge: 0.0,
        }
    }

    pub fn from_patch(patch: &LabeledPatch) -> Self {
        let atoms = patch
            .points()
            .iter()
            .map(|p| Atom {
                position: Real::Exact(p.position),
                weight: p.weight,
            })
            .collect();
        DiracComb::new(atoms, patch.radius())
    }

    pub fn with_edge(mut self, edge: f64) -> Self {
        self.edge = edge;
        self
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> Complex64 {
        self.atoms.iter().map(|a| a.weight).collect::<ComplexSum>().value()
    }

    pub fn positions_f64(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.position.value()).collect()
    }

    /// Atoms with position in `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> Vec<Atom> {
        self.atoms
            .iter()
            .filter(|a| {
                let x = a.position.value();
                lo <= x && x <= hi
            })
            .copied()
            .collect()
    }

    /// Shifts all atoms by `t`; the observation interval stays put, so the
    /// unreliable edge band grows by `|t|`.
    pub fn translate(&self, t: Real) -> Result<DiracComb> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom {
                    position: a.position.checked_add(t)?,
                    weight: a.weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DiracComb::new(atoms, self.radius).with_edge(self.edge + t.value().abs()))
    }

    pub const CSV_HEADER: &'static str = "position_float,a,b,c,weight_re,weight_im";

    /// One row per atom; the exact columns are empty for float positions.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for a in &self.atoms {
            let exact = match a.position {
                Real::Exact(x) => format!("{},{},{}", x.a(), x.b(), x.c()),
                Real::Float(_) => ",,".to_string(),
            };
            writeln!(
                out,
                "{:.16e},{exact},{:.16e},{:.16e}",
                a.position.value(),
                a.weight.re,
                a.weight.im
            )?;
        }
        Ok(())
    }

    /// Whether both combs have the same atoms in `[lo, hi]`: exact positions
    /// must match exactly, float ones within [`MERGE_TOL`].
    pub fn agrees_on(&self, other: &DiracComb, lo: f64, hi: f64, weight_tol: f64) -> bool {
        let a = self.restrict(lo, hi);
        let b = other.restrict(lo, hi);
        a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| {
                x.position.coincides(&y.position, MERGE_TOL) && (x.weight - y.weight).norm() <= weight_tol
            })
    }
}

/// `(sum of weights) / (2 radius)`, real part.
pub fn density(comb: &DiracComb) -> f64 {
    if comb.is_empty() || comb.radius <= 0.0 {
        return 0.0;
    }
    comb.mass().re / (2.0 * comb.radius)
}

/// Moves each patch point `x` to `x + theta(x*)`, keeping its weight.
pub fn deform_patch(patch: &LabeledPatch, map: &DeformationMap) -> Result<DiracComb> {
    let atoms = patch
        .points()
        .iter()
        .map(|p| {
            let shift = map.eval(&p.position.star())?;
            Ok(Atom {
                position: Real::Exact(p.position).checked_add(shift)?,
                weight: p.weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiracComb::new(atoms, patch.radius()).with_edge(map.sup_abs()))
}

/// Lengths of the deformed `a` and `b` intervals under an affine map:
/// `(1 + sqrt2) + alpha (1 - sqrt2)` and `1 + alpha`.
pub fn deformed_lengths(alpha: Real) -> Result<(Real, Real)> {
    let rule = SubstitutionRule::silver_mean();
    let len = |l: Letter| -> Result<Real> {
        let x = rule.length(l);
        Real::Exact(x).checked_add(alpha.checked_mul(Real::Exact(x.star()))?)
    };
    Ok((len(Letter::A)?, len(Letter::B)?))
}

/// Length ratio `rho = 1 + sqrt2 (1 - alpha)/(1 + alpha)` of deformed `a` to `b` intervals.
pub fn interval_ratio(alpha: Real) -> Result<Real> {
    match alpha {
        Real::Exact(a) => {
            let one = AlgebraicNumber::ONE;
            let den = one.checked_add(&a)?;
            if den.is_zero() {
                return Err(Error::DivisionByZero);
            }
            let frac = one.checked_sub(&a)?.checked_div(&den)?;
            Ok(Real::Exact(one.checked_add(&frac.checked_mul(&AlgebraicNumber::SQRT2)?)?))
        }
        Real::Float(a) => {
            if a == -1.0 {
                return Err(Error::DivisionByZero);
            }
            Ok(Real::Float(1.0 + (1.0 - a) / (1.0 + a) * std::f64::consts::SQRT_2))
        }
    }
}

/// For rational `rho = p/q`, the lattice constant `lambda = len(a)/p` whose
/// integer multiples contain the deformed set (with `beta = 0`).
pub fn rational_period(alpha: &AlgebraicNumber) -> Result<Option<AlgebraicNumber>> {
    let rho = match interval_ratio(Real::Exact(*alpha))? {
        Real::Exact(r) => r,
        Real::Float(_) => unreachable!("exact input gives exact ratio"),
    };
    if !rho.is_rational() || rho.signum() != Ordering::Greater {
        return Ok(None);
    }
    let p = rho.a();
    let (len_a, _) = deformed_lengths(Real::Exact(*alpha))?;
    let len_a = len_a.exact().expect("exact input gives exact length");
    Ok(Some(len_a.checked_div(&AlgebraicNumber::integer(p))?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeloneReport {
    /// Gap test passed and, for affine maps, `alpha` is in `(-1, 3 + sqrt2)`.
    pub admissible: bool,
    /// Smallest nearest-neighbour distance of the deformed silver-mean set.
    pub worst_gap: f64,
    pub spread: f64,
    pub affine_in_range: Option<bool>,
}

const GAP_SAMPLES: usize = 4096;

/// Admissibility of a deformation of the silver-mean set.
///
/// Consecutive points `x < x'` differ by an `a` step (`+1+sqrt2` physical,
/// `+1-sqrt2` internal) or a `b` step (`+1`, `+1`), so the deformed gap is
/// `len + theta(y + len*) - theta(y)` with `y` ranging over the letter window.
pub fn delone_check(map: &DeformationMap, min_gap: f64) -> Result<DeloneReport> {
    let spread = map.spread();
    if let DeformationKind::Affine { alpha, .. } = map.kind() {
        let (gap_a, gap_b) = deformed_lengths(*alpha)?;
        let worst_gap = gap_a.value().min(gap_b.value());
        let in_range = match alpha {
            Real::Exact(a) => {
                let upper = AlgebraicNumber::from_ints(3, 1);
                a.exact_compare(&AlgebraicNumber::integer(-1))? == Ordering::Greater
                    && a.exact_compare(&upper)? == Ordering::Less
            }
            Real::Float(a) => *a > -1.0 && *a < 3.0 + std::f64::consts::SQRT_2,
        };
        return Ok(DeloneReport {
            admissible: in_range && worst_gap > min_gap,
            worst_gap,
            spread,
            affine_in_range: Some(in_range),
        });
    }
    let rule = SubstitutionRule::silver_mean();
    let (w_a, w_b) = silver_windows();
    let mut worst = f64::INFINITY;
    for (l, w) in [(Letter::A, &w_a), (Letter::B, &w_b)] {
        let len = rule.length(l);
        let (step, step_star) = (len.to_f64(), len.star().to_f64());
        let (lo, hi) = w.hull().to_f64();
        let mut ys: Vec<f64> = (0..=GAP_SAMPLES)
            .map(|i| lo + (hi - lo) * i as f64 / GAP_SAMPLES as f64)
            .collect();
        ys.extend(map.breakpoints_in(lo, hi));
        ys.extend(map.breakpoints_in(lo + step_star, hi + step_star).into_iter().map(|b| b - step_star));
        for y in ys {
            let gap = step + map.eval_f64(y + step_star) - map.eval_f64(y);
            worst = worst.min(gap);
        }
    }
    Ok(DeloneReport {
        admissible: worst > min_gap,
        worst_gap: worst,
        spread,
        affine_in_range: None,
    })
}

/// A finite measure given as `(offset, weight)` pairs.
pub type Kernel = Vec<(Real, Complex64)>;

/// How each atom is replaced by a translated kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelRule {
    /// The same kernel everywhere.
    Fixed(Kernel),
    /// Kernel chosen by the local configuration: the sorted differences to
    /// all other atoms within `local_radius`, rounded to [`CONFIG_QUANTUM`].
    LocalLookup {
        local_radius: f64,
        table: BTreeMap<Vec<i64>, Kernel>,
        default: Kernel,
    },
}

impl KernelRule {
    pub fn identity() -> Self {
        KernelRule::Fixed(vec![(Real::Exact(AlgebraicNumber::ZERO), Complex64::new(1.0, 0.0))])
    }

    pub fn translation(t: impl Into<Real>) -> Self {
        KernelRule::Fixed(vec![(t.into(), Complex64::new(1.0, 0.0))])
    }

    fn kernels(&self) -> Vec<&Kernel> {
        match self {
            KernelRule::Fixed(k) => vec![k],
            KernelRule::LocalLookup { table, default, .. } => {
                table.values().chain(std::iter::once(default)).collect()
            }
        }
    }

    /// Radius of a compact set containing all kernel supports.
    pub fn support_radius(&self) -> f64 {
        self.kernels()
            .into_iter()
            .flatten()
            .map(|(s, _)| s.value().abs())
            .fold(0.0, f64::max)
    }

    fn lookup_radius(&self) -> f64 {
        match self {
            KernelRule::Fixed(_) => 0.0,
            KernelRule::LocalLookup { local_radius, .. } => *local_radius,
        }
    }

    /// Common total mass of all kernels, if they share one.
    pub fn kernel_mass(&self) -> Option<Complex64> {
        let masses: Vec<Complex64> = self
            .kernels()
            .into_iter()
            .map(|k| k.iter().map(|(_, w)| *w).sum())
            .collect();
        let first = masses[0];
        masses.iter().all(|m| (m - first).norm() < 1e-12).then_some(first)
    }
}

/// Sorted, rounded differences from atom `index` to every other atom within `radius`.
pub fn local_configuration(comb: &DiracComb, positions: &[f64], index: usize, radius: f64) -> Vec<i64> {
    let x = positions[index];
    let slack = 2.0 * CONFIG_QUANTUM;
    let start = positions.partition_point(|&p| p < x - radius - slack);
    let mut key = Vec::new();
    for (j, &p) in positions.iter().enumerate().skip(start) {
        if p > x + radius + slack {
            break;
        }
        if j == index {
            continue;
        }
        let d = match comb.atoms[j].position.checked_sub(comb.atoms[index].position) {
            Ok(d) => d.value(),
            Err(_) => p - x,
        };
        if d.abs() <= radius {
            key.push((d / CONFIG_QUANTUM).round() as i64);
        }
    }
    key.sort_unstable();
    key
}

/// Replaces every atom `r` of mass `w` by `sum_j w w_j delta_{r + s_j}`,
/// with `(s_j, w_j)` the kernel the rule selects at `r`.
pub fn deform_measure(comb: &DiracComb, rule: &KernelRule) -> Result<DiracComb> {
    let positions = comb.positions_f64();
    let pieces: Vec<Result<Vec<Atom>>> = (0..comb.atoms.len())
        .into_par_iter()
        .map(|i| {
            let kernel = match rule {
                KernelRule::Fixed(k) => k,
                KernelRule::LocalLookup {
                    local_radius,
                    table,
                    default,
                } => {
                    let key = local_configuration(comb, &positions, i, *local_radius);
                    table.get(&key).unwrap_or(default)
                }
            };
            let atom = comb.atoms[i];
            kernel
                .iter()
                .map(|(s, w)| {
                    Ok(Atom {
                        position: atom.position.checked_add(*s)?,
                        weight: atom.weight * w,
                    })
                })
                .collect()
        })
        .collect();
    let mut atoms = Vec::new();
    for p in pieces {
        atoms.extend(p?);
    }
    let edge = comb.edge + rule.support_radius() + rule.lookup_radius();
    Ok(DiracComb::new(atoms, comb.radius).with_edge(edge))
}

fn has_partner(positions: &[f64], weights: &[Complex64], target: f64, weight: Complex64, tol: f64) -> bool {
    let start = positions.partition_point(|&p| p < target - tol);
    positions[start..]
        .iter()
        .zip(&weights[start..])
        .take_while(|(p, _)| **p <= target + tol)
        .any(|(_, w)| (w - weight).norm() <= tol)
}

/// Whether translation by `t` maps the interior of the comb onto itself,
/// up to `tol` in position and weight.
pub fn is_period(comb: &DiracComb, t: f64, tol: f64) -> bool {
    let lo = -comb.radius + comb.edge;
    let hi = comb.radius - comb.edge;
    if hi - t <= lo {
        return false;
    }
    let positions = comb.positions_f64();
    let weights: Vec<Complex64> = comb.atoms.iter().map(|a| a.weight).collect();
    let mut checked = 0usize;
    for (p, w) in positions.iter().zip(&weights) {
        if *p >= lo && *p <= hi - t {
            checked += 1;
            if !has_partner(&positions, &weights, p + t, *w, tol) {
                return false;
            }
        }
        if *p >= lo + t && *p <= hi && !has_partner(&positions, &weights, p - t, *w, tol) {
            return false;
        }
    }
    checked > 0
}

/// The candidates that are periods of the comb's interior.
pub fn detect_periods(comb: &DiracComb, candidates: &[f64], tol: f64) -> Result<Vec<f64>> {
    if let Some(t) = candidates.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::InvalidInput(format!("period candidate {t} is not positive")));
    }
    Ok(candidates
        .iter()
        .copied()
        .filter(|&t| is_period(comb, t, tol))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutproject::{project_patch, CutProjectScheme};
    use std::f64::consts::SQRT_2;

    fn q(a: i64, b: i64, c: i64) -> AlgebraicNumber {
        AlgebraicNumber::new(a, b, c).unwrap()
    }

    fn exact(a: i64, b: i64, c: i64) -> Real {
        Real::Exact(q(a, b, c))
    }

    fn patch(r: f64) -> LabeledPatch {
        project_patch(r, &CutProjectScheme::silver_mean()).unwrap()
    }

    #[test]
    fn zero_deformation_is_identity() {
        let p = patch(100.0);
        let c = deform_patch(&p, &DeformationMap::affine(exact(0, 0, 1), exact(0, 0, 1))).unwrap();
        assert_eq!(c, DiracComb::from_patch(&p));
    }

    #[test]
    fn alpha_one_gives_even_integers() {
        let r = 200.0;
        let p = patch(r);
        let c = deform_patch(&p, &DeformationMap::affine(exact(1, 0, 1), exact(0, 0, 1))).unwrap();
        assert_eq!(c.len(), p.len(), "x -> x + x* is injective on the patch");
        for (a, x) in c.atoms().iter().zip(p.positions()) {
            let pos = a.position.exact().unwrap();
            assert_eq!(pos, x.trace());
            assert!(pos.is_integer() && pos.a() % 2 == 0);
        }
        // interior band is exactly 2Z
        let inner = r - c.edge() - 1.0;
        let got: Vec<i64> = c
            .restrict(-inner, inner)
            .iter()
            .map(|a| a.position.exact().unwrap().a())
            .collect();
        let lo = (-inner / 2.0).ceil() as i64;
        let hi = (inner / 2.0).floor() as i64;
        assert_eq!(got, (lo..=hi).map(|m| 2 * m).collect::<Vec<_>>());
    }

    #[test]
    fn rational_ratio_lattice() {
        let alpha = q(3, -2, 1);
        let lambda = q(4, -2, 1);
        assert_eq!(rational_period(&alpha).unwrap(), Some(lambda));
        assert_eq!(deformed_lengths(Real::Exact(alpha)).unwrap(), (Real::Exact(q(8, -4, 1)), Real::Exact(lambda)));
        let c = deform_patch(&patch(300.0), &DeformationMap::affine(alpha, exact(0, 0, 1))).unwrap();
        for a in c.atoms() {
            let m = a.position.exact().unwrap().checked_div(&lambda).unwrap();
            assert!(m.is_integer(), "{m}");
        }
        assert_eq!(rational_period(&q(1, 0, 1)).unwrap(), Some(q(2, 0, 1)));
        assert_eq!(rational_period(&q(1, 0, 2)).unwrap(), None);
    }

    #[test]
    fn outside_domain_is_error() {
        let pts = vec![crate::substitution::PatchPoint::new(AlgebraicNumber::ONE, None)];
        let p = LabeledPatch::new(pts, 2.0).unwrap();
        let err = deform_patch(&p, &DeformationMap::affine(0.5, 0.0)).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain(_)));
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(interval_ratio(exact(0, 0, 1)).unwrap(), exact(1, 1, 1));
        assert_eq!(interval_ratio(exact(1, 0, 1)).unwrap(), exact(1, 0, 1));
        assert_eq!(interval_ratio(exact(3, -2, 1)).unwrap(), exact(2, 0, 1));
        assert_eq!(interval_ratio(exact(-1, 0, 1)), Err(Error::DivisionByZero));
        assert_eq!(interval_ratio(Real::Float(-1.0)), Err(Error::DivisionByZero));
        let r = interval_ratio(Real::Float(0.3)).unwrap().value();
        assert!((r - (1.0 + 0.7 / 1.3 * SQRT_2)).abs() < 1e-15);
        // ratio matches deformed lengths
        for alpha in [0.2, 0.5, 2.0, -0.5] {
            let (la, lb) = deformed_lengths(Real::Float(alpha)).unwrap();
            let rho = interval_ratio(Real::Float(alpha)).unwrap().value();
            assert!((la.value() / lb.value() - rho).abs() < 1e-12);
        }
    }

    #[test]
    fn delone_examples() {
        let check = |a: Real| delone_check(&DeformationMap::affine(a, 0.0), 0.0).unwrap();
        assert!(check(Real::Float(0.5)).admissible);
        let r = check(exact(-1, 0, 1));
        assert!(!r.admissible);
        assert_eq!(r.worst_gap, 0.0);
        assert!(!check(exact(5, 0, 1)).admissible);
        assert!(check(exact(3, -2, 1)).admissible);
    }

    #[test]
    fn delone_sampling_matches_affine_closed_form() {
        for alpha in [-0.5, 0.0, 0.5, 1.0, 2.5] {
            let pwl = DeformationMap::piecewise_linear(vec![(-1.0, -alpha), (1.0, alpha)]).unwrap();
            let sampled = delone_check(&pwl, 0.0).unwrap();
            let closed = delone_check(&DeformationMap::affine(alpha, 0.0), 0.0).unwrap();
            assert!((sampled.worst_gap - closed.worst_gap).abs() < 1e-12, "alpha {alpha}");
            assert!((sampled.spread - closed.spread).abs() < 1e-12);
        }
        // steep enough to reverse the order of neighbours
        let bad = DeformationMap::piecewise_linear(vec![(-1.0, 0.0), (0.0, 0.0), (0.01, -3.0), (1.0, -3.0)]).unwrap();
        assert!(!delone_check(&bad, 0.0).unwrap().admissible);
    }

    #[test]
    fn pwl_validation_and_eval() {
        assert!(DeformationMap::piecewise_linear(vec![(-1.0, 0.0)]).is_err());
        assert!(DeformationMap::piecewise_linear(vec![(-0.5, 0.0), (1.0, 0.0)]).is_err());
        assert!(DeformationMap::piecewise_linear(vec![(-1.0, 0.0), (-1.0, 1.0), (1.0, 0.0)]).is_err());
        let m = DeformationMap::piecewise_linear(vec![(-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(m.eval_f64(0.0), 1.0);
        assert_eq!(m.eval_f64(0.5), 0.5);
        assert_eq!(m.eval_f64(0.9), 0.0, "zero off the window");
        assert_eq!(m.slopes(), vec![1.0, -1.0]);
    }

    #[test]
    fn deformation_json() {
        let m: DeformationKind = serde_json::from_str(r#"{"kind":"affine","alpha":"3-2*sqrt2","beta":0.1}"#).unwrap();
        assert_eq!(
            m,
            DeformationKind::Affine {
                alpha: exact(3, -2, 1),
                beta: Real::Float(0.1)
            }
        );
        let p: DeformationKind = serde_json::from_str(r#"{"kind":"pwl","points":[[-1,0],[1,0.5]]}"#).unwrap();
        assert_eq!(
            p,
            DeformationKind::PiecewiseLinear {
                points: vec![(-1.0, 0.0), (1.0, 0.5)]
            }
        );
        let s = serde_json::to_string(&DeformationKind::Affine {
            alpha: Real::Float(0.25),
            beta: exact(0, 0, 1),
        })
        .unwrap();
        assert_eq!(s, r#"{"kind":"affine","alpha":0.25,"beta":{"a":0,"b":0,"c":1}}"#);
    }

    #[test]
    fn density_examples() {
        let p = patch(10_000.0);
        let d0 = density(&DiracComb::from_patch(&p));
        assert!((d0 - 0.5).abs() < 1e-3);
        let d1 = density(&deform_patch(&p, &DeformationMap::affine(0.5, 0.0)).unwrap());
        assert!((d1 - d0).abs() <= 2.0 / (2.0 * 10_000.0));
        assert_eq!(density(&DiracComb::new(vec![], 5.0)), 0.0);
    }

    #[test]
    fn comb_csv() {
        let c = DiracComb::new(vec![Atom::unit(q(1, 1, 1)), Atom::unit(0.5 + 1e-3)], 3.0);
        let mut out = Vec::new();
        c.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], DiracComb::CSV_HEADER);
        assert_eq!(lines[1], "5.0100000000000000e-1,,,,1.0000000000000000e0,0.0000000000000000e0");
        assert_eq!(lines[2], "2.4142135623730949e0,1,1,1,1.0000000000000000e0,0.0000000000000000e0");
    }

    #[test]
    fn fixed_kernels() {
        let c = DiracComb::from_patch(&patch(50.0));
        assert_eq!(deform_measure(&c, &KernelRule::identity()).unwrap().atoms(), c.atoms());
        let t = Real::Exact(q(1, 1, 2));
        let shifted = deform_measure(&c, &KernelRule::translation(t)).unwrap();
        assert_eq!(shifted.atoms(), c.translate(t).unwrap().atoms());
    }

    #[test]
    fn coincident_outputs_merge() {
        let c = DiracComb::new(vec![Atom::unit(q(0, 0, 1)), Atom::unit(q(1, 0, 1))], 2.0);
        let rule = KernelRule::Fixed(vec![
            (exact(0, 0, 1), Complex64::new(1.0, 0.0)),
            (exact(1, 0, 1), Complex64::new(2.0, 0.0)),
        ]);
        let out = deform_measure(&c, &rule).unwrap();
        let w: Vec<f64> = out.atoms().iter().map(|a| a.weight.re).collect();
        assert_eq!(w, vec![1.0, 3.0, 2.0]);
        assert_eq!(out.mass(), c.mass() * rule.kernel_mass().unwrap());
        // float positions merge within tolerance
        let f = DiracComb::new(vec![Atom::unit(0.1), Atom::unit(0.1 + 1e-14), Atom::unit(0.2)], 1.0);
        assert_eq!(f.len(), 2);
        assert_eq!(f.atoms()[0].weight.re, 2.0);
    }

    /// Piecewise-constant map: `c_b` on `W_b`, `c_a` on `W_a`, with a ramp of
    /// width `eps` just above the split point.
    fn letter_constant(c_a: f64, c_b: f64, eps: f64) -> (DeformationMap, f64) {
        let g = q(-2, 1, 2).to_f64();
        let h = SQRT_2 / 2.0;
        let map = DeformationMap::piecewise_linear(vec![(-h, c_b), (g, c_b), (g + eps, c_a), (h, c_a)]).unwrap();
        (map, g)
    }

    #[test]
    fn local_lookup_reproduces_letter_deformation() {
        let (c_a, c_b) = (0.3, -0.2);
        let eps = 1e-9;
        let (map, g) = letter_constant(c_a, c_b, eps);
        let p = patch(500.0);
        assert!(
            p.positions().all(|x| {
                let y = x.star().to_f64();
                !(y > g && y < g + eps)
            }),
            "no internal coordinate inside the ramp"
        );
        let expected = deform_patch(&p, &map).unwrap();

        // a b-point sees its successor at +1; an a-point sees nothing ahead
        // within 1.2, and possibly a b predecessor at -1
        let key = |d: f64| vec![(d / CONFIG_QUANTUM).round() as i64];
        let unit = Complex64::new(1.0, 0.0);
        let mut table = BTreeMap::new();
        table.insert(key(1.0), vec![(Real::Float(c_b), unit)]);
        table.insert(key(-1.0), vec![(Real::Float(c_a), unit)]);
        table.insert(Vec::new(), vec![(Real::Float(c_a), unit)]);
        let rule = KernelRule::LocalLookup {
            local_radius: 1.2,
            table,
            default: vec![(Real::Float(c_a), unit)],
        };
        let got = deform_measure(&DiracComb::from_patch(&p), &rule).unwrap();
        let band = p.radius() - got.edge();
        assert!(got.agrees_on(&expected, -band, band, 1e-12));
    }

    #[test]
    fn periods() {
        let r = 300.0;
        let p = patch(r);
        let base = DiracComb::from_patch(&p);
        assert!(detect_periods(&base, &[1.0, 2.0, 1.0 + SQRT_2], 1e-9).unwrap().is_empty());
        let flat = deform_patch(&p, &DeformationMap::affine(exact(1, 0, 1), exact(0, 0, 1))).unwrap();
        assert_eq!(detect_periods(&flat, &[1.0, 2.0, 4.0, 1.0 + SQRT_2], 1e-9).unwrap(), vec![2.0, 4.0]);
        assert!(detect_periods(&flat, &[0.0], 1e-9).is_err());
    }

    #[test]
    fn rational_ratio_comb_is_not_periodic() {
        let p = patch(300.0);
        let c = deform_patch(&p, &DeformationMap::affine(q(3, -2, 1), exact(0, 0, 1))).unwrap();
        let lambda = 4.0 - 2.0 * SQRT_2;
        assert!(detect_periods(&c, &[lambda], 1e-9).unwrap().is_empty());
    }

    fn gap_rule() -> KernelRule {
        let unit = Complex64::new(1.0, 0.0);
        let mut table = BTreeMap::new();
        table.insert(vec![(1.0 / CONFIG_QUANTUM) as i64], vec![(exact(0, 0, 1), unit), (exact(1, 1, 4), Complex64::new(0.0, 0.5))]);
        table.insert(Vec::new(), vec![(exact(-1, 0, 2), unit)]);
        KernelRule::LocalLookup {
            local_radius: 1.5,
            table,
            default: vec![(exact(0, 1, 2), Complex64::new(0.25, 0.0))],
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn equivariance(m in -6i64..=6, n in -6i64..=6) {
            let c = DiracComb::from_patch(&patch(80.0));
            let rule = gap_rule();
            let t = Real::Exact(AlgebraicNumber::from_ints(m, n));
            let lhs = deform_measure(&c.translate(t).unwrap(), &rule).unwrap();
            let rhs = deform_measure(&c, &rule).unwrap().translate(t).unwrap();
            let band = c.radius() - t.value().abs() - 2.0 * (rule.support_radius() + 1.5);
            proptest::prop_assert!(lhs.agrees_on(&rhs, -band, band, 0.0));
        }

        #[test]
        fn mass_is_multiplied(re in -2.0f64..2.0, im in -2.0f64..2.0, s in -3i64..=3) {
            let c = DiracComb::from_patch(&patch(40.0));
            let rule = KernelRule::Fixed(vec![
                (exact(s, 0, 1), Complex64::new(re, im)),
                (exact(0, s, 1), Complex64::new(1.0, -im)),
            ]);
            let out = deform_measure(&c, &rule).unwrap();
            let expected = c.mass() * rule.kernel_mass().unwrap();
            proptest::prop_assert!((out.mass() - expected).norm() < 1e-9);
        }

        #[test]
        fn periods_transfer(s in -4i64..=4, w in 0.1f64..3.0) {
            let flat = deform_patch(&patch(150.0), &DeformationMap::affine(exact(1, 0, 1), exact(0, 0, 1))).unwrap();
            let candidates = [2.0, 4.0, 6.0, 1.0 + SQRT_2];
            let before = detect_periods(&flat, &candidates, 1e-9).unwrap();
            let rule = KernelRule::Fixed(vec![(exact(0, 0, 1), Complex64::new(w, 0.0)), (exact(s, 1, 2), Complex64::new(1.0, w))]);
            let after = detect_periods(&deform_measure(&flat, &rule).unwrap(), &candidates, 1e-9).unwrap();
            proptest::prop_assert!(!before.is_empty());
            proptest::prop_assert!(before.iter().all(|t| after.contains(t)));
        }

        #[test]
        fn admissible_maps_preserve_counts(alpha in -0.95f64..4.3, beta in -1.0f64..1.0) {
            let p = patch(120.0);
            let c = deform_patch(&p, &DeformationMap::affine(alpha, beta)).unwrap();
            proptest::prop_assert_eq!(c.len(), p.len());
            proptest::prop_assert!((density(&c) - density(&DiracComb::from_patch(&p))).abs() < 1e-15);
        }
    }
}
