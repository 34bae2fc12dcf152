//! The self-dual cut-and-project scheme for the silver mean.
//!
//! Physical and internal space are both the real line, the lattice is
//! `{(x, x*) : x in Z[sqrt2]}`, and the star map is the Galois conjugation.
//! Windows are finite unions of closed intervals with exact endpoints; every
//! membership decision is made with exact comparisons.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadfield::{AlgebraicNumber, COEFF_LIMIT, SQRT_2};
use crate::substitution::{LabeledPatch, Letter, PatchPoint};

/// Closed interval with exact endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: AlgebraicNumber,
    pub hi: AlgebraicNumber,
}

impl Interval {
    pub fn new(lo: AlgebraicNumber, hi: AlgebraicNumber) -> Result<Self> {
        if lo.exact_compare(&hi)? == Ordering::Greater {
            return Err(Error::InvalidInput(format!("interval [{lo}, {hi}] is reversed")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, y: &AlgebraicNumber) -> Result<bool> {
        Ok(self.lo.exact_compare(y)? != Ordering::Greater
            && y.exact_compare(&self.hi)? != Ordering::Greater)
    }

    pub fn width(&self) -> Result<AlgebraicNumber> {
        self.hi.checked_sub(&self.lo)
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.lo.to_f64(), self.hi.to_f64())
    }
}

/// A finite union of closed intervals, sorted, with positive gaps between
/// consecutive pieces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct Window {
    intervals: Vec<Interval>,
}

impl TryFrom<Vec<Interval>> for Window {
    type Error = Error;

    fn try_from(v: Vec<Interval>) -> Result<Self> {
        Window::new(v)
    }
}

impl From<Window> for Vec<Interval> {
    fn from(w: Window) -> Self {
        w.intervals
    }
}

/// Sorts and merges overlapping or touching intervals.
fn normalize(mut v: Vec<Interval>) -> Result<Vec<Interval>> {
    let mut err = None;
    v.sort_by(|x, y| {
        x.lo.exact_compare(&y.lo).unwrap_or_else(|e| {
            err = Some(e);
            Ordering::Equal
        })
    });
    if let Some(e) = err {
        return Err(e);
    }
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for iv in v {
        if let Some(last) = out.last_mut() {
            if iv.lo.exact_compare(&last.hi)? != Ordering::Greater {
                if iv.hi.exact_compare(&last.hi)? == Ordering::Greater {
                    last.hi = iv.hi;
                }
                continue;
            }
        }
        out.push(iv);
    }
    Ok(out)
}

impl Window {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        for iv in &intervals {
            Interval::new(iv.lo, iv.hi)?;
        }
        let w = Window {
            intervals: normalize(intervals)?,
        };
        if w.length()?.signum() != Ordering::Greater {
            return Err(Error::InvalidInput("window has zero length".into()));
        }
        Ok(w)
    }

    pub fn interval(lo: AlgebraicNumber, hi: AlgebraicNumber) -> Result<Self> {
        Window::new(vec![Interval::new(lo, hi)?])
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_interval(&self) -> bool {
        self.intervals.len() == 1
    }

    /// Convex hull `[min, max]`.
    pub fn hull(&self) -> Interval {
        Interval {
            lo: self.intervals[0].lo,
            hi: self.intervals[self.intervals.len() - 1].hi,
        }
    }

    pub fn contains(&self, y: &AlgebraicNumber) -> Result<bool> {
        for iv in &self.intervals {
            if iv.contains(y)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn contains_f64(&self, y: f64) -> bool {
        self.intervals.iter().any(|iv| {
            let (lo, hi) = iv.to_f64();
            lo <= y && y <= hi
        })
    }

    pub fn length(&self) -> Result<AlgebraicNumber> {
        let mut total = AlgebraicNumber::ZERO;
        for iv in &self.intervals {
            total = total.checked_add(&iv.width()?)?;
        }
        Ok(total)
    }

    /// `scale * W + shift`; a negative scale reverses orientation.
    pub fn affine_image(&self, scale: &AlgebraicNumber, shift: &AlgebraicNumber) -> Result<Window> {
        let mut v = Vec::with_capacity(self.intervals.len());
        for iv in &self.intervals {
            let a = scale.checked_mul(&iv.lo)?.checked_add(shift)?;
            let b = scale.checked_mul(&iv.hi)?.checked_add(shift)?;
            let (lo, hi) = if a.exact_compare(&b)? == Ordering::Greater { (b, a) } else { (a, b) };
            v.push(Interval { lo, hi });
        }
        Ok(Window {
            intervals: normalize(v)?,
        })
    }

    pub fn union(&self, other: &Window) -> Result<Window> {
        let mut v = self.intervals.clone();
        v.extend_from_slice(&other.intervals);
        Ok(Window {
            intervals: normalize(v)?,
        })
    }

    /// Exact test `other ⊆ self`.
    pub fn contains_window(&self, other: &Window) -> Result<bool> {
        for o in &other.intervals {
            let mut inside = false;
            for iv in &self.intervals {
                if iv.contains(&o.lo)? && iv.contains(&o.hi)? {
                    inside = true;
                    break;
                }
            }
            if !inside {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn to_f64(&self) -> Vec<(f64, f64)> {
        self.intervals.iter().map(Interval::to_f64).collect()
    }

    /// Hausdorff distance, evaluated in floating point.
    pub fn hausdorff(&self, other: &Window) -> f64 {
        let a = self.to_f64();
        let b = other.to_f64();
        directed_hausdorff(&a, &b).max(directed_hausdorff(&b, &a))
    }
}

fn dist_to_union(x: f64, set: &[(f64, f64)]) -> f64 {
    set.iter()
        .map(|&(lo, hi)| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

/// `sup_{x in a} d(x, b)`: attained at an endpoint of `a` or at the midpoint
/// of a gap of `b` lying inside `a`.
fn directed_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for &(lo, hi) in a {
        worst = worst.max(dist_to_union(lo, b)).max(dist_to_union(hi, b));
    }
    for g in b.windows(2) {
        let mid = 0.5 * (g[0].1 + g[1].0);
        if a.iter().any(|&(lo, hi)| lo <= mid && mid <= hi) {
            worst = worst.max(dist_to_union(mid, b));
        }
    }
    worst
}

/// The exact silver-mean windows `(W_a, W_b)`.
pub fn silver_windows() -> (Window, Window) {
    let q = |a, b, c| AlgebraicNumber::new(a, b, c).expect("small constants");
    let w_a = Window::interval(q(-2, 1, 2), q(0, 1, 2)).expect("valid window");
    let w_b = Window::interval(q(0, -1, 2), q(-2, 1, 2)).expect("valid window");
    (w_a, w_b)
}

/// The full silver-mean window `[-sqrt2/2, sqrt2/2]`.
pub fn silver_window() -> Window {
    let (a, b) = silver_windows();
    a.union(&b).expect("small constants")
}

/// One contraction `y -> scale * y + shift` applied to the window of `source`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfsMap {
    pub source: Letter,
    pub scale: AlgebraicNumber,
    pub shift: AlgebraicNumber,
}

/// A coupled iterated function system on the two letter windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfsSystem {
    /// Maps whose images make up `W_a` and `W_b`, in that order.
    pub maps: [Vec<IfsMap>; 2],
    /// Closed-form solution to verify exactly, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<[Window; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowSolution {
    pub windows: [Window; 2],
    pub iterations: usize,
    /// Hausdorff distance of the last Hutchinson step.
    pub last_step: f64,
    /// Whether the candidate solution is an exact fixed point, if one was given.
    pub candidate_verified: Option<bool>,
}

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_BUDGET: usize = 500;
const MAX_PIECES: usize = 4096;

impl IfsSystem {
    /// `W_a = s* W_a ∪ (s* W_a + 1 + s*) ∪ s* W_b`, `W_b = s* W_a + s*`.
    pub fn silver_mean() -> Self {
        let s_star = AlgebraicNumber::silver_mean().star();
        let zero = AlgebraicNumber::ZERO;
        let map = |source, shift| IfsMap {
            source,
            scale: s_star,
            shift,
        };
        let (w_a, w_b) = silver_windows();
        IfsSystem {
            maps: [
                vec![
                    map(Letter::A, zero),
                    map(Letter::A, AlgebraicNumber::ONE + s_star),
                    map(Letter::B, zero),
                ],
                vec![map(Letter::A, s_star)],
            ],
            candidate: Some([w_a, w_b]),
        }
    }

    pub fn contraction_ratio(&self) -> f64 {
        self.maps
            .iter()
            .flatten()
            .map(|m| m.scale.to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn check_contracting(&self) -> Result<()> {
        for m in self.maps.iter().flatten() {
            if m.scale.abs().exact_compare(&AlgebraicNumber::ONE)? != Ordering::Less {
                return Err(Error::NotContracting(m.scale.to_f64()));
            }
        }
        if self.maps.iter().any(|v| v.is_empty()) {
            return Err(Error::InvalidInput("every letter needs at least one map".into()));
        }
        Ok(())
    }

    /// One Hutchinson step.
    pub fn apply(&self, w: &[Window; 2]) -> Result<[Window; 2]> {
        let image = |maps: &[IfsMap]| -> Result<Window> {
            let mut v = Vec::new();
            for m in maps {
                v.extend(w[m.source.index()].affine_image(&m.scale, &m.shift)?.intervals);
            }
            Ok(Window {
                intervals: normalize(v)?,
            })
        };
        Ok([image(&self.maps[0])?, image(&self.maps[1])?])
    }

    pub fn is_fixed_point(&self, w: &[Window; 2]) -> Result<bool> {
        Ok(&self.apply(w)? == w)
    }

    /// `[-R, R]` for both letters, with `R` an integer bound on the attractor.
    pub fn default_seed(&self) -> Result<[Window; 2]> {
        let c = self.contraction_ratio();
        let t = self
            .maps
            .iter()
            .flatten()
            .map(|m| m.shift.to_f64().abs())
            .fold(0.0, f64::max);
        let r = (t / (1.0 - c)).ceil() as i64 + 1;
        let w = Window::interval(AlgebraicNumber::integer(-r), AlgebraicNumber::integer(r))?;
        Ok([w.clone(), w])
    }
}

fn hausdorff_pair(x: &[Window; 2], y: &[Window; 2]) -> f64 {
    x[0].hausdorff(&y[0]).max(x[1].hausdorff(&y[1]))
}

/// Solves the coupled IFS by Hutchinson iteration from the default seed.
pub fn solve_windows(system: &IfsSystem, tol: f64) -> Result<WindowSolution> {
    let seed = system.default_seed()?;
    solve_windows_from(system, seed, tol, DEFAULT_BUDGET)
}

/// Iterates until successive iterates are within `tol` in Hausdorff distance.
pub fn solve_windows_from(
    system: &IfsSystem,
    seed: [Window; 2],
    tol: f64,
    budget: usize,
) -> Result<WindowSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    system.check_contracting()?;
    let candidate_verified = match &system.candidate {
        Some(c) => Some(system.is_fixed_point(c)?),
        None => None,
    };
    let mut current = seed;
    for it in 1..=budget {
        let next = system.apply(&current)?;
        if next.iter().map(|w| w.intervals.len()).sum::<usize>() > MAX_PIECES {
            return Err(Error::InvalidInput(format!(
                "Hutchinson iterate fragmented into more than {MAX_PIECES} pieces"
            )));
        }
        let step = hausdorff_pair(&next, &current);
        current = next;
        if step < tol {
            return Ok(WindowSolution {
                windows: current,
                iterations: it,
                last_step: step,
                candidate_verified,
            });
        }
    }
    Err(Error::IterationBudget(budget))
}

/// Exact test `x* ∈ W`.
pub fn is_member(x: &AlgebraicNumber, w: &Window) -> Result<bool> {
    w.contains(&x.star())
}

/// Window data of a model set, optionally split by letter.
#[derive(Clone, Debug, PartialEq)]
pub struct CutProjectScheme {
    window: Window,
    letters: Option<[Window; 2]>,
}

impl CutProjectScheme {
    pub fn silver_mean() -> Self {
        let (w_a, w_b) = silver_windows();
        Self::from_letter_windows(w_a, w_b).expect("silver windows are valid")
    }

    pub fn from_letter_windows(w_a: Window, w_b: Window) -> Result<Self> {
        Ok(CutProjectScheme {
            window: w_a.union(&w_b)?,
            letters: Some([w_a, w_b]),
        })
    }

    pub fn from_window(window: Window) -> Self {
        CutProjectScheme {
            window,
            letters: None,
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn letter_window(&self, l: Letter) -> Option<&Window> {
        self.letters.as_ref().map(|w| &w[l.index()])
    }

    /// Letter of the point with internal coordinate `y`.
    pub fn label(&self, y: &AlgebraicNumber) -> Result<Option<Letter>> {
        if let Some([w_a, w_b]) = &self.letters {
            if w_a.contains(y)? {
                return Ok(Some(Letter::A));
            }
            if w_b.contains(y)? {
                return Ok(Some(Letter::B));
            }
        }
        Ok(None)
    }
}

/// All `x = m + n sqrt2` with `|x| <= r` and `x* ∈ W`, labeled by letter
/// window when the scheme has them.
pub fn project_patch(r: f64, scheme: &CutProjectScheme) -> Result<LabeledPatch> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {r}")));
    }
    let (wlo, whi) = scheme.window.hull().to_f64();
    if r.max(wlo.abs()).max(whi.abs()) > COEFF_LIMIT as f64 / 4.0 {
        return Err(Error::Overflow);
    }
    // 2m = x + x* and 2 sqrt2 n = x - x*
    let n_lo = ((-r - whi) / (2.0 * SQRT_2)).floor() as i64 - 1;
    let n_hi = ((r - wlo) / (2.0 * SQRT_2)).ceil() as i64 + 1;
    let rows: Vec<Result<Vec<PatchPoint>>> = (n_lo..=n_hi)
        .into_par_iter()
        .map(|n| {
            let shift = n as f64 * SQRT_2;
            let m_lo = (-r - shift).max(wlo + shift).floor() as i64 - 1;
            let m_hi = (r - shift).min(whi + shift).ceil() as i64 + 1;
            let mut row = Vec::new();
            for m in m_lo..=m_hi {
                let x = AlgebraicNumber::from_ints(m, n);
                if x.to_f64().abs() > r {
                    continue;
                }
                let y = x.star();
                if scheme.window.contains(&y)? {
                    row.push(PatchPoint::new(x, scheme.label(&y)?));
                }
            }
            Ok(row)
        })
        .collect();
    let mut points = Vec::new();
    for row in rows {
        points.extend(row?);
    }
    LabeledPatch::new(points, r)
}

/// Patch of the translate `Λ - x` in `[-r, r]`.
pub fn translated_patch(scheme: &CutProjectScheme, x: &AlgebraicNumber, r: f64) -> Result<LabeledPatch> {
    let big = project_patch(r + x.to_f64().abs() + 1.0, scheme)?;
    Ok(big.translate(&-*x)?.restrict(r))
}

/// Number of patch points whose internal coordinate sits exactly on a
/// window endpoint.
pub fn boundary_hits(patch: &LabeledPatch, w: &Window) -> usize {
    let ends: Vec<AlgebraicNumber> = w.intervals().iter().flat_map(|iv| [iv.lo, iv.hi]).collect();
    patch
        .positions()
        .filter(|x| ends.contains(&x.star()))
        .count()
}

/// Estimates the internal coordinate of a hull element from a finite patch:
/// the intersection of `W - y*` over all patch points `y`.
pub fn sigma_estimate(patch: &LabeledPatch, w: &Window) -> Result<Interval> {
    if patch.is_empty() {
        return Err(Error::InvalidInput("patch is empty".into()));
    }
    if !patch.contains(&AlgebraicNumber::ZERO) {
        return Err(Error::InvalidInput("patch does not contain the origin".into()));
    }
    if !w.is_interval() {
        return Err(Error::InvalidInput("window must be a single interval".into()));
    }
    let Interval { lo: wlo, hi: whi } = w.hull();
    let mut min_star = patch.points()[0].position.star();
    let mut max_star = min_star;
    for p in patch.points() {
        let y = p.position.star();
        if y.exact_compare(&min_star)? == Ordering::Less {
            min_star = y;
        }
        if y.exact_compare(&max_star)? == Ordering::Greater {
            max_star = y;
        }
    }
    let lo = wlo.checked_sub(&min_star)?;
    let hi = whi.checked_sub(&max_star)?;
    if lo.exact_compare(&hi)? == Ordering::Greater {
        return Err(Error::EmptyIntersection);
    }
    Ok(Interval { lo, hi })
}
