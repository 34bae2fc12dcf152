//! The silver-mean substitution `a -> aba, b -> a`, its bi-infinite fixed
//! point, and the geometric realization as a labeled point set.

use std::fmt;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadfield::AlgebraicNumber;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Letter {
    A,
    B,
}

impl Letter {
    pub const ALL: [Letter; 2] = [Letter::A, Letter::B];

    pub fn index(self) -> usize {
        match self {
            Letter::A => 0,
            Letter::B => 1,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::A => 'a',
            Letter::B => 'b',
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

pub fn parse_word(s: &str) -> Result<Vec<Letter>> {
    s.chars()
        .map(|c| match c {
            'a' => Ok(Letter::A),
            'b' => Ok(Letter::B),
            _ => Err(Error::InvalidInput(format!("letter `{c}` not in {{a, b}}"))),
        })
        .collect()
}

pub fn word_to_string(w: &[Letter]) -> String {
    w.iter().map(|l| l.as_char()).collect()
}

/// A two-letter substitution together with the interval lengths that turn
/// it into a geometric inflation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionRule {
    /// Images of `a` and `b`, in that order.
    pub images: [Vec<Letter>; 2],
    /// Interval lengths of `a` and `b`.
    pub lengths: [AlgebraicNumber; 2],
}

/// Perron-Frobenius data of a primitive rule.
#[derive(Clone, Debug, PartialEq)]
pub struct PfData {
    pub eigenvalue: AlgebraicNumber,
    pub frequencies: (f64, f64),
    pub exact_frequencies: (AlgebraicNumber, AlgebraicNumber),
}

impl SubstitutionRule {
    /// `a -> aba`, `b -> a` with lengths `1 + sqrt2` and `1`.
    pub fn silver_mean() -> Self {
        use Letter::*;
        SubstitutionRule {
            images: [vec![A, B, A], vec![A]],
            lengths: [AlgebraicNumber::silver_mean(), AlgebraicNumber::ONE],
        }
    }

    pub fn image(&self, l: Letter) -> &[Letter] {
        &self.images[l.index()]
    }

    pub fn length(&self, l: Letter) -> AlgebraicNumber {
        self.lengths[l.index()]
    }

    pub fn substitute(&self, word: &[Letter]) -> Vec<Letter> {
        word.iter().flat_map(|&l| self.image(l).iter().copied()).collect()
    }

    pub fn iterate(&self, word: &[Letter], times: usize) -> Vec<Letter> {
        let mut w = word.to_vec();
        for _ in 0..times {
            w = self.substitute(&w);
        }
        w
    }

    /// `M[k][l]` is the number of letters `l` in the image of `k`.
    pub fn matrix(&self) -> [[u64; 2]; 2] {
        let mut m = [[0u64; 2]; 2];
        for k in Letter::ALL {
            for l in self.image(k) {
                m[k.index()][l.index()] += 1;
            }
        }
        m
    }

    pub fn is_primitive(&self) -> bool {
        // for 2x2 matrices the Wielandt bound gives exponent <= 2
        let m = self.matrix();
        let mut p = m;
        for _ in 0..2 {
            if p.iter().flatten().all(|&v| v > 0) {
                return true;
            }
            p = mat_mul(&p, &m);
        }
        p.iter().flatten().all(|&v| v > 0)
    }

    /// Checks exactly that the length vector is a Perron-Frobenius
    /// eigenvector: the image of each letter is `eigenvalue` times as long.
    pub fn lengths_are_eigenvector(&self) -> Result<bool> {
        let pf = pf_data(self)?;
        for k in Letter::ALL {
            let mut total = AlgebraicNumber::ZERO;
            for &l in self.image(k) {
                total = total.checked_add(&self.length(l))?;
            }
            if total != pf.eigenvalue.checked_mul(&self.length(k))? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn mat_mul(x: &[[u64; 2]; 2], y: &[[u64; 2]; 2]) -> [[u64; 2]; 2] {
    let mut r = [[0u64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    r
}

fn isqrt_exact(v: i64) -> Option<i64> {
    if v < 0 {
        return None;
    }
    let r = (v as f64).sqrt().round() as i64;
    (r.saturating_sub(1)..=r + 1).find(|&c| c >= 0 && c * c == v)
}

/// Perron-Frobenius eigenvalue and letter frequencies.
///
/// The eigenvalue is returned exactly, so the characteristic polynomial must
/// split over `Q(sqrt2)`.
pub fn pf_data(rule: &SubstitutionRule) -> Result<PfData> {
    if !rule.is_primitive() {
        return Err(Error::NonPrimitive);
    }
    let m = rule.matrix();
    let [[p, q], [r, t]] = m.map(|row| row.map(|v| v as i64));
    let tr = p + t;
    let det = p * t - q * r;
    let disc = tr * tr - 4 * det;
    // eigenvalue = (tr + sqrt(disc)) / 2
    let root = if let Some(k) = isqrt_exact(disc) {
        AlgebraicNumber::integer(k)
    } else if disc % 2 == 0 && isqrt_exact(disc / 2).is_some() {
        AlgebraicNumber::from_ints(0, isqrt_exact(disc / 2).unwrap())
    } else {
        return Err(Error::InvalidInput(format!(
            "Perron-Frobenius eigenvalue needs sqrt({disc}), outside Q(sqrt2)"
        )));
    };
    let eigenvalue = AlgebraicNumber::integer(tr)
        .checked_add(&root)?
        .checked_div(&AlgebraicNumber::integer(2))?;
    // frequencies: eigenvector of the transpose, (r, eigenvalue - p)
    let v_a = AlgebraicNumber::integer(r);
    let v_b = eigenvalue.checked_sub(&AlgebraicNumber::integer(p))?;
    let total = v_a.checked_add(&v_b)?;
    let f_a = v_a.checked_div(&total)?;
    let f_b = v_b.checked_div(&total)?;
    Ok(PfData {
        eigenvalue,
        frequencies: (f_a.to_f64(), f_b.to_f64()),
        exact_frequencies: (f_a, f_b),
    })
}

/// One point of a patch: an interval's left endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchPoint {
    pub position: AlgebraicNumber,
    pub label: Option<Letter>,
    pub weight: Complex64,
}

impl PatchPoint {
    pub fn new(position: AlgebraicNumber, label: Option<Letter>) -> Self {
        PatchPoint {
            position,
            label,
            weight: Complex64::new(1.0, 0.0),
        }
    }
}

/// A finite, strictly increasing point set inside `[-radius, radius]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPatch {
    points: Vec<PatchPoint>,
    radius: f64,
}

impl LabeledPatch {
    /// Sorts the points and checks the invariants.
    pub fn new(mut points: Vec<PatchPoint>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidInput(format!("patch radius {radius}")));
        }
        points.sort_by_key(|p| p.position);
        if points.windows(2).any(|w| w[0].position == w[1].position) {
            return Err(Error::InvalidInput("duplicate patch position".into()));
        }
        if let Some(p) = points.iter().find(|p| p.position.to_f64().abs() > radius) {
            return Err(Error::InvalidInput(format!(
                "position {} outside [-{radius}, {radius}]",
                p.position
            )));
        }
        Ok(LabeledPatch { points, radius })
    }

    pub fn points(&self) -> &[PatchPoint] {
        &self.points
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = AlgebraicNumber> + '_ {
        self.points.iter().map(|p| p.position)
    }

    pub fn contains(&self, x: &AlgebraicNumber) -> bool {
        self.find(x).is_some()
    }

    pub fn find(&self, x: &AlgebraicNumber) -> Option<&PatchPoint> {
        self.points
            .binary_search_by(|p| p.position.cmp(x))
            .ok()
            .map(|i| &self.points[i])
    }

    pub fn label_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for p in &self.points {
            if let Some(l) = p.label {
                c[l.index()] += 1;
            }
        }
        c
    }

    /// Points with `|x| <= radius`, with the patch radius set to `radius`.
    pub fn restrict(&self, radius: f64) -> LabeledPatch {
        LabeledPatch {
            points: self
                .points
                .iter()
                .filter(|p| p.position.to_f64().abs() <= radius)
                .copied()
                .collect(),
            radius: radius.min(self.radius),
        }
    }

    /// Shifts every point by `t`; the radius is kept, points leaving
    /// `[-radius, radius]` are dropped.
    pub fn translate(&self, t: &AlgebraicNumber) -> Result<LabeledPatch> {
        let mut points = Vec::with_capacity(self.points.len());
        for p in &self.points {
            let position = p.position.checked_add(t)?;
            if position.to_f64().abs() <= self.radius {
                points.push(PatchPoint { position, ..*p });
            }
        }
        Ok(LabeledPatch {
            points,
            radius: self.radius,
        })
    }

    pub const CSV_HEADER: &'static str = "position_float,a,b,c,label,weight_re,weight_im";

    /// One row per point; floats carry 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for p in &self.points {
            let label = p.label.map(|l| l.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{:.16e},{},{},{},{},{:.16e},{:.16e}",
                p.position.to_f64(),
                p.position.a(),
                p.position.b(),
                p.position.c(),
                label,
                p.weight.re,
                p.weight.im
            )?;
        }
        Ok(())
    }
}

/// The seed `a|a` of the silver-mean fixed point.
pub const SILVER_SEED: ([Letter; 1], [Letter; 1]) = ([Letter::A], [Letter::A]);

/// Level-`level` patch of the silver-mean fixed point, `sigma^level(a|a)`.
pub fn fixed_point_patch(level: usize) -> Result<LabeledPatch> {
    let rule = SubstitutionRule::silver_mean();
    fixed_point_patch_with(&rule, &SILVER_SEED.0, &SILVER_SEED.1, level)
}

/// Realizes `sigma^level(left|right)` by left endpoints, with the reference
/// point at the origin.
///
/// The patch radius is the largest `R` with `[-R, R]` covered by realized
/// intervals. Only left endpoints of realized intervals are returned, so the
/// point set is complete on `[-R, R)`; whether `R` itself is a point is
/// decided by the next level.
pub fn fixed_point_patch_with(
    rule: &SubstitutionRule,
    left: &[Letter],
    right: &[Letter],
    level: usize,
) -> Result<LabeledPatch> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::InvalidInput("seed halves must be nonempty".into()));
    }
    if !rule.substitute(right).starts_with(right) || !rule.substitute(left).ends_with(left) {
        return Err(Error::InvalidInput(
            "seed is not legal for fixed point iteration".into(),
        ));
    }
    let rw = rule.iterate(right, level);
    let lw = rule.iterate(left, level);

    let mut points = Vec::with_capacity(rw.len() + lw.len() + 1);
    let mut x = AlgebraicNumber::ZERO;
    for &l in &rw {
        points.push(PatchPoint::new(x, Some(l)));
        x = x.checked_add(&rule.length(l))?;
    }
    let right_extent = x;
    let mut x = AlgebraicNumber::ZERO;
    for &l in lw.iter().rev() {
        x = x.checked_sub(&rule.length(l))?;
        points.push(PatchPoint::new(x, Some(l)));
    }
    let left_extent = -x;

    let r_exact = right_extent.min(left_extent);
    let neg_r = -r_exact;
    points.retain(|p| p.position >= neg_r && p.position <= r_exact);
    LabeledPatch::new(points, r_exact.to_f64())
}

/// Smallest level whose fixed-point patch radius strictly exceeds `radius`,
/// so that the patch is complete on the closed interval `[-radius, radius]`.
pub fn level_for_radius(radius: f64) -> usize {
    let rule = SubstitutionRule::silver_mean();
    let mut level = 0;
    let mut extent = rule.length(Letter::A).to_f64();
    let s = AlgebraicNumber::silver_mean().to_f64();
    while extent <= radius {
        extent *= s;
        level += 1;
    }
    level
}
