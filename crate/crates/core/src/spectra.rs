//! Spectrum sequences, multiplicities, complete isospectrality, and dense
//! countable subsets of simple closed sets.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered, possibly repeating list of finite energies. Repetitions
/// encode multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpectrumSeq(Vec<f64>);

impl SpectrumSeq {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::invalid(format!(
                "energy at position {i} is not finite ({})",
                energies[i]
            )));
        }
        Ok(SpectrumSeq(energies))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Ascending copy.
    pub fn sorted(&self) -> SpectrumSeq {
        let mut v = self.0.clone();
        v.sort_by(f64::total_cmp);
        SpectrumSeq(v)
    }

    /// First `d` entries.
    pub fn prefix(&self, d: usize) -> Result<SpectrumSeq> {
        if d > self.0.len() {
            return Err(Error::invalid(format!(
                "spectrum has {} entries, {d} requested",
                self.0.len()
            )));
        }
        Ok(SpectrumSeq(self.0[..d].to_vec()))
    }

    /// Largest minus smallest entry, 0 for an empty sequence.
    pub fn range(&self) -> f64 {
        let (lo, hi) = self
            .0
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            });
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    /// One value per line with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.0.len() * 25);
        for e in &self.0 {
            let _ = writeln!(out, "{e:.16e}");
        }
        out
    }

    /// Parses the line format: one decimal per line, blank lines and lines
    /// starting with `#` ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut v = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let e: f64 = line.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("cannot parse {line:?} as a number"),
            })?;
            if !e.is_finite() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "value is not finite".into(),
                });
            }
            v.push(e);
        }
        Ok(SpectrumSeq(v))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("finite floats always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Vec<f64> = serde_json::from_str(text)?;
        SpectrumSeq::new(v)
    }

    /// Reads either format; JSON is detected by a leading `[`.
    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// JSON when the text starts with `[`, the line format otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('[') {
            Self::from_json(text)
        } else {
            Self::from_text(text)
        }
    }
}

impl TryFrom<Vec<f64>> for SpectrumSeq {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SpectrumSeq::new(v)
    }
}

impl From<SpectrumSeq> for Vec<f64> {
    fn from(s: SpectrumSeq) -> Self {
        s.0
    }
}

/// Distinct eigenvalues with occurrence counts, ascending by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityMap(Vec<(f64, usize)>);

impl MultiplicityMap {
    pub fn entries(&self) -> &[(f64, usize)] {
        &self.0
    }

    pub fn get(&self, value: f64) -> Option<usize> {
        self.0.iter().find(|(e, _)| *e == value).map(|&(_, c)| c)
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&(_, c)| c).sum()
    }
}

/// Counts occurrences of each value using exact float equality.
pub fn multiplicities(seq: &SpectrumSeq) -> Result<MultiplicityMap> {
    if seq.is_empty() {
        return Err(Error::invalid("spectrum is empty"));
    }
    let sorted = seq.sorted();
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &e in sorted.as_slice() {
        match out.last_mut() {
            Some((last, count)) if *last == e => *count += 1,
            _ => out.push((e, 1)),
        }
    }
    Ok(MultiplicityMap(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmatchedPair {
    /// Position in the sorted order.
    pub position: usize,
    pub left: Option<f64>,
    pub right: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsospectralReport {
    pub isospectral: bool,
    pub tolerance: f64,
    pub left_len: usize,
    pub right_len: usize,
    pub max_deviation: f64,
    pub unmatched: Vec<UnmatchedPair>,
    /// Finite matrices have no continuous spectrum, so that half of the
    /// comparison always holds.
    pub continuous_spectrum: String,
}

/// `1e-9 · max(1, spectral range)` over both sequences.
pub fn default_tolerance(a: &SpectrumSeq, b: &SpectrumSeq) -> f64 {
    let lo = a
        .as_slice()
        .iter()
        .chain(b.as_slice())
        .fold(f64::INFINITY, |m, &e| m.min(e));
    let hi = a
        .as_slice()
        .iter()
        .chain(b.as_slice())
        .fold(f64::NEG_INFINITY, |m, &e| m.max(e));
    let range = if lo.is_finite() { hi - lo } else { 0.0 };
    1e-9 * range.max(1.0)
}

/// Multiset equality up to `tol`: sorted copies must agree entrywise.
pub fn completely_isospectral(a: &SpectrumSeq, b: &SpectrumSeq, tol: f64) -> Result<IsospectralReport> {
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be non-negative, got {tol}")));
    }
    let sa = a.sorted();
    let sb = b.sorted();
    let n = sa.len().max(sb.len());
    let mut unmatched = Vec::new();
    let mut max_dev: f64 = 0.0;
    for i in 0..n {
        let l = sa.as_slice().get(i).copied();
        let r = sb.as_slice().get(i).copied();
        match (l, r) {
            (Some(x), Some(y)) => {
                let dev = (x - y).abs();
                max_dev = max_dev.max(dev);
                if dev > tol {
                    unmatched.push(UnmatchedPair { position: i, left: l, right: r });
                }
            }
            _ => unmatched.push(UnmatchedPair { position: i, left: l, right: r }),
        }
    }
    Ok(IsospectralReport {
        isospectral: unmatched.is_empty(),
        tolerance: tol,
        left_len: sa.len(),
        right_len: sb.len(),
        max_deviation: max_dev,
        unmatched,
        continuous_spectrum: "empty on both sides (finite truncation)".into(),
    })
}

/// A closed subset of the real line with a finite description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClosedSetSpec {
    Points { points: Vec<f64> },
    Intervals { intervals: Vec<(f64, f64)> },
    /// Middle-thirds Cantor set on `[0, 1]`.
    Cantor,
}

impl ClosedSetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ClosedSetSpec::Points { points } => {
                if points.is_empty() {
                    return Err(Error::invalid("closed set: point list is empty"));
                }
                if points.iter().any(|p| !p.is_finite()) {
                    return Err(Error::invalid("closed set: non-finite point"));
                }
            }
            ClosedSetSpec::Intervals { intervals } => {
                if intervals.is_empty() {
                    return Err(Error::invalid("closed set: interval list is empty"));
                }
                for &(a, b) in intervals {
                    if !(a.is_finite() && b.is_finite()) {
                        return Err(Error::invalid("closed set: non-finite endpoint"));
                    }
                    if a > b {
                        return Err(Error::invalid(format!(
                            "closed set: interval [{a}, {b}] has lower > upper"
                        )));
                    }
                }
            }
            ClosedSetSpec::Cantor => {}
        }
        Ok(())
    }

    /// Membership test. Exact for points and intervals; for the Cantor set
    /// membership is resolved to 36 generations with a `1e-12` margin.
    pub fn contains(&self, x: f64) -> bool {
        match self {
            ClosedSetSpec::Points { points } => points.contains(&x),
            ClosedSetSpec::Intervals { intervals } => {
                intervals.iter().any(|&(a, b)| a <= x && x <= b)
            }
            ClosedSetSpec::Cantor => cantor_contains_approx(x),
        }
    }
}

fn cantor_contains_approx(x: f64) -> bool {
    const EPS: f64 = 1e-12;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if x < lo - EPS || x > hi + EPS {
        return false;
    }
    for _ in 0..36 {
        let third = (hi - lo) / 3.0;
        if x <= lo + third + EPS {
            hi = lo + third;
        } else if x >= hi - third - EPS {
            lo = hi - third;
        } else {
            return false;
        }
    }
    true
}

/// Dyadic rationals in `[0, 1]`: `0, 1, 1/2, 1/4, 3/4, 1/8, 3/8, ...`.
pub fn dyadic(j: u64) -> f64 {
    match j {
        0 => 0.0,
        1 => 1.0,
        _ => {
            let t = j - 1;
            let level = 64 - t.leading_zeros(); // floor(log2 t) + 1
            let pos = t - (1u64 << (level - 1));
            (2 * pos + 1) as f64 / (1u64 << level.min(63)) as f64
        }
    }
}

/// Endpoint `j` of the removed middle-thirds intervals, by generation then
/// left to right, as `numerator / 3^generation`.
pub fn cantor_endpoint(j: u64) -> Result<(u64, u32)> {
    match j {
        0 => return Ok((0, 0)),
        1 => return Ok((1, 0)),
        _ => {}
    }
    // generation g holds 2^g endpoints at offsets 2^g .. 2^(g+1) - 1
    let g = 63 - j.leading_zeros();
    if g > 39 {
        return Err(Error::capacity("Cantor enumeration exceeds 39 generations"));
    }
    let q = j - (1u64 << g);
    let interval = q / 2;
    let side = q % 2;
    // left endpoint of the surviving interval, numerator over 3^(g-1)
    let mut left = 0u64;
    for bit in (0..g - 1).rev() {
        left = left * 3 + 2 * ((interval >> bit) & 1);
    }
    Ok((3 * left + 1 + side, g))
}

/// `true` iff `num / 3^gen` lies in the Cantor set (exact integer check).
pub fn cantor_contains_rational(num: u64, generation: u32) -> bool {
    let denom = 3u64.pow(generation);
    if num > denom {
        return false;
    }
    if num == denom {
        return true;
    }
    let mut digits = Vec::with_capacity(generation as usize);
    let mut r = num;
    for _ in 0..generation {
        digits.push(r % 3);
        r /= 3;
    }
    // digits[0] is least significant; a trailing 1 equals 0222...
    let last_nonzero = digits.iter().position(|&d| d != 0);
    digits
        .iter()
        .enumerate()
        .all(|(i, &d)| d != 1 || Some(i) == last_nonzero)
}

/// First `m` terms of a fixed enumeration of a countable dense subset.
///
/// Points cycle in the given order, intervals interleave round-robin with a
/// dyadic enumeration each, and the Cantor set lists removed-interval
/// endpoints generation by generation.
pub fn dense_subset(spec: &ClosedSetSpec, m: usize) -> Result<SpectrumSeq> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::invalid("dense subset length must be at least 1"));
    }
    let out: Vec<f64> = match spec {
        ClosedSetSpec::Points { points } => (0..m).map(|j| points[j % points.len()]).collect(),
        ClosedSetSpec::Intervals { intervals } => {
            let k = intervals.len();
            (0..m)
                .map(|j| {
                    let (a, b) = intervals[j % k];
                    let q = dyadic((j / k) as u64);
                    (a * (1.0 - q) + b * q).clamp(a, b)
                })
                .collect()
        }
        ClosedSetSpec::Cantor => (0..m as u64)
            .map(|j| cantor_endpoint(j).map(|(num, g)| num as f64 / 3f64.powi(g as i32)))
            .collect::<Result<_>>()?,
    };
    SpectrumSeq::new(out)
}
