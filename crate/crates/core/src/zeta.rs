//! Imaginary parts of the first nontrivial zeros of ζ on the critical line:
//! ingestion from published tables and a desk-scale evaluator based on the
//! Hardy Z function.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::spectra::SpectrumSeq;

/// Largest count accepted by [`compute_zeros`].
pub const MAX_COMPUTED: usize = 100;
pub const SCAN_START: f64 = 10.0;
pub const SCAN_STEP: f64 = 0.05;
pub const BISECTION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSource {
    File,
    Computed,
}

impl fmt::Display for ZeroSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZeroSource::File => "file",
            ZeroSource::Computed => "computed",
        })
    }
}

/// Strictly increasing positive ordinates `t_i` with `ζ(½ + i t_i) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZetaZeroSet {
    zeros: Vec<f64>,
    source: ZeroSource,
}

impl ZetaZeroSet {
    pub fn new(zeros: Vec<f64>, source: ZeroSource) -> Result<Self> {
        for (i, &t) in zeros.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid(format!("zero {} is not a positive number: {t}", i + 1)));
            }
            if i > 0 && t <= zeros[i - 1] {
                return Err(Error::invalid(format!("zeros not strictly increasing at entry {}", i + 1)));
            }
        }
        Ok(ZetaZeroSet { zeros, source })
    }

    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    pub fn source(&self) -> ZeroSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    pub fn to_spectrum(&self) -> SpectrumSeq {
        SpectrumSeq::new(self.zeros.clone()).expect("zeros are finite")
    }
}

/// Parses one decimal per line, ascending and positive; `#` lines and blank
/// lines are skipped. Errors carry the 1-based line number.
pub fn parse_zeros_str(text: &str) -> Result<ZetaZeroSet> {
    let mut zeros: Vec<f64> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let t: f64 = line.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("not a number: {line:?}"),
        })?;
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("zero must be positive, got {t}"),
            });
        }
        if zeros.last().is_some_and(|&prev| t <= prev) {
            return Err(Error::Parse {
                line: i + 1,
                msg: "zeros must be strictly increasing".into(),
            });
        }
        zeros.push(t);
    }
    if zeros.is_empty() {
        return Err(Error::invalid("zero file contains no values"));
    }
    ZetaZeroSet::new(zeros, ZeroSource::File)
}

pub fn parse_zeros(path: impl AsRef<Path>) -> Result<ZetaZeroSet> {
    parse_zeros_str(&std::fs::read_to_string(path)?)
}

/// Borwein's accelerated alternating series for the Dirichlet eta function.
fn eta(s: Complex64, terms: usize) -> Complex64 {
    let n = terms;
    let mut d = Vec::with_capacity(n + 1);
    let mut c = 1.0;
    let mut acc = c;
    d.push(acc);
    for i in 0..n {
        let (nf, i_f) = (n as f64, i as f64);
        c *= 4.0 * (nf + i_f) * (nf - i_f) / ((2.0 * i_f + 1.0) * (2.0 * i_f + 2.0));
        acc += c;
        d.push(acc);
    }
    let dn = d[n];
    let mut sum = Complex64::new(0.0, 0.0);
    for (k, dk) in d.iter().take(n).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = (-s * ((k + 1) as f64).ln()).exp();
        sum += term * (sign * (dk - dn) / dn);
    }
    -sum
}

fn terms_for(t: f64) -> usize {
    // error ~ (3+√8)^{-n} e^{π|t|/2}
    let rate = (3.0 + 8f64.sqrt()).ln();
    ((PI * t.abs() / 2.0 + 40.0) / rate).ceil() as usize + 4
}

/// `ζ(s)` for `Re s > 0`, `s ≠ 1`.
pub fn zeta(s: Complex64) -> Complex64 {
    let denom = Complex64::new(1.0, 0.0) - (Complex64::new(1.0, 0.0) - s).scale(LN_2).exp();
    eta(s, terms_for(s.im)) / denom
}

/// Riemann–Siegel theta from its asymptotic expansion (accurate for t ≥ 10).
pub fn theta(t: f64) -> f64 {
    t / 2.0 * (t / (2.0 * PI)).ln() - t / 2.0 - PI / 8.0
        + 1.0 / (48.0 * t)
        + 7.0 / (5760.0 * t.powi(3))
        + 31.0 / (80640.0 * t.powi(5))
        + 127.0 / (430080.0 * t.powi(7))
}

/// Hardy's `Z(t) = e^{iθ(t)} ζ(½ + it)`, real for real `t`.
pub fn hardy_z(t: f64) -> f64 {
    let z = zeta(Complex64::new(0.5, t));
    (Complex64::from_polar(1.0, theta(t)) * z).re
}

/// The first `m` zeros, by sign-change scan of `Z` from `t = 10` with step
/// 0.05 and bisection of each bracket to 1e-8.
pub fn compute_zeros(m: usize) -> Result<ZetaZeroSet> {
    compute_zeros_with(m, Exec::default())
}

/// Grid evaluations run in batches and brackets are refined independently,
/// so the result does not depend on `exec`.
pub fn compute_zeros_with(m: usize, exec: Exec) -> Result<ZetaZeroSet> {
    if m == 0 {
        return Err(Error::invalid("zero count must be at least 1"));
    }
    if m > MAX_COMPUTED {
        return Err(Error::capacity(format!(
            "at most {MAX_COMPUTED} zeros can be computed; supply a published table for more"
        )));
    }
    const BATCH: usize = 256;
    let grid = |i: usize| SCAN_START + i as f64 * SCAN_STEP;
    let mut brackets: Vec<(f64, f64, f64)> = Vec::with_capacity(m);
    let mut exact: Vec<f64> = Vec::new();
    let mut prev = hardy_z(grid(0));
    let mut next = 1usize;
    while brackets.len() + exact.len() < m {
        let values = exec.map_range(BATCH, |k| hardy_z(grid(next + k)));
        for (k, &zb) in values.iter().enumerate() {
            if brackets.len() + exact.len() == m {
                break;
            }
            let (a, b) = (grid(next + k - 1), grid(next + k));
            if prev == 0.0 {
                exact.push(a);
            } else if zb != 0.0 && prev.signum() != zb.signum() {
                brackets.push((a, b, prev));
            }
            prev = zb;
        }
        next += BATCH;
    }
    let mut zeros = exec.map_range(brackets.len(), |i| {
        let (a, b, za) = brackets[i];
        bisect(a, b, za)
    });
    zeros.extend(exact);
    zeros.sort_by(f64::total_cmp);
    ZetaZeroSet::new(zeros, ZeroSource::Computed)
}

fn bisect(mut lo: f64, mut hi: f64, zlo: f64) -> f64 {
    let s = zlo.signum();
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let zm = hardy_z(mid);
        if zm == 0.0 {
            return mid;
        }
        if zm.signum() == s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Published ordinates (Odlyzko's table).
    const KNOWN: [f64; 10] = [
        14.134725141734693,
        21.022039638771555,
        25.010857580145688,
        30.424876125859513,
        32.935061587739189,
        37.586178158825671,
        40.918719012147495,
        43.327073280914999,
        48.005150881167159,
        49.773832477672302,
    ];

    #[test]
    fn zeta_at_real_points() {
        let z2 = zeta(Complex64::new(2.0, 0.0));
        assert!((z2.re - PI * PI / 6.0).abs() < 1e-13 && z2.im.abs() < 1e-15);
        let zh = zeta(Complex64::new(0.5, 0.0));
        assert!((zh.re + 1.4603545088095868).abs() < 1e-13);
    }

    #[test]
    fn theta_matches_gamma_phase_asymptotics() {
        // θ(t) = Im lnΓ(¼ + it/2) − (t/2) ln π; Gram point g_0 ≈ 17.8455995 has θ = 0
        assert!(theta(17.845_599_540_464_7).abs() < 1e-9);
    }

    #[test]
    fn first_zeros_match_table() {
        let z = compute_zeros(10).unwrap();
        assert_eq!(z.source(), ZeroSource::Computed);
        for (a, b) in z.zeros().iter().zip(KNOWN) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn hundredth_zero() {
        let z = compute_zeros(100).unwrap();
        assert!((z.zeros()[49] - 143.111845807620632).abs() < 1e-7);
        assert!((z.zeros()[99] - 236.524229665816205).abs() < 1e-7);
        assert!(z.zeros().windows(2).all(|w| w[1] - w[0] > 1e-6));
    }

    #[test]
    fn policies_agree() {
        assert_eq!(
            compute_zeros_with(30, Exec::Sequential).unwrap(),
            compute_zeros_with(30, Exec::Parallel).unwrap()
        );
    }

    #[test]
    fn count_bounds() {
        assert!(matches!(compute_zeros(101), Err(Error::Capacity(_))));
        assert!(compute_zeros(0).is_err());
    }

    #[test]
    fn parse_examples() {
        let z = parse_zeros_str("14.134725\n21.022040\n25.010858\n").unwrap();
        assert_eq!(z.len(), 3);
        assert_eq!(z.source(), ZeroSource::File);
        let computed = compute_zeros(3).unwrap();
        for (a, b) in z.zeros().iter().zip(computed.zeros()) {
            assert!((a - b).abs() < 1e-6);
        }

        let z = parse_zeros_str("# header\n14.1\n\n21.0\n").unwrap();
        assert_eq!(z.zeros(), &[14.1, 21.0]);

        assert!(matches!(parse_zeros_str("21.0\n14.1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_zeros_str("1.0\nabc\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_zeros_str("# c\n-3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_zeros_str("5\n5\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_zeros_str("# only\n").is_err());
    }
}
