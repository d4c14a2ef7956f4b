//! Level-spacing statistics: unfolding, Kolmogorov–Smirnov tests against the
//! Poisson and GUE spacing laws, star discrepancy, and seeded Monte Carlo
//! ensembles of uniform spectra.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::spectra::SpectrumSeq;

/// Default degree of the unfolding polynomial.
pub const DEFAULT_DEGREE: usize = 3;
/// Pass iff `ks_distance < KS_THRESHOLD_COEFF / √N`.
pub const KS_THRESHOLD_COEFF: f64 = 1.95;
pub const MIN_SPACINGS: usize = 50;
pub const HISTOGRAM_BIN_WIDTH: f64 = 0.1;

/// Unfolded levels and their nearest-neighbour gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingSample {
    pub unfolded_levels: Vec<f64>,
    pub spacings: Vec<f64>,
}

impl SpacingSample {
    /// Wraps raw spacings; levels are their partial sums starting at 0.
    pub fn from_spacings(spacings: Vec<f64>) -> Result<Self> {
        if spacings.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("spacings must be finite and non-negative"));
        }
        let mut levels = Vec::with_capacity(spacings.len() + 1);
        let mut acc = 0.0;
        levels.push(acc);
        for s in &spacings {
            acc += s;
            levels.push(acc);
        }
        Ok(SpacingSample {
            unfolded_levels: levels,
            spacings,
        })
    }

    pub fn count(&self) -> usize {
        self.spacings.len()
    }

    pub fn mean_spacing(&self) -> f64 {
        self.spacings.iter().sum::<f64>() / self.spacings.len() as f64
    }
}

/// Evaluates `Σ c_k x^k` and its derivative.
fn poly_eval(c: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &ck in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + ck;
    }
    (p, dp)
}

/// Unfolds a spectrum to unit mean spacing.
///
/// The counting staircase `(k, E_(k))` is fitted by least squares with a
/// polynomial `E ≈ p(x)` in the rescaled index `x = 2k/(N−1) − 1`; each level
/// is then mapped to `p^{-1}(E_k)` and the result rescaled so the mean
/// spacing is exactly 1. Fitting `E` as a function of the index keeps
/// polynomial spectra exact (`E_k = k²` with degree 2 unfolds to unit
/// spacings) and makes the result invariant under affine maps of the input.
pub fn unfold(levels: &SpectrumSeq, degree: usize) -> Result<SpacingSample> {
    if !(1..=8).contains(&degree) {
        return Err(Error::invalid(format!("unfolding degree must be in 1..=8, got {degree}")));
    }
    let sorted = levels.sorted();
    let e = sorted.as_slice();
    let n = e.len();
    let distinct = 1 + e.windows(2).filter(|w| w[1] > w[0]).count();
    let needed = (degree + 2).max(10);
    if n == 0 || distinct < needed {
        return Err(Error::invalid(format!(
            "unfolding needs at least {needed} distinct levels, got {}",
            if n == 0 { 0 } else { distinct }
        )));
    }

    let (lo, hi) = (e[0], e[n - 1]);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let y: Vec<f64> = e.iter().map(|&v| (v - mid) / half).collect();
    let xs: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 / (n - 1) as f64 - 1.0).collect();

    let vander = DMatrix::from_fn(n, degree + 1, |r, c| xs[r].powi(c as i32));
    let svd = vander.svd(true, true);
    let coeffs = svd
        .solve(&DVector::from_column_slice(&y), 1e-14)
        .map_err(|e| Error::Numerical(format!("least-squares fit failed: {e}")))?;
    let c: Vec<f64> = coeffs.iter().copied().collect();

    // bracket the data range, then require the fit to be increasing on it
    const REACH: f64 = 1.5;
    const STEP: f64 = 1.0 / 64.0;
    const PROBES: usize = 4000;
    let (mut a, mut b) = (-1.0f64, 1.0f64);
    while poly_eval(&c, a).0 > y[0] && a > -REACH {
        a -= STEP;
    }
    while poly_eval(&c, b).0 < y[n - 1] && b < REACH {
        b += STEP;
    }
    let probes: Vec<f64> = (0..=PROBES)
        .map(|i| poly_eval(&c, a + (b - a) * i as f64 / PROBES as f64).0)
        .collect();
    let monotone = probes.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    if !monotone || probes[0] > y[0] || probes[PROBES] < y[n - 1] {
        return Err(Error::Numerical(format!(
            "unfolding polynomial of degree {degree} is not monotone over the level range; use a lower degree"
        )));
    }

    let mut eps = Vec::with_capacity(n);
    for &target in &y {
        let (mut lo, mut hi) = (a, b);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m <= lo || m >= hi {
                break;
            }
            if poly_eval(&c, m).0 < target {
                lo = m;
            } else {
                hi = m;
            }
        }
        eps.push(0.5 * (lo + hi));
    }
    for i in 1..n {
        if eps[i] < eps[i - 1] {
            eps[i] = eps[i - 1];
        }
    }
    let span = eps[n - 1] - eps[0];
    if !(span > 0.0) {
        return Err(Error::Numerical("unfolded levels collapsed to a point".into()));
    }
    let scale = (n - 1) as f64 / span;
    let first = eps[0];
    let unfolded: Vec<f64> = eps.iter().map(|&x| (x - first) * scale).collect();
    let spacings: Vec<f64> = unfolded.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SpacingSample {
        unfolded_levels: unfolded,
        spacings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpacingModel {
    /// `P(s) = e^{-s}`.
    Poisson,
    /// Wigner surmise for the unitary ensemble,
    /// `P(s) = (32/π²) s² exp(−4s²/π)`.
    Gue,
}

impl SpacingModel {
    pub fn pdf(self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match self {
            SpacingModel::Poisson => (-s).exp(),
            SpacingModel::Gue => 32.0 / (PI * PI) * s * s * (-4.0 * s * s / PI).exp(),
        }
    }

    pub fn cdf(self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            SpacingModel::Poisson => -(-s).exp_m1(),
            SpacingModel::Gue => {
                libm::erf(2.0 * s / PI.sqrt()) - 4.0 * s / PI * (-4.0 * s * s / PI).exp()
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpacingModel::Poisson => "poisson",
            SpacingModel::Gue => "gue",
        }
    }
}

/// Two-sided one-sample KS distance `sup_s |F_N(s) − F(s)|`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Fixed-width bins from 0 covering at least `[0, 4]` and every sample;
    /// the last bin is closed on the right.
    pub fn of_spacings(spacings: &[f64], width: f64) -> Histogram {
        let max = spacings.iter().copied().fold(0.0, f64::max).max(4.0);
        let bins = ((max / width).ceil() as usize).max(1);
        // i / 10 rather than i * 0.1, so edges print as short decimals
        let per_unit = (1.0 / width).round();
        let edge = |i: usize| {
            if (per_unit * width - 1.0).abs() < 1e-12 {
                i as f64 / per_unit
            } else {
                i as f64 * width
            }
        };
        let edges: Vec<f64> = (0..=bins).map(edge).collect();
        let mut counts = vec![0usize; bins];
        for &s in spacings {
            let b = ((s / width).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }

    /// `bin_left,bin_right,count` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.edges[i], self.edges[i + 1], c);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingTestReport {
    pub model: SpacingModel,
    pub ks_distance: f64,
    pub sample_size: usize,
    pub threshold: f64,
    pub passes: bool,
    pub mean_spacing: f64,
    pub histogram: Histogram,
}

pub fn spacing_test(sample: &SpacingSample, model: SpacingModel) -> Result<SpacingTestReport> {
    let n = sample.count();
    if n < MIN_SPACINGS {
        return Err(Error::invalid(format!(
            "spacing test needs at least {MIN_SPACINGS} spacings, got {n}"
        )));
    }
    let ks = ks_distance(&sample.spacings, |s| model.cdf(s)).clamp(0.0, 1.0);
    let threshold = KS_THRESHOLD_COEFF / (n as f64).sqrt();
    Ok(SpacingTestReport {
        model,
        ks_distance: ks,
        sample_size: n,
        threshold,
        passes: ks < threshold,
        mean_spacing: sample.mean_spacing(),
        histogram: Histogram::of_spacings(&sample.spacings, HISTOGRAM_BIN_WIDTH),
    })
}

/// Star discrepancy `D*_N = max_i max(i/N − x_(i), x_(i) − (i−1)/N)`.
pub fn discrepancy(points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::invalid("discrepancy needs at least one point"));
    }
    if let Some(p) = points.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("point {p} lies outside [0, 1]")));
    }
    let mut xs = points.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        acc.max((i + 1) as f64 / n - x).max(x - i as f64 / n)
    }))
}

/// How each ensemble trial draws its levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelModel {
    /// `N` i.i.d. uniform `[0, 1)` levels, the stand-in for a generic
    /// spectrum sequence.
    Uniform,
    /// The rigid grid `k/N`.
    Arithmetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub trials: usize,
    pub levels: usize,
    pub seed: u64,
    pub degree: usize,
    pub level_model: LevelModel,
}

impl EnsembleConfig {
    pub fn uniform(trials: usize, levels: usize, seed: u64) -> Self {
        EnsembleConfig {
            trials,
            levels,
            seed,
            degree: DEFAULT_DEGREE,
            level_model: LevelModel::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl Quantiles {
    fn of(values: &[f64]) -> Quantiles {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let (i, frac) = (pos.floor() as usize, pos.fract());
            if i + 1 < v.len() {
                v[i] + frac * (v[i + 1] - v[i])
            } else {
                v[i]
            }
        };
        Quantiles {
            min: v[0],
            q05: q(0.05),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub config: EnsembleConfig,
    pub rng: String,
    pub threshold_coefficient: f64,
    pub pass_rate: f64,
    pub mean_ks: f64,
    pub ks_quantiles: Quantiles,
    pub unfold_failures: usize,
    pub measure_note: String,
}

/// RNG for one trial: ChaCha8 keyed by `seed`, stream number `trial`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn run_trial(cfg: &EnsembleConfig, trial: usize) -> Option<f64> {
    let levels: Vec<f64> = match cfg.level_model {
        LevelModel::Uniform => {
            let mut rng = trial_rng(cfg.seed, trial as u64);
            (0..cfg.levels).map(|_| rng.random::<f64>()).collect()
        }
        LevelModel::Arithmetic => (0..cfg.levels)
            .map(|k| k as f64 / cfg.levels as f64)
            .collect(),
    };
    let seq = SpectrumSeq::new(levels).ok()?;
    let sample = unfold(&seq, cfg.degree).ok()?;
    spacing_test(&sample, SpacingModel::Poisson)
        .ok()
        .map(|r| r.ks_distance)
}

pub fn ensemble_experiment(cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    ensemble_experiment_with(cfg, Exec::default())
}

/// Runs `cfg.trials` independent Poisson spacing tests. The summary is a
/// pure function of `cfg`, whatever the execution policy.
pub fn ensemble_experiment_with(cfg: &EnsembleConfig, exec: Exec) -> Result<EnsembleSummary> {
    if cfg.trials == 0 {
        return Err(Error::invalid("ensemble needs at least one trial"));
    }
    if cfg.levels < MIN_SPACINGS + 1 {
        return Err(Error::invalid(format!(
            "ensemble needs at least {} levels per trial",
            MIN_SPACINGS + 1
        )));
    }
    let results = exec.map_range(cfg.trials, |t| run_trial(cfg, t));
    let unfold_failures = results.iter().filter(|r| r.is_none()).count();
    // a trial that cannot be unfolded counts as a maximal-distance failure
    let ks: Vec<f64> = results.iter().map(|r| r.unwrap_or(1.0)).collect();
    let threshold = KS_THRESHOLD_COEFF / ((cfg.levels - 1) as f64).sqrt();
    let passes = ks.iter().filter(|&&d| d < threshold).count();
    Ok(EnsembleSummary {
        config: cfg.clone(),
        rng: "ChaCha8, seed_from_u64(seed), stream = trial index".into(),
        threshold_coefficient: KS_THRESHOLD_COEFF,
        pass_rate: passes as f64 / cfg.trials as f64,
        mean_ks: ks.iter().sum::<f64>() / ks.len() as f64,
        ks_quantiles: Quantiles::of(&ks),
        unfold_failures,
        measure_note: "levels drawn i.i.d. uniform on [0,1) as a concrete stand-in for generic sequences".into(),
    })
}
