//! Flags, config-file sections and their resolution. Each subcommand has one
//! options struct that is both a clap argument group and a TOML table; the
//! resolved value (flags over file over defaults) is echoed in reports.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use spectral_forge::spectra::ClosedSetSpec;
use spectral_forge::{Error, Result};

pub const CAP_ENV: &str = "SPECTRAL_FORGE_CAP";
pub const DEFAULT_CAP: usize = 4096;
/// Smallest grid accepted on the command line.
pub const MIN_GRID_POINTS: usize = 16;

#[derive(Debug, Parser)]
#[command(name = "spectral-forge", version, about = "Integrable Hamiltonians with prescribed spectra, at finite truncation")]
pub struct Cli {
    /// TOML file with one optional table per subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Leave the generation time out of the report.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the diagonal operator A realizing a spectrum on n modes.
    Synthesize(SynthesizeOpts),
    /// Certify integrability of a Hermitian matrix.
    Verify(VerifyOpts),
    /// Spacing statistics of a spectrum, or a seeded Poisson ensemble.
    Stats(StatsOpts),
    /// Riemann zeta zeros: ingestion or computation, then spacing tests.
    Zeta(ZetaOpts),
    /// Finite-difference spectra of −Δ + V.
    Schrodinger(SchrodingerOpts),
    /// Classical action-variable flow built from a spectrum.
    Classical(ClassicalOpts),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synthesize(_) => "synthesize",
            Command::Verify(_) => "verify",
            Command::Stats(_) => "stats",
            Command::Zeta(_) => "zeta",
            Command::Schrodinger(_) => "schrodinger",
            Command::Classical(_) => "classical",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub synthesize: Option<SynthesizeOpts>,
    pub verify: Option<VerifyOpts>,
    pub stats: Option<StatsOpts>,
    pub zeta: Option<ZetaOpts>,
    pub schrodinger: Option<SchrodingerOpts>,
    pub classical: Option<ClassicalOpts>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("config {}: {}", path.display(), e.message())))
    }
}

/// Matrix-dimension cap from `SPECTRAL_FORGE_CAP`.
pub fn cap_from_env() -> Result<usize> {
    match std::env::var(CAP_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(c) if c > 0 => Ok(c),
            _ => Err(Error::InvalidInput(format!("{CAP_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(DEFAULT_CAP),
    }
}

fn positive(name: &str, v: Option<usize>) -> Result<()> {
    match v {
        Some(0) => Err(Error::InvalidInput(format!("{name} must be positive"))),
        _ => Ok(()),
    }
}

fn positive_f(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::InvalidInput(format!("{name} must be positive and finite"))),
        _ => Ok(()),
    }
}

fn within_cap(name: &str, v: Option<usize>, cap: usize) -> Result<()> {
    match v {
        Some(x) if x > cap => Err(Error::Capacity(format!("{name} = {x} exceeds the cap of {cap} (set {CAP_ENV} to raise it)"))),
        _ => Ok(()),
    }
}

fn parse_closed_set(s: &str) -> std::result::Result<ClosedSetSpec, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

/// Fills every `None` in `self` from `file`, then from `defaults`.
macro_rules! merge {
    ($self:ident, $file:ident, $defaults:ident; $($field:ident),*) => {{
        let file = $file.unwrap_or_default();
        $( $self.$field = $self.$field.or(file.$field).or($defaults.$field); )*
        $self
    }};
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeOpts {
    /// Spectrum file (one energy per line, or a JSON array).
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Closed set as JSON, e.g. '{"kind":"cantor"}'; a dense subset is used.
    #[arg(long, value_parser = parse_closed_set)]
    pub closed_set: Option<ClosedSetSpec>,
    /// Truncation dimension d (defaults to the spectrum length, or 64 for a closed set).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of modes n.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Emit Q A Q† with a seeded Haar-random Q instead of A.
    #[arg(long)]
    pub conjugate_seed: Option<u64>,
    /// Write the matrix JSON here instead of embedding it in the report.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
    #[arg(skip)]
    pub cap: Option<usize>,
}

impl SynthesizeOpts {
    pub fn resolve(mut self, file: Option<Self>, cap: usize) -> Result<Self> {
        let defaults = SynthesizeOpts {
            modes: Some(1),
            ..Default::default()
        };
        let mut r = merge!(self, file, defaults; spectrum, closed_set, dim, modes, conjugate_seed, matrix_out);
        r.cap = Some(cap);
        match (&r.spectrum, &r.closed_set) {
            (None, None) => return Err(Error::InvalidInput("synthesize needs --spectrum or --closed-set".into())),
            (Some(_), Some(_)) => return Err(Error::InvalidInput("give either --spectrum or --closed-set, not both".into())),
            (None, Some(spec)) => {
                spec.validate()?;
                r.dim = r.dim.or(Some(64));
            }
            _ => {}
        }
        positive("dim", r.dim)?;
        positive("modes", r.modes)?;
        within_cap("dim", r.dim, cap)?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOpts {
    /// Hermitian matrix as JSON {dim, re, im}.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Number of first integrals n.
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(skip)]
    pub cap: Option<usize>,
}

impl VerifyOpts {
    pub fn resolve(mut self, file: Option<Self>, cap: usize) -> Result<Self> {
        let defaults = VerifyOpts {
            modes: Some(1),
            ..Default::default()
        };
        let mut r = merge!(self, file, defaults; matrix, modes);
        r.cap = Some(cap);
        if r.matrix.is_none() {
            return Err(Error::InvalidInput("verify needs --matrix".into()));
        }
        positive("modes", r.modes)?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Poisson,
    Gue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelModelArg {
    Uniform,
    Arithmetic,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsOpts {
    /// Spectrum file to test.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Reference spacing law.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Degree of the unfolding polynomial.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Histogram CSV destination.
    #[arg(long)]
    pub histogram_out: Option<PathBuf>,
    /// Run a seeded ensemble of this many trials instead of reading a spectrum.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Levels per ensemble trial.
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub level_model: Option<LevelModelArg>,
}

impl StatsOpts {
    pub fn resolve(mut self, file: Option<Self>) -> Result<Self> {
        let defaults = StatsOpts {
            model: Some(ModelArg::Poisson),
            degree: Some(spectral_forge::levelstats::DEFAULT_DEGREE),
            ..Default::default()
        };
        let mut r = merge!(self, file, defaults; spectrum, model, degree, histogram_out, trials, levels, seed, level_model);
        match (&r.spectrum, r.trials) {
            (None, None) => return Err(Error::InvalidInput("stats needs --spectrum or --trials".into())),
            (Some(_), Some(_)) => return Err(Error::InvalidInput("give either --spectrum or --trials, not both".into())),
            (None, Some(_)) => {
                r.levels = r.levels.or(Some(1000));
                r.seed = r.seed.or(Some(0));
                r.level_model = r.level_model.or(Some(LevelModelArg::Uniform));
            }
            _ => {}
        }
        positive("degree", r.degree)?;
        positive("trials", r.trials)?;
        positive("levels", r.levels)?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaOpts {
    /// Table of zeros, one ordinate per line.
    #[arg(long)]
    pub zeros: Option<PathBuf>,
    /// Compute this many zeros (at most 100).
    #[arg(long)]
    pub compute: Option<usize>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub histogram_out: Option<PathBuf>,
    /// Also synthesize the integrable operator realizing the zeros on n modes.
    #[arg(long)]
    pub synthesize_modes: Option<usize>,
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
    #[arg(skip)]
    pub cap: Option<usize>,
}

impl ZetaOpts {
    pub fn resolve(mut self, file: Option<Self>, cap: usize) -> Result<Self> {
        let defaults = ZetaOpts {
            degree: Some(spectral_forge::levelstats::DEFAULT_DEGREE),
            ..Default::default()
        };
        let mut r = merge!(self, file, defaults; zeros, compute, degree, histogram_out, synthesize_modes, matrix_out);
        r.cap = Some(cap);
        match (&r.zeros, r.compute) {
            (Some(_), Some(_)) => return Err(Error::InvalidInput("give either --zeros or --compute, not both".into())),
            (None, None) => r.compute = Some(spectral_forge::zeta::MAX_COMPUTED),
            _ => {}
        }
        positive("compute", r.compute)?;
        positive("degree", r.degree)?;
        positive("synthesize_modes", r.synthesize_modes)?;
        if let Some(m) = r.compute {
            if m > spectral_forge::zeta::MAX_COMPUTED {
                return Err(Error::Capacity(format!(
                    "at most {} zeros can be computed; pass --zeros with a published table",
                    spectral_forge::zeta::MAX_COMPUTED
                )));
            }
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialArg {
    Harmonic,
    QuarticCross,
    Table,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchrodingerOpts {
    /// Spatial dimension, 1 or 2.
    #[arg(long)]
    pub dimension: Option<usize>,
    /// Box half-width L.
    #[arg(long)]
    pub half_width: Option<f64>,
    /// Interior grid points per axis M.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub potential: Option<PotentialArg>,
    /// CSV of x[,y],V values at the grid nodes, for --potential table.
    #[arg(long)]
    pub potential_table: Option<PathBuf>,
    /// Number of low levels m.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Also certify n first integrals on the lowest m levels.
    #[arg(long)]
    pub integrals: Option<usize>,
    /// Spectrum text destination.
    #[arg(long)]
    pub spectrum_out: Option<PathBuf>,
    #[arg(skip)]
    pub cap: Option<usize>,
}

impl SchrodingerOpts {
    pub fn resolve(mut self, file: Option<Self>, cap: usize) -> Result<Self> {
        let defaults = SchrodingerOpts {
            dimension: Some(1),
            half_width: Some(10.0),
            points: Some(400),
            potential: Some(PotentialArg::Harmonic),
            levels: Some(10),
            ..Default::default()
        };
        let mut r = merge!(self, file, defaults; dimension, half_width, points, potential, potential_table, levels, integrals, spectrum_out);
        r.cap = Some(cap);
        if !matches!(r.dimension, Some(1 | 2)) {
            return Err(Error::InvalidInput("dimension must be 1 or 2".into()));
        }
        positive_f("half_width", r.half_width)?;
        if r.points.is_some_and(|m| m < MIN_GRID_POINTS) {
            return Err(Error::InvalidInput(format!("points must be at least {MIN_GRID_POINTS}")));
        }
        match (r.potential, &r.potential_table) {
            (Some(PotentialArg::Table), None) => return Err(Error::InvalidInput("--potential table needs --potential-table".into())),
            (Some(PotentialArg::Harmonic | PotentialArg::QuarticCross), Some(_)) => {
                return Err(Error::InvalidInput("--potential-table requires --potential table".into()))
            }
            _ => {}
        }
        positive("levels", r.levels)?;
        positive("integrals", r.integrals)?;
        within_cap("levels", r.levels, cap)?;
        let nodes = r
            .points
            .and_then(|m| m.checked_pow(r.dimension.unwrap_or(1) as u32))
            .unwrap_or(usize::MAX);
        within_cap("grid nodes", Some(nodes), cap)?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionArg {
    Spline,
    Polynomial,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalOpts {
    /// Spectrum file providing E_{φ(I)}.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    #[arg(long)]
    pub modes: Option<usize>,
    /// Nodes per action axis K (defaults to the largest box the spectrum fills).
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long, value_enum)]
    pub extension: Option<ExtensionArg>,
    /// Initial actions J, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub actions: Option<Vec<f64>>,
    /// Integration time T.
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Time step (defaults to 10⁻² over the largest frequency).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Keep every k-th step in the trajectory.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Trajectory CSV destination.
    #[arg(long)]
    pub trajectory_out: Option<PathBuf>,
}

impl ClassicalOpts {
    pub fn resolve(mut self, file: Option<Self>) -> Result<Self> {
        let defaults = ClassicalOpts {
            modes: Some(1),
            extension: Some(ExtensionArg::Spline),
            t_final: Some(100.0),
            stride: Some(10),
            ..Default::default()
        };
        let r = merge!(self, file, defaults; spectrum, modes, cutoff, extension, actions, t_final, dt, stride, trajectory_out);
        if r.spectrum.is_none() {
            return Err(Error::InvalidInput("classical needs --spectrum".into()));
        }
        positive("modes", r.modes)?;
        positive("stride", r.stride)?;
        positive_f("t_final", r.t_final)?;
        positive_f("dt", r.dt)?;
        if r.cutoff.is_some_and(|k| k < 2) {
            return Err(Error::InvalidInput("cutoff must be at least 2".into()));
        }
        if let (Some(a), Some(n)) = (&r.actions, r.modes) {
            if a.len() != n {
                return Err(Error::InvalidInput(format!("{} initial actions given for {n} modes", a.len())));
            }
        }
        Ok(r)
    }
}
