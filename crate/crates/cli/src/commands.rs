use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use spectral_forge::classical::{integrate_flow, ActionTable, Extension, PhasePoint};
use spectral_forge::fockspace::{self, TruncationBasis};
use spectral_forge::intertwiner::certify_hamiltonian;
use spectral_forge::levelstats::{
    discrepancy, ensemble_experiment, spacing_test, unfold, EnsembleConfig, LevelModel, SpacingModel,
};
use spectral_forge::linalg::{eigendecompose, seeded_unitary};
use spectral_forge::schrodinger::{build_fd_hamiltonian, GridSpec, PotentialSpec};
use spectral_forge::spectra::{completely_isospectral, default_tolerance, dense_subset};
use spectral_forge::zeta::{compute_zeros, parse_zeros_str};
use spectral_forge::{Error, Exec, HermitianMatrix, Result, SpectrumSeq};

use crate::opts::*;

/// What a subcommand hands back for the report envelope.
pub struct Outcome {
    pub config: Value,
    pub result: Value,
    /// False only when a verification step failed.
    pub passed: bool,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot write {}: {e}", path.display()))))
}

fn check_cap(what: &str, n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::Capacity(format!(
            "{what} {n} exceeds the cap of {cap} (set {CAP_ENV} to raise it)"
        )));
    }
    Ok(())
}

/// Writes the matrix to `path`, or returns it for embedding.
fn emit_matrix(m: &HermitianMatrix, path: Option<&Path>) -> Result<Value> {
    match path {
        Some(p) => {
            write_file(p, &m.to_json())?;
            Ok(json!({ "matrix_path": p }))
        }
        None => Ok(json!({ "matrix": m.to_json_value() })),
    }
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

pub fn synthesize(opts: SynthesizeOpts) -> Result<Outcome> {
    let cap = opts.cap.unwrap_or(DEFAULT_CAP);
    let modes = opts.modes.unwrap_or(1);
    let (seq, source) = match (&opts.spectrum, &opts.closed_set) {
        (Some(path), _) => (SpectrumSeq::parse(&read_file(path)?)?, "file"),
        (None, Some(spec)) => (dense_subset(spec, opts.dim.unwrap_or(64))?, "closed_set"),
        (None, None) => return Err(Error::InvalidInput("no spectrum source".into())),
    };
    let d = opts.dim.unwrap_or(seq.len());
    check_cap("dimension", d, cap)?;
    let prefix = seq.prefix(d)?;
    let basis = TruncationBasis::new(d, modes)?;
    let a = fockspace::synthesize(&prefix, &basis)?;
    let target = prefix.sorted();
    let exact = eigendecompose(&a)?.values == target;

    let (out, tol) = match opts.conjugate_seed {
        Some(seed) => (a.conjugate_by(&seeded_unitary(d, seed))?, default_tolerance(&target, &target)),
        None => (a.clone(), 0.0),
    };
    let iso = completely_isospectral(&eigendecompose(&out)?.values, &target, tol)?;
    let result = merge(
        json!({
            "source": source,
            "dim": d,
            "modes": modes,
            "conjugated": opts.conjugate_seed.is_some(),
            "exact_multiset": exact,
            "isospectral": iso,
            "hermiticity_defect": out.hermiticity_defect(),
        }),
        emit_matrix(&out, opts.matrix_out.as_deref())?,
    );
    Ok(Outcome {
        config: to_value(&SynthesizeOpts { dim: Some(d), ..opts })?,
        result,
        passed: true,
    })
}

pub fn verify(opts: VerifyOpts) -> Result<Outcome> {
    let cap = opts.cap.unwrap_or(DEFAULT_CAP);
    let path = opts.matrix.as_deref().ok_or_else(|| Error::InvalidInput("no matrix".into()))?;
    let h = HermitianMatrix::from_json(&read_file(path)?)?;
    check_cap("matrix dimension", h.dim(), cap)?;
    let cert = certify_hamiltonian(&h, opts.modes.unwrap_or(1), Exec::default())?;
    Ok(Outcome {
        config: to_value(&opts)?,
        result: to_value(&cert)?,
        passed: cert.passes,
    })
}

fn model(m: ModelArg) -> SpacingModel {
    match m {
        ModelArg::Poisson => SpacingModel::Poisson,
        ModelArg::Gue => SpacingModel::Gue,
    }
}

pub fn stats(opts: StatsOpts) -> Result<Outcome> {
    let degree = opts.degree.unwrap_or(spectral_forge::levelstats::DEFAULT_DEGREE);
    let result = if let Some(path) = &opts.spectrum {
        let seq = SpectrumSeq::parse(&read_file(path)?)?;
        let sample = unfold(&seq, degree)?;
        let report = spacing_test(&sample, model(opts.model.unwrap_or(ModelArg::Poisson)))?;
        if let Some(out) = &opts.histogram_out {
            write_file(out, &report.histogram.to_csv())?;
        }
        let (lo, hi) = seq
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        let scaled: Vec<f64> = seq.as_slice().iter().map(|x| (x - lo) / (hi - lo)).collect();
        json!({
            "levels": seq.len(),
            "spacing_test": report,
            "discrepancy_of_rescaled_levels": if hi > lo { Some(discrepancy(&scaled)?) } else { None },
        })
    } else {
        let cfg = EnsembleConfig {
            trials: opts.trials.unwrap_or(1),
            levels: opts.levels.unwrap_or(1000),
            seed: opts.seed.unwrap_or(0),
            degree,
            level_model: match opts.level_model.unwrap_or(LevelModelArg::Uniform) {
                LevelModelArg::Uniform => LevelModel::Uniform,
                LevelModelArg::Arithmetic => LevelModel::Arithmetic,
            },
        };
        json!({ "ensemble": ensemble_experiment(&cfg)? })
    };
    Ok(Outcome {
        config: to_value(&opts)?,
        result,
        passed: true,
    })
}

pub fn zeta(opts: ZetaOpts) -> Result<Outcome> {
    let cap = opts.cap.unwrap_or(DEFAULT_CAP);
    let set = match (&opts.zeros, opts.compute) {
        (Some(path), _) => parse_zeros_str(&read_file(path)?)?,
        (None, m) => compute_zeros(m.unwrap_or(spectral_forge::zeta::MAX_COMPUTED))?,
    };
    let spectrum = set.to_spectrum();
    let sample = unfold(&spectrum, opts.degree.unwrap_or(spectral_forge::levelstats::DEFAULT_DEGREE))?;
    let poisson = spacing_test(&sample, SpacingModel::Poisson)?;
    let gue = spacing_test(&sample, SpacingModel::Gue)?;
    if let Some(out) = &opts.histogram_out {
        write_file(out, &gue.histogram.to_csv())?;
    }
    let mut result = json!({
        "source": set.source(),
        "count": set.len(),
        "zeros": set.zeros(),
        "poisson": poisson,
        "gue": gue,
        "gue_fits_better": gue.ks_distance < poisson.ks_distance,
    });
    if let Some(modes) = opts.synthesize_modes {
        check_cap("dimension", set.len(), cap)?;
        let basis = TruncationBasis::new(set.len(), modes)?;
        let a = fockspace::synthesize(&spectrum, &basis)?;
        let iso = completely_isospectral(&eigendecompose(&a)?.values, &spectrum, 0.0)?;
        let synthesis = merge(
            json!({ "modes": modes, "dim": set.len(), "isospectral": iso }),
            emit_matrix(&a, opts.matrix_out.as_deref())?,
        );
        result = merge(result, json!({ "synthesis": synthesis }));
    }
    Ok(Outcome {
        config: to_value(&opts)?,
        result,
        passed: true,
    })
}

pub fn schrodinger(opts: SchrodingerOpts) -> Result<Outcome> {
    let cap = opts.cap.unwrap_or(DEFAULT_CAP);
    let grid = GridSpec::new(
        opts.dimension.unwrap_or(1),
        opts.half_width.unwrap_or(10.0),
        opts.points.unwrap_or(400),
    )?;
    let pot = match opts.potential.unwrap_or(PotentialArg::Harmonic) {
        PotentialArg::Harmonic => PotentialSpec::Harmonic,
        PotentialArg::QuarticCross => PotentialSpec::QuarticCross,
        PotentialArg::Table => {
            let path = opts
                .potential_table
                .as_deref()
                .ok_or_else(|| Error::InvalidInput("no potential table".into()))?;
            PotentialSpec::table_from_csv(&read_file(path)?, &grid)?
        }
    };
    let h = build_fd_hamiltonian(&grid, &pot, cap)?;
    let levels = h.low_spectrum(opts.levels.unwrap_or(10))?;
    if let Some(out) = &opts.spectrum_out {
        write_file(out, &levels.to_text())?;
    }
    let mut result = json!({
        "grid": grid,
        "spacing": grid.spacing(),
        "potential_min": h.potential_min(),
        "levels": levels,
    });
    let mut passed = true;
    if let Some(n) = opts.integrals {
        let projected = HermitianMatrix::from_real_diagonal(levels.as_slice())?;
        let cert = certify_hamiltonian(&projected, n, Exec::default())?;
        passed = cert.passes;
        result = merge(result, json!({ "certificate": cert }));
    }
    Ok(Outcome {
        config: to_value(&opts)?,
        result,
        passed,
    })
}

pub fn classical(opts: ClassicalOpts) -> Result<Outcome> {
    let path = opts.spectrum.as_deref().ok_or_else(|| Error::InvalidInput("no spectrum".into()))?;
    let seq = SpectrumSeq::parse(&read_file(path)?)?;
    let n = opts.modes.unwrap_or(1);
    let kind = match opts.extension.unwrap_or(ExtensionArg::Spline) {
        ExtensionArg::Spline => Extension::Spline,
        ExtensionArg::Polynomial => Extension::Polynomial,
    };
    let table = match opts.cutoff {
        Some(k) => ActionTable::new(&seq, n, k, kind)?,
        None => ActionTable::largest(&seq, n, kind)?,
    };
    let actions = opts
        .actions
        .clone()
        .unwrap_or_else(|| vec![table.action_max() / 2.0; n]);
    let z0 = PhasePoint::from_actions(&actions)?;
    let dt = opts.dt.unwrap_or_else(|| table.default_dt());
    let t_final = opts.t_final.unwrap_or(100.0);
    let flow = integrate_flow(&table, &z0, t_final, dt, opts.stride.unwrap_or(10))?;
    if let Some(out) = &opts.trajectory_out {
        write_file(out, &flow.to_csv())?;
    }
    let result = json!({
        "cutoff": table.cutoff(),
        "initial": { "x": z0.x, "p": z0.p, "actions": actions, "energy": table.eval(&actions)? },
        "flow": flow.report,
        "samples": flow.trajectory.len(),
    });
    let config = ClassicalOpts {
        cutoff: Some(table.cutoff()),
        actions: Some(actions),
        dt: Some(dt),
        ..opts
    };
    Ok(Outcome {
        config: to_value(&config)?,
        result,
        passed: true,
    })
}
