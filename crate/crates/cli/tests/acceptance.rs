use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use tempfile::TempDir;

use spectral_forge::classical::{integrate_flow, ActionTable, Extension, PhasePoint};
use spectral_forge::fockspace::{self, number_operator, TruncationBasis};
use spectral_forge::intertwiner::{certify_hamiltonian, COMMUTATOR_TOL};
use spectral_forge::levelstats::{
    ensemble_experiment, spacing_test, trial_rng, unfold, EnsembleConfig, LevelModel, SpacingModel, DEFAULT_DEGREE,
};
use spectral_forge::linalg::seeded_unitary;
use spectral_forge::pairing::{decode, encode, GradedLex};
use spectral_forge::schrodinger::{build_fd_hamiltonian, pipeline_integrate, GridSpec, PotentialSpec, DEFAULT_CAP};
use spectral_forge::zeta::compute_zeros;
use spectral_forge::{Exec, SpectrumSeq};

struct Check {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Check {
    Check { ok, detail: detail.into() }
}

fn combine(parts: Vec<Check>) -> Check {
    let ok = parts.iter().all(|c| c.ok);
    let detail = parts
        .iter()
        .map(|c| if c.ok { c.detail.clone() } else { format!("{} [failed]", c.detail) })
        .collect::<Vec<_>>()
        .join("; ");
    check(ok, detail)
}

fn bijection() -> Check {
    let mut bad = 0u64;
    for n in 1..=4 {
        for k in 0..1_000_000u64 {
            let idx = decode(k, n).unwrap();
            if encode(&idx).unwrap() != k {
                bad += 1;
            }
        }
    }
    let mut order_bad = 0usize;
    for n in 1..=4 {
        let mut prev: Option<(u64, Vec<u64>)> = None;
        let mut block = (0u64, 0u64);
        for (r, idx) in GradedLex::new(n).unwrap().take(100_000).enumerate() {
            let cur = (idx.entries().iter().sum::<u64>(), idx.entries().to_vec());
            if decode(r as u64, n).unwrap() != idx {
                order_bad += 1;
            }
            if prev.as_ref().is_some_and(|p| *p >= cur) {
                order_bad += 1;
            }
            // a finished degree block holds every index of that degree
            if cur.0 != block.0 {
                if block.1 != binomial(block.0 + n as u64 - 1, n as u64 - 1) {
                    order_bad += 1;
                }
                block = (cur.0, 0);
            }
            block.1 += 1;
            prev = Some(cur);
        }
    }
    combine(vec![
        check(bad == 0, format!("roundtrip mismatches {bad} of 4e6")),
        check(order_bad == 0, format!("order violations {order_bad} over 4 x 1e5")),
    ])
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

fn random_sequence(seed: u64, trial: u64, d: usize) -> Vec<f64> {
    let mut rng = trial_rng(seed, trial);
    if trial % 3 == 0 {
        // few distinct values, so multiplicities show up
        (0..d).map(|_| rng.random_range(0..7) as f64 * 0.25).collect()
    } else {
        (0..d).map(|_| rng.random_range(-50.0..50.0)).collect()
    }
}

fn exact_realization() -> Check {
    let mut failures = Vec::new();
    let dims = [10, 100, 500];
    for t in 0..100u64 {
        let d = dims[t as usize % 3];
        let n = 1 + (t as usize / 3) % 3;
        let seq = SpectrumSeq::new(random_sequence(2024, t, d)).unwrap();
        let basis = TruncationBasis::new(d, n).unwrap();
        let a = fockspace::synthesize(&seq, &basis).unwrap();
        let m = a.matrix();

        let mut diag: Vec<f64> = (0..d).map(|j| m[(j, j)].re).collect();
        diag.sort_by(f64::total_cmp);
        let mut want = seq.as_slice().to_vec();
        want.sort_by(f64::total_cmp);
        let mut off_zero = true;
        for j in 0..d {
            for k in 0..d {
                if (j != k && m[(j, k)].norm() != 0.0) || m[(j, k)].im != 0.0 {
                    off_zero = false;
                }
            }
        }
        if diag != want || !off_zero {
            failures.push(format!("trial {t}: multiset"));
        }
        // with N_i diagonal, [A, N_i]_{jk} = A_jk (N_i,kk − N_i,jj)
        for mode in 1..=n {
            let nums = number_operator(&basis, mode).unwrap().diagonal();
            let mut worst = 0.0f64;
            for j in 0..d {
                for k in 0..d {
                    let c = m[(j, k)] * (nums[k] - nums[j]);
                    worst = worst.max(c.norm());
                }
            }
            if worst != 0.0 {
                failures.push(format!("trial {t} mode {mode}: commutator {worst:e}"));
            }
        }
    }
    check(
        failures.is_empty(),
        format!("100 sequences, d in {{10,100,500}}, n in {{1,2,3}}, failures {failures:?}"),
    )
}

fn intertwiner_suite() -> Check {
    let dims = [20, 50, 100, 150, 200];
    let mut failures = Vec::new();
    let mut degenerate_trials = 0;
    let (mut worst_u, mut worst_res, mut worst_comm) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..50u64 {
        let d = dims[t as usize % 5];
        let n = 1 + (t as usize) % 3;
        let forced = t % 4 == 0;
        let mut rng = trial_rng(77, t);
        let values: Vec<f64> = if forced {
            (0..d).map(|_| rng.random_range(0..d / 4) as f64).collect()
        } else {
            (0..d).map(|_| rng.random_range(0.0..10.0)).collect()
        };
        let seq = SpectrumSeq::new(values).unwrap();
        let mut sorted = seq.as_slice().to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            degenerate_trials += 1;
        }
        let a = fockspace::synthesize(&seq, &TruncationBasis::new(d, n).unwrap()).unwrap();
        let h = a.conjugate_by(&seeded_unitary(d, 1000 + t)).unwrap();
        let cert = certify_hamiltonian(&h, n, Exec::default()).unwrap();
        let u_ok = cert.unitarity_defect <= 1e-9 * d as f64;
        let res_ok = cert.intertwining_residual <= 1e-8 * h.frobenius_norm();
        let comm_ok = cert.commutator_norm <= COMMUTATOR_TOL * cert.commutator_scale;
        worst_u = worst_u.max(cert.unitarity_defect / d as f64);
        worst_res = worst_res.max(cert.intertwining_residual / h.frobenius_norm());
        worst_comm = worst_comm.max(cert.commutator_norm / cert.commutator_scale);
        if !(u_ok && res_ok && comm_ok && cert.independence && cert.passes) {
            failures.push(t);
        }
    }
    combine(vec![
        check(failures.is_empty(), format!("50 trials, failing {failures:?}")),
        check(degenerate_trials >= 10, format!("{degenerate_trials} degenerate trials")),
        check(
            true,
            format!("max |U*U-I|/d {worst_u:.1e}, max residual/|H| {worst_res:.1e}, max commutator/scale {worst_comm:.1e}"),
        ),
    ])
}

fn poisson_statistics() -> Check {
    let uniform = ensemble_experiment(&EnsembleConfig::uniform(200, 1000, 1)).unwrap();
    let arithmetic = ensemble_experiment(&EnsembleConfig {
        level_model: LevelModel::Arithmetic,
        ..EnsembleConfig::uniform(200, 1000, 1)
    })
    .unwrap();
    let e_inv = (-1f64).exp();
    let ks = arithmetic.ks_quantiles.median;
    combine(vec![
        check(uniform.pass_rate >= 0.95, format!("uniform pass_rate {:.3}", uniform.pass_rate)),
        check(arithmetic.pass_rate <= 0.05, format!("arithmetic pass_rate {:.3}", arithmetic.pass_rate)),
        check((ks - e_inv).abs() <= 1e-3, format!("arithmetic ks {ks:.5} vs e^-1 {e_inv:.5}")),
    ])
}

fn zeta_contrast() -> Check {
    let zeros = compute_zeros(100).unwrap();
    let sample = unfold(&zeros.to_spectrum(), DEFAULT_DEGREE).unwrap();
    let gue = spacing_test(&sample, SpacingModel::Gue).unwrap().ks_distance;
    let poisson = spacing_test(&sample, SpacingModel::Poisson).unwrap().ks_distance;
    let first = zeros.zeros()[0];
    combine(vec![
        check(gue < poisson, format!("ks gue {gue:.4} < poisson {poisson:.4}")),
        check((first - 14.134725).abs() <= 1e-6, format!("first zero {first:.9}")),
    ])
}

fn harmonic(m: usize) -> Vec<f64> {
    let g = GridSpec::new(1, 10.0, m).unwrap();
    build_fd_hamiltonian(&g, &PotentialSpec::Harmonic, DEFAULT_CAP)
        .unwrap()
        .low_spectrum(4)
        .unwrap()
        .into_vec()
}

fn schrodinger_pipeline() -> Check {
    let (e200, e400, e800) = (harmonic(200), harmonic(400), harmonic(800));
    let err = |e: &[f64], k: usize| (e[k] - (2 * k + 1) as f64).abs();
    let worst = (0..4).map(|k| err(&e800, k)).fold(0.0, f64::max);
    let factor = (0..4)
        .flat_map(|k| [err(&e200, k) / err(&e400, k), err(&e400, k) / err(&e800, k)])
        .fold(f64::INFINITY, f64::min);

    let low = |m: usize| {
        let g = GridSpec::new(2, 8.0, m).unwrap();
        build_fd_hamiltonian(&g, &PotentialSpec::QuarticCross, 10_000)
            .unwrap()
            .low_spectrum(1)
            .unwrap()
            .as_slice()[0]
    };
    let (c, f) = (low(64), low(96));
    let rel = (c - f).abs() / f.abs();

    let one = pipeline_integrate(&GridSpec::new(1, 10.0, 400).unwrap(), &PotentialSpec::Harmonic, 1, 20, DEFAULT_CAP)
        .unwrap();
    let two = pipeline_integrate(&GridSpec::new(2, 8.0, 40).unwrap(), &PotentialSpec::QuarticCross, 2, 30, DEFAULT_CAP)
        .unwrap();
    combine(vec![
        check(worst < 1e-2, format!("M=800 max error {worst:.2e}")),
        check(factor >= 3.5, format!("min refinement factor {factor:.3}")),
        check(rel < 0.05, format!("2D ground {c:.5} (M=64) vs {f:.5} (M=96), rel {rel:.2e}")),
        check(one.passes && two.passes, format!("certificates 1D {} 2D {}", one.passes, two.passes)),
    ])
}

fn classical_witness() -> Check {
    let mut parts = Vec::new();
    let cases: [(usize, usize, Vec<f64>); 2] = [(1, 20, vec![5.3]), (2, 4, vec![1.3, 0.6])];
    for (n, cutoff, j0) in cases {
        let seq = SpectrumSeq::new((0..100).map(|k| 0.4 * k as f64 + 0.3 * (k as f64).sqrt()).collect()).unwrap();
        for kind in [Extension::Spline, Extension::Polynomial] {
            let table = ActionTable::new(&seq, n, cutoff, kind).unwrap();
            let z = PhasePoint::from_actions(&j0).unwrap();
            let a = integrate_flow(&table, &z, 100.0, 0.01, 1000).unwrap().report;
            let b = integrate_flow(&table, &z, 100.0, 0.005, 1000).unwrap().report;
            let ratio = a.max_action_drift / b.max_action_drift;
            parts.push(check(
                a.completed && b.completed && a.max_action_drift < 1e-6 && ratio >= 12.0,
                format!("n={n} {kind:?}: drift {:.2e}, halving ratio {ratio:.1}", a.max_action_drift),
            ));
        }
    }
    combine(parts)
}

fn run_cli(dir: &Path, args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_spectral-forge"))
        .current_dir(dir)
        .env_remove("SPECTRAL_FORGE_CAP")
        .arg("--no-timestamp")
        .args(args)
        .output()
        .unwrap();
    (out.status.code(), out.stdout)
}

fn determinism() -> Check {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let levels: String = (0..200).map(|k| format!("{}\n", (k as f64).powf(1.3) + (k % 7) as f64 * 0.01)).collect();
    std::fs::write(p.join("e.txt"), levels).unwrap();
    let runs: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        (
            "synthesize",
            vec!["synthesize", "--spectrum", "e.txt", "--dim", "60", "--modes", "2", "--conjugate-seed", "3", "--matrix-out", "h.json"],
            vec!["h.json"],
        ),
        ("verify", vec!["verify", "--matrix", "h.json", "--modes", "2"], vec![]),
        ("stats", vec!["stats", "--spectrum", "e.txt", "--histogram-out", "s.csv"], vec!["s.csv"]),
        ("stats ensemble", vec!["stats", "--trials", "16", "--levels", "300", "--seed", "5"], vec![]),
        ("zeta", vec!["zeta", "--compute", "60", "--histogram-out", "z.csv", "--synthesize-modes", "2"], vec!["z.csv"]),
        (
            "schrodinger",
            vec!["schrodinger", "--dimension", "2", "--points", "24", "--levels", "12", "--integrals", "2", "--spectrum-out", "q.txt"],
            vec!["q.txt"],
        ),
        (
            "classical",
            vec!["classical", "--spectrum", "e.txt", "--modes", "2", "--t-final", "5", "--trajectory-out", "t.csv"],
            vec!["t.csv"],
        ),
    ];
    let mut parts = Vec::new();
    for (name, args, files) in runs {
        let read = |f: &str| std::fs::read(p.join(f)).unwrap();
        let (c1, o1) = run_cli(p, &args);
        let f1: Vec<Vec<u8>> = files.iter().map(|f| read(f)).collect();
        let (c2, o2) = run_cli(p, &args);
        let f2: Vec<Vec<u8>> = files.iter().map(|f| read(f)).collect();
        parts.push(check(
            c1 == Some(0) && c1 == c2 && !o1.is_empty() && o1 == o2 && f1 == f2,
            format!("{name} exit {c1:?}"),
        ));
    }
    combine(parts)
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Check)> = vec![
        ("1 bijection", Duration::from_secs(5), bijection),
        ("2 exact realization", Duration::from_secs(30), exact_realization),
        ("3 intertwiner", Duration::from_secs(120), intertwiner_suite),
        ("4 poisson statistics", Duration::from_secs(60), poisson_statistics),
        ("5 zeta contrast", Duration::from_secs(60), zeta_contrast),
        ("6 schrodinger pipeline", Duration::from_secs(180), schrodinger_pipeline),
        ("7 classical witness", Duration::from_secs(60), classical_witness),
        ("8 determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let c = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let ok = c.ok && in_time;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {name}: {} ({}; {:.2}s of {}s)",
            if ok { "PASS" } else { "FAIL" },
            c.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {failed} failing");
    if failed > 0 {
        std::process::exit(1);
    }
}
