use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spectral-forge"));
    c.env_remove("SPECTRAL_FORGE_CAP");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).arg("--no-timestamp").args(args).output().unwrap()
}

fn report(out: &Output) -> Value {
    assert!(
        out.status.success() || out.status.code() == Some(1),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "{text}");
    serde_json::from_str(lines[0]).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn lines(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| format!("{v}\n")).collect()
}

#[test]
fn synthesize_then_verify_conjugated_100() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "e.txt", &lines((0..100).map(|k| (k % 13) as f64 * 0.7 + (k / 13) as f64)));
    let out = run(
        dir.path(),
        &["synthesize", "--spectrum", "e.txt", "--modes", "2", "--conjugate-seed", "9", "--matrix-out", "h.json"],
    );
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "synthesize");
    assert_eq!(r["result"]["exact_multiset"], true);
    assert_eq!(r["result"]["isospectral"]["isospectral"], true);
    assert_eq!(r["config"]["conjugate_seed"], 9);

    let out = run(dir.path(), &["verify", "--matrix", "h.json", "--modes", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["passed"], true);
    assert!(r["result"]["max_commutator_integrals"].as_f64().unwrap() < 1e-8);
    assert!(r["result"]["max_commutator_hamiltonian"].as_f64().unwrap() < 1e-8);
    assert_eq!(r["result"]["independence"], true);
}

#[test]
fn synthesize_embeds_matrix_and_accepts_closed_sets() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["synthesize", "--closed-set", r#"{"kind":"cantor"}"#, "--dim", "8", "--modes", "3"]);
    let r = report(&out);
    assert_eq!(r["result"]["source"], "closed_set");
    assert_eq!(r["result"]["matrix"]["dim"], 8);
    assert_eq!(r["result"]["matrix"]["re"].as_array().unwrap().len(), 64);
    assert_eq!(r["config"]["dim"], 8);
}

#[test]
fn verify_rejects_non_hermitian_input() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "m.json", r#"{"dim":2,"re":[1,2,0,1],"im":[0,0,0,0]}"#);
    let out = run(dir.path(), &["verify", "--matrix", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"]["kind"], "input");
}

#[test]
fn stats_on_arithmetic_spectrum_fails_poisson() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.txt", &lines((1..=300).map(f64::from)));
    let out = run(dir.path(), &["stats", "--spectrum", "a.txt", "--histogram-out", "h.csv"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let t = &r["result"]["spacing_test"];
    assert_eq!(t["passes"], false);
    // step CDF at s = 1 against 1 − e^{−s}: the left limit gives 1 − e⁻¹
    let want = 1.0 - (-1f64).exp();
    assert!((t["ks_distance"].as_f64().unwrap() - want).abs() < 1e-9);
    let csv = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert!(csv.starts_with("bin_left,bin_right,count\n0,0.1,0\n"));
    let total: u64 = csv.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 299);
}

#[test]
fn stats_ensemble_mode() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["stats", "--trials", "20", "--levels", "400", "--seed", "42"]);
    let r = report(&out);
    let e = &r["result"]["ensemble"];
    assert!(e["pass_rate"].as_f64().unwrap() >= 0.9);
    assert_eq!(e["config"]["seed"], 42);
}

#[test]
fn zeta_compute_prefers_gue() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["zeta", "--compute", "60", "--synthesize-modes", "2", "--matrix-out", "z.json"]);
    let r = report(&out);
    let res = &r["result"];
    assert_eq!(res["source"], "computed");
    assert_eq!(res["count"], 60);
    assert!(res["gue"]["ks_distance"].as_f64().unwrap() < res["poisson"]["ks_distance"].as_f64().unwrap());
    assert_eq!(res["synthesis"]["isospectral"]["isospectral"], true);
    assert!(dir.path().join("z.json").exists());
}

#[test]
fn zeta_file_errors_carry_line_numbers() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "z.txt", "# zeros\n21.0\n14.1\n");
    let out = run(dir.path(), &["zeta", "--zeros", "z.txt"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = error_line(&out)["error"]["message"].as_str().unwrap().to_string();
    assert!(msg.contains("line 3"), "{msg}");
}

#[test]
fn zeta_count_above_limit_is_a_capacity_error() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["zeta", "--compute", "101"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn schrodinger_levels_and_certificate() {
    let dir = TempDir::new().unwrap();
    let out = run(
        dir.path(),
        &["schrodinger", "--points", "400", "--levels", "20", "--integrals", "1", "--spectrum-out", "s.txt"],
    );
    let r = report(&out);
    assert_eq!(r["passed"], true);
    let levels = r["result"]["levels"].as_array().unwrap();
    assert!((levels[0].as_f64().unwrap() - 1.0).abs() < 1e-2);
    let text = std::fs::read_to_string(dir.path().join("s.txt")).unwrap();
    assert_eq!(text.lines().count(), 20);
}

#[test]
fn schrodinger_potential_table() {
    let dir = TempDir::new().unwrap();
    let (l, m) = (10.0f64, 64usize);
    let h = 2.0 * l / (m + 1) as f64;
    let csv: String = (0..m)
        .map(|j| {
            let x = -l + (j + 1) as f64 * h;
            format!("{x},{}\n", x * x)
        })
        .collect();
    write(dir.path(), "v.csv", &format!("x,V\n{csv}"));
    let table = report(&run(
        dir.path(),
        &["schrodinger", "--points", "64", "--potential", "table", "--potential-table", "v.csv", "--levels", "3"],
    ));
    let harmonic = report(&run(dir.path(), &["schrodinger", "--points", "64", "--levels", "3"]));
    assert_eq!(table["result"]["levels"], harmonic["result"]["levels"]);
}

#[test]
fn cap_env_var_controls_grid_size() {
    let dir = TempDir::new().unwrap();
    let args = ["--no-timestamp", "schrodinger", "--dimension", "2", "--points", "65", "--levels", "1"];
    let out = bin().current_dir(dir.path()).args(args).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_line(&out)["error"]["kind"], "capacity");
    let out = bin()
        .current_dir(dir.path())
        .env("SPECTRAL_FORGE_CAP", "5000")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["config"]["cap"], 5000);

    let out = bin()
        .current_dir(dir.path())
        .env("SPECTRAL_FORGE_CAP", "lots")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synthesize_dimension_over_cap() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "e.txt", &lines((0..20).map(f64::from)));
    let out = bin()
        .current_dir(dir.path())
        .env("SPECTRAL_FORGE_CAP", "10")
        .args(["synthesize", "--spectrum", "e.txt"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn classical_trajectory_csv() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "e.txt", &lines((0..30).map(|k| 0.5 * k as f64 + 0.2 * (k as f64).sqrt())));
    let out = run(
        dir.path(),
        &["classical", "--spectrum", "e.txt", "--modes", "2", "--cutoff", "3", "--actions", "0.5,1.0", "--t-final", "10", "--dt", "0.01", "--trajectory-out", "t.csv"],
    );
    let r = report(&out);
    let flow = &r["result"]["flow"];
    assert_eq!(flow["completed"], true);
    assert!(flow["max_action_drift"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["config"]["actions"], serde_json::json!([0.5, 1.0]));
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,x1,x2,p1,p2,J1,J2,energy");
    assert_eq!(csv.lines().count(), 1 + 1 + 100);
}

#[test]
fn config_file_precedence_and_unknown_keys() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.txt", &lines((1..=120).map(|k| (k as f64).powf(1.5))));
    write(dir.path(), "c.toml", "[stats]\nspectrum = \"a.txt\"\nmodel = \"gue\"\ndegree = 2\n");
    let r = report(&run(dir.path(), &["--config", "c.toml", "stats"]));
    assert_eq!(r["config"]["model"], "gue");
    assert_eq!(r["config"]["degree"], 2);
    let r = report(&run(dir.path(), &["--config", "c.toml", "stats", "--model", "poisson"]));
    assert_eq!(r["config"]["model"], "poisson");
    assert_eq!(r["config"]["degree"], 2);

    write(dir.path(), "bad.toml", "[stats]\nspectrum = \"a.txt\"\nmodle = \"gue\"\n");
    let out = run(dir.path(), &["--config", "bad.toml", "stats"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_line(&out)["error"]["message"].as_str().unwrap().contains("modle"));

    write(dir.path(), "bad2.toml", "[statz]\n");
    assert_eq!(run(dir.path(), &["--config", "bad2.toml", "stats"]).status.code(), Some(2));
}

#[test]
fn input_validation_happens_before_work() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["schrodinger", "--points", "8"],
        vec!["schrodinger", "--dimension", "3"],
        vec!["schrodinger", "--half-width", "-1"],
        vec!["stats"],
        vec!["verify"],
        vec!["classical", "--spectrum", "x.txt", "--dt", "0"],
        vec!["synthesize", "--spectrum", "missing.txt"],
        vec!["bogus-subcommand"],
    ] {
        let out = run(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let e = error_line(&out);
        assert_eq!(e["error"]["exit_code"], 2);
    }
}

#[test]
fn report_can_go_to_a_file_and_timestamps_are_optional() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .args(["-o", "r.json", "zeta", "--compute", "60"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(r["generated_at_unix"].as_u64().unwrap() > 0);
    let quiet = report(&run(dir.path(), &["zeta", "--compute", "60"]));
    assert!(quiet.get("generated_at_unix").is_none());
}

#[test]
fn help_exits_cleanly() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["synthesize", "verify", "stats", "zeta", "schrodinger", "classical"] {
        assert!(text.contains(sub));
    }
}
