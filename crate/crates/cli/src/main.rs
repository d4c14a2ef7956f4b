mod commands;
mod opts;

use std::io::Write;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::{json, Map, Value};
use spectral_forge::Error;

use opts::{cap_from_env, Cli, Command, FileConfig};

pub const SCHEMA_VERSION: u32 = 1;

const EXIT_VERIFICATION: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_CAPACITY: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

fn classify(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Capacity(_) => ("capacity", EXIT_CAPACITY),
        Error::Numerical(_) => ("numerical", EXIT_NUMERICAL),
        Error::NotIsospectral(_) => ("verification", EXIT_VERIFICATION),
        Error::Io(_) => ("io", EXIT_INPUT),
        _ => ("input", EXIT_INPUT),
    }
}

fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    let line = json!({ "error": { "kind": kind, "exit_code": code, "message": message.replace('\n', " ") } });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn run(cli: Cli) -> spectral_forge::Result<(Value, bool)> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let name = cli.command.name();
    let outcome = match cli.command {
        Command::Synthesize(o) => commands::synthesize(o.resolve(file.synthesize, cap_from_env()?)?)?,
        Command::Verify(o) => commands::verify(o.resolve(file.verify, cap_from_env()?)?)?,
        Command::Stats(o) => commands::stats(o.resolve(file.stats)?)?,
        Command::Zeta(o) => commands::zeta(o.resolve(file.zeta, cap_from_env()?)?)?,
        Command::Schrodinger(o) => commands::schrodinger(o.resolve(file.schrodinger, cap_from_env()?)?)?,
        Command::Classical(o) => commands::classical(o.resolve(file.classical)?)?,
    };
    let mut report = Map::new();
    report.insert("schema_version".into(), json!(SCHEMA_VERSION));
    report.insert("command".into(), json!(name));
    if !cli.no_timestamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        report.insert("generated_at_unix".into(), json!(secs));
    }
    report.insert("config".into(), outcome.config);
    report.insert("passed".into(), json!(outcome.passed));
    report.insert("result".into(), outcome.result);
    Ok((Value::Object(report), outcome.passed))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", EXIT_INPUT, e.to_string().trim()),
    };
    let output = cli.output.clone();
    let (report, passed) = match run(cli) {
        Ok(r) => r,
        Err(e) => {
            let (kind, code) = classify(&e);
            return fail(kind, code, &e.to_string());
        }
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    let written = match &output {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        return fail("io", EXIT_INPUT, &e.to_string());
    }
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFICATION)
    }
}
