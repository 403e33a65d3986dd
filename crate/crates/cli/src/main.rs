//! `hubnet` command-line driver.
//!
//! Exit codes: 0 success, 1 verification or stage failure, 2 input error
//! (bad flags, unreadable or invalid config, missing data).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hubnet::config::{merge_patch, RunConfig};
use hubnet::pipeline::{self, CommandError};
use hubnet::report::OutputDir;
use hubnet::{par, verify, Error};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "hubnet", version, about = "Bayesian risk-averse hub network design")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config merged over the experiment defaults.
    #[arg(long, global = true, env = "HUBNET_CONFIG")]
    config: Option<PathBuf>,

    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, env = "HUBNET_SEED")]
    seed: Option<u64>,

    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, env = "HUBNET_THREADS", default_value_t = 0)]
    threads: usize,

    /// Output directory.
    #[arg(long, global = true, env = "HUBNET_OUT", default_value = "out")]
    out: PathBuf,

    /// Overrides the config's experiment (`sim` or `cab`).
    #[arg(long, global = true, env = "HUBNET_EXPERIMENT", value_parser = ["sim", "cab"])]
    experiment: Option<String>,

    /// Overrides `data.cab_path`.
    #[arg(long, global = true, env = "HUBNET_CAB_PATH")]
    cab_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Fit posteriors and write the posterior bundle and summary.
    Fit,
    /// Draw posterior-predictive training scenarios.
    Sample,
    /// Enumerate candidate designs.
    Enumerate,
    /// Evaluate every design under every scenario.
    Evaluate,
    /// Summarise, rank and select designs; deterministic baseline.
    Select,
    /// Compare selected and baseline designs under stress scenarios.
    Stress,
    /// Re-select under the preference-weight grid.
    Sensitivity,
    /// Run the oracle suites and write a pass/fail report.
    Verify,
    /// Run every stage and write the full report bundle.
    Run,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Sample => "sample",
            Command::Enumerate => "enumerate",
            Command::Evaluate => "evaluate",
            Command::Select => "select",
            Command::Stress => "stress",
            Command::Sensitivity => "sensitivity",
            Command::Verify => "verify",
            Command::Run => "run",
        }
    }
}

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;

fn is_input_error(e: &Error) -> bool {
    matches!(e, Error::Parse { .. } | Error::Io { .. } | Error::Csv(_) | Error::Config(_))
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut patch = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| Error::Config(format!("{}: invalid JSON: {e}", path.display())))?
        }
        None => json!({}),
    };
    let mut overrides = json!({});
    if let Some(x) = &cli.experiment {
        overrides["experiment"] = json!(x);
    }
    if let Some(s) = cli.seed {
        overrides["seed"] = json!(s);
    }
    if let Some(p) = &cli.cab_path {
        overrides["data"] = json!({ "cab_path": p });
    }
    merge_patch(&mut patch, &overrides);
    let cfg = RunConfig::from_json_value(&patch)?;
    if cfg.seed.is_none() {
        return Err(Error::Config("a seed is required: pass --seed, set HUBNET_SEED or put it in the config".into()));
    }
    Ok(cfg)
}

fn run_verify(cfg: &RunConfig, out_dir: &Path) -> Result<bool, Error> {
    let seed = cfg.seed.expect("seed checked");
    let report = verify::run_all(cfg, seed, &out_dir.join(".determinism"))?;
    for line in verify::summary_lines(&report) {
        println!("{line}");
    }
    let cfg_hash = hubnet::report::sha256_hex(cfg.to_json().as_bytes());
    let mut out = OutputDir::create(out_dir, &cfg_hash)?;
    report.write(&mut out)?;
    let cfg_value = serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    out.write_manifest("verify", seed, &cfg_value)?;
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let command = cli.command;
    par::with_threads(cli.threads, || {
        if command == Command::Verify {
            return match run_verify(&cfg, &cli.out) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => {
                    eprintln!("verification failed; see {}", cli.out.join("verify_report.csv").display());
                    ExitCode::from(EXIT_FAILURE)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(if is_input_error(&e) { EXIT_INPUT } else { EXIT_FAILURE })
                }
            };
        }
        match pipeline::execute(command.name(), &cfg, &cli.out) {
            Ok(outcome) => {
                println!("wrote {} files to {}", outcome.files.len() + 1, cli.out.display());
                if let Some(label) = outcome.selected {
                    println!("selected design: {label}");
                }
                ExitCode::SUCCESS
            }
            Err(CommandError::Input(e)) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_INPUT)
            }
            Err(err @ CommandError::Stage(_, _)) => {
                eprintln!("error: {err}; partial outputs renamed with .partial");
                let CommandError::Stage(_, e) = &err else { unreachable!() };
                ExitCode::from(if is_input_error(e) { EXIT_INPUT } else { EXIT_FAILURE })
            }
        }
    })
}
