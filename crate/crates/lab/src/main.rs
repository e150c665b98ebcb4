use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use shrinkerlab::config::{from_pairs, parse_pairs};
use shrinkerlab::error::io_err;
use shrinkerlab::{run, LabError, Scenario};

/// Run a shrinkerlab scenario. Exit code 0 on success, 2 on a flagged
/// verdict, 1 on errors.
#[derive(Debug, Parser)]
#[command(name = "shrinkerlab", version)]
struct Cli {
    /// simulate, spectrum, gauge-residual, separation or rate
    scenario: Scenario,
    /// Config file (`key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Nodes per curve (overrides `m`)
    #[arg(long)]
    m: Option<usize>,
    /// Final rescaled time (overrides `tau_end`)
    #[arg(long = "tau-end")]
    tau_end: Option<f64>,
}

fn execute(cli: &Cli) -> Result<bool, LabError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| io_err(&cli.config, e))?;
    let mut pairs = parse_pairs(&text)?;
    match pairs.get("scenario") {
        Some(s) if s != cli.scenario.name() => {
            return Err(LabError::config(
                "scenario",
                format!("config says `{s}` but `{}` was requested", cli.scenario),
            ))
        }
        _ => {
            pairs.insert("scenario".into(), cli.scenario.name().into());
        }
    }
    if let Some(out) = &cli.out {
        pairs.insert("out".into(), out.display().to_string());
    }
    if let Some(m) = cli.m {
        pairs.insert("m".into(), m.to_string());
    }
    if let Some(t) = cli.tau_end {
        pairs.insert("tau_end".into(), t.to_string());
    }
    let cfg = from_pairs(pairs)?;
    let outcome = run(&cfg)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&outcome.summary).expect("summary serializes")
    );
    eprintln!(
        "wrote {} files to {}",
        outcome.files.len() + 1,
        outcome.out.display()
    );
    Ok(outcome.flagged)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("verdict: superexponential-flagged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
