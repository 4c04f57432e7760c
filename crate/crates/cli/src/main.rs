use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uq_core::experiment::{compare_report, run_experiment, ExperimentConfig, Stage, Summary};
use uq_core::Error;

/// Surrogate modelling and reliability experiments.
#[derive(Parser)]
#[command(name = "uq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs an experiment config and writes its artifacts.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compares two summaries (summary.json files or run directories).
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Also writes the comparison as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Parses and checks a config without running it.
    Validate { config: PathBuf },
}

const OK: u8 = 0;
const DOMAIN: u8 = 1;
const CONFIG: u8 = 2;

fn report(stage: Stage, error: &Error, code: u8) -> ExitCode {
    let body = serde_json::json!({ "stage": stage, "exit_code": code, "message": error.to_string() });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn threads_from_env() -> Result<Option<usize>, Error> {
    match std::env::var("UQ_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::InvalidParameter(format!("UQ_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(t) = threads_from_env()? {
        cfg.threads = Some(t);
    }
    Ok(cfg)
}

fn read_summary(path: &Path) -> Result<Summary, Error> {
    let file = if path.is_dir() { path.join("summary.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| Error::Io(format!("{}: {e}", file.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return report(Stage::Config, &e, CONFIG),
            };
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            match run_experiment(&cfg) {
                Ok(out) => {
                    println!("{}", out.output_dir.join("summary.json").display());
                    ExitCode::from(OK)
                }
                Err(e) => report(e.stage, &e.error, e.exit_code() as u8),
            }
        }
        Command::Validate { config } => match load(&config).and_then(|c| c.validate()) {
            Ok(()) => {
                println!("ok");
                ExitCode::from(OK)
            }
            Err(e) => report(Stage::Config, &e, CONFIG),
        },
        Command::Compare { a, b, csv } => {
            let (sa, sb) = match read_summary(&a).and_then(|x| Ok((x, read_summary(&b)?))) {
                Ok(p) => p,
                Err(e) => return report(Stage::Config, &e, CONFIG),
            };
            let rep = match compare_report(&sa, &sb) {
                Ok(r) => r,
                Err(e) => return report(Stage::Compare, &e, DOMAIN),
            };
            print!("{}", rep.markdown);
            if let Some(p) = csv {
                if let Err(e) = std::fs::write(&p, rep.csv) {
                    return report(Stage::Output, &Error::from(e), DOMAIN);
                }
            }
            ExitCode::from(OK)
        }
    }
}
