//! `fluct`: limits tables, simulation campaigns, verification and ladder
//! reports from one TOML config.
//!
//! Exit codes: 0 pass, 1 some criterion failed, 2 usage or config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod out;

use config::ExperimentConfig;
use out::OutDir;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

#[derive(Parser)]
#[command(name = "fluct", version, about = "First-passage fluctuation toolkit")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Check the config, print its canonical form and stop.
    #[arg(long, global = true)]
    validate: bool,
    /// Optional with `--validate`.
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate a limit law on a product grid.
    Limits {
        /// Selector such as "(Y0), β=2"; replaces the config's [[limits]].
        #[arg(long)]
        law: Option<String>,
        /// Comma-separated values of one coordinate; repeat per coordinate.
        #[arg(long, allow_hyphen_values = true)]
        axis: Vec<String>,
    },
    /// Sample conditional passages at every configured level.
    Simulate,
    /// Compare stored samples with the limit laws.
    Verify {
        /// Directory holding the sample CSVs; defaults to the output directory.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Ladder-height estimates and identity checks.
    Ladder,
    /// Summarise the reports present for the run.
    Report,
}

fn parse_axis(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::Usage(format!("bad axis value {t:?}"))))
        .collect()
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Some(ExperimentConfig::load(p)?),
        None => None,
    };
    if let Some(c) = cfg.as_mut() {
        if let Some(s) = cli.seed {
            c.seed = s;
        }
        if let Some(w) = cli.workers {
            c.workers = w;
        }
        c.validate()?;
    }
    if cli.validate {
        match &cfg {
            Some(c) => print!("{}", c.canonical()),
            None => {
                if let Some(Command::Limits { law: Some(l), .. }) = &cli.command {
                    commands::parse_selector(l)?;
                } else {
                    return Err(CliError::Usage("--validate needs --config".into()));
                }
            }
        }
        return Ok(true);
    }
    let command = cli.command.ok_or_else(|| CliError::Usage("missing subcommand; see --help".into()))?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.out.clone()))
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set out in the config".into()))?;
    let out = OutDir::new(&out_dir);
    let need = |cfg: Option<ExperimentConfig>| cfg.ok_or_else(|| CliError::Usage("this command needs --config".into()));
    match command {
        Command::Limits { law, axis } => {
            let entries: Vec<(String, Vec<Vec<f64>>)> = match law {
                Some(l) => vec![(l, axis.iter().map(|a| parse_axis(a)).collect::<Result<_, _>>()?)],
                None => {
                    if !axis.is_empty() {
                        return Err(CliError::Usage("--axis needs --law".into()));
                    }
                    let c = need(cfg)?;
                    if c.limits.is_empty() {
                        return Err(CliError::Usage("no law given and the config has no [[limits]] entries".into()));
                    }
                    c.limits.into_iter().map(|e| (e.law, e.axes)).collect()
                }
            };
            commands::limits(&entries, &out)?;
            Ok(true)
        }
        Command::Simulate => commands::simulate(&need(cfg)?, &out),
        Command::Verify { samples } => {
            let dir = samples.unwrap_or_else(|| out.path().to_path_buf());
            commands::verify(&need(cfg)?, &dir, &out)
        }
        Command::Ladder => commands::ladder(&need(cfg)?, &out),
        Command::Report => commands::report(&need(cfg)?, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
