//! Batch driver for the `wegnerlab` experiments: integrated density of
//! states, Wegner statistics, the verification suite and localization
//! diagnostics. Every run writes a bundle of CSV, JSON and SVG files next to a
//! `manifest.json` that records how it was produced.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use wegnerlab_core::ensemble::RunOptions;
use wegnerlab_core::StencilFault;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::output::Bundle;

#[derive(Debug, Parser)]
#[command(name = "wegnerlab", version, about = "Finite-volume spectral experiments for 1D alloy-type random operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ensemble-averaged integrated density of states.
    Ids(CommonArgs),
    /// Mean eigenvalue counts in shrinking windows below an energy.
    Wegner(CommonArgs),
    /// Hellmann–Feynman, derivative lower bound, unique continuation and
    /// bracketing checks. Exits with status 1 if any case fails.
    Verify(VerifyArgs),
    /// Lyapunov exponents and eigenfunction decay fits.
    Localize(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment config (TOML, or JSON by extension). Defaults apply without it.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Ensemble size for ids and wegner; sweep realizations for verify;
    /// decay boxes for localize.
    #[arg(long, value_name = "N")]
    pub realizations: Option<u64>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, value_name = "N", env = "WEGNERLAB_WORKERS")]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Box length; repeat for several. Replaces the subcommand's list.
    #[arg(long = "l", value_name = "L")]
    pub box_lengths: Vec<u32>,
    /// Report ensemble progress on standard error.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Break the operator stencil on purpose.
    #[arg(long, hide = true, value_name = "FAULT")]
    pub inject_fault: Option<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ids(_) => "ids",
            Command::Wegner(_) => "wegner",
            Command::Verify(_) => "verify",
            Command::Localize(_) => "localize",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Ids(c) | Command::Wegner(c) | Command::Localize(c) => c,
            Command::Verify(v) => &v.common,
        }
    }
}

fn parse_fault(text: &str) -> Result<StencilFault, CliError> {
    serde_json::from_value(serde_json::Value::String(text.to_string()))
        .map_err(|_| CliError::config("--inject-fault", format!("unknown fault {text:?}")))
}

/// Config file plus command-line overrides.
pub fn effective_config(command: &Command) -> Result<ExperimentConfig, CliError> {
    let args = command.common();
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let ls = &args.box_lengths;
    match command {
        Command::Ids(_) => {
            if let Some(r) = args.realizations {
                config.realizations = r;
            }
            if !ls.is_empty() {
                config.ids.box_lengths = ls.clone();
            }
        }
        Command::Wegner(_) => {
            if let Some(r) = args.realizations {
                config.realizations = r;
            }
            if !ls.is_empty() {
                config.wegner.box_lengths = ls.clone();
            }
        }
        Command::Verify(_) => {
            if let Some(r) = args.realizations {
                config.verify.sweep_realizations = r;
            }
            if !ls.is_empty() {
                config.verify.box_lengths = ls.clone();
            }
        }
        Command::Localize(_) => {
            if let Some(r) = args.realizations {
                config.localize.realizations = r;
            }
            match ls.as_slice() {
                [] => {}
                [l] => config.localize.box_length = *l,
                _ => return Err(CliError::config("--l", "localize takes a single box length")),
            }
        }
    }
    config.validate()?;
    Ok(config)
}

/// Runs one parsed command; returns summary lines.
pub fn execute(command: &Command, command_line: Vec<String>) -> Result<Vec<String>, CliError> {
    let config = effective_config(command)?;
    let fault = match command {
        Command::Verify(v) => v.inject_fault.as_deref().map(parse_fault).transpose()?,
        _ => None,
    };
    let args = command.common();
    let manifest = RunManifest::new(command.name(), &config, command_line);
    let mut bundle = Bundle::create(&args.out, manifest)?;
    let options = RunOptions {
        workers: None,
        progress: args.progress,
    };
    let mut work = || match command {
        Command::Ids(_) => commands::ids(&config, &mut bundle, options),
        Command::Wegner(_) => commands::wegner(&config, &mut bundle, options),
        Command::Verify(_) => commands::verify(&config, &mut bundle, fault),
        Command::Localize(_) => commands::localize(&config, &mut bundle),
    };
    match args.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Numerical(format!("cannot start {n} workers: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Parses `args` (including the program name), runs, prints, and returns the
/// process exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command, args) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
