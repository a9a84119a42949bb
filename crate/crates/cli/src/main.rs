use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod analyze;
mod config;
mod selftest;
mod sweep;
mod train;

/// Exit codes: 0 success, 1 self-test failure, 2 configuration or input
/// error, 3 training diverged.
#[derive(Debug)]
pub enum Failure {
    Selftest,
    Config(String),
    Diverged(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Selftest => 1,
            Failure::Config(_) => 2,
            Failure::Diverged(_) => 3,
        }
    }
}

impl From<fac_core::FacError> for Failure {
    fn from(e: fac_core::FacError) -> Self {
        match e {
            fac_core::FacError::DivergedTraining { .. } => Failure::Diverged(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "fac", version, about = "Frugal replay-buffer actor-critic runs and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write its run directory.
    Train(TrainArgs),
    /// Summarize run directories as CSV.
    Analyze(analyze::AnalyzeArgs),
    /// Check the implementation against independent oracles.
    Selftest(selftest::SelftestArgs),
    /// Train a grid of buffers and seeds as separate processes.
    Sweep(sweep::SweepArgs),
}

/// Settings shared by `train` and `sweep`. Later sources win: defaults,
/// then `--config`, then `--set`, then the named flags.
#[derive(Args, Clone, Debug)]
pub struct ConfigArgs {
    /// Flat `key = value` file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any key, e.g. `--set lr_actor=3e-4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    env: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    capacity: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self, extra: &[(&str, Option<String>)]) -> Result<config::RunConfig, Failure> {
        let mut cfg = config::RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_text(&text).map_err(Failure::Config)?;
        }
        for kv in &self.overrides {
            cfg.apply_override(kv).map_err(Failure::Config)?;
        }
        let named = [
            ("env", self.env.clone()),
            ("steps", self.steps.clone()),
            ("capacity", self.capacity.clone()),
        ];
        for (key, value) in named.iter().chain(extra) {
            if let Some(v) = value {
                cfg.set(key, v).map_err(Failure::Config)?;
            }
        }
        cfg.validate().map_err(Failure::Config)?;
        Ok(cfg)
    }

    /// Arguments that reproduce these settings on a child command line.
    fn to_args(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(p) = &self.config {
            out.push("--config".into());
            out.push(p.display().to_string());
        }
        for kv in &self.overrides {
            out.push("--set".into());
            out.push(kv.clone());
        }
        for (flag, v) in [("--env", &self.env), ("--steps", &self.steps), ("--capacity", &self.capacity)] {
            if let Some(v) = v {
                out.push(flag.into());
                out.push(v.clone());
            }
        }
        out
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// frugal or plain.
    #[arg(long)]
    buffer: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Run directory.
    #[arg(long, env = "FAC_RUN_DIR")]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train(a) => {
            let cfg = a
                .common
                .resolve(&[("buffer", a.buffer.clone()), ("seed", a.seed.clone())])?;
            let out = a
                .out
                .ok_or_else(|| Failure::Config("no run directory: pass --out or set FAC_RUN_DIR".into()))?;
            train::run(&cfg, &out)
        }
        Command::Analyze(a) => analyze::run(&a),
        Command::Selftest(a) => selftest::run(&a),
        Command::Sweep(a) => sweep::run(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Selftest => {}
                Failure::Config(m) => eprintln!("error: {m}"),
                Failure::Diverged(m) => eprintln!("diverged: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
