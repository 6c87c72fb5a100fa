mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mobimpute::evaluation::OnOffSchedule;

use config::{InputFormat, RunConfig};

#[derive(Parser)]
#[command(name = "mobimpute", version, about = "Impute missing GPS data and compute daily mobility measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill gaps in each input and write one event file per replicate.
    Impute(Common),
    /// Compute daily measures, with intervals when replicates > 1.
    Features(Common),
    /// Thin inputs with an on/off sampling schedule.
    SimulateMissingness(Common),
    /// Score imputation methods against dense truth data.
    Evaluate(Common),
    /// Closed-form and simulated gap tables for the toy model.
    Analytic(Common),
}

#[derive(Args)]
struct Common {
    /// Input files or directories. Replaces `inputs` from the config.
    inputs: Vec<PathBuf>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// LI, TL, GL, GLC or UNIFORM.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    scale_mult: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// On/off minutes, e.g. `2/10`.
    #[arg(long, value_parser = parse_schedule)]
    schedule: Option<OnOffSchedule>,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Comma-separated methods for `evaluate`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    utc_offset_s: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_schedule(s: &str) -> Result<OnOffSchedule, String> {
    OnOffSchedule::parse_minutes(s).map_err(|e| e.to_string())
}

impl Common {
    fn resolve(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if !self.inputs.is_empty() {
            cfg.inputs = self.inputs;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.kernel {
            cfg.kernel = v;
        }
        if let Some(v) = self.scale_mult {
            cfg.scale_mult = v;
        }
        if let Some(v) = self.replicates {
            cfg.replicates = v;
        }
        if let Some(v) = self.schedule {
            cfg.schedule = v;
        }
        if let Some(v) = self.format {
            cfg.format = v;
        }
        if let Some(v) = self.methods {
            cfg.methods = v;
        }
        if self.utc_offset_s.is_some() {
            cfg.utc_offset_s = self.utc_offset_s;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Impute(c) => commands::impute(&c.resolve()?),
        Command::Features(c) => commands::features(&c.resolve()?),
        Command::SimulateMissingness(c) => commands::simulate_missingness(&c.resolve()?),
        Command::Evaluate(c) => commands::evaluate(&c.resolve()?),
        Command::Analytic(c) => commands::analytic(&c.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
