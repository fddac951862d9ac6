mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "powgame", version, about = "Equilibrium analysis of proof-of-work mining")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,

    /// Output file (a directory for `sweep`). Defaults to stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the mining-stage equilibrium.
    Equilibrium(ModelArgs),
    /// Equilibrium investment with exact and first-order post-investment outcomes.
    Invest(ModelArgs),
    /// Closed-form comparative statics of the equilibrium.
    Statics {
        #[command(flatten)]
        model: ModelArgs,
        /// Also compare against finite differences and check the sign predictions.
        #[arg(long)]
        verify: bool,
    },
    /// Calibrate the model to network aggregates.
    Calibrate(CalibrateArgs),
    /// Concentration and attack-cost curves, with and without investment.
    Metrics(ModelArgs),
    /// Re-solve under scaled rewards; one output file per multiplier.
    Sweep(ModelArgs),
    /// Log-log regression of hash-rate returns on lagged reward or price returns.
    Regress(RegressArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model instance JSON (the output of `calibrate` is accepted too).
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long = "entry-cost")]
    pub entry_cost: Option<f64>,
    /// Reward multipliers, comma separated.
    #[arg(long = "reward-mult", value_delimiter = ',')]
    pub reward_mult: Vec<f64>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 20e6)]
    reward_per_day: f64,
    /// Network hash rate in millions of TH/s.
    #[arg(long, default_value_t = 120.0)]
    network_hash: f64,
    #[arg(long, default_value_t = 20)]
    miners: usize,
    /// Hardware efficiency in J/TH.
    #[arg(long, default_value_t = 29.5)]
    efficiency: f64,
    /// Electricity price per kWh.
    #[arg(long, default_value_t = 0.05)]
    electricity: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
}

#[derive(Debug, Args)]
struct RegressArgs {
    /// CSV with columns date,hash_rate,reward_usd,price_usd[,fees_usd].
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Regressor::Reward)]
    regressor: Regressor,
    /// What to emit: the fit, the paired return series, or seven-day averages.
    #[arg(long, value_enum, default_value_t = Emit::Fit)]
    emit: Emit,
    /// Spacing of the seven-day averages in days.
    #[arg(long, default_value_t = 3)]
    every: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Regressor {
    Reward,
    Price,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Fit,
    Returns,
    Smoothed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Equilibrium(a) => commands::equilibrium(a.model.as_deref(), &a.overrides, cli.format),
        Command::Invest(a) => commands::invest(a.model.as_deref(), &a.overrides, cli.format),
        Command::Statics { model, verify } => {
            commands::statics(model.model.as_deref(), &model.overrides, *verify, cli.format)
        }
        Command::Calibrate(a) => commands::calibrate(
            &powgame_core::CalibrationSpec {
                reward_per_day: a.reward_per_day,
                network_hash: a.network_hash,
                miner_count: a.miners,
                efficiency_j_per_th: a.efficiency,
                electricity_per_kwh: a.electricity,
                eta_default: a.eta,
                ..Default::default()
            },
            cli.format,
        ),
        Command::Metrics(a) => commands::metrics(a.model.as_deref(), &a.overrides, cli.format),
        Command::Sweep(a) => {
            return match commands::sweep(a.model.as_deref(), &a.overrides, cli.format, cli.output.as_deref()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Command::Regress(a) => commands::regress(a.data.as_deref(), a.regressor, a.emit, a.every, cli.format),
    };
    match result.and_then(|text| output::write(&text, cli.output.as_deref())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: commands::CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}
