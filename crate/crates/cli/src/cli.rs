//! Command-line surface.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, ScenarioConfig};
use crate::csv_io::write_file;
use crate::error::{AppError, AppResult};
use crate::runners::{self, CalibrateOptions, Report};

#[derive(Debug, Parser)]
#[command(name = "recipcal", version, about = "Reciprocity calibration experiments for hybrid beamforming arrays")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML scenario file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output CSV; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// `two-sides` or `interleaved`.
    #[arg(long, global = true)]
    pub partition: Option<String>,
    /// `both`, `tx`, `rx` or `none`.
    #[arg(long, global = true)]
    pub noise: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One internal calibration run.
    Calibrate {
        /// Use this intra-array channel instead of a simulated one.
        #[arg(long)]
        channel: Option<PathBuf>,
        /// Write the channel used by the run.
        #[arg(long)]
        export_channel: Option<PathBuf>,
    },
    /// Noiseless true vs estimated calibration coefficients.
    Fig6,
    /// NMSE_F sweep over K and L for both partition schemes.
    Fig7,
    /// As fig7, with tx and rx noise simulated separately.
    Fig8,
    /// DL CSIT NMSE over a grid of NMSE_F and NMSE_UL.
    Fig9,
    /// DL CSIT NMSE at one point.
    DlNmse,
    /// Checks of the fully connected architecture with a reference UE.
    FullyConnectedCheck,
}

impl Cli {
    pub fn load_config(&self) -> AppResult<ScenarioConfig> {
        let g = &self.global;
        let overrides = Overrides {
            seed: g.seed,
            trials: g.trials,
            output: g.out.clone(),
            partition: g.partition.clone(),
            noise: g.noise.clone(),
        };
        ScenarioConfig::load(g.config.as_deref(), &overrides)
    }
}

pub fn execute(command: &Command, cfg: &ScenarioConfig) -> AppResult<Report> {
    match command {
        Command::Calibrate { channel, export_channel } => runners::run_calibrate(
            cfg,
            &CalibrateOptions {
                channel: channel.clone(),
                export_channel: export_channel.clone(),
            },
        ),
        Command::Fig6 => runners::run_fig6(cfg),
        Command::Fig7 => runners::run_fig7(cfg),
        Command::Fig8 => runners::run_fig8(cfg),
        Command::Fig9 => runners::run_fig9(cfg),
        Command::DlNmse => runners::run_dl_nmse(cfg),
        Command::FullyConnectedCheck => runners::run_fully_connected_check(cfg),
    }
}

/// Parses, runs and writes outputs. The summary goes to stdout when the CSV
/// goes to a file, and to stderr otherwise.
pub fn run(cli: &Cli) -> AppResult<()> {
    let cfg = cli.load_config()?;
    let report = execute(&cli.command, &cfg)?;
    let bytes = report.csv.to_bytes();
    match &cfg.output {
        Some(path) => {
            write_file(path, &bytes)?;
            println!("{}", report.summary);
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes).map_err(AppError::from)?;
            out.flush().map_err(AppError::from)?;
            eprintln!("{}", report.summary);
        }
    }
    match report.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
