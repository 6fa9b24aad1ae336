//! Command-line front end: configuration loading and the subcommands.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{Overrides, Percentile, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "armbalance", version, about = "Evaluate and tune passive arm-support mechanisms")]
pub struct Cli {
    /// Configuration file (TOML). Omitted keys take the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Body: 1pf, 99pm or a fraction from 1pf (0) to 99pm (1).
    #[arg(long, global = true)]
    pub percentile: Option<Percentile>,
    /// Grid resolution of the range-of-motion domain, degrees.
    #[arg(long, global = true)]
    pub resolution: Option<f64>,
    /// Published elbow equations and constant cable-length torque form.
    #[arg(long, global = true)]
    pub paper_mode: bool,
    /// Worker threads for field evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Torque-error and parasitic-force maps over the range of motion.
    Map,
    /// Fit the free spring parameters to the range of motion.
    Optimize,
    /// Theoretical torque curves with spring-tolerance bands.
    Bench {
        /// Also write each curve in the measured-data format.
        #[arg(long)]
        emit_measured: bool,
    },
    /// Relative error of measured torque against the theoretical curve.
    Compare {
        /// Measured CSV with header `angle_deg,torque_nm,direction`.
        measured: PathBuf,
        /// Grounding-part setting the measurement was taken at, mm.
        #[arg(long)]
        delta_s_mm: f64,
    },
    /// Grounding-part setting that balances the body.
    Tune {
        /// Arm mass, kg (overrides the body's).
        #[arg(long)]
        mass: Option<f64>,
        /// Moment arm of the arm weight, m (overrides the body's).
        #[arg(long)]
        arm_length: Option<f64>,
    },
    /// Fraction of the range of motion each support can reach.
    Coverage,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            percentile: self.percentile,
            resolution: self.resolution,
            paper_mode: self.paper_mode,
        }
    }
}

/// Loads the configuration and runs the selected subcommand.
pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.apply(&cli.overrides())?;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()?
            .install(|| dispatch(&cli.command, &cfg, &dir)),
        None => dispatch(&cli.command, &cfg, &dir),
    }
}

fn dispatch(command: &Command, cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    match command {
        Command::Map => commands::cmd_map(cfg, dir),
        Command::Optimize => commands::cmd_optimize(cfg, dir),
        Command::Bench { emit_measured } => commands::cmd_bench(cfg, dir, *emit_measured),
        Command::Compare { measured, delta_s_mm } => commands::cmd_compare(cfg, dir, measured, delta_s_mm / 1000.0),
        Command::Tune { mass, arm_length } => commands::cmd_tune(cfg, dir, *mass, *arm_length),
        Command::Coverage => commands::cmd_coverage(cfg, dir),
    }
}
