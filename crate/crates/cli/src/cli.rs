use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, CompareArgs, OptimizeArgs, SimulateArgs, SweepArgs};
use crate::config::{self, Overrides};
use crate::CliError;

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "TCS_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "tcs", version, about = "Day-to-day tradable credit scheme simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides both the choice seed and the population seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the maximum number of days.
    #[arg(long)]
    pub days: Option<u32>,
    /// Only log warnings and errors.
    #[arg(long)]
    pub quiet: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, days: self.days, warm_start: None }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario to equilibrium.
    Simulate {
        /// Scenario file or `builtin:<name>`.
        #[arg(long)]
        config: String,
        #[command(flatten)]
        common: Common,
        /// Toll profile JSON, e.g. the `best.json` of an optimize run.
        #[arg(long)]
        toll: Option<PathBuf>,
        /// Snapshot to warm-start from.
        #[arg(long)]
        warm_start: Option<PathBuf>,
        /// Start from the no-toll equilibrium of the same scenario.
        #[arg(long)]
        from_no_toll: bool,
        /// Days whose accumulation and departure files are written, besides the last.
        #[arg(long, value_delimiter = ',')]
        save_days: Vec<u32>,
    },
    /// Optimize the toll profile described by the `[optimize]` table.
    Optimize {
        #[arg(long)]
        config: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run several scenarios on one population and tabulate them.
    Compare {
        /// Repeat once per scenario.
        #[arg(long = "config", required = true)]
        configs: Vec<String>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from_no_toll: bool,
    },
    /// Equilibrium credit price as a function of the endowment.
    Sweep {
        #[arg(long)]
        config: String,
        #[command(flatten)]
        common: Common,
        /// Comma-separated endowments; defaults to the `[sweep]` table.
        #[arg(long, value_delimiter = ',')]
        endowments: Vec<f64>,
        #[arg(long)]
        from_no_toll: bool,
    },
    /// List bundled scenarios, or print one.
    Scenarios { name: Option<String> },
}

impl Command {
    pub fn quiet(&self) -> bool {
        match self {
            Command::Simulate { common, .. }
            | Command::Optimize { common, .. }
            | Command::Compare { common, .. }
            | Command::Sweep { common, .. } => common.quiet,
            Command::Scenarios { .. } => false,
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, common, toll, warm_start, from_no_toll, save_days } => {
            let mut overrides = common.overrides();
            overrides.warm_start = warm_start;
            let s = commands::simulate(&SimulateArgs {
                config,
                out: common.out,
                overrides,
                toll,
                from_no_toll,
                save_days,
                quiet: common.quiet,
            })?;
            log::info!("converged on day {:?}; W = {:?}", s.converged_day, s.mean("social_welfare"));
        }
        Command::Optimize { config, common } => {
            let best = commands::optimize(&OptimizeArgs {
                config,
                out: common.out.clone(),
                overrides: common.overrides(),
                quiet: common.quiet,
            })?;
            log::info!("best welfare {:.4} at {:?}", best.welfare, best.params);
        }
        Command::Compare { configs, common, from_no_toll } => {
            commands::compare(&CompareArgs {
                configs,
                out: common.out.clone(),
                overrides: common.overrides(),
                from_no_toll,
                quiet: common.quiet,
            })?;
        }
        Command::Sweep { config, common, endowments, from_no_toll } => {
            commands::sweep(&SweepArgs {
                config,
                out: common.out.clone(),
                overrides: common.overrides(),
                endowments,
                from_no_toll,
            })?;
        }
        Command::Scenarios { name } => match name {
            None => {
                for (n, _) in config::BUILTIN {
                    println!("{n}");
                }
            }
            Some(n) => {
                let text = config::builtin(&n).ok_or_else(|| CliError::Config(format!("no bundled scenario `{n}`")))?;
                print!("{text}");
            }
        },
    }
    Ok(())
}
