//! `vistomo` command-line driver: simulate fringes, extract visibilities,
//! reconstruct idler states and run identity/geometry checks.

pub mod commands;
pub mod config;
pub mod error;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use vistomo_core::reconstruct::{Scenario, DEFAULT_SCENARIO_TOL};
use vistomo_core::stokes::DEFAULT_SUM_RULE_TOL;

use crate::commands::ReconstructOptions;
use crate::config::RunConfig;
pub use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "vistomo", version, about = "Visibility-based polarization tomography")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write fringes_{H,V,D,A,L,R}.csv for a configured setup.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides [noise].seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Fit fringe CSVs (files or directories) and write visibilities.json.
    Extract {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Transmission to divide out of the Stokes parameters.
        #[arg(long)]
        transmission: Option<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Reconstruct the idler state from visibilities.json and write state.json.
    Reconstruct {
        visibilities: PathBuf,
        /// pure | h-coherent | v-coherent | symmetric | unknown
        #[arg(long)]
        scenario: Option<Scenario>,
        /// Supplies the scenario when --scenario is absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SCENARIO_TOL)]
        tolerance: f64,
        #[arg(long, default_value_t = DEFAULT_SUM_RULE_TOL)]
        sum_rule_tol: f64,
        /// Consistent states to sample for the unknown scenario.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Identity residuals and geometry bounds for a configured setup; writes check.json.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Overrides [check].seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn out_dir(flag: Option<PathBuf>, cfg: Option<&RunConfig>) -> PathBuf {
    flag.or_else(|| cfg.and_then(|c| c.output.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn report(paths: &[impl AsRef<Path>]) {
    for p in paths {
        println!("{}", p.as_ref().display());
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out_dir: dir,
        } => {
            let cfg = RunConfig::load(&config)?;
            let written = commands::simulate(&cfg, seed, &out_dir(dir, Some(&cfg)))?;
            report(&written);
        }
        Command::Extract {
            inputs,
            transmission,
            out_dir: dir,
        } => {
            let (path, _) = commands::extract(&inputs, transmission, &out_dir(dir, None))?;
            report(&[path]);
        }
        Command::Reconstruct {
            visibilities,
            scenario,
            config,
            tolerance,
            sum_rule_tol,
            samples,
            seed,
            out_dir: dir,
        } => {
            let cfg = config.as_deref().map(RunConfig::load).transpose()?;
            let scenario = scenario
                .or_else(|| cfg.as_ref().and_then(|c| c.scenario))
                .ok_or_else(|| {
                    CliError::Usage("no scenario: pass --scenario or a config with one".into())
                })?;
            let opts = ReconstructOptions {
                tolerance,
                sum_rule_tol,
                samples,
                seed,
            };
            let (path, _) = commands::reconstruct_state(
                &visibilities,
                scenario,
                &opts,
                &out_dir(dir, cfg.as_ref()),
            )?;
            report(&[path]);
        }
        Command::Check {
            config,
            seed,
            out_dir: dir,
        } => {
            let cfg = RunConfig::load(&config)?;
            let (path, rep) = commands::check(&cfg, seed, &out_dir(dir, Some(&cfg)))?;
            report(&[path]);
            eprintln!(
                "identities max residual {:e}, bounds {}, survey violations {}/{}",
                rep.identities.max_abs(),
                if rep.bounds.all_ok() { "ok" } else { "VIOLATED" },
                rep.survey.violations(),
                rep.survey.samples
            );
        }
    }
    Ok(())
}
