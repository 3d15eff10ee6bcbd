use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use slabprobe::cli::{self, RunConfig};
use slabprobe::{par, Result};

#[derive(Parser)]
#[command(name = "slabprobe", version, about = "Cavity probing in a conductive slab with complex spherical waves")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores (overrides `workers`).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problems for one (p, t, h).
    Forward {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        probe: usize,
        #[arg(long)]
        t: f64,
        /// Defaults to the largest h of the grid.
        #[arg(long)]
        h: Option<f64>,
    },
    /// Indicator series, slope fit and classification for one (p, t).
    Indicator {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        probe: usize,
        #[arg(long)]
        t: f64,
    },
    /// Distance sweep over all probes, carving and boundary extraction.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Self-checks of the probe, solver and fits.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn prepare(common: &Common) -> Result<(RunConfig, PathBuf, usize)> {
    let cfg = cli::load_config(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let workers = common.workers.unwrap_or(cfg.workers);
    Ok((cfg, out, workers))
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Forward { common, probe, t, h } => {
            let (cfg, out, workers) = prepare(&common)?;
            par::with_workers(workers, || cli::cmd_forward(&cfg, probe, t, h, &out))?;
        }
        Command::Indicator { common, probe, t } => {
            let (cfg, out, workers) = prepare(&common)?;
            par::with_workers(workers, || cli::cmd_indicator(&cfg, probe, t, &out))?;
        }
        Command::Sweep { common } => {
            let (cfg, out, workers) = prepare(&common)?;
            par::with_workers(workers, || cli::cmd_sweep(&cfg, &out))?;
        }
        Command::Validate { common } => {
            let (cfg, out, workers) = prepare(&common)?;
            let (checks, _) = par::with_workers(workers, || cli::cmd_validate(&cfg, &out))?;
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(cli::EXIT_VALIDATION as u8) } else { ExitCode::SUCCESS };
        }
    };
    match run(args.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(cli::EXIT_RUNTIME as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
