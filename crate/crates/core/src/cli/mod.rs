//! The `matter-transport` command line.
//!
//! ```text
//! matter-transport sim --config cfg.json [--out DIR]
//! matter-transport reproduce-fig3 --panel E|F|G|H [--config cfg.json] [--out DIR]
//! matter-transport terrain --rows R --cols C --rg 0.17 --seed 1 --out DIR
//! matter-transport fit-b --log durations.csv [--out report.json]
//! ```
//!
//! Output directories default to `$MATTER_TRANSPORT_OUT`, then `out/`.

mod commands;
pub mod config;
pub mod svg;

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{cmd_fit_b, cmd_reproduce_fig3, cmd_sim, cmd_terrain, TerrainArgs};
pub use config::{ExperimentConfig, Fig3Options, Grid};

pub const OUT_DIR_ENV: &str = "MATTER_TRANSPORT_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "matter-transport",
    version,
    about = "Legged transport over rugose terrain"
)]
pub struct Cli {
    /// Worker threads for replicate loops (outputs do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    #[value(name = "E", alias = "e")]
    E,
    #[value(name = "F", alias = "f")]
    F,
    #[value(name = "G", alias = "g")]
    G,
    #[value(name = "H", alias = "h")]
    H,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo sweep over the configured (N, T) grid.
    Sim {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate one panel of the numerical figure (CSV + SVG).
    #[command(name = "reproduce-fig3")]
    ReproduceFig3 {
        #[arg(long, value_enum)]
        panel: Panel,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a block heightmap with a target rugosity.
    Terrain {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        /// Target rugosity (height std dev over block side).
        #[arg(long)]
        rg: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Block side length (same unit as heights).
        #[arg(long, default_value_t = 10.0)]
        block_side: f64,
        /// Number of discrete height levels.
        #[arg(long, default_value_t = 5)]
        levels: usize,
    },
    /// Estimate the contact-noise level from a log of bac durations.
    FitB {
        /// CSV with a `# tau=<period>` line and a `tau_u` column.
        #[arg(long)]
        log: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_dir(flag: Option<PathBuf>, config: Option<&Path>) -> PathBuf {
    flag.or_else(|| config.map(Path::to_path_buf))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Sim { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = output_dir(out, cfg.output_dir.as_deref());
            for path in cmd_sim(&cfg, &dir)? {
                println!("{}", path.display());
            }
        }
        Command::ReproduceFig3 { panel, config, out } => {
            let cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            let dir = output_dir(out, cfg.output_dir.as_deref());
            for path in cmd_reproduce_fig3(panel, &cfg, &dir)? {
                println!("{}", path.display());
            }
        }
        Command::Terrain {
            rows,
            cols,
            rg,
            seed,
            out,
            block_side,
            levels,
        } => {
            let args = TerrainArgs {
                rows,
                cols,
                rg,
                seed,
                block_side,
                levels,
            };
            let (_, paths) = cmd_terrain(args, &output_dir(out, None))?;
            for path in paths {
                println!("{}", path.display());
            }
        }
        Command::FitB { log, out } => {
            let (_, report) = cmd_fit_b(&log)?;
            match out {
                Some(path) => std::fs::write(&path, report)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{report}"),
            }
        }
    }
    Ok(())
}
