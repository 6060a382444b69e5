//! `cutter`: train the dual-agent compressor, compress graphs, run
//! attack simulations, and score robustness preservation.

mod commands;
mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::HyperFlags;

#[derive(Parser)]
#[command(
    name = "cutter",
    about = "Robustness-preserving graph compression via dual-agent reinforcement learning",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train both agents on a graph and write checkpoint + logs.
    Train {
        /// Edge-list file (one `u v` pair per line, `#` comments).
        #[arg(long)]
        graph: PathBuf,
        /// Output directory for checkpoint.txt and the CSV logs.
        #[arg(long, default_value = "cutter-run")]
        out_dir: PathBuf,
        #[command(flatten)]
        hyper: HyperFlags,
    },
    /// Greedy compression rollout with a trained checkpoint. The
    /// retention fraction comes from `--rho` (or the config file).
    Compress {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Compressed edge list destination (stdout when omitted).
        #[arg(long)]
        out_edges: Option<PathBuf>,
        /// Removed-node list destination (stdout when omitted).
        #[arg(long)]
        out_removed: Option<PathBuf>,
        #[command(flatten)]
        hyper: HyperFlags,
    },
    /// Rank nodes by one strategy and record the degradation curve.
    Attack {
        #[arg(long)]
        graph: PathBuf,
        /// One of: degree, collective-influence, eigenvector,
        /// betweenness, closeness, percolation.
        #[arg(long)]
        strategy: String,
        /// Fraction of nodes removed per step.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Total fraction removed.
        #[arg(long, default_value_t = 0.40)]
        max: f64,
        /// Curve CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Attack original and compressed graphs, report RPS and topology.
    Evaluate {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        compressed: PathBuf,
        /// Comma-separated strategy names (default: all six).
        #[arg(long)]
        strategies: Option<String>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 0.40)]
        max: f64,
        /// RPS CSV destination (stdout when omitted).
        #[arg(long)]
        out_rps: Option<PathBuf>,
        /// Topology CSV destination (stdout when omitted).
        #[arg(long)]
        out_topo: Option<PathBuf>,
    },
    /// Generate a synthetic graph (er:N,p or ba:N,m) as an edge list.
    Gen {
        /// Generator spec, e.g. `er:200,0.05` or `ba:200,2`.
        #[arg(long)]
        gen: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Edge-list destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train {
            graph,
            out_dir,
            hyper,
        } => {
            let config = config::build_train_config(&hyper)?;
            if hyper.dump_config {
                print!("{}", config::dump_config(&config));
                return Ok(());
            }
            commands::cmd_train(&graph, config, &out_dir)
        }
        Command::Compress {
            graph,
            checkpoint,
            out_edges,
            out_removed,
            hyper,
        } => {
            let config = config::build_train_config(&hyper)?;
            if hyper.dump_config {
                print!("{}", config::dump_config(&config));
                return Ok(());
            }
            let rho = config.rho;
            commands::cmd_compress(
                &graph,
                &checkpoint,
                rho,
                config,
                out_edges.as_deref(),
                out_removed.as_deref(),
            )
        }
        Command::Attack {
            graph,
            strategy,
            step,
            max,
            out,
        } => commands::cmd_attack(&graph, &strategy, step, max, out.as_deref()),
        Command::Evaluate {
            original,
            compressed,
            strategies,
            step,
            max,
            out_rps,
            out_topo,
        } => {
            let strategies = commands::parse_strategies(strategies.as_deref())?;
            commands::cmd_evaluate(
                &original,
                &compressed,
                &strategies,
                step,
                max,
                out_rps.as_deref(),
                out_topo.as_deref(),
            )
        }
        Command::Gen { gen, seed, out } => commands::cmd_gen(&gen, seed, out.as_ref()),
    }
}
