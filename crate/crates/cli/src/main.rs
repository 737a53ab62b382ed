use std::path::PathBuf;

use clap::Parser;

use nlsp_cli::config::Command;
use nlsp_cli::{execute, Invocation};

/// Radial NLS experiments: ground states, thresholds, dynamics and the
/// mass-critical sweep.
#[derive(Parser)]
#[command(name = "nlsp", version)]
struct Cli {
    /// eig | groundstate | minimize | classify | evolve | critical-sweep |
    /// uniqueness-check | stability
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to $NLSP_OUT_DIR, then ./nlsp-out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    let code = execute(&Invocation {
        command: cli.command,
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        threads: cli.threads,
    });
    std::process::exit(code);
}
