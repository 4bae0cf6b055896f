use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use waa_cli::commands::{cmd_run, cmd_sweep, cmd_verify, CommonOpts};

/// Markov-universal prediction with the Weak Aggregating Algorithm over
/// quantized elementary experts.
#[derive(Parser)]
#[command(name = "waa", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play every configured scenario × rule game and write per-round
    /// traces, a JSON summary, and (with --svg) regret charts.
    Run(CommonArgs),
    /// Run the full inequality battery and print one line per check.
    Verify(CommonArgs),
    /// Tabulate analytic vs empirical universality thresholds across the
    /// configured sweep axes.
    Sweep(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML experiment config.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Output directory (overrides the config's out_dir; default waa-out).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Also write an SVG regret chart per trace.
    #[arg(long)]
    svg: bool,
    /// Replace every scenario seed with this value.
    #[arg(long, value_name = "SEED")]
    seed_override: Option<u64>,
}

impl From<CommonArgs> for CommonOpts {
    fn from(a: CommonArgs) -> Self {
        CommonOpts {
            config: a.config,
            out: a.out,
            jobs: a.jobs,
            svg: a.svg,
            seed_override: a.seed_override,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a.into()),
        Command::Verify(a) => cmd_verify(&a.into()),
        Command::Sweep(a) => cmd_sweep(&a.into()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
