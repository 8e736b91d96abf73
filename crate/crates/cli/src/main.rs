use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixcocycle_cli::{run, validate, CliResult, Kind, RunOptions};

#[derive(Parser)]
#[command(name = "mixcocycle", version, about = "Random quasiperiodic cocycle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and list every resolved default.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    Ergodicity(Common),
    BaseLdt(Common),
    Lyapunov(Common),
    FiberLdt(Common),
    Semicontinuity(Common),
    SchrodingerScan(Common),
    Wasserstein(Common),
}

fn dispatch(command: Command) -> CliResult<()> {
    let (kind, common) = match command {
        Command::Validate { config } => {
            let prepared = validate(&config)?;
            println!("{}: ok ({})", config.display(), prepared.config.kind());
            if prepared.defaults.is_empty() {
                println!("no defaults applied");
            } else {
                println!("resolved defaults:");
                for d in &prepared.defaults {
                    println!("  {d}");
                }
            }
            return Ok(());
        }
        Command::Ergodicity(c) => (Kind::Ergodicity, c),
        Command::BaseLdt(c) => (Kind::BaseLdt, c),
        Command::Lyapunov(c) => (Kind::Lyapunov, c),
        Command::FiberLdt(c) => (Kind::FiberLdt, c),
        Command::Semicontinuity(c) => (Kind::Semicontinuity, c),
        Command::SchrodingerScan(c) => (Kind::SchrodingerScan, c),
        Command::Wasserstein(c) => (Kind::Wasserstein, c),
    };
    let summary = run(&RunOptions {
        config: common.config,
        expect: Some(kind),
        seed: common.seed,
        threads: common.threads,
        out_dir: common.out_dir,
    })?;
    for path in &summary.written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
