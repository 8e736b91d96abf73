//! Experiment runner for the `mixcocycle` library.
//!
//! One TOML file describes one experiment. [`run`] validates it, resolves
//! defaults, computes on a dedicated thread pool and writes CSV tables plus
//! a manifest, report and metrics file to the output directory.

pub mod error;
pub mod experiment;
pub mod output;
pub mod schema;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use error::{CliError, CliResult};
pub use experiment::{prepare, run_job, Job, Outcome, Prepared};
pub use schema::{parse_config, ExperimentConfig, Kind};

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Full schema check and default resolution, without computing.
pub fn validate(path: &Path) -> CliResult<Prepared> {
    prepare(load_config(path)?)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    /// When set, the config's `kind` must match.
    pub expect: Option<Kind>,
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub struct RunSummary {
    pub prepared: Prepared,
    pub outcome: Outcome,
    pub written: Vec<PathBuf>,
}

pub fn thread_pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    if threads == Some(0) {
        return Err(CliError::config("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(format!("cannot start thread pool: {e}")))
}

/// Computes a prepared experiment on a pool of the given size.
pub fn execute(prepared: &Prepared, threads: Option<usize>) -> CliResult<(Outcome, usize, std::time::Duration)> {
    let pool = thread_pool(threads)?;
    let start = Instant::now();
    let outcome = pool.install(|| run_job(&prepared.job))?;
    Ok((outcome, pool.current_num_threads(), start.elapsed()))
}

pub fn run(opts: &RunOptions) -> CliResult<RunSummary> {
    let mut config = load_config(&opts.config)?;
    if let Some(kind) = opts.expect {
        if config.kind() != kind {
            return Err(CliError::config(format!(
                "config has kind `{}` but the `{kind}` subcommand was used",
                config.kind()
            )));
        }
    }
    if let Some(seed) = opts.seed {
        config.set_seed(seed);
    }
    let prepared = prepare(config)?;
    let (outcome, threads, elapsed) = execute(&prepared, opts.threads)?;
    let written = output::write_artifacts(&opts.out_dir, &prepared, &outcome, elapsed, threads)?;
    Ok(RunSummary { prepared, outcome, written })
}
