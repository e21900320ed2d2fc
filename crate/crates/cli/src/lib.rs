//! Config-driven experiment runner for the unified estimators.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::CliError;

/// Options shared by `run` and `validate`.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub plots: bool,
}

/// Loads, applies the seed override and checks the schema.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = config::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Schema("--workers must be positive".into()));
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(pool.install(f))
}

/// Executes a config and writes the artifacts. Returns the output directory.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(PathBuf, output::Report), CliError> {
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Schema("no output directory: pass --out or set output_dir".into()))?;
    let outcome = with_pool(opts.workers, || experiments::execute(cfg))??;
    let now = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let report = output::build_report(cfg, &outcome, now)?;
    output::write_all(&dir, &report, &outcome, opts.plots)?;
    Ok((dir, report))
}

/// Schema and admissibility checks with the resolved parameters.
pub fn validate(cfg: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    experiments::resolve_all(cfg)
}
