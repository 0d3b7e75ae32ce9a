//! Subcommand implementations.

mod bench;
mod eval;
mod run;

use std::path::Path;

use bias_core::PipelineConfig;

use crate::error::{CliError, Result};

pub use bench::{cmd_bench, percentile, BenchArgs, BenchReport};
pub use eval::{cmd_eval, EvalArgs};
pub use run::{cmd_run, RunArgs, RunSummary};

/// Environment fallback for the worker count.
pub const THREADS_ENV: &str = "BIAS_THREADS";

/// Config file (if any), then `--set` overrides, then the thread count from
/// `--threads` or the environment. The result is validated.
pub fn load_config(path: Option<&Path>, sets: &[String], threads: Option<usize>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            PipelineConfig::from_toml_str(&text)?
        }
        None => PipelineConfig::default(),
    };
    for s in sets {
        cfg = cfg.apply_override(s)?;
    }
    if let Some(n) = resolve_threads(threads)? {
        cfg.threads = n;
    }
    Ok(cfg.validate()?)
}

pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}='{v}' is not a positive integer"))),
        _ => Ok(None),
    }
}

fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Engine(bias_core::BiasError::Pool(e.to_string())))
}
