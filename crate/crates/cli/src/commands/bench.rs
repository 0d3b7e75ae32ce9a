use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use bias_core::pipeline::{StageTimings, StreamState};
use bias_core::FrameRGB;
use serde::Serialize;

use super::load_config;
use crate::error::{CliError, Result};
use crate::io::FrameReader;
use crate::synth::moving_shapes;

#[derive(Clone, Debug)]
pub struct BenchArgs {
    /// Clip to replay; a synthetic moving-shapes clip when absent.
    pub input: Option<String>,
    pub frames: usize,
    pub repeat: usize,
    pub config: Option<PathBuf>,
    pub set: Vec<String>,
    pub threads: Option<usize>,
    pub width: usize,
    pub height: usize,
}

impl Default for BenchArgs {
    fn default() -> Self {
        Self {
            input: None,
            frames: 100,
            repeat: 1,
            config: None,
            set: Vec::new(),
            threads: None,
            width: 640,
            height: 480,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub repeat: usize,
    pub threads: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub mean_ms: f64,
    pub throughput_fps: f64,
    pub stage_p50_ms: BTreeMap<String, f64>,
}

/// Nearest-rank percentile of an unsorted sample, `q` in `[0, 1]`.
pub fn percentile(sample: &[f64], q: f64) -> f64 {
    if sample.is_empty() {
        return f64::NAN;
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = (q * s.len() as f64).ceil().max(1.0) as usize;
    s[rank.min(s.len()) - 1]
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Processes the clip `repeat` times, each pass with a fresh stream, and
/// reports per-frame end-to-end latency and per-stage medians.
pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport> {
    let cfg = load_config(args.config.as_deref(), &args.set, args.threads)?;
    let frames: Vec<FrameRGB> = match &args.input {
        Some(input) => FrameReader::open(input, Some((args.width, args.height)))?
            .take(args.frames)
            .collect::<Result<_>>()?,
        None => moving_shapes(args.width, args.height, args.frames),
    };
    if frames.is_empty() {
        return Err(CliError::Usage("bench needs at least one frame".into()));
    }
    let (width, height) = frames[0].dims();
    let mut totals = Vec::new();
    let mut stages: Vec<Vec<f64>> = vec![Vec::new(); StageTimings::STAGES.len()];
    let mut wall = Duration::ZERO;
    for _ in 0..args.repeat.max(1) {
        let mut state = StreamState::new(cfg.clone())?;
        let start = Instant::now();
        for f in &frames {
            let r = state.process_frame(f)?;
            totals.push(ms(r.timings.total));
            for (acc, d) in stages.iter_mut().zip(r.timings.as_array()) {
                acc.push(ms(d));
            }
        }
        wall += start.elapsed();
    }
    let stage_p50_ms = StageTimings::STAGES
        .iter()
        .zip(&stages)
        .map(|(name, v)| (name.to_string(), percentile(v, 0.5)))
        .collect();
    Ok(BenchReport {
        width,
        height,
        frames: frames.len(),
        repeat: args.repeat.max(1),
        threads: cfg.threads,
        p50_ms: percentile(&totals, 0.5),
        p95_ms: percentile(&totals, 0.95),
        mean_ms: totals.iter().sum::<f64>() / totals.len() as f64,
        throughput_fps: totals.len() as f64 / wall.as_secs_f64(),
        stage_p50_ms,
    })
}
