use std::path::PathBuf;
use std::process::ExitCode;

use bias_cli::commands::{cmd_bench, cmd_eval, cmd_run, BenchArgs, EvalArgs, RunArgs};
use bias_cli::io::{EmitKind, MapFormat};
use bias_cli::{CliError, Result};
use bias_core::metrics::DEFAULT_PERMUTATIONS;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bias", version, about = "Bottom-up video saliency engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EngineArgs {
    /// Flat TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set center_scales=[2,3]
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (falls back to BIAS_THREADS, then the config)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Process a clip and write saliency maps, foci and timings
    Run {
        /// Frame directory, raw RGB24 file, or - for raw RGB24 on stdin
        #[arg(long)]
        input: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Comma list of saliency, static, dynamic, fixation, foci, timing, all
        #[arg(long, default_value = "saliency")]
        emit: String,
        /// Image format of emitted maps: png or pgm
        #[arg(long, default_value = "png")]
        format: String,
        /// Write maps as 32-bit PFM instead of 8-bit images
        #[arg(long)]
        float_out: bool,
        /// Frame width for raw input
        #[arg(long)]
        width: Option<usize>,
        /// Frame height for raw input
        #[arg(long)]
        height: Option<usize>,
    },
    /// Score predicted maps against fixation ground truth
    Eval {
        /// Prediction root: one directory of maps per video
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth root
        #[arg(long)]
        gt: PathBuf,
        /// Shuffled-AUC seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
        permutations: usize,
        #[arg(long)]
        threads: Option<usize>,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure per-frame latency on a synthetic or provided clip
    Bench {
        /// Clip to replay instead of the synthetic one
        #[arg(long)]
        input: Option<String>,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 640)]
        width: usize,
        #[arg(long, default_value_t = 480)]
        height: usize,
        /// Write the JSON report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit_json(value: &impl serde::Serialize, out: Option<&PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| CliError::io(p, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { input, out, engine, emit, format, float_out, width, height } => {
            let dims = match (width, height) {
                (Some(w), Some(h)) => Some((w, h)),
                (None, None) => None,
                _ => return Err(CliError::Usage("--width and --height go together".into())),
            };
            let args = RunArgs {
                input,
                out,
                config: engine.config,
                set: engine.set,
                threads: engine.threads,
                emit: EmitKind::parse_list(&emit)?,
                format: format.parse::<MapFormat>()?,
                float_out,
                dims,
            };
            let s = cmd_run(&args)?;
            eprintln!("processed {} frames in {:.3} s", s.frames, s.elapsed.as_secs_f64());
            Ok(())
        }
        Command::Eval { pred, gt, seed, permutations, threads, out } => {
            let report = cmd_eval(&EvalArgs { pred, gt, seed, permutations, threads })?;
            emit_json(&report, out.as_ref())
        }
        Command::Bench { input, frames, repeat, engine, width, height, out } => {
            let report = cmd_bench(&BenchArgs {
                input,
                frames,
                repeat,
                config: engine.config,
                set: engine.set,
                threads: engine.threads,
                width,
                height,
            })?;
            emit_json(&report, out.as_ref())
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
