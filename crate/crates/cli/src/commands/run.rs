use std::path::PathBuf;
use std::sync::mpsc::sync_channel;
use std::time::{Duration, Instant};

use bias_core::pipeline::{FrameResult, StreamState};
use bias_core::{BiasError, FrameRGB};

use super::load_config;
use crate::error::{CliError, Result};
use crate::io::{EmitKind, FrameReader, MapFormat, OutputWriter};

/// Frames buffered between reader, engine and writer.
const QUEUE_DEPTH: usize = 4;

#[derive(Clone, Debug)]
pub struct RunArgs {
    pub input: String,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub set: Vec<String>,
    pub threads: Option<usize>,
    pub emit: Vec<EmitKind>,
    pub format: MapFormat,
    pub float_out: bool,
    pub dims: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub frames: usize,
    pub elapsed: Duration,
}

/// Decodes, processes and writes frames on three threads linked by bounded
/// queues; order is preserved end to end.
pub fn cmd_run(args: &RunArgs) -> Result<RunSummary> {
    let cfg = load_config(args.config.as_deref(), &args.set, args.threads)?;
    let reader = FrameReader::open(&args.input, args.dims)?;
    let mut writer = OutputWriter::new(&args.out, &args.emit, args.format, args.float_out)?;
    let mut state = StreamState::new(cfg)?;
    let start = Instant::now();

    let (frame_tx, frame_rx) = sync_channel::<Result<FrameRGB>>(QUEUE_DEPTH);
    let (result_tx, result_rx) = sync_channel::<FrameResult>(QUEUE_DEPTH);

    let (compute, written) = std::thread::scope(|scope| {
        scope.spawn(move || {
            for frame in reader {
                if frame_tx.send(frame).is_err() {
                    break;
                }
            }
        });
        let write = scope.spawn(move || -> Result<usize> {
            for r in result_rx {
                writer.write(&r)?;
            }
            writer.finish()
        });
        let compute = (|| -> Result<()> {
            for (index, frame) in frame_rx.into_iter().enumerate() {
                let frame = frame.map_err(|e| match e {
                    CliError::Engine(inner) => CliError::Engine(BiasError::Frame {
                        index,
                        source: Box::new(inner),
                    }),
                    other => other,
                })?;
                let r = state.process_frame(&frame)?;
                if result_tx.send(r).is_err() {
                    // the writer stopped early; its error is reported below
                    break;
                }
            }
            Ok(())
        })();
        drop(result_tx);
        let written = write.join().expect("writer thread panicked");
        (compute, written)
    });
    let written = written?;
    compute?;
    Ok(RunSummary {
        frames: written,
        elapsed: start.elapsed(),
    })
}
