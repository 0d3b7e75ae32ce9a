use std::path::PathBuf;

use bias_core::metrics::{evaluate_frame, FixationGroundTruth, FrameRecord, MetricReport};
use bias_core::pyramid::resize_to;
use rayon::prelude::*;

use super::{build_pool, resolve_threads};
use crate::dataset::{DatasetLayout, FrameFixations};
use crate::error::{CliError, Result};
use crate::io::read_map;

#[derive(Clone, Debug)]
pub struct EvalArgs {
    pub pred: PathBuf,
    pub gt: PathBuf,
    pub seed: u64,
    pub permutations: usize,
    pub threads: Option<usize>,
}

struct VideoData {
    name: String,
    preds: Vec<PathBuf>,
    fixations: Vec<FrameFixations>,
    density: Option<Vec<PathBuf>>,
}

struct Job {
    video: usize,
    frame: usize,
    global: usize,
}

/// Fixations of `videos` other than `skip` (or, with a single video, of the
/// other frames of `frame`'s video), as fractions of their frame size.
fn pool_fractions(videos: &[VideoData], skip: usize, frame: usize, pred_dims: &[(usize, usize)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let single = videos.len() == 1;
    for (vi, v) in videos.iter().enumerate() {
        if vi == skip && !single {
            continue;
        }
        for (fi, f) in v.fixations.iter().enumerate() {
            if single && fi == frame {
                continue;
            }
            let (w, h) = f.dims.unwrap_or(pred_dims[vi]);
            out.extend(f.points.iter().map(|&(x, y)| ((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64)));
        }
    }
    out
}

fn to_pixels(fractions: &[(f64, f64)], w: usize, h: usize) -> Vec<(usize, usize)> {
    fractions
        .iter()
        .map(|&(fx, fy)| {
            (
                ((fx * w as f64) as usize).min(w - 1),
                ((fy * h as f64) as usize).min(h - 1),
            )
        })
        .collect()
}

/// Scores every prediction frame that has at least one fixation. Frames are
/// scored in parallel; each draws its shuffled-AUC negatives from a
/// generator seeded with `seed ^ global_frame_index`, so the report does not
/// depend on the thread count.
pub fn cmd_eval(args: &EvalArgs) -> Result<MetricReport> {
    let layout = DatasetLayout::discover(&args.gt)?;
    let mut videos = Vec::new();
    for v in &layout.videos {
        let preds = v.prediction_paths(&args.pred, layout.single)?;
        let fixations = v.load_fixations()?;
        if let Some(d) = &v.density_maps {
            if d.len() != preds.len() {
                return Err(CliError::dataset(
                    &v.dir,
                    format!("{} density maps for {} predictions", d.len(), preds.len()),
                ));
            }
        }
        if fixations.len() > preds.len() {
            return Err(CliError::dataset(
                &v.dir,
                format!("fixations for {} frames but {} predictions", fixations.len(), preds.len()),
            ));
        }
        videos.push(VideoData {
            name: v.name.clone(),
            preds,
            fixations,
            density: v.density_maps.clone(),
        });
    }
    // frame size per video, from its first prediction
    let pred_dims: Vec<(usize, usize)> = videos
        .iter()
        .map(|v| read_map(&v.preds[0]).map(|m| m.dims()))
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    let mut global = 0;
    for (vi, v) in videos.iter().enumerate() {
        for fi in 0..v.preds.len() {
            if v.fixations.get(fi).is_some_and(|f| !f.points.is_empty()) {
                jobs.push(Job { video: vi, frame: fi, global });
            }
            global += 1;
        }
    }
    let shared_pools: Vec<Option<Vec<(f64, f64)>>> = (0..videos.len())
        .map(|vi| (videos.len() > 1).then(|| pool_fractions(&videos, vi, usize::MAX, &pred_dims)))
        .collect();

    let threads = resolve_threads(args.threads)?.unwrap_or(1).max(1);
    let pool = build_pool(threads)?;
    let records: Vec<FrameRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let v = &videos[job.video];
                let fix = &v.fixations[job.frame];
                let mut pred = read_map(&v.preds[job.frame])?;
                let (w, h) = fix.dims.unwrap_or(pred.dims());
                if pred.dims() != (w, h) {
                    pred = resize_to(&pred, w, h)?;
                }
                let mut gt = FixationGroundTruth::new(w, h, fix.points.clone())?;
                if let Some(d) = &v.density {
                    let mut dens = read_map(&d[job.frame])?;
                    if dens.dims() != (w, h) {
                        dens = resize_to(&dens, w, h)?;
                    }
                    gt = gt.with_density(dens)?;
                }
                let fractions = match &shared_pools[job.video] {
                    Some(p) => std::borrow::Cow::Borrowed(p),
                    None => std::borrow::Cow::Owned(pool_fractions(&videos, job.video, job.frame, &pred_dims)),
                };
                if fractions.is_empty() {
                    return Err(CliError::dataset(&args.gt, "shuffled AUC needs fixations from other videos or frames"));
                }
                let negatives = to_pixels(&fractions, w, h);
                let metrics = evaluate_frame(&pred, &gt, &negatives, args.permutations, args.seed ^ job.global as u64)?;
                Ok(FrameRecord {
                    video: v.name.clone(),
                    frame: job.frame,
                    metrics,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(MetricReport::aggregate(records, args.seed, args.permutations))
}
