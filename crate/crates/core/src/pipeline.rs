//! Per-frame orchestration of the full saliency pipeline.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{BiasError, Result};
use crate::fixation::{apply_prior, center_prior, gwta, render_foci, EwmaState, GaussianFocus};
use crate::fusion::{master_saliency, normalize, static_saliency, ConspicuitySet};
use crate::map::{FrameRGB, GrayMap};
use crate::motion::{dynamic_saliency, FrameHistory};
use crate::pyramid::upsample_between;
use crate::static_channels::{static_features_from, ChannelPyramids, GaborBank};

/// Wall-clock time spent in each stage of one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub pyramids: Duration,
    pub static_features: Duration,
    pub conspicuity: Duration,
    pub motion: Duration,
    pub fusion: Duration,
    pub fixation: Duration,
    pub total: Duration,
}

impl StageTimings {
    pub const STAGES: [&'static str; 7] = [
        "pyramids",
        "static_features",
        "conspicuity",
        "motion",
        "fusion",
        "fixation",
        "total",
    ];

    pub fn as_array(&self) -> [Duration; 7] {
        [
            self.pyramids,
            self.static_features,
            self.conspicuity,
            self.motion,
            self.fusion,
            self.fixation,
            self.total,
        ]
    }
}

/// Everything produced for one frame. Maps are at frame resolution in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct FrameResult {
    pub frame_index: usize,
    pub static_map: GrayMap,
    pub dynamic_map: GrayMap,
    pub master_map: GrayMap,
    pub fixation_map: GrayMap,
    /// Foci in frame pixel coordinates, in fit order.
    pub foci: Vec<GaussianFocus>,
    /// True while no temporal offset is available yet.
    pub warm_up: bool,
    pub timings: StageTimings,
}

/// Mutable state of one video stream.
pub struct StreamState {
    cfg: PipelineConfig,
    pool: Arc<rayon::ThreadPool>,
    bank: GaborBank,
    history: FrameHistory,
    ewma: EwmaState,
    prior: Option<GrayMap>,
    dims: Option<(usize, usize)>,
    frame_index: usize,
}

impl StreamState {
    /// Validates `cfg` and starts a stream with its own worker pool.
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        let cfg = cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| BiasError::Pool(e.to_string()))?;
        Ok(Self::with_pool(cfg, Arc::new(pool)))
    }

    /// Shares an existing pool; `cfg` must already be valid.
    pub fn with_pool(cfg: PipelineConfig, pool: Arc<rayon::ThreadPool>) -> Self {
        Self {
            bank: GaborBank::new(cfg.pyramid_levels),
            history: FrameHistory::for_config(&cfg),
            ewma: EwmaState::new(),
            prior: None,
            dims: None,
            frame_index: 0,
            pool,
            cfg,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Index the next frame will get.
    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn history(&self) -> &FrameHistory {
        &self.history
    }

    pub fn process_frame(&mut self, frame: &FrameRGB) -> Result<FrameResult> {
        let index = self.frame_index;
        let pool = Arc::clone(&self.pool);
        let out = pool
            .install(|| self.run(frame))
            .map_err(|e| BiasError::Frame {
                index,
                source: Box::new(e),
            })?;
        self.frame_index += 1;
        Ok(out)
    }

    fn run(&mut self, frame: &FrameRGB) -> Result<FrameResult> {
        let dims = frame.dims();
        if let Some(d) = self.dims {
            if d != dims {
                return Err(BiasError::mismatch(d, dims));
            }
        }
        let cfg = &self.cfg;
        let (w, h) = dims;
        let acc = cfg.accumulation_scale();
        let start = Instant::now();
        let mut t = StageTimings::default();
        let mut lap = {
            let mut last = start;
            move || {
                let now = Instant::now();
                let d = now - last;
                last = now;
                d
            }
        };

        let pyr = ChannelPyramids::build(frame, cfg.pyramid_levels, cfg.max_surround())?;
        t.pyramids = lap();

        let features = static_features_from(&pyr, &self.bank, cfg)?;
        t.static_features = lap();

        let cons = ConspicuitySet::from_static(&features)?;
        let ss = static_saliency(&cons)?;
        t.conspicuity = lap();

        self.history.push(Arc::new(pyr.intensity.pos))?;
        self.dims = Some(dims);
        let dynamic = dynamic_saliency(&self.history, cfg)?;
        t.motion = lap();

        let s = master_saliency(&ss, &dynamic.map, cfg.fusion_weights)?;
        t.fusion = lap();

        let to_frame = |m: &GrayMap| upsample_between(m, acc, 0, w, h);
        let (foci, attended) = if cfg.enable_gwta {
            let (foci, _) = gwta(&s, &cfg.gwta)?;
            let factor = (1usize << acc) as f64;
            let foci: Vec<GaussianFocus> = foci.iter().map(|f| f.scaled(factor)).collect();
            let map = render_foci(&foci, w, h);
            (foci, map)
        } else {
            (Vec::new(), to_frame(&s)?)
        };
        let fixated = if cfg.enable_center_prior {
            let prior = self.prior.get_or_insert_with(|| center_prior(w, h));
            apply_prior(&attended, prior)?
        } else {
            attended
        };
        let fixation_map = if cfg.enable_ewma {
            self.ewma.step(&fixated, cfg.ewma_alpha)?
        } else {
            fixated
        };
        let static_map = to_frame(&normalize(&ss).rescaled_to_unit())?;
        let dynamic_map = to_frame(&normalize(&dynamic.map).rescaled_to_unit())?;
        let master_map = to_frame(&s)?;
        t.fixation = lap();
        t.total = start.elapsed();

        Ok(FrameResult {
            frame_index: self.frame_index,
            static_map,
            dynamic_map,
            master_map,
            fixation_map,
            foci,
            warm_up: dynamic.warm_up,
            timings: t,
        })
    }
}

/// Runs every frame of `source` in order. Source errors are reported with
/// the index of the frame that failed.
pub fn process_stream<I>(source: I, cfg: &PipelineConfig) -> Result<Vec<FrameResult>>
where
    I: IntoIterator<Item = Result<FrameRGB>>,
{
    let mut state = StreamState::new(cfg.clone())?;
    let mut out = Vec::new();
    for (index, frame) in source.into_iter().enumerate() {
        let frame = frame.map_err(|e| match e {
            e @ BiasError::Source { .. } => e,
            other => BiasError::Source {
                index,
                message: other.to_string(),
            },
        })?;
        out.push(state.process_frame(&frame)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FusionWeights;

    fn small_cfg() -> PipelineConfig {
        PipelineConfig {
            pyramid_levels: 6,
            center_scales: vec![1],
            deltas: vec![3],
            tau_set: vec![1, 3],
            threads: 2,
            ..PipelineConfig::default()
        }
    }

    fn dot_frame(t: usize) -> FrameRGB {
        FrameRGB::from_fn(128, 96, |x, y| {
            let (cx, cy) = (40 + 2 * t, 50);
            if x.abs_diff(cx) < 4 && y.abs_diff(cy) < 4 {
                [250.0, 20.0, 20.0]
            } else {
                [128.0, 128.0, 128.0]
            }
        })
        .unwrap()
    }

    #[test]
    fn empty_and_counted_streams() {
        let cfg = small_cfg();
        assert!(process_stream(Vec::<Result<FrameRGB>>::new(), &cfg).unwrap().is_empty());
        let res = process_stream((0..4).map(|t| Ok(dot_frame(t))), &cfg).unwrap();
        assert_eq!(res.iter().map(|r| r.frame_index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert!(res[0].warm_up && res[0].dynamic_map.is_zero());
        assert!(!res[1].warm_up && res[1].dynamic_map.max() > 0.0);
        for r in &res {
            for m in [&r.static_map, &r.dynamic_map, &r.master_map, &r.fixation_map] {
                assert_eq!(m.dims(), (128, 96));
                assert!(m.min() >= 0.0 && m.max() <= 1.0);
            }
            assert!(r.timings.total >= r.timings.pyramids);
        }
    }

    #[test]
    fn source_errors_carry_index() {
        let cfg = small_cfg();
        let src = vec![Ok(dot_frame(0)), Err(BiasError::Empty("x"))];
        match process_stream(src, &cfg) {
            Err(BiasError::Source { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_change_is_rejected() {
        let mut st = StreamState::new(small_cfg()).unwrap();
        st.process_frame(&dot_frame(0)).unwrap();
        let other = FrameRGB::uniform(96, 96, [1.0, 2.0, 3.0]).unwrap();
        let err = st.process_frame(&other).unwrap_err();
        assert!(matches!(err, BiasError::Frame { index: 1, .. }));
        assert_eq!(st.frame_index(), 1);
    }

    #[test]
    fn uniform_video_is_silent() {
        let cfg = small_cfg();
        let src = (0..3).map(|_| FrameRGB::uniform(128, 96, [128.0, 128.0, 128.0]));
        for r in process_stream(src, &cfg).unwrap() {
            assert!(r.master_map.is_zero());
            assert!(r.foci.is_empty());
            assert!(r.fixation_map.is_zero());
        }
    }

    #[test]
    fn ablation_switches() {
        let frames: Vec<FrameRGB> = (0..3).map(dot_frame).collect();
        let base = small_cfg();
        let full = process_stream(frames.iter().cloned().map(Ok), &base).unwrap();

        let no_ewma = PipelineConfig { enable_ewma: false, ..base.clone() };
        let no_prior_no_ewma = PipelineConfig { enable_center_prior: false, ..no_ewma.clone() };
        let a = process_stream(frames.iter().cloned().map(Ok), &no_prior_no_ewma).unwrap();
        for r in &a {
            assert_eq!(r.fixation_map, render_foci(&r.foci, 128, 96));
        }
        let b = process_stream(frames.iter().cloned().map(Ok), &no_ewma).unwrap();
        let prior = center_prior(128, 96);
        for (rb, ra) in b.iter().zip(&a) {
            assert_eq!(rb.fixation_map, apply_prior(&ra.fixation_map, &prior).unwrap());
        }
        assert_eq!(full[0].fixation_map, b[0].fixation_map);

        let no_gwta = PipelineConfig { enable_gwta: false, ..base.clone() };
        let c = process_stream(frames.iter().cloned().map(Ok), &no_gwta).unwrap();
        assert!(c.iter().all(|r| r.foci.is_empty()));
        let mut ewma = EwmaState::new();
        for r in &c {
            let want = ewma.step(&apply_prior(&r.master_map, &prior).unwrap(), base.ewma_alpha).unwrap();
            assert_eq!(r.fixation_map, want);
        }

        let static_only = PipelineConfig {
            fusion_weights: FusionWeights::new(0.0, 1.0, 0.0),
            ..base.clone()
        };
        let d = process_stream(frames.iter().cloned().map(Ok), &static_only).unwrap();
        for r in &d {
            assert_eq!(r.master_map, r.static_map);
        }
    }

    #[test]
    fn thread_count_invariance() {
        let frames: Vec<FrameRGB> = (0..4).map(dot_frame).collect();
        let runs: Vec<Vec<FrameResult>> = [1, 3]
            .iter()
            .map(|&n| {
                let cfg = PipelineConfig { threads: n, ..small_cfg() };
                process_stream(frames.iter().cloned().map(Ok), &cfg).unwrap()
            })
            .collect();
        for (a, b) in runs[0].iter().zip(&runs[1]) {
            assert_eq!(a.master_map, b.master_map);
            assert_eq!(a.fixation_map, b.fixation_map);
            assert_eq!(a.foci, b.foci);
        }
    }
}
