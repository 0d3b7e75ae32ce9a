//! Direction-selective motion detection and the dynamic saliency map.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{BiasError, Result};
use crate::fusion::normalize;
use crate::map::GrayMap;
use crate::pyramid::Pyramid;
use crate::static_channels::{rectified_opponent, to_accumulation};

/// Intensity scale applied before the detector's exponentials.
const INTENSITY_RANGE: f64 = 255.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Left, Direction::Right, Direction::Up, Direction::Down];

    pub fn opposite(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }

    /// Unit displacement `(dx, dy)`; y grows downwards.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
        }
    }
}

/// Translates `map` one pixel along `d`; the vacated border repeats the edge.
pub fn shift_one(map: &GrayMap, d: Direction) -> GrayMap {
    let (dx, dy) = d.offset();
    GrayMap::from_fn(map.width(), map.height(), |x, y| {
        map.get_clamped(x as isize - dx, y as isize - dy)
    })
}

/// Detector outputs for `d` and its opposite from one pass over the operands.
fn hr_pair(now: &GrayMap, delayed: &GrayMap, d: Direction) -> Result<(GrayMap, GrayMap)> {
    now.ensure_same_dims(delayed)?;
    let (dx, dy) = d.offset();
    let (w, h) = now.dims();
    let mut fwd = vec![0.0; w * h];
    let mut bwd = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let v = now.get(x, y);
            let along = (-(v - delayed.get_clamped(xi - dx, yi - dy)).abs()).exp();
            let against = (-(v - delayed.get_clamped(xi + dx, yi + dy)).abs()).exp();
            let diff = along - against;
            fwd[y * w + x] = diff.max(0.0);
            bwd[y * w + x] = (-diff).max(0.0);
        }
    }
    Ok((GrayMap::from_vec(w, h, fwd)?, GrayMap::from_vec(w, h, bwd)?))
}

/// `M = max(0, exp(−|now − shift(delayed, D)|) − exp(−|now − shift(delayed, −D)|))`
/// on operands already scaled to `[0, 1]`.
pub fn hr_response(now: &GrayMap, delayed: &GrayMap, d: Direction) -> Result<GrayMap> {
    hr_pair(now, delayed, d).map(|(fwd, _)| fwd)
}

/// Ring of past intensity pyramids, newest last.
#[derive(Clone, Debug)]
pub struct FrameHistory {
    capacity: usize,
    slots: VecDeque<Arc<Pyramid>>,
    shape: Option<Vec<(usize, usize)>>,
    pushed: u64,
}

impl FrameHistory {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            capacity,
            slots: VecDeque::with_capacity(capacity),
            shape: None,
            pushed: 0,
        }
    }

    /// Deep enough for the largest configured offset.
    pub fn for_config(cfg: &PipelineConfig) -> Self {
        Self::new(cfg.max_tau() + 1)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total frames pushed since creation.
    pub fn frames_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, pyramid: impl Into<Arc<Pyramid>>) -> Result<()> {
        let pyramid = pyramid.into();
        let shape = pyramid.shape();
        match &self.shape {
            Some(expected) if *expected != shape => {
                let got = pyramid.base_dims();
                let want = expected.first().copied().unwrap_or((0, 0));
                if want == got {
                    return Err(BiasError::MissingScale {
                        scale: shape.len().min(expected.len()),
                        depth: shape.len().saturating_sub(1),
                    });
                }
                return Err(BiasError::mismatch(want, got));
            }
            Some(_) => {}
            None => self.shape = Some(shape),
        }
        if self.slots.len() == self.capacity {
            self.slots.pop_front();
        }
        self.slots.push_back(pyramid);
        self.pushed += 1;
        Ok(())
    }

    /// The pyramid pushed `tau` frames before the newest one.
    pub fn get(&self, tau: usize) -> Result<&Pyramid> {
        let n = self.slots.len();
        if tau >= n {
            return Err(BiasError::HistoryUnavailable { tau, available: n });
        }
        Ok(&self.slots[n - 1 - tau])
    }

    pub fn latest(&self) -> Result<&Pyramid> {
        self.get(0).map_err(|_| BiasError::Empty("frame history"))
    }

    /// Entries of `taus` that can be looked up now, in the given order.
    pub fn available_taus(&self, taus: &[usize]) -> Vec<usize> {
        taus.iter().copied().filter(|&t| t < self.slots.len()).collect()
    }
}

/// Detector outputs keyed by `(scale, direction, τ)`.
#[derive(Clone, Debug, Default)]
pub struct MotionStack {
    maps: BTreeMap<(usize, Direction, usize), GrayMap>,
}

impl MotionStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, scale: usize, d: Direction, tau: usize, map: GrayMap) {
        self.maps.insert((scale, d, tau), map);
    }

    pub fn get(&self, scale: usize, d: Direction, tau: usize) -> Result<&GrayMap> {
        self.maps.get(&(scale, d, tau)).ok_or(BiasError::MissingScale {
            scale,
            depth: self.maps.keys().map(|k| k.0).max().unwrap_or(0),
        })
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Runs the detector at each of `scales` for each of `taus`, all four
    /// directions.
    pub fn from_history(history: &FrameHistory, scales: &[usize], taus: &[usize]) -> Result<Self> {
        let now = history.latest()?;
        let mut jobs = Vec::new();
        for &tau in taus {
            let delayed = history.get(tau)?;
            for &scale in scales {
                for d in [Direction::Right, Direction::Down] {
                    jobs.push((scale, d, tau, now.level(scale)?, delayed.level(scale)?));
                }
            }
        }
        let outs = jobs
            .par_iter()
            .map(|&(_, d, _, a, b)| {
                let a = a.map(|v| v / INTENSITY_RANGE);
                let b = b.map(|v| v / INTENSITY_RANGE);
                hr_pair(&a, &b, d)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut stack = Self::new();
        for ((scale, d, tau, _, _), (fwd, bwd)) in jobs.into_iter().zip(outs) {
            stack.insert(scale, d, tau, fwd);
            stack.insert(scale, d.opposite(), tau, bwd);
        }
        Ok(stack)
    }
}

/// `(M+(c,s), M−(c,s))`: rectified center–surround opponency of the pair
/// `(M(D), M(−D))`.
pub fn motion_feature_maps(
    stack: &MotionStack,
    c: usize,
    s: usize,
    d: Direction,
    tau: usize,
) -> Result<(GrayMap, GrayMap)> {
    if s <= c {
        return Err(BiasError::InvalidScalePair { center: c, surround: s });
    }
    rectified_opponent(
        stack.get(c, d, tau)?,
        stack.get(c, d.opposite(), tau)?,
        stack.get(s, d, tau)?,
        stack.get(s, d.opposite(), tau)?,
        c,
        s,
    )
}

/// `M̄(τ) = ½ ⊕_c ⊕_s ⊕_D (N(M+) + N(M−))` at the accumulation scale.
pub fn dynamic_conspicuity(stack: &MotionStack, cfg: &PipelineConfig, tau: usize) -> Result<GrayMap> {
    let acc = cfg.accumulation_scale();
    let dims = stack.get(acc, Direction::Right, tau)?.dims();
    let mut jobs = Vec::new();
    for (c, s) in cfg.scale_pairs() {
        for d in Direction::ALL {
            jobs.push((c, s, d));
        }
    }
    let parts = jobs
        .par_iter()
        .map(|&(c, s, d)| {
            let (pos, neg) = motion_feature_maps(stack, c, s, d, tau)?;
            let mut sum = normalize(&pos);
            sum.add_assign(&normalize(&neg))?;
            to_accumulation(&sum, c, acc, dims)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = GrayMap::zeros(dims.0, dims.1);
    for p in &parts {
        out.add_assign(p)?;
    }
    Ok(out.map(|v| 0.5 * v))
}

/// `DS = Σ_τ γ^(τ−1) · N(M̄(τ))` over pre-computed conspicuities.
pub fn combine_dynamic(conspicuities: &[(usize, GrayMap)], gamma: f64) -> Result<Option<GrayMap>> {
    let mut out: Option<GrayMap> = None;
    for (tau, m) in conspicuities {
        let weight = gamma.powi(*tau as i32 - 1);
        let term = normalize(m);
        match out.as_mut() {
            Some(acc) => acc.add_scaled(&term, weight)?,
            None => out = Some(term.scale(weight)),
        }
    }
    Ok(out)
}

/// Dynamic saliency of the newest frame in a history.
#[derive(Clone, Debug)]
pub struct DynamicSaliency {
    /// DS at the accumulation scale.
    pub map: GrayMap,
    /// `(τ, M̄(τ))` for every offset that contributed, in configured order.
    pub conspicuity: Vec<(usize, GrayMap)>,
    /// True when no offset was available yet and `map` is all zero.
    pub warm_up: bool,
}

impl DynamicSaliency {
    pub fn taus_used(&self) -> Vec<usize> {
        self.conspicuity.iter().map(|(t, _)| *t).collect()
    }
}

/// Offsets not yet covered by the history are left out of the sum.
pub fn dynamic_saliency(history: &FrameHistory, cfg: &PipelineConfig) -> Result<DynamicSaliency> {
    let latest = history.latest()?;
    let acc = cfg.accumulation_scale();
    let dims = latest.level(acc)?.dims();
    let taus = history.available_taus(&cfg.tau_set);
    if taus.is_empty() {
        return Ok(DynamicSaliency {
            map: GrayMap::zeros(dims.0, dims.1),
            conspicuity: Vec::new(),
            warm_up: true,
        });
    }
    let mut scales: Vec<usize> = cfg.scale_pairs().into_iter().flat_map(|(c, s)| [c, s]).collect();
    scales.sort_unstable();
    scales.dedup();
    let stack = MotionStack::from_history(history, &scales, &taus)?;
    let conspicuity = taus
        .par_iter()
        .map(|&tau| dynamic_conspicuity(&stack, cfg, tau).map(|m| (tau, m)))
        .collect::<Result<Vec<_>>>()?;
    let map = combine_dynamic(&conspicuity, cfg.gamma)?.unwrap_or_else(|| GrayMap::zeros(dims.0, dims.1));
    Ok(DynamicSaliency {
        map,
        conspicuity,
        warm_up: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyramid::{build_pyramid, upsample_between};
    use proptest::prelude::*;

    fn const_pyramid(v: f64, w: usize, h: usize, levels: usize) -> Pyramid {
        build_pyramid(GrayMap::filled(w, h, v), levels).unwrap()
    }

    fn tagged_pyramid(tag: f64) -> Pyramid {
        const_pyramid(tag, 16, 16, 2)
    }

    #[test]
    fn history_ring_arithmetic() {
        let mut h = FrameHistory::new(16);
        h.push(tagged_pyramid(1.0)).unwrap();
        assert!(matches!(h.get(1), Err(BiasError::HistoryUnavailable { tau: 1, available: 1 })));
        for k in 2..=16 {
            h.push(tagged_pyramid(k as f64)).unwrap();
        }
        assert_eq!(h.get(15).unwrap().level(0).unwrap().get(0, 0), 1.0);
        h.push(tagged_pyramid(17.0)).unwrap();
        assert_eq!(h.len(), 16);
        assert_eq!(h.get(15).unwrap().level(0).unwrap().get(0, 0), 2.0);
        assert_eq!(h.get(0).unwrap().level(0).unwrap().get(0, 0), 17.0);
        assert_eq!(h.frames_pushed(), 17);
    }

    #[test]
    fn history_rejects_schema_change() {
        let mut h = FrameHistory::new(4);
        h.push(tagged_pyramid(1.0)).unwrap();
        assert!(matches!(
            h.push(const_pyramid(1.0, 32, 16, 2)),
            Err(BiasError::DimensionMismatch { .. })
        ));
        assert!(h.push(const_pyramid(1.0, 16, 16, 3)).is_err());
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn shift_examples() {
        let c = GrayMap::filled(6, 5, 3.5);
        assert_eq!(shift_one(&c, Direction::Up), c);

        let mut imp = GrayMap::zeros(7, 7);
        imp.set(3, 2, 1.0);
        let r = shift_one(&imp, Direction::Right);
        assert_eq!(r.get(4, 2), 1.0);
        assert_eq!(r.sum(), 1.0);
        assert_eq!(shift_one(&imp, Direction::Down).get(3, 3), 1.0);

        let m = GrayMap::from_fn(8, 5, |x, y| (x * 7 + y * 3) as f64);
        let back = shift_one(&shift_one(&m, Direction::Left), Direction::Right);
        for y in 0..5 {
            for x in 1..7 {
                assert_eq!(back.get(x, y), m.get(x, y));
            }
        }
    }

    #[test]
    fn detector_on_constants_is_zero() {
        let c = GrayMap::filled(9, 9, 0.4);
        for d in Direction::ALL {
            assert!(hr_response(&c, &c, d).unwrap().is_zero());
        }
        assert!(hr_response(&c, &GrayMap::zeros(3, 3), Direction::Left).is_err());
    }

    #[test]
    fn moving_pixel_brute_force() {
        let mut delayed = GrayMap::zeros(5, 5);
        let mut now = GrayMap::zeros(5, 5);
        delayed.set(1, 2, 1.0);
        now.set(2, 2, 1.0);
        let right = hr_response(&now, &delayed, Direction::Right).unwrap();
        let left = hr_response(&now, &delayed, Direction::Left).unwrap();
        // brute force at the current position: shifted-right delayed matches exactly
        let want = 1.0 - (-1.0f64).exp();
        assert!((right.get(2, 2) - want).abs() < 1e-15);
        assert_eq!(left.get(2, 2), 0.0);
        for (a, b) in right.data().iter().zip(left.data()) {
            assert_eq!(a * b, 0.0);
        }
    }

    #[test]
    fn static_edge_halves_never_overlap() {
        let edge = GrayMap::from_fn(10, 6, |x, _| if x < 5 { 0.1 } else { 0.9 });
        let r = hr_response(&edge, &edge, Direction::Right).unwrap();
        let l = hr_response(&edge, &edge, Direction::Left).unwrap();
        for (a, b) in r.data().iter().zip(l.data()) {
            assert_eq!(a * b, 0.0);
        }
    }

    fn stack_from(f: impl Fn(usize, Direction) -> GrayMap) -> MotionStack {
        let mut st = MotionStack::new();
        for scale in [2usize, 6] {
            for d in Direction::ALL {
                st.insert(scale, d, 1, f(scale, d));
            }
        }
        st
    }

    fn dims_at(scale: usize) -> (usize, usize) {
        crate::pyramid::level_dims(256, 192, scale)
    }

    #[test]
    fn feature_map_examples() {
        let zero = stack_from(|s, _| {
            let (w, h) = dims_at(s);
            GrayMap::zeros(w, h)
        });
        let (p, n) = motion_feature_maps(&zero, 2, 6, Direction::Right, 1).unwrap();
        assert!(p.is_zero() && n.is_zero());

        let k = 0.3;
        let st = stack_from(|s, d| {
            let (w, h) = dims_at(s);
            GrayMap::filled(w, h, if d == Direction::Right { k } else { 0.0 })
        });
        let (p, n) = motion_feature_maps(&st, 2, 6, Direction::Right, 1).unwrap();
        assert!(p.data().iter().all(|&v| (v - 2.0 * k).abs() < 1e-15));
        assert!(n.is_zero());
        assert!(motion_feature_maps(&st, 2, 4, Direction::Right, 1).is_err());
        assert!(motion_feature_maps(&st, 6, 2, Direction::Right, 1).is_err());
    }

    #[test]
    fn feature_map_composition_oracle() {
        let blob = |s: usize, cx: f64| {
            let (w, h) = dims_at(s);
            let f = (1u64 << s) as f64;
            GrayMap::from_fn(w, h, move |x, y| {
                let (dx, dy) = (x as f64 * f - cx, y as f64 * f - 96.0);
                (-(dx * dx + dy * dy) / 200.0).exp()
            })
        };
        let st = stack_from(|s, d| match d {
            Direction::Right => blob(s, 100.0),
            Direction::Left => blob(s, 180.0).scale(0.5),
            _ => GrayMap::zeros(dims_at(s).0, dims_at(s).1),
        });
        let (p, n) = motion_feature_maps(&st, 2, 6, Direction::Right, 1).unwrap();
        let (w, h) = dims_at(2);
        let center = blob(2, 100.0).zip_map(&blob(2, 180.0).scale(0.5), |a, b| a - b).unwrap();
        let surround = blob(6, 180.0).scale(0.5).zip_map(&blob(6, 100.0), |a, b| a - b).unwrap();
        let up = upsample_between(&surround, 6, 2, w, h).unwrap();
        for i in 0..p.len() {
            let a = center.data()[i] - up.data()[i];
            assert!((p.data()[i] - a.max(0.0)).abs() < 1e-12);
            assert!((n.data()[i] - (-a).max(0.0)).abs() < 1e-12);
        }
        assert_eq!(p.argmax(), (25, 24));
    }

    fn cfg_single(taus: Vec<usize>) -> PipelineConfig {
        PipelineConfig {
            tau_set: taus,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn conspicuity_collapse_and_linearity() {
        let cfg = cfg_single(vec![1]);
        let zero = stack_from(|s, _| GrayMap::zeros(dims_at(s).0, dims_at(s).1));
        assert!(dynamic_conspicuity(&zero, &cfg, 1).unwrap().is_zero());

        // only M(right) at the center scale is nonzero; only M+(right) and
        // M−(left) fire, and they are the same map
        let spot = {
            let (w, h) = dims_at(2);
            let mut m = GrayMap::zeros(w, h);
            m.set(20, 10, 0.7);
            m.set(40, 30, 0.2);
            m
        };
        let one = stack_from(|s, d| {
            if s == 2 && d == Direction::Right {
                spot.clone()
            } else {
                GrayMap::zeros(dims_at(s).0, dims_at(s).1)
            }
        });
        let got = dynamic_conspicuity(&one, &cfg, 1).unwrap();
        assert_eq!(got, normalize(&spot));

        let mut two = one.clone();
        let mut spot2 = spot.clone();
        spot2.set(5, 40, 0.01);
        two.insert(2, Direction::Up, 1, spot2.clone());
        let got2 = dynamic_conspicuity(&two, &cfg, 1).unwrap();
        let mut want = normalize(&spot);
        want.add_assign(&normalize(&spot2)).unwrap();
        for (a, b) in got2.data().iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut dbl = one.clone();
        dbl.insert(2, Direction::Up, 1, spot.clone());
        let got3 = dynamic_conspicuity(&dbl, &cfg, 1).unwrap();
        assert_eq!(got3, got.scale(2.0));
    }

    #[test]
    fn weighted_sum_over_offsets() {
        let a = GrayMap::from_fn(12, 9, |x, y| ((x * 5 + y * 11) % 7) as f64);
        let b = GrayMap::from_fn(12, 9, |x, y| ((x * 3 + y) % 5) as f64);
        let ds = combine_dynamic(&[(1, a.clone()), (3, b.clone())], 0.8).unwrap().unwrap();
        let (na, nb) = (normalize(&a), normalize(&b));
        for i in 0..ds.len() {
            let want = na.data()[i] + 0.64 * nb.data()[i];
            assert!((ds.data()[i] - want).abs() < 1e-6);
        }
        let single = combine_dynamic(&[(1, a.clone())], 0.8).unwrap().unwrap();
        assert_eq!(single, na);
        assert!(combine_dynamic(&[], 0.8).unwrap().is_none());
    }

    fn frame_pyramid(t: usize, offset: f64) -> Pyramid {
        let base = GrayMap::from_fn(256, 256, |x, y| {
            let v = ((x + 256 - t) % 256) as f64 * 0.25 + (y % 16) as f64 * 2.0;
            (v + offset).min(255.0)
        });
        build_pyramid(base, 8).unwrap()
    }

    #[test]
    fn warm_up_and_uniform_sequences() {
        let cfg = PipelineConfig::default();
        let mut h = FrameHistory::for_config(&cfg);
        assert_eq!(h.capacity(), 16);
        h.push(const_pyramid(90.0, 256, 256, 8)).unwrap();
        let ds = dynamic_saliency(&h, &cfg).unwrap();
        assert!(ds.warm_up && ds.map.is_zero());
        assert_eq!(ds.map.dims(), (64, 64));
        for _ in 0..5 {
            h.push(const_pyramid(90.0, 256, 256, 8)).unwrap();
        }
        let ds = dynamic_saliency(&h, &cfg).unwrap();
        assert!(!ds.warm_up && ds.map.is_zero());
        assert_eq!(ds.taus_used(), vec![1, 3]);
    }

    #[test]
    fn invariant_to_constant_offset() {
        let cfg = cfg_single(vec![1, 3]);
        let mut h0 = FrameHistory::for_config(&cfg);
        let mut h1 = FrameHistory::for_config(&cfg);
        for t in 0..5 {
            h0.push(frame_pyramid(t, 0.0)).unwrap();
            h1.push(frame_pyramid(t, 40.0)).unwrap();
        }
        let a = dynamic_saliency(&h0, &cfg).unwrap().map;
        let b = dynamic_saliency(&h1, &cfg).unwrap().map;
        assert!(a.max() > 0.0);
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() <= 1e-6 * a.max());
        }
    }

    proptest! {
        #[test]
        fn opposite_directions_are_exclusive(seed in any::<u64>(), w in 2usize..20, h in 2usize..20) {
            let mut s = seed | 1;
            let mut next = || { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s >> 11) as f64 / (1u64 << 53) as f64 };
            let now = GrayMap::from_fn(w, h, |_, _| next());
            let del = GrayMap::from_fn(w, h, |_, _| next());
            for d in [Direction::Right, Direction::Down] {
                let a = hr_response(&now, &del, d).unwrap();
                let b = hr_response(&now, &del, d.opposite()).unwrap();
                for (x, y) in a.data().iter().zip(b.data()) {
                    prop_assert_eq!(x * y, 0.0);
                    prop_assert!(*x >= 0.0 && *y >= 0.0);
                }
            }
        }
    }
}
