//! Fixation-prediction metrics: NSS, CC, SIM, AUC-Judd and shuffled AUC.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{BiasError, Result};
use crate::map::GrayMap;

/// Default number of shuffled-AUC rounds.
pub const DEFAULT_PERMUTATIONS: usize = 100;

/// Fixated pixels of one frame, plus an optional density map.
#[derive(Clone, Debug, PartialEq)]
pub struct FixationGroundTruth {
    width: usize,
    height: usize,
    points: Vec<(usize, usize)>,
    density: Option<GrayMap>,
}

impl FixationGroundTruth {
    pub fn new(width: usize, height: usize, points: Vec<(usize, usize)>) -> Result<Self> {
        for &(x, y) in &points {
            if x >= width || y >= height {
                return Err(BiasError::FixationOutOfBounds { x, y, width, height });
            }
        }
        Ok(Self {
            width,
            height,
            points,
            density: None,
        })
    }

    /// Every nonzero pixel of a binary fixation map is a fixation.
    pub fn from_fixation_map(map: &GrayMap) -> Self {
        let (w, h) = map.dims();
        let points = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| map.get(x, y) != 0.0)
            .collect();
        Self {
            width: w,
            height: h,
            points,
            density: None,
        }
    }

    /// Attaches a density map, rescaled to unit sum.
    pub fn with_density(mut self, density: GrayMap) -> Result<Self> {
        if density.dims() != (self.width, self.height) {
            return Err(BiasError::mismatch((self.width, self.height), density.dims()));
        }
        let total = density.sum();
        if !(total > 0.0) || density.min() < 0.0 {
            return Err(BiasError::ZeroMap("density map"));
        }
        self.density = Some(density.map(|v| v / total));
        Ok(self)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn density(&self) -> Option<&GrayMap> {
        self.density.as_ref()
    }

    /// Fixated pixels without repeats, in raster order.
    pub fn distinct_points(&self) -> Vec<(usize, usize)> {
        let mut p: Vec<(usize, usize)> = self.points.iter().map(|&(x, y)| (y, x)).collect();
        p.sort_unstable();
        p.dedup();
        p.into_iter().map(|(y, x)| (x, y)).collect()
    }

    /// The attached density, or one blurred from the points with `σ = W/32`.
    pub fn density_or_synthesized(&self) -> Result<GrayMap> {
        match &self.density {
            Some(d) => Ok(d.clone()),
            None => density_from_fixations(self.width, self.height, &self.points, self.width as f64 / 32.0),
        }
    }

    fn check(&self, pred: &GrayMap) -> Result<Vec<(usize, usize)>> {
        if pred.dims() != (self.width, self.height) {
            return Err(BiasError::mismatch((self.width, self.height), pred.dims()));
        }
        let pts = self.distinct_points();
        if pts.is_empty() {
            return Err(BiasError::Empty("fixations"));
        }
        Ok(pts)
    }
}

/// Sum of isotropic Gaussians of width `sigma` at each point, scaled to
/// unit sum.
pub fn density_from_fixations(
    width: usize,
    height: usize,
    points: &[(usize, usize)],
    sigma: f64,
) -> Result<GrayMap> {
    if points.is_empty() {
        return Err(BiasError::Empty("fixations"));
    }
    let mut out = GrayMap::zeros(width, height);
    for &(px, py) in points {
        let gx: Vec<f64> = (0..width)
            .map(|x| (-0.5 * ((x as f64 - px as f64) / sigma).powi(2)).exp())
            .collect();
        for y in 0..height {
            let wy = (-0.5 * ((y as f64 - py as f64) / sigma).powi(2)).exp();
            let row = &mut out.data_mut()[y * width..(y + 1) * width];
            for (v, g) in row.iter_mut().zip(&gx) {
                *v += wy * g;
            }
        }
    }
    let total = out.sum();
    Ok(out.map(|v| v / total))
}

fn mean_std(data: &[f64]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Normalized scanpath saliency; 0 for a map without variance.
pub fn nss(pred: &GrayMap, fix: &FixationGroundTruth) -> Result<f64> {
    let pts = fix.check(pred)?;
    let (mean, std) = mean_std(pred.data());
    if !(std > 0.0) {
        return Ok(0.0);
    }
    let total: f64 = pts.iter().map(|&(x, y)| (pred.get(x, y) - mean) / std).sum();
    Ok(total / pts.len() as f64)
}

/// Pearson correlation over pixels; 0 when either map has no variance.
pub fn cc(pred: &GrayMap, gt: &GrayMap) -> Result<f64> {
    pred.ensure_same_dims(gt)?;
    let (ma, sa) = mean_std(pred.data());
    let (mb, sb) = mean_std(gt.data());
    if !(sa > 0.0) || !(sb > 0.0) {
        return Ok(0.0);
    }
    let cov = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(a, b)| (a - ma) * (b - mb))
        .sum::<f64>()
        / pred.len() as f64;
    Ok((cov / (sa * sb)).clamp(-1.0, 1.0))
}

/// Histogram intersection of the two maps after scaling each to unit sum.
pub fn sim(pred: &GrayMap, gt: &GrayMap) -> Result<f64> {
    pred.ensure_same_dims(gt)?;
    let (sp, sg) = (pred.sum(), gt.sum());
    if !(sp > 0.0) {
        return Err(BiasError::ZeroMap("prediction"));
    }
    if !(sg > 0.0) {
        return Err(BiasError::ZeroMap("ground truth"));
    }
    let s: f64 = pred
        .data()
        .iter()
        .zip(gt.data())
        .map(|(a, b)| (a / sp).min(b / sg))
        .sum();
    Ok(s.clamp(0.0, 1.0))
}

/// ROC area for `positives` against `negatives` with thresholds at the
/// distinct positive values; endpoints (0,0) and (1,1), trapezoidal rule.
pub fn roc_area(positives: &[f64], negatives: &[f64]) -> f64 {
    let mut pos = positives.to_vec();
    let mut neg = negatives.to_vec();
    pos.sort_by(|a, b| b.total_cmp(a));
    neg.sort_by(|a, b| b.total_cmp(a));
    let (np, nn) = (pos.len() as f64, neg.len().max(1) as f64);
    let mut area = 0.0;
    let (mut px, mut py) = (0.0, 0.0);
    let (mut ip, mut ineg) = (0usize, 0usize);
    while ip < pos.len() {
        let t = pos[ip];
        while ip < pos.len() && pos[ip] >= t {
            ip += 1;
        }
        while ineg < neg.len() && neg[ineg] >= t {
            ineg += 1;
        }
        let (x, y) = (ineg as f64 / nn, ip as f64 / np);
        area += (x - px) * (y + py) / 2.0;
        px = x;
        py = y;
    }
    area + (1.0 - px) * (1.0 + py) / 2.0
}

/// AUC with fixated pixels as positives and every other pixel as a negative.
pub fn auc_judd(pred: &GrayMap, fix: &FixationGroundTruth) -> Result<f64> {
    let pts = fix.check(pred)?;
    let w = pred.width();
    let mut fixated = vec![false; pred.len()];
    for &(x, y) in &pts {
        fixated[y * w + x] = true;
    }
    let positives: Vec<f64> = pts.iter().map(|&(x, y)| pred.get(x, y)).collect();
    let negatives: Vec<f64> = pred
        .data()
        .iter()
        .zip(&fixated)
        .filter(|(_, &f)| !f)
        .map(|(&v, _)| v)
        .collect();
    Ok(roc_area(&positives, &negatives))
}

/// Mean AUC over `permutations` rounds, each drawing as many negatives as
/// there are positives (or the whole pool if smaller) from `pool` without
/// replacement. Deterministic in `seed`.
pub fn shuffled_auc(
    pred: &GrayMap,
    fix: &FixationGroundTruth,
    pool: &[(usize, usize)],
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    let pts = fix.check(pred)?;
    if pool.is_empty() {
        return Err(BiasError::Empty("shuffled-AUC negative pool"));
    }
    if permutations == 0 {
        return Err(BiasError::Empty("shuffled-AUC permutations"));
    }
    let (w, h) = pred.dims();
    if let Some(&(x, y)) = pool.iter().find(|&&(x, y)| x >= w || y >= h) {
        return Err(BiasError::FixationOutOfBounds { x, y, width: w, height: h });
    }
    let positives: Vec<f64> = pts.iter().map(|&(x, y)| pred.get(x, y)).collect();
    let k = positives.len().min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut negatives = Vec::with_capacity(k);
    for _ in 0..permutations {
        negatives.clear();
        negatives.extend(sample(&mut rng, pool.len(), k).iter().map(|i| {
            let (x, y) = pool[i];
            pred.get(x, y)
        }));
        total += roc_area(&positives, &negatives);
    }
    Ok(total / permutations as f64)
}

/// The five scores of one frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrameMetrics {
    pub auc_j: f64,
    pub sim: f64,
    pub s_auc: f64,
    pub cc: f64,
    pub nss: f64,
}

impl FrameMetrics {
    /// Component-wise mean, accumulated in the given order.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a FrameMetrics>) -> Option<FrameMetrics> {
        let mut n = 0usize;
        let mut acc = [0.0; 5];
        for m in items {
            n += 1;
            for (a, v) in acc.iter_mut().zip(m.as_array()) {
                *a += v;
            }
        }
        if n == 0 {
            return None;
        }
        let k = n as f64;
        Some(FrameMetrics {
            auc_j: acc[0] / k,
            sim: acc[1] / k,
            s_auc: acc[2] / k,
            cc: acc[3] / k,
            nss: acc[4] / k,
        })
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.auc_j, self.sim, self.s_auc, self.cc, self.nss]
    }
}

/// All five metrics on one frame; CC and SIM use the density map.
pub fn evaluate_frame(
    pred: &GrayMap,
    fix: &FixationGroundTruth,
    pool: &[(usize, usize)],
    permutations: usize,
    seed: u64,
) -> Result<FrameMetrics> {
    let density = fix.density_or_synthesized()?;
    // an all-zero prediction has nothing to intersect
    let sim_v = if pred.sum() > 0.0 { sim(pred, &density)? } else { 0.0 };
    Ok(FrameMetrics {
        auc_j: auc_judd(pred, fix)?,
        sim: sim_v,
        s_auc: shuffled_auc(pred, fix, pool, permutations, seed)?,
        cc: cc(pred, &density)?,
        nss: nss(pred, fix)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameRecord {
    pub video: String,
    pub frame: usize,
    pub metrics: FrameMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VideoRecord {
    pub video: String,
    pub frames: usize,
    pub metrics: FrameMetrics,
}

/// Per-frame scores averaged per video, then across videos.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub seed: u64,
    pub permutations: usize,
    pub overall: Option<FrameMetrics>,
    pub videos: Vec<VideoRecord>,
    pub frames: Vec<FrameRecord>,
}

impl MetricReport {
    /// `frames` must be grouped by video; groups keep their first-seen order.
    pub fn aggregate(frames: Vec<FrameRecord>, seed: u64, permutations: usize) -> Self {
        let mut videos: Vec<VideoRecord> = Vec::new();
        let mut start = 0;
        while start < frames.len() {
            let name = &frames[start].video;
            let end = start + frames[start..].iter().take_while(|r| &r.video == name).count();
            let m = FrameMetrics::mean(frames[start..end].iter().map(|r| &r.metrics));
            if let Some(metrics) = m {
                videos.push(VideoRecord {
                    video: name.clone(),
                    frames: end - start,
                    metrics,
                });
            }
            start = end;
        }
        let overall = FrameMetrics::mean(videos.iter().map(|v| &v.metrics));
        Self {
            seed,
            permutations,
            overall,
            videos,
            frames,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn gt(w: usize, h: usize, pts: &[(usize, usize)]) -> FixationGroundTruth {
        FixationGroundTruth::new(w, h, pts.to_vec()).unwrap()
    }

    #[test]
    fn nss_examples() {
        let p = GrayMap::from_vec(4, 1, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let v = nss(&p, &gt(4, 1, &[(2, 0)])).unwrap();
        assert!((v - 0.75 / 0.1875f64.sqrt()).abs() < 1e-12);
        assert!((v - 1.732).abs() < 1e-3);
        assert_eq!(nss(&GrayMap::filled(4, 1, 3.0), &gt(4, 1, &[(2, 0)])).unwrap(), 0.0);
        assert!(nss(&p, &gt(4, 1, &[])).is_err());
        let hi = GrayMap::from_fn(8, 8, |x, y| (x * y) as f64);
        assert!(nss(&hi, &gt(8, 8, &[(7, 7)])).unwrap() > 0.0);
    }

    #[test]
    fn cc_examples() {
        let x = GrayMap::from_fn(6, 5, |a, b| ((a * 7 + b * 3) % 5) as f64);
        assert!((cc(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg = x.map(|v| x.max() - v);
        assert!((cc(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(cc(&x, &GrayMap::filled(6, 5, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn sim_examples() {
        let a = GrayMap::from_vec(4, 1, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let b = GrayMap::filled(4, 1, 0.25);
        assert!((sim(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert!((sim(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let c = GrayMap::from_vec(4, 1, vec![0.0, 0.0, 0.3, 0.7]).unwrap();
        assert_eq!(sim(&a, &c).unwrap(), 0.0);
        assert!(sim(&GrayMap::zeros(4, 1), &a).is_err());
    }

    #[test]
    fn auc_examples() {
        let mut p = GrayMap::filled(8, 8, 0.1);
        p.set(2, 3, 0.9);
        p.set(5, 5, 0.8);
        assert_eq!(auc_judd(&p, &gt(8, 8, &[(2, 3), (5, 5)])).unwrap(), 1.0);
        assert_eq!(auc_judd(&GrayMap::filled(8, 8, 0.4), &gt(8, 8, &[(1, 1), (4, 2)])).unwrap(), 0.5);
    }

    #[test]
    fn shuffled_examples() {
        let mut p = GrayMap::filled(16, 16, 0.0);
        p.set(3, 3, 1.0);
        p.set(9, 4, 0.9);
        let f = gt(16, 16, &[(3, 3), (9, 4)]);
        let pool = vec![(0, 0), (15, 15), (7, 7), (1, 12)];
        assert_eq!(shuffled_auc(&p, &f, &pool, 100, 7).unwrap(), 1.0);
        assert!(shuffled_auc(&p, &f, &[], 100, 7).is_err());
        let pred = GrayMap::from_fn(16, 16, |x, y| ((x * 13 + y * 7) % 11) as f64);
        let a = shuffled_auc(&pred, &f, &pool, 100, 42).unwrap();
        let b = shuffled_auc(&pred, &f, &pool, 100, 42).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn center_bias_cancels() {
        let (w, h) = (64, 48);
        let pred = crate::fixation::center_prior(w, h);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut centred = |n: usize| -> Vec<(usize, usize)> {
            (0..n)
                .map(|_| {
                    let gx: f64 = (0..6).map(|_| rng.random::<f64>()).sum::<f64>() / 6.0;
                    let gy: f64 = (0..6).map(|_| rng.random::<f64>()).sum::<f64>() / 6.0;
                    ((gx * w as f64) as usize, (gy * h as f64) as usize)
                })
                .collect()
        };
        let fix = centred(400);
        let pool = centred(4000);
        let s = shuffled_auc(&pred, &gt(w, h, &fix), &pool, 100, 11).unwrap();
        assert!((s - 0.5).abs() < 0.05, "s-AUC {s}");
        // the same prediction looks good under uniform negatives
        assert!(auc_judd(&pred, &gt(w, h, &fix)).unwrap() > 0.6);
    }

    #[test]
    fn density_synthesis() {
        let d = density_from_fixations(64, 32, &[(10, 10), (40, 20)], 2.0).unwrap();
        assert!((d.sum() - 1.0).abs() < 1e-12);
        assert_eq!(d.argmax(), (10, 10));
        assert!(density_from_fixations(8, 8, &[], 2.0).is_err());
        let g = gt(64, 32, &[(10, 10)]);
        assert_eq!(g.density_or_synthesized().unwrap().argmax(), (10, 10));
    }

    #[test]
    fn ground_truth_validation() {
        assert!(FixationGroundTruth::new(4, 4, vec![(4, 0)]).is_err());
        let mut m = GrayMap::zeros(5, 4);
        m.set(1, 2, 255.0);
        m.set(4, 0, 1.0);
        let g = FixationGroundTruth::from_fixation_map(&m);
        assert_eq!(g.distinct_points(), vec![(4, 0), (1, 2)]);
        let g = gt(3, 3, &[(1, 1), (1, 1), (0, 2)]);
        assert_eq!(g.distinct_points().len(), 2);
        let g = g.with_density(GrayMap::filled(3, 3, 2.0)).unwrap();
        assert!((g.density().unwrap().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregation_per_video_then_overall() {
        let fm = |v: f64| FrameMetrics { auc_j: v, sim: v, s_auc: v, cc: v, nss: v };
        let rec = |video: &str, frame, v| FrameRecord { video: video.into(), frame, metrics: fm(v) };
        let r = MetricReport::aggregate(vec![rec("a", 0, 1.0), rec("a", 1, 3.0), rec("b", 0, 6.0)], 1, 100);
        assert_eq!(r.videos.len(), 2);
        assert_eq!(r.videos[0].metrics.cc, 2.0);
        assert_eq!(r.overall.unwrap().nss, 4.0);
        assert!(MetricReport::aggregate(vec![], 0, 1).overall.is_none());
    }

    proptest! {
        #[test]
        fn rank_metrics_ignore_monotone_transforms(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pred = GrayMap::from_fn(12, 10, |_, _| rng.random::<f64>());
            let pts: Vec<(usize, usize)> = (0..6).map(|_| (rng.random_range(0..12), rng.random_range(0..10))).collect();
            let pool: Vec<(usize, usize)> = (0..30).map(|_| (rng.random_range(0..12), rng.random_range(0..10))).collect();
            let f = gt(12, 10, &pts);
            let t = pred.map(|v| (3.0 * v).exp() + 1.0);
            prop_assert!((auc_judd(&pred, &f).unwrap() - auc_judd(&t, &f).unwrap()).abs() < 1e-12);
            prop_assert!((shuffled_auc(&pred, &f, &pool, 20, 9).unwrap() - shuffled_auc(&t, &f, &pool, 20, 9).unwrap()).abs() < 1e-12);
            let a = pred.map(|v| 2.5 * v + 7.0);
            prop_assert!((nss(&pred, &f).unwrap() - nss(&a, &f).unwrap()).abs() < 1e-9);
            let q = GrayMap::from_fn(12, 10, |_, _| rng.random::<f64>());
            prop_assert!((sim(&pred, &q).unwrap() - sim(&q, &pred).unwrap()).abs() < 1e-15);
            let c = cc(&pred, &q).unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
