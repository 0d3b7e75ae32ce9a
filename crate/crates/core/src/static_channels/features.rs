use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::{BiasError, Result};
use crate::map::{FrameRGB, GrayMap};
use crate::pyramid::{across_scale_diff, build_pyramid, level_dims, upsample_between, Pyramid};

use super::channels::{color_channels, intensity_channels};
use super::gabor::{gabor_level, GaborBank, ORIENTATIONS};

/// Two opposite-polarity pyramids of one feature.
#[derive(Clone, Debug)]
pub struct OpponentPair {
    pub pos: Pyramid,
    pub neg: Pyramid,
}

impl OpponentPair {
    pub fn new(pos: Pyramid, neg: Pyramid) -> Result<Self> {
        if pos.shape() != neg.shape() {
            let (a, b) = (pos.base_dims(), neg.base_dims());
            if a != b {
                return Err(BiasError::mismatch(a, b));
            }
            return Err(BiasError::MissingScale {
                scale: pos.depth().max(neg.depth()),
                depth: pos.depth().min(neg.depth()),
            });
        }
        Ok(Self { pos, neg })
    }

    pub fn depth(&self) -> usize {
        self.pos.depth()
    }
}

/// Rectified opponent center–surround on already-extracted levels:
///
/// `F+ = max(0, (pos_c − neg_c) ⊖ (neg_s − pos_s))`,
/// `F− = max(0, (neg_c − pos_c) ⊖ (pos_s − neg_s))`.
///
/// Both arguments are the negation of each other, so they are evaluated once
/// and split by sign; the two halves never fire at the same pixel.
pub fn rectified_opponent(
    pos_c: &GrayMap,
    neg_c: &GrayMap,
    pos_s: &GrayMap,
    neg_s: &GrayMap,
    c: usize,
    s: usize,
) -> Result<(GrayMap, GrayMap)> {
    let center = pos_c.zip_map(neg_c, |p, n| p - n)?;
    let surround = neg_s.zip_map(pos_s, |n, p| n - p)?;
    let signed = across_scale_diff(&center, c, &surround, s)?;
    Ok((signed.map(|v| v.max(0.0)), signed.map(|v| (-v).max(0.0))))
}

/// `(F+(c,s), F−(c,s))` for an opponent pair.
pub fn opponent_feature_maps(pair: &OpponentPair, c: usize, s: usize) -> Result<(GrayMap, GrayMap)> {
    if s <= c {
        return Err(BiasError::InvalidScalePair {
            center: c,
            surround: s,
        });
    }
    rectified_opponent(
        pair.pos.level(c)?,
        pair.neg.level(c)?,
        pair.pos.level(s)?,
        pair.neg.level(s)?,
        c,
        s,
    )
}

/// `|O(c, θ) ⊖ O(s, θ)|` for one orientation pyramid.
pub fn orientation_feature_maps(orient: &Pyramid, c: usize, s: usize) -> Result<GrayMap> {
    orientation_feature_from_levels(orient.level(c)?, orient.level(s)?, c, s)
}

pub fn orientation_feature_from_levels(
    center: &GrayMap,
    surround: &GrayMap,
    c: usize,
    s: usize,
) -> Result<GrayMap> {
    Ok(across_scale_diff(center, c, surround, s)?.map(f64::abs))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Intensity,
    RedGreen,
    BlueYellow,
    Orientation,
    Motion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Positive,
    Negative,
    /// Index into [`ORIENTATIONS`].
    Orientation(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FeatureTag {
    pub channel: Channel,
    pub center: usize,
    pub surround: usize,
    pub kind: FeatureKind,
}

#[derive(Clone, Debug)]
pub struct FeatureMap {
    pub tag: FeatureTag,
    pub map: GrayMap,
}

/// Every static feature map of one frame, in a fixed order: scale pairs in
/// configuration order, then polarity or orientation.
#[derive(Clone, Debug)]
pub struct StaticFeatures {
    pub accum_scale: usize,
    pub accum_dims: (usize, usize),
    pub intensity: Vec<FeatureMap>,
    pub color: Vec<FeatureMap>,
    pub orientation: Vec<FeatureMap>,
}

impl StaticFeatures {
    pub fn len(&self) -> usize {
        self.intensity.len() + self.color.len() + self.orientation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureMap> {
        self.intensity
            .iter()
            .chain(&self.color)
            .chain(&self.orientation)
    }
}

/// Pyramids of every static channel for one frame.
#[derive(Clone, Debug)]
pub struct ChannelPyramids {
    pub intensity: OpponentPair,
    pub red_green: OpponentPair,
    pub blue_yellow: OpponentPair,
}

impl ChannelPyramids {
    /// Intensity pyramids run to `levels`; colour pyramids only as deep as
    /// `color_depth`.
    pub fn build(frame: &FrameRGB, levels: usize, color_depth: usize) -> Result<Self> {
        frame.check_depth(levels)?;
        let (on, _) = intensity_channels(frame);
        let colors = color_channels(frame);
        let bases = [on, colors.red, colors.green, colors.blue, colors.yellow];
        let depth = [levels, color_depth, color_depth, color_depth, color_depth];
        let mut pyrs = bases
            .into_par_iter()
            .zip(depth)
            .map(|(m, d)| build_pyramid(m, d))
            .collect::<Result<Vec<_>>>()?
            .into_iter();
        let on = pyrs.next().expect("5 pyramids");
        // I− = 255 − I+ commutes with blur and decimation
        let off = on.map(|v| 255.0 - v);
        let red = pyrs.next().expect("5 pyramids");
        let green = pyrs.next().expect("5 pyramids");
        let blue = pyrs.next().expect("5 pyramids");
        let yellow = pyrs.next().expect("5 pyramids");
        Ok(Self {
            intensity: OpponentPair::new(on, off)?,
            red_green: OpponentPair::new(red, green)?,
            blue_yellow: OpponentPair::new(blue, yellow)?,
        })
    }

    pub fn intensity_on(&self) -> &Pyramid {
        &self.intensity.pos
    }
}

/// Computes every static feature map for `frame`.
pub fn static_feature_set(frame: &FrameRGB, cfg: &PipelineConfig) -> Result<StaticFeatures> {
    let pyr = ChannelPyramids::build(frame, cfg.pyramid_levels, cfg.max_surround())?;
    let bank = GaborBank::new(cfg.pyramid_levels);
    static_features_from(&pyr, &bank, cfg)
}

/// Feature maps from prebuilt channel pyramids. Orientation responses are
/// only computed on the levels the configured scale pairs read.
pub fn static_features_from(
    pyr: &ChannelPyramids,
    bank: &GaborBank,
    cfg: &PipelineConfig,
) -> Result<StaticFeatures> {
    let pairs = cfg.scale_pairs();
    let (bw, bh) = pyr.intensity.pos.base_dims();
    let accum_scale = cfg.accumulation_scale();

    let mut needed: Vec<usize> = pairs.iter().flat_map(|&(c, s)| [c, s]).collect();
    needed.sort_unstable();
    needed.dedup();
    let jobs: Vec<(usize, usize)> = (0..ORIENTATIONS.len())
        .flat_map(|o| needed.iter().map(move |&l| (o, l)))
        .collect();
    let responses = jobs
        .par_iter()
        .map(|&(o, l)| gabor_level(&pyr.intensity.pos, bank, o, l))
        .collect::<Result<Vec<_>>>()?;
    let response = |o: usize, l: usize| -> &GrayMap {
        let i = jobs.iter().position(|&j| j == (o, l)).expect("scheduled");
        &responses[i]
    };

    let opponent = |pair: &OpponentPair, channel: Channel| -> Result<Vec<FeatureMap>> {
        let maps = pairs
            .par_iter()
            .map(|&(c, s)| opponent_feature_maps(pair, c, s).map(|m| (c, s, m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(maps
            .into_iter()
            .flat_map(|(c, s, (p, n))| {
                [
                    FeatureMap {
                        tag: FeatureTag {
                            channel,
                            center: c,
                            surround: s,
                            kind: FeatureKind::Positive,
                        },
                        map: p,
                    },
                    FeatureMap {
                        tag: FeatureTag {
                            channel,
                            center: c,
                            surround: s,
                            kind: FeatureKind::Negative,
                        },
                        map: n,
                    },
                ]
            })
            .collect())
    };

    let intensity = opponent(&pyr.intensity, Channel::Intensity)?;
    let mut color = opponent(&pyr.red_green, Channel::RedGreen)?;
    color.extend(opponent(&pyr.blue_yellow, Channel::BlueYellow)?);

    let orient_jobs: Vec<(usize, usize, usize)> = pairs
        .iter()
        .flat_map(|&(c, s)| (0..ORIENTATIONS.len()).map(move |o| (c, s, o)))
        .collect();
    let orientation = orient_jobs
        .par_iter()
        .map(|&(c, s, o)| {
            orientation_feature_from_levels(response(o, c), response(o, s), c, s).map(|map| {
                FeatureMap {
                    tag: FeatureTag {
                        channel: Channel::Orientation,
                        center: c,
                        surround: s,
                        kind: FeatureKind::Orientation(o),
                    },
                    map,
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(StaticFeatures {
        accum_scale,
        accum_dims: level_dims(bw, bh, accum_scale),
        intensity,
        color,
        orientation,
    })
}

/// Brings a feature map from its own center scale onto the accumulation grid.
pub(crate) fn to_accumulation(
    map: &GrayMap,
    scale: usize,
    accum_scale: usize,
    accum_dims: (usize, usize),
) -> Result<GrayMap> {
    upsample_between(map, scale, accum_scale, accum_dims.0, accum_dims.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyramid::build_pyramid;
    use proptest::prelude::*;

    fn const_pyr(v: f64, levels: usize) -> Pyramid {
        build_pyramid(GrayMap::filled(64, 64, v), levels).unwrap()
    }

    #[test]
    fn equal_polarities_give_zero_maps() {
        let pair = OpponentPair::new(const_pyr(3.0, 4), const_pyr(3.0, 4)).unwrap();
        let (p, n) = opponent_feature_maps(&pair, 1, 3).unwrap();
        assert!(p.is_zero() && n.is_zero());
    }

    #[test]
    fn constant_pair_doubles_through_the_surround() {
        // (10 − 0) − (0 − 10) = 20
        let pair = OpponentPair::new(const_pyr(10.0, 4), const_pyr(0.0, 4)).unwrap();
        let (p, n) = opponent_feature_maps(&pair, 1, 4).unwrap();
        assert!(p.data().iter().all(|&v| v == 20.0));
        assert!(n.is_zero());
        assert_eq!(p.dims(), (32, 32));
        assert!(opponent_feature_maps(&pair, 3, 3).is_err());
        assert!(opponent_feature_maps(&pair, 2, 5).is_err());
    }

    #[test]
    fn bright_dot_fires_on_polarity() {
        let dot = GrayMap::from_fn(64, 64, |x, y| {
            if (x as i32 - 30).abs() <= 2 && (y as i32 - 34).abs() <= 2 {
                250.0
            } else {
                40.0
            }
        });
        let on = build_pyramid(dot, 4).unwrap();
        let off = on.map(|v| 255.0 - v);
        let pair = OpponentPair::new(on.clone(), off.clone()).unwrap();
        let (p, n) = opponent_feature_maps(&pair, 1, 4).unwrap();
        // oracle: unrectified subtract, then clamp, pixel by pixel
        let (pc, nc) = (on.level(1).unwrap(), off.level(1).unwrap());
        let (ps, ns) = (on.level(4).unwrap(), off.level(4).unwrap());
        for y in 0..32 {
            for x in 0..32 {
                let sx = x as f64 / 8.0;
                let sy = y as f64 / 8.0;
                let raw = (pc.get(x, y) - nc.get(x, y)) - (ns.sample_bilinear(sx, sy) - ps.sample_bilinear(sx, sy));
                assert!((p.get(x, y) - raw.max(0.0)).abs() < 1e-9);
                assert!((n.get(x, y) - (-raw).max(0.0)).abs() < 1e-9);
            }
        }
        assert_eq!(p.argmax(), (15, 17));
        assert_eq!(n.get(15, 17), 0.0);
    }

    #[test]
    fn orientation_difference_is_absolute() {
        let o = const_pyr(1.0, 3);
        assert!(orientation_feature_maps(&o, 1, 3).unwrap().is_zero());
        let c = GrayMap::filled(8, 8, 4.0);
        let s = GrayMap::filled(2, 2, 7.0);
        let m = orientation_feature_from_levels(&c, &s, 1, 3).unwrap();
        assert!(m.data().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn oriented_bar_peaks_on_matching_orientation() {
        // vertical bar: intensity varies along x, matching θ = 0
        let bar = GrayMap::from_fn(128, 128, |x, _| if (60..68).contains(&x) { 255.0 } else { 0.0 });
        let pyr = build_pyramid(bar, 5).unwrap();
        let bank = GaborBank::new(5);
        let o0 = super::super::gabor::gabor_orient(&pyr, &bank, 0).unwrap();
        let o90 = super::super::gabor::gabor_orient(&pyr, &bank, 2).unwrap();
        let f0 = orientation_feature_maps(&o0, 1, 4).unwrap();
        let f90 = orientation_feature_maps(&o90, 1, 4).unwrap();
        // composition oracle
        let up = upsample_between(o0.level(4).unwrap(), 4, 1, 64, 64).unwrap();
        let oracle = o0.level(1).unwrap().zip_map(&up, |a, b| (a - b).abs()).unwrap();
        assert_eq!(f0, oracle);
        let (bx, _) = f0.argmax();
        assert!((28..=36).contains(&bx), "peak column {bx}");
        assert!(f0.get(bx, 32) > 3.0 * f90.get(bx, 32));
    }

    #[test]
    fn feature_counts() {
        let frame = FrameRGB::from_fn(256, 256, |x, y| {
            [(x % 256) as f64, (y % 256) as f64, ((x + y) % 256) as f64]
        })
        .unwrap();
        let full = PipelineConfig {
            center_scales: vec![2, 3, 4],
            deltas: vec![1, 2, 3, 4],
            ..Default::default()
        }
        .validate()
        .unwrap();
        let f = static_feature_set(&frame, &full).unwrap();
        assert_eq!((f.intensity.len(), f.color.len(), f.orientation.len()), (24, 48, 48));
        assert_eq!(f.len(), 120);

        let f = static_feature_set(&frame, &PipelineConfig::default()).unwrap();
        assert_eq!(f.len(), 10);
        assert_eq!(f.accum_dims, (64, 64));
        for m in f.iter() {
            assert_eq!((m.tag.center, m.tag.surround), (2, 6));
            assert_eq!(m.map.dims(), (64, 64));
        }
    }

    #[test]
    fn uniform_gray_frame_has_no_color_or_orientation() {
        let frame = FrameRGB::uniform(256, 256, [90.0, 90.0, 90.0]).unwrap();
        let f = static_feature_set(&frame, &PipelineConfig::itti_grid()).unwrap();
        for m in f.color.iter() {
            assert!(m.map.is_zero());
        }
        for m in f.orientation.iter() {
            assert!(m.map.max() < 1e-9, "{:?}", m.tag);
            assert!(m.map.is_constant());
        }
    }

    proptest! {
        #[test]
        fn polarities_never_fire_together(seed in any::<u64>(), c in 0usize..2, d in 1usize..3) {
            let mut s = seed | 1;
            let mut rnd = || { s ^= s << 13; s ^= s >> 7; s ^= s << 17; (s % 2550) as f64 / 10.0 };
            let a = build_pyramid(GrayMap::from_fn(16, 16, |_, _| rnd()), 3).unwrap();
            let b = build_pyramid(GrayMap::from_fn(16, 16, |_, _| rnd()), 3).unwrap();
            let pair = OpponentPair::new(a, b).unwrap();
            let (p, n) = opponent_feature_maps(&pair, c, c + d).unwrap();
            for (x, y) in p.data().iter().zip(n.data()) {
                prop_assert!(x.min(*y) == 0.0);
                prop_assert!(*x >= 0.0 && *y >= 0.0);
            }
        }
    }
}
