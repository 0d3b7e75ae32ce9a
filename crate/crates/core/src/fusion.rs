//! Map normalization, conspicuity maps and the static / master saliency maps.

use rayon::prelude::*;

use crate::config::FusionWeights;
use crate::error::{BiasError, Result};
use crate::map::GrayMap;
use crate::pyramid::reduce;
use crate::static_channels::{to_accumulation, FeatureKind, FeatureMap, StaticFeatures, ORIENTATIONS};

/// Maps at least this wide are reduced before local maxima are collected, so
/// the search runs on a grid roughly 64 samples wide.
const PEAK_GRID_LIMIT: usize = 128;

/// Mean of the strict 3×3 local maxima of `x`, excluding the global maximum.
/// Returns 0 when no other local maximum exists.
pub fn mean_local_maxima(x: &GrayMap) -> f64 {
    let mut grid = std::borrow::Cow::Borrowed(x);
    while grid.width() >= PEAK_GRID_LIMIT {
        grid = std::borrow::Cow::Owned(reduce(&grid));
    }
    let peaks = strict_local_maxima(&grid);
    if peaks.len() < 2 {
        return 0.0;
    }
    // drop one instance of the largest peak
    let top = peaks
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > peaks[best] { i } else { best });
    let sum: f64 = peaks
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &v)| v)
        .sum();
    sum / (peaks.len() - 1) as f64
}

/// Relative margin a local maximum must clear; keeps rounding noise on
/// plateaus from creating spurious peaks.
const PEAK_MARGIN: f64 = 1e-9;

/// Values of pixels strictly greater than every in-bounds 8-neighbour.
pub fn strict_local_maxima(x: &GrayMap) -> Vec<f64> {
    let (w, h) = x.dims();
    let tol = PEAK_MARGIN * x.max().abs();
    let mut out = Vec::new();
    for y in 0..h {
        for xx in 0..w {
            let v = x.get(xx, y);
            let mut is_max = true;
            'scan: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (xx as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    if x.get(nx as usize, ny as usize) >= v - tol {
                        is_max = false;
                        break 'scan;
                    }
                }
            }
            if is_max && (w > 1 || h > 1) {
                out.push(v);
            }
        }
    }
    out
}

/// Promotion factor `(M − m̄)² / M` applied by [`normalize`]; 0 for zero or
/// constant maps.
pub fn normalization_factor(x: &GrayMap) -> f64 {
    let m = x.max();
    if !(m > 0.0) || x.is_constant() {
        return 0.0;
    }
    let mbar = mean_local_maxima(x);
    (m - mbar) * (m - mbar) / m
}

/// `N(X) = (M − m̄)² · X / M` with `M` the global maximum and `m̄` the mean of
/// the other local maxima. Expects a non-negative map.
pub fn normalize(x: &GrayMap) -> GrayMap {
    let f = normalization_factor(x);
    if f == 0.0 {
        return GrayMap::zeros(x.width(), x.height());
    }
    x.scale(f)
}

/// Normalizes every feature map (in parallel), brings each to the
/// accumulation grid and sums them in list order.
fn accumulate_normalized(
    maps: &[&FeatureMap],
    accum_scale: usize,
    accum_dims: (usize, usize),
) -> Result<GrayMap> {
    let parts = maps
        .par_iter()
        .map(|f| {
            to_accumulation(&normalize(&f.map), f.tag.center, accum_scale, accum_dims)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = GrayMap::zeros(accum_dims.0, accum_dims.1);
    for p in &parts {
        acc.add_assign(p)?;
    }
    Ok(acc)
}

/// `Ī = ⊕_c ⊕_s (N(I+(c,s)) + N(I−(c,s)))`
pub fn conspicuity_intensity(features: &StaticFeatures) -> Result<GrayMap> {
    let maps: Vec<&FeatureMap> = features.intensity.iter().collect();
    accumulate_normalized(&maps, features.accum_scale, features.accum_dims)
}

/// `C̄ = ⊕_c ⊕_s (N(RG+) + N(RG−) + N(BY+) + N(BY−))`
pub fn conspicuity_color(features: &StaticFeatures) -> Result<GrayMap> {
    let maps: Vec<&FeatureMap> = features.color.iter().collect();
    accumulate_normalized(&maps, features.accum_scale, features.accum_dims)
}

/// `Ō = Σ_θ N(⊕_c ⊕_s N(O(c,s,θ)))`
pub fn conspicuity_orientation(features: &StaticFeatures) -> Result<GrayMap> {
    let per_theta = (0..ORIENTATIONS.len())
        .into_par_iter()
        .map(|o| {
            let maps: Vec<&FeatureMap> = features
                .orientation
                .iter()
                .filter(|f| f.tag.kind == FeatureKind::Orientation(o))
                .collect();
            if maps.is_empty() {
                return Ok(None);
            }
            accumulate_normalized(&maps, features.accum_scale, features.accum_dims)
                .map(|m| Some(normalize(&m)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = features.accum_dims;
    let mut acc = GrayMap::zeros(w, h);
    for m in per_theta.iter().flatten() {
        acc.add_assign(m)?;
    }
    Ok(acc)
}

/// Per-family conspicuity maps of one frame, all on the accumulation grid.
#[derive(Clone, Debug)]
pub struct ConspicuitySet {
    pub intensity: GrayMap,
    pub color: GrayMap,
    pub orientation: GrayMap,
    /// `(τ, M̄(τ))` for every temporal offset that contributed.
    pub motion: Vec<(usize, GrayMap)>,
}

impl ConspicuitySet {
    /// Static conspicuities computed concurrently.
    pub fn from_static(features: &StaticFeatures) -> Result<Self> {
        let ((i, c), o) = rayon::join(
            || {
                rayon::join(
                    || conspicuity_intensity(features),
                    || conspicuity_color(features),
                )
            },
            || conspicuity_orientation(features),
        );
        Ok(Self {
            intensity: i?,
            color: c?,
            orientation: o?,
            motion: Vec::new(),
        })
    }
}

/// `SS = (N(Ī) + N(C̄) + N(Ō)) / 3`
pub fn static_saliency(cons: &ConspicuitySet) -> Result<GrayMap> {
    let mut ss = normalize(&cons.intensity);
    ss.add_assign(&normalize(&cons.color))?;
    ss.add_assign(&normalize(&cons.orientation))?;
    Ok(ss.map(|v| v / 3.0))
}

/// `S = a·N(SS∘DS) + b·N(SS) + c·N(DS)`, rescaled so its maximum is 1.
pub fn master_saliency(ss: &GrayMap, ds: &GrayMap, weights: FusionWeights) -> Result<GrayMap> {
    if ss.dims() != ds.dims() {
        return Err(BiasError::mismatch(ss.dims(), ds.dims()));
    }
    let (w, h) = ss.dims();
    let mut s = GrayMap::zeros(w, h);
    if weights.product != 0.0 {
        let prod = ss.zip_map(ds, |a, b| a * b)?;
        s.add_scaled(&normalize(&prod), weights.product)?;
    }
    if weights.static_ != 0.0 {
        s.add_scaled(&normalize(ss), weights.static_)?;
    }
    if weights.dynamic != 0.0 {
        s.add_scaled(&normalize(ds), weights.dynamic)?;
    }
    Ok(s.rescaled_to_unit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pyramid::upsample_between;
    use crate::static_channels::{Channel, FeatureTag};
    use proptest::prelude::*;

    fn rand_map(w: usize, h: usize, seed: u64) -> GrayMap {
        let mut s = seed | 1;
        GrayMap::from_fn(w, h, |_, _| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    #[test]
    fn constant_and_zero_maps_vanish() {
        assert!(normalize(&GrayMap::filled(9, 7, 4.2)).is_zero());
        assert!(normalize(&GrayMap::zeros(9, 7)).is_zero());
    }

    #[test]
    fn hand_built_local_maxima() {
        // global max 10, other strict maxima 4 and 2 → m̄ = 3, factor 49 / 10
        let mut m = GrayMap::zeros(9, 9);
        m.set(1, 1, 10.0);
        m.set(5, 2, 4.0);
        m.set(2, 6, 2.0);
        m.set(6, 6, 1.0);
        m.set(7, 6, 1.0); // plateau pair: not strict
        let mut peaks = strict_local_maxima(&m);
        peaks.sort_by(f64::total_cmp);
        assert_eq!(peaks, vec![2.0, 4.0, 10.0]);
        assert!((normalization_factor(&m) - 4.9).abs() < 1e-12);
        assert!((normalize(&m).get(1, 1) - 49.0).abs() < 1e-12);
    }

    #[test]
    fn single_peak_uses_zero_mean_of_other_maxima() {
        // m̄ = 0 → N(X) = M·X; the peak maps to M²
        let mut m = GrayMap::zeros(7, 7);
        m.set(3, 3, 5.0);
        let n = normalize(&m);
        assert!((n.get(3, 3) - 25.0).abs() < 1e-12);
        m.set(3, 3, 1.0);
        assert_eq!(normalize(&m).get(3, 3), 1.0);
    }

    #[test]
    fn pop_out_beats_many_equal_peaks() {
        let mut lone = GrayMap::zeros(40, 40);
        let mut crowd = GrayMap::zeros(40, 40);
        for i in 0..4 {
            for j in 0..4 {
                let (x, y) = (5 + 9 * i, 5 + 9 * j);
                lone.set(x, y, 1.0);
                crowd.set(x, y, 8.0);
            }
        }
        lone.set(5, 5, 8.0);
        assert!(normalization_factor(&lone) > normalization_factor(&crowd));
        assert_eq!(normalization_factor(&crowd), 0.0);
    }

    #[test]
    fn large_maps_search_peaks_on_reduced_grid() {
        let mut m = GrayMap::zeros(300, 200);
        m.set(150, 100, 1.0);
        // isolated spikes are smoothed on the reduced grid, not counted at full height
        let mbar = mean_local_maxima(&m);
        assert_eq!(mbar, 0.0);
        assert!(normalization_factor(&m) > 0.99);
    }

    fn tagged(map: GrayMap, kind: FeatureKind, center: usize) -> FeatureMap {
        FeatureMap {
            tag: FeatureTag {
                channel: Channel::Intensity,
                center,
                surround: center + 1,
                kind,
            },
            map,
        }
    }

    fn features(intensity: Vec<FeatureMap>, color: Vec<FeatureMap>, orientation: Vec<FeatureMap>) -> StaticFeatures {
        StaticFeatures {
            accum_scale: 1,
            accum_dims: (16, 12),
            intensity,
            color,
            orientation,
        }
    }

    #[test]
    fn conspicuity_single_terms() {
        let x = rand_map(16, 12, 5);
        let f = features(
            vec![
                tagged(x.clone(), FeatureKind::Positive, 1),
                tagged(GrayMap::zeros(16, 12), FeatureKind::Negative, 1),
            ],
            vec![tagged(x.clone(), FeatureKind::Positive, 1)],
            vec![tagged(x.clone(), FeatureKind::Orientation(2), 1)],
        );
        assert_eq!(conspicuity_intensity(&f).unwrap(), normalize(&x));
        assert_eq!(conspicuity_color(&f).unwrap(), normalize(&x));
        assert_eq!(conspicuity_orientation(&f).unwrap(), normalize(&normalize(&x)));

        let zero = features(
            vec![tagged(GrayMap::zeros(16, 12), FeatureKind::Positive, 1)],
            vec![tagged(GrayMap::zeros(16, 12), FeatureKind::Positive, 1)],
            vec![tagged(GrayMap::zeros(16, 12), FeatureKind::Orientation(0), 1)],
        );
        assert!(conspicuity_intensity(&zero).unwrap().is_zero());
        assert!(conspicuity_color(&zero).unwrap().is_zero());
        assert!(conspicuity_orientation(&zero).unwrap().is_zero());
    }

    #[test]
    fn orientation_plaid_matches_naive_accumulation() {
        let a = rand_map(16, 12, 1);
        let b = rand_map(8, 6, 2);
        let c = rand_map(16, 12, 3);
        let f = features(
            vec![],
            vec![],
            vec![
                tagged(a.clone(), FeatureKind::Orientation(0), 1),
                tagged(b.clone(), FeatureKind::Orientation(0), 2),
                tagged(c.clone(), FeatureKind::Orientation(3), 1),
            ],
        );
        let got = conspicuity_orientation(&f).unwrap();
        let mut theta0 = normalize(&a);
        theta0
            .add_assign(&upsample_between(&normalize(&b), 2, 1, 16, 12).unwrap())
            .unwrap();
        let mut want = normalize(&theta0);
        want.add_assign(&normalize(&normalize(&c))).unwrap();
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0));
        }
    }

    #[test]
    fn static_saliency_formula() {
        let (i, c, o) = (rand_map(10, 8, 7), rand_map(10, 8, 8), rand_map(10, 8, 9));
        let cons = ConspicuitySet {
            intensity: i.clone(),
            color: c.clone(),
            orientation: o.clone(),
            motion: vec![],
        };
        let ss = static_saliency(&cons).unwrap();
        let (ni, nc, no) = (normalize(&i), normalize(&c), normalize(&o));
        for k in 0..ss.len() {
            let want = (ni.data()[k] + nc.data()[k] + no.data()[k]) / 3.0;
            assert!((ss.data()[k] - want).abs() < 1e-6);
        }
        let only_i = ConspicuitySet {
            intensity: i.clone(),
            color: GrayMap::zeros(10, 8),
            orientation: GrayMap::zeros(10, 8),
            motion: vec![],
        };
        let ss = static_saliency(&only_i).unwrap();
        for (a, b) in ss.data().iter().zip(ni.data()) {
            assert!((a - b / 3.0).abs() < 1e-12);
        }
        let zero = ConspicuitySet {
            intensity: GrayMap::zeros(10, 8),
            color: GrayMap::zeros(10, 8),
            orientation: GrayMap::zeros(10, 8),
            motion: vec![],
        };
        assert!(static_saliency(&zero).unwrap().is_zero());
    }

    #[test]
    fn master_map_terms() {
        let ss = rand_map(12, 10, 11);
        let ds = rand_map(12, 10, 12);
        let zero = GrayMap::zeros(12, 10);

        // DS = 0 leaves only 0.3·N(SS), which the rescale brings to SS / max
        let s = master_saliency(&ss, &zero, FusionWeights::default()).unwrap();
        let n = normalize(&ss).scale(0.3);
        let want = n.rescaled_to_unit();
        assert_eq!(s, want);

        let s = master_saliency(&ss, &ds, FusionWeights::new(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(s, normalize(&ss).rescaled_to_unit());

        let s = master_saliency(&ss, &ds, FusionWeights::default()).unwrap();
        let prod = ss.zip_map(&ds, |a, b| a * b).unwrap();
        let (np, ns, nd) = (normalize(&prod), normalize(&ss), normalize(&ds));
        let raw: Vec<f64> = (0..ss.len())
            .map(|k| np.data()[k] + 0.3 * ns.data()[k] + 0.3 * nd.data()[k])
            .collect();
        let peak = raw.iter().cloned().fold(0.0, f64::max);
        for (g, r) in s.data().iter().zip(&raw) {
            assert!((g - r / peak).abs() < 1e-6);
        }
        assert!((s.max() - 1.0).abs() < 1e-15);

        assert!(master_saliency(&zero, &zero, FusionWeights::default()).unwrap().is_zero());
        assert!(master_saliency(&ss, &GrayMap::zeros(3, 3), FusionWeights::default()).is_err());
    }

    proptest! {
        #[test]
        fn normalization_is_degree_two_homogeneous(seed in any::<u64>(), w in 3usize..200, h in 3usize..60) {
            let x = rand_map(w, h, seed);
            let nx = normalize(&x);
            for k in [0.5, 2.0, 10.0] {
                let nk = normalize(&x.scale(k));
                for (a, b) in nk.data().iter().zip(nx.data()) {
                    let want = k * k * b;
                    prop_assert!((a - want).abs() <= 1e-6 * want.abs().max(1e-300));
                }
            }
            prop_assert_eq!(nx.argmax(), x.argmax());
        }

        #[test]
        fn master_map_zero_iff_inputs_zero(seed in any::<u64>(), zero_ss in any::<bool>(), zero_ds in any::<bool>()) {
            let z = GrayMap::zeros(9, 9);
            let ss = if zero_ss { z.clone() } else { rand_map(9, 9, seed) };
            let ds = if zero_ds { z.clone() } else { rand_map(9, 9, seed ^ 99) };
            let s = master_saliency(&ss, &ds, FusionWeights::default()).unwrap();
            prop_assert_eq!(s.is_zero(), zero_ss && zero_ds);
            prop_assert!(s.min() >= 0.0 && s.max() <= 1.0);
        }
    }
}
