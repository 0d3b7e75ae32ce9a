//! Dyadic Gaussian pyramids and the across-scale operators.
//!
//! Level `σ+1` is the 5-tap binomial blur of level `σ` sampled at even indices,
//! so pixel `i` of level `σ` sits over pixel `i·2^σ` of the base. Upsampling
//! between levels uses the same geometry (`x_src = x_dst / 2^Δσ`). Borders are
//! handled by edge replication throughout.

use crate::error::{BiasError, Result};
use crate::map::{lerp, GrayMap};
use crate::parallel::for_each_row;

/// Binomial [1, 4, 6, 4, 1] / 16.
const BINOMIAL5: [f64; 5] = [0.0625, 0.25, 0.375, 0.25, 0.0625];

#[derive(Clone, Debug, PartialEq)]
pub struct Pyramid {
    levels: Vec<GrayMap>,
}

impl Pyramid {
    pub fn from_levels(levels: Vec<GrayMap>) -> Result<Self> {
        if levels.is_empty() {
            return Err(BiasError::Empty("pyramid levels"));
        }
        for w in levels.windows(2) {
            let (pw, ph) = w[0].dims();
            let expect = (pw.div_ceil(2), ph.div_ceil(2));
            if w[1].dims() != expect {
                return Err(BiasError::mismatch(expect, w[1].dims()));
            }
        }
        Ok(Self { levels })
    }

    /// Deepest scale index `L` (the pyramid holds `L + 1` maps).
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, scale: usize) -> Result<&GrayMap> {
        self.levels.get(scale).ok_or(BiasError::MissingScale {
            scale,
            depth: self.depth(),
        })
    }

    pub fn levels(&self) -> &[GrayMap] {
        &self.levels
    }

    pub fn base_dims(&self) -> (usize, usize) {
        self.levels[0].dims()
    }

    /// Pointwise `f` applied on every level.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Copy) -> Pyramid {
        Pyramid {
            levels: self.levels.iter().map(|l| l.map(f)).collect(),
        }
    }

    /// Per-level dimensions.
    pub fn shape(&self) -> Vec<(usize, usize)> {
        self.levels.iter().map(GrayMap::dims).collect()
    }
}

/// Dimensions of level `scale` for a base of `width × height`.
pub fn level_dims(width: usize, height: usize, scale: usize) -> (usize, usize) {
    let (mut w, mut h) = (width, height);
    for _ in 0..scale {
        w = w.div_ceil(2);
        h = h.div_ceil(2);
    }
    (w, h)
}

/// Builds scales `0..=levels`. Level 0 is `base` itself.
pub fn build_pyramid(base: GrayMap, levels: usize) -> Result<Pyramid> {
    let need = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    if base.width() < need || base.height() < need {
        return Err(BiasError::TooSmall {
            width: base.width(),
            height: base.height(),
            levels,
        });
    }
    let mut out = Vec::with_capacity(levels + 1);
    out.push(base);
    for l in 0..levels {
        let next = reduce(&out[l]);
        out.push(next);
    }
    Ok(Pyramid { levels: out })
}

/// Binomial blur followed by 2× decimation keeping even indices.
pub fn reduce(map: &GrayMap) -> GrayMap {
    let (w, h) = map.dims();
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));

    // horizontal pass, evaluated only at retained columns
    let mut tmp = vec![0.0; nw * h];
    for_each_row(&mut tmp, nw, |y, row| {
        let src = map.row(y);
        for (i, out) in row.iter_mut().enumerate() {
            *out = tap5_clamped(src, 2 * i);
        }
    });

    let mut data = vec![0.0; nw * nh];
    for_each_row(&mut data, nw, |j, row| {
        let cy = 2 * j as isize;
        let rows: [&[f64]; 5] = std::array::from_fn(|k| {
            let yy = (cy + k as isize - 2).clamp(0, h as isize - 1) as usize;
            &tmp[yy * nw..(yy + 1) * nw]
        });
        for (i, out) in row.iter_mut().enumerate() {
            *out = BINOMIAL5[0] * rows[0][i]
                + BINOMIAL5[1] * rows[1][i]
                + BINOMIAL5[2] * rows[2][i]
                + BINOMIAL5[3] * rows[3][i]
                + BINOMIAL5[4] * rows[4][i];
        }
    });
    GrayMap::from_vec(nw, nh, data).expect("reduce keeps dims consistent")
}

#[inline]
fn tap5_clamped(src: &[f64], x: usize) -> f64 {
    let last = src.len() as isize - 1;
    let at = |d: isize| src[(x as isize + d).clamp(0, last) as usize];
    BINOMIAL5[0] * at(-2)
        + BINOMIAL5[1] * at(-1)
        + BINOMIAL5[2] * at(0)
        + BINOMIAL5[3] * at(1)
        + BINOMIAL5[4] * at(2)
}

/// Bilinear resampling to `target_w × target_h`.
///
/// Source coordinates are `x_dst · src_w / target_w` (origin aligned). Resizing
/// to the map's own size returns an exact copy.
pub fn resize_to(map: &GrayMap, target_w: usize, target_h: usize) -> Result<GrayMap> {
    if target_w == 0 || target_h == 0 {
        return Err(BiasError::InvalidDimensions {
            width: target_w,
            height: target_h,
        });
    }
    if map.dims() == (target_w, target_h) {
        return Ok(map.clone());
    }
    let fx = map.width() as f64 / target_w as f64;
    let fy = map.height() as f64 / target_h as f64;
    Ok(resample(map, target_w, target_h, fx, fy))
}

/// Upsamples a map from pyramid scale `from` to the grid of scale `to < from`
/// whose dimensions are `target_w × target_h`.
pub fn upsample_between(
    map: &GrayMap,
    from: usize,
    to: usize,
    target_w: usize,
    target_h: usize,
) -> Result<GrayMap> {
    if from < to {
        return Err(BiasError::InvalidScalePair {
            center: to,
            surround: from,
        });
    }
    if from == to {
        if map.dims() != (target_w, target_h) {
            return Err(BiasError::mismatch((target_w, target_h), map.dims()));
        }
        return Ok(map.clone());
    }
    let f = 1.0 / (1u64 << (from - to)) as f64;
    Ok(resample(map, target_w, target_h, f, f))
}

fn resample(map: &GrayMap, tw: usize, th: usize, fx: f64, fy: f64) -> GrayMap {
    let (sw, sh) = map.dims();
    let axis = |n: usize, f: f64, src_n: usize| -> Vec<(usize, usize, f64)> {
        (0..n)
            .map(|i| {
                let s = (i as f64 * f).clamp(0.0, (src_n - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(src_n - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xs = axis(tw, fx, sw);
    let ys = axis(th, fy, sh);
    let mut data = vec![0.0; tw * th];
    for_each_row(&mut data, tw, |y, row| {
        let (y0, y1, wy) = ys[y];
        let r0 = map.row(y0);
        let r1 = map.row(y1);
        for (out, &(x0, x1, wx)) in row.iter_mut().zip(&xs) {
            let top = lerp(r0[x0], r0[x1], wx);
            let bottom = lerp(r1[x0], r1[x1], wx);
            *out = lerp(top, bottom, wy);
        }
    });
    GrayMap::from_vec(tw, th, data).expect("resample dims")
}

/// Center–surround difference `center ⊖ surround`, returned on the center grid.
/// No rectification is applied.
pub fn across_scale_diff(
    center: &GrayMap,
    center_scale: usize,
    surround: &GrayMap,
    surround_scale: usize,
) -> Result<GrayMap> {
    if surround_scale <= center_scale {
        return Err(BiasError::InvalidScalePair {
            center: center_scale,
            surround: surround_scale,
        });
    }
    let (w, h) = center.dims();
    let up = upsample_between(surround, surround_scale, center_scale, w, h)?;
    center.zip_map(&up, |c, s| c - s)
}

/// Across-scale sum `⊕`: every map is brought to the target grid and added in
/// list order.
pub fn across_scale_sum(
    maps: &[(&GrayMap, usize)],
    target_scale: usize,
    target_dims: (usize, usize),
) -> Result<GrayMap> {
    if maps.is_empty() {
        return Err(BiasError::Empty("across-scale sum"));
    }
    let (tw, th) = target_dims;
    let mut acc = GrayMap::zeros(tw, th);
    for &(m, scale) in maps {
        if scale == target_scale {
            acc.add_assign(m)?;
        } else {
            acc.add_assign(&upsample_between(m, scale, target_scale, tw, th)?)?;
        }
    }
    Ok(acc)
}
