//! Scalar fields and RGB frames.
//!
//! Maps are stored row-major with `x` running along a row. Pixel `(x, y)` sits
//! at integer coordinates; sub-pixel positions used by the fixation stage follow
//! the same convention.

use crate::error::{BiasError, Result};

/// A single-channel 2D field of `f64` values.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayMap {
    /// All-zero map.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(BiasError::InvalidDimensions { width, height });
        }
        if data.len() != width * height {
            return Err(BiasError::BufferLength {
                width,
                height,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a map by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Sample with coordinates clamped into the map (edge replication).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Bilinear sample at a sub-pixel position, clamped to the map.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let xf = x.clamp(0.0, (self.width - 1) as f64);
        let yf = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = xf.floor() as usize;
        let y0 = yf.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let wx = xf - x0 as f64;
        let wy = yf - y0 as f64;
        let top = lerp(self.get(x0, y0), self.get(x1, y0), wx);
        let bottom = lerp(self.get(x0, y1), self.get(x1, y1), wx);
        lerp(top, bottom, wy)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Position of the maximum; ties go to the first pixel in raster order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        let first = self.data[0];
        self.data.iter().all(|&v| v == first)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayMap {
        GrayMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two equally sized maps.
    pub fn zip_map(&self, other: &GrayMap, f: impl Fn(f64, f64) -> f64) -> Result<GrayMap> {
        self.ensure_same_dims(other)?;
        Ok(GrayMap {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add_assign(&mut self, other: &GrayMap) -> Result<()> {
        self.ensure_same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, other: &GrayMap, k: f64) -> Result<()> {
        self.ensure_same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
        Ok(())
    }

    pub fn scale(&self, k: f64) -> GrayMap {
        self.map(|v| v * k)
    }

    /// Divides by the maximum so the peak becomes 1. Maps whose maximum is not
    /// positive are returned as zero maps.
    pub fn rescaled_to_unit(&self) -> GrayMap {
        let m = self.max();
        if m > 0.0 {
            self.map(|v| (v / m).max(0.0))
        } else {
            GrayMap::zeros(self.width, self.height)
        }
    }

    pub fn ensure_same_dims(&self, other: &GrayMap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(BiasError::mismatch(self.dims(), other.dims()));
        }
        Ok(())
    }
}

/// `a + w (b - a)`; exact when `a == b`, so constant fields stay bit-constant.
#[inline]
pub(crate) fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + w * (b - a)
}

/// An RGB frame with real-valued channels in `[0, 255]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRGB {
    width: usize,
    height: usize,
    r: Vec<f64>,
    g: Vec<f64>,
    b: Vec<f64>,
}

impl FrameRGB {
    /// Builds a frame from planar channels, checking lengths and value range.
    pub fn from_planes(
        width: usize,
        height: usize,
        r: Vec<f64>,
        g: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(BiasError::InvalidDimensions { width, height });
        }
        for plane in [&r, &g, &b] {
            if plane.len() != width * height {
                return Err(BiasError::BufferLength {
                    width,
                    height,
                    got: plane.len(),
                });
            }
        }
        for plane in [&r, &g, &b] {
            if let Some(i) = plane
                .iter()
                .position(|v| !v.is_finite() || *v < 0.0 || *v > 255.0)
            {
                return Err(BiasError::PixelRange {
                    x: i % width,
                    y: i / width,
                    value: plane[i],
                });
            }
        }
        Ok(Self {
            width,
            height,
            r,
            g,
            b,
        })
    }

    /// Builds a frame from interleaved 8-bit RGB (RGB24, row-major).
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(BiasError::InvalidDimensions { width, height });
        }
        if bytes.len() != width * height * 3 {
            return Err(BiasError::BufferLength {
                width,
                height,
                got: bytes.len() / 3,
            });
        }
        let n = width * height;
        let mut r = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for px in bytes.chunks_exact(3) {
            r.push(px[0] as f64);
            g.push(px[1] as f64);
            b.push(px[2] as f64);
        }
        Ok(Self {
            width,
            height,
            r,
            g,
            b,
        })
    }

    /// Frame filled with one colour.
    pub fn uniform(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let n = width * height;
        Self::from_planes(
            width,
            height,
            vec![rgb[0]; n],
            vec![rgb[1]; n],
            vec![rgb[2]; n],
        )
    }

    /// Builds a frame by evaluating `f(x, y) -> [r, g, b]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let n = width * height;
        let (mut r, mut g, mut b) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for y in 0..height {
            for x in 0..width {
                let [pr, pg, pb] = f(x, y);
                r.push(pr);
                g.push(pg);
                b.push(pb);
            }
        }
        Self::from_planes(width, height, r, g, b)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = y * self.width + x;
        [self.r[i], self.g[i], self.b[i]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = y * self.width + x;
        self.r[i] = rgb[0].clamp(0.0, 255.0);
        self.g[i] = rgb[1].clamp(0.0, 255.0);
        self.b[i] = rgb[2].clamp(0.0, 255.0);
    }

    /// Checks that both sides are at least `2^levels` pixels.
    pub fn check_depth(&self, levels: usize) -> Result<()> {
        let need = 1usize << levels;
        if self.width < need || self.height < need {
            return Err(BiasError::TooSmall {
                width: self.width,
                height: self.height,
                levels,
            });
        }
        Ok(())
    }
}
