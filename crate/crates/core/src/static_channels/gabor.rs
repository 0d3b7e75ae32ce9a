//! Separable complex Gabor filtering.
//!
//! A Gabor kernel with a Gaussian envelope of width `σ_F` and carrier wave
//! vector `k·(cos θ, sin θ)` factors into a row kernel `g(x)·e^{i k cosθ x}` and
//! a column kernel `g(y)·e^{i k sinθ y}`, so a 2D filter costs two 1D passes.
//!
//! Conventions (pinned by tests):
//! - `θ` is the direction of the carrier wave vector; `θ = 0` modulates along
//!   `x` and responds to vertical structure.
//! - The envelope is `σ_F = 2π²/ω` with `ω = 2π²/2.7` below the reuse level,
//!   i.e. `σ_F = 2.7` px, and the carrier wavelength is `2σ_F`.
//! - The envelope is normalized to unit sum and the kernel's DC component is
//!   removed (`K = g⊗g·(carrier − κ)`), so uniform regions give no response.
//!   The DC term is itself separable: it is `κ` times the Gaussian blur.
//! - The readout is the complex magnitude.
//! - Levels above the reuse level (5) are obtained by filtering the reuse level
//!   with the wavelength doubled once per extra octave, then reducing.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{BiasError, Result};
use crate::map::GrayMap;
use crate::parallel::for_each_row;
use crate::pyramid::{reduce, Pyramid};

/// Carrier orientations, in radians.
pub const ORIENTATIONS: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];

/// Envelope width below the reuse level: `σ_F = 2π²/ω` with `ω = 2π²/2.7`.
pub const BASE_ENVELOPE_SIGMA: f64 = 2.7;

/// First pyramid level whose orientation features are derived from a coarser
/// filter on this level rather than computed on their own level.
pub const REUSE_LEVEL: usize = 5;

/// The 1D factors of one oriented kernel.
#[derive(Clone, Debug)]
pub struct GaborKernels {
    pub theta: f64,
    /// Row (x) factor `g(x) e^{i k cosθ x}`, indexed `x + half`.
    pub row: Vec<Complex64>,
    /// Column (y) factor `g(y) e^{i k sinθ y}`.
    pub col: Vec<Complex64>,
    /// DC coefficient `κ` subtracted with the Gaussian envelope.
    pub dc: Complex64,
}

/// Kernels for one envelope width (one octave of the wavelength schedule).
#[derive(Clone, Debug)]
pub struct GaborOctave {
    pub envelope_sigma: f64,
    /// Carrier angular frequency `k` in radians per pixel.
    pub wavenumber: f64,
    /// Unit-sum Gaussian envelope, length `2·half + 1`.
    pub envelope: Vec<f64>,
    pub kernels: [GaborKernels; 4],
}

impl GaborOctave {
    pub fn new(envelope_sigma: f64) -> Self {
        let half = (3.0 * envelope_sigma).ceil() as isize;
        let wavenumber = PI / envelope_sigma;
        let raw: Vec<f64> = (-half..=half)
            .map(|x| (-(x * x) as f64 / (2.0 * envelope_sigma * envelope_sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let envelope: Vec<f64> = raw.iter().map(|v| v / total).collect();

        let kernels = ORIENTATIONS.map(|theta| {
            let carrier = |freq: f64| -> Vec<Complex64> {
                (-half..=half)
                    .zip(&envelope)
                    .map(|(x, &g)| Complex64::from_polar(g, freq * x as f64))
                    .collect()
            };
            let row = carrier(wavenumber * theta.cos());
            let col = carrier(wavenumber * theta.sin());
            let dc = row.iter().sum::<Complex64>() * col.iter().sum::<Complex64>();
            GaborKernels {
                theta,
                row,
                col,
                dc,
            }
        });
        Self {
            envelope_sigma,
            wavenumber,
            envelope,
            kernels,
        }
    }

    pub fn half_width(&self) -> usize {
        self.envelope.len() / 2
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * PI / self.wavenumber
    }

    /// Complex response of orientation `orientation` (index into [`ORIENTATIONS`]).
    pub fn filter_complex(&self, map: &GrayMap, orientation: usize) -> Vec<Complex64> {
        let k = &self.kernels[orientation];
        let blurred = self.blur(map);
        let (w, h) = map.dims();
        let rows = conv_rows_real_to_complex(map.data(), w, h, &k.row);
        let mut out = conv_cols_complex(&rows, w, h, &k.col);
        for (o, &b) in out.iter_mut().zip(&blurred) {
            *o -= k.dc * b;
        }
        out
    }

    /// Gaussian envelope blur (the DC-path of every orientation).
    pub fn blur(&self, map: &GrayMap) -> Vec<f64> {
        let (w, h) = map.dims();
        let rows = conv_rows_real(map.data(), w, h, &self.envelope);
        conv_cols_real(&rows, w, h, &self.envelope)
    }

    /// Magnitude responses for all orientations, sharing the envelope blur.
    pub fn filter_all(&self, map: &GrayMap) -> [GrayMap; 4] {
        let (w, h) = map.dims();
        let blurred = self.blur(map);
        std::array::from_fn(|o| {
            let k = &self.kernels[o];
            let rows = conv_rows_real_to_complex(map.data(), w, h, &k.row);
            let z = conv_cols_complex(&rows, w, h, &k.col);
            let mag = z
                .iter()
                .zip(&blurred)
                .map(|(&z, &b)| (z - k.dc * b).norm())
                .collect();
            GrayMap::from_vec(w, h, mag).expect("filter dims")
        })
    }

    /// Magnitude response for one orientation.
    pub fn filter(&self, map: &GrayMap, orientation: usize) -> GrayMap {
        let (w, h) = map.dims();
        let mag = self
            .filter_complex(map, orientation)
            .iter()
            .map(|z| z.norm())
            .collect();
        GrayMap::from_vec(w, h, mag).expect("filter dims")
    }
}

/// Per-octave kernel sets for a pyramid of a given depth.
#[derive(Clone, Debug)]
pub struct GaborBank {
    octaves: Vec<GaborOctave>,
    reuse_level: usize,
}

impl GaborBank {
    /// Bank covering levels `0..=levels` with the default envelope.
    pub fn new(levels: usize) -> Self {
        Self::with_envelope(BASE_ENVELOPE_SIGMA, levels)
    }

    pub fn with_envelope(envelope_sigma: f64, levels: usize) -> Self {
        let extra = levels.saturating_sub(REUSE_LEVEL);
        let octaves = (0..=extra)
            .map(|o| GaborOctave::new(envelope_sigma * (1u64 << o) as f64))
            .collect();
        Self {
            octaves,
            reuse_level: REUSE_LEVEL,
        }
    }

    /// Spatial frequency parameter `ω = 2π²/σ_F` of the base octave.
    pub fn omega(&self) -> f64 {
        2.0 * PI * PI / self.octaves[0].envelope_sigma
    }

    pub fn reuse_level(&self) -> usize {
        self.reuse_level
    }

    pub fn octave(&self, index: usize) -> Option<&GaborOctave> {
        self.octaves.get(index)
    }

    pub fn octaves(&self) -> &[GaborOctave] {
        &self.octaves
    }

    /// `(source level, octave)` used to produce orientation features at `level`.
    pub fn schedule(&self, level: usize) -> (usize, usize) {
        if level <= self.reuse_level {
            (level, 0)
        } else {
            (self.reuse_level, level - self.reuse_level)
        }
    }
}

/// Orientation response `O(level, θ)` from an intensity pyramid.
pub fn gabor_level(
    intensity: &Pyramid,
    bank: &GaborBank,
    orientation: usize,
    level: usize,
) -> Result<GrayMap> {
    let (src, octave) = bank.schedule(level);
    let oct = bank.octave(octave).ok_or(BiasError::MissingScale {
        scale: level,
        depth: bank.reuse_level + bank.octaves.len() - 1,
    })?;
    let mut out = oct.filter(intensity.level(src)?, orientation);
    for _ in src..level {
        out = reduce(&out);
    }
    Ok(out)
}

/// Orientation pyramid `O(·, θ)` over every level of `intensity`.
pub fn gabor_orient(intensity: &Pyramid, bank: &GaborBank, orientation: usize) -> Result<Pyramid> {
    let levels = (0..=intensity.depth())
        .map(|l| gabor_level(intensity, bank, orientation, l))
        .collect::<Result<Vec<_>>>()?;
    Pyramid::from_levels(levels)
}

// 1D passes: out(x) = Σ_j in(clamp(x − j)) k(j), j ∈ [−half, half].

fn conv_rows_real(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let half = (k.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for_each_row(&mut out, w, |y, row| {
        let s = &src[y * w..(y + 1) * w];
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                let j = t as isize - half;
                let xx = (x as isize - j).clamp(0, w as isize - 1) as usize;
                acc += s[xx] * kv;
            }
            *o = acc;
        }
    });
    out
}

fn conv_cols_real(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let half = (k.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    for_each_row(&mut out, w, |y, row| {
        for (t, &kv) in k.iter().enumerate() {
            let j = t as isize - half;
            let yy = (y as isize - j).clamp(0, h as isize - 1) as usize;
            let s = &src[yy * w..(yy + 1) * w];
            for (o, &v) in row.iter_mut().zip(s) {
                *o += v * kv;
            }
        }
    });
    out
}

fn conv_rows_real_to_complex(src: &[f64], w: usize, h: usize, k: &[Complex64]) -> Vec<Complex64> {
    let half = (k.len() / 2) as isize;
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for_each_row(&mut out, w, |y, row| {
        let s = &src[y * w..(y + 1) * w];
        for (x, o) in row.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, kv) in k.iter().enumerate() {
                let j = t as isize - half;
                let xx = (x as isize - j).clamp(0, w as isize - 1) as usize;
                re += s[xx] * kv.re;
                im += s[xx] * kv.im;
            }
            *o = Complex64::new(re, im);
        }
    });
    out
}

fn conv_cols_complex(src: &[Complex64], w: usize, h: usize, k: &[Complex64]) -> Vec<Complex64> {
    let half = (k.len() / 2) as isize;
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for_each_row(&mut out, w, |y, row| {
        for (t, &kv) in k.iter().enumerate() {
            let j = t as isize - half;
            let yy = (y as isize - j).clamp(0, h as isize - 1) as usize;
            let s = &src[yy * w..(yy + 1) * w];
            for (o, &v) in row.iter_mut().zip(s) {
                *o += v * kv;
            }
        }
    });
    out
}
