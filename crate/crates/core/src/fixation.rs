//! Greedy Gaussian winner-take-all, center prior and temporal smoothing.

use std::f64::consts::PI;

use crate::config::GwtaConfig;
use crate::error::{BiasError, Result};
use crate::map::GrayMap;

/// Gradient sums are taken over `μ ± WINDOW·σ`.
const WINDOW: f64 = 4.0;

/// One fitted focus of attention.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFocus {
    pub mu: (f64, f64),
    pub sigma: (f64, f64),
    pub amplitude: f64,
    pub steps_used: usize,
}

impl GaussianFocus {
    /// Unnormalized shape `exp(−½ (x−μ)ᵀ Σ⁻¹ (x−μ))` at `(x, y)`.
    pub fn shape_at(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.mu.0) / self.sigma.0;
        let dy = (y - self.mu.1) / self.sigma.1;
        (-0.5 * (dx * dx + dy * dy)).exp()
    }

    /// The same focus in a grid `factor` times finer.
    pub fn scaled(&self, factor: f64) -> GaussianFocus {
        GaussianFocus {
            mu: (self.mu.0 * factor, self.mu.1 * factor),
            sigma: (self.sigma.0 * factor, self.sigma.1 * factor),
            ..self.clone()
        }
    }
}

/// `exp(−½((i − mu)/sigma)²)` for `i` in `0..n`.
fn axis_profile(n: usize, mu: f64, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let d = (i as f64 - mu) / sigma;
            (-0.5 * d * d).exp()
        })
        .collect()
}

/// `C(μ, Σ) = Σ_x S(x)·G(x; μ, Σ)` with the normalized Gaussian `G`.
pub fn objective(map: &GrayMap, mu: (f64, f64), sigma: (f64, f64)) -> f64 {
    let gx = axis_profile(map.width(), mu.0, sigma.0);
    let gy = axis_profile(map.height(), mu.1, sigma.1);
    let mut acc = 0.0;
    for (y, wy) in gy.iter().enumerate() {
        let row: f64 = map.row(y).iter().zip(&gx).map(|(s, g)| s * g).sum();
        acc += wy * row;
    }
    acc / ((2.0 * PI).sqrt() * sigma.0 * sigma.1)
}

/// `(∂C/∂μx, ∂C/∂μy, ∂C/∂σx, ∂C/∂σy)` summed over `μ ± window·σ`.
pub fn objective_gradient(map: &GrayMap, mu: (f64, f64), sigma: (f64, f64), window: f64) -> [f64; 4] {
    let span = |m: f64, s: f64, n: usize| {
        let lo = (m - window * s).floor().max(0.0) as usize;
        let hi = ((m + window * s).ceil() as usize).min(n - 1);
        (lo, hi)
    };
    let (x0, x1) = span(mu.0, sigma.0, map.width());
    let (y0, y1) = span(mu.1, sigma.1, map.height());
    let (sx2, sy2) = (sigma.0 * sigma.0, sigma.1 * sigma.1);
    let gx: Vec<(f64, f64)> = (x0..=x1)
        .map(|x| {
            let d = x as f64 - mu.0;
            (d, (-0.5 * d * d / sx2).exp())
        })
        .collect();
    // Σ S·G·{1, dx, dx², dy, dy²}
    let mut m = [0.0f64; 5];
    for y in y0..=y1 {
        let dy = y as f64 - mu.1;
        let wy = (-0.5 * dy * dy / sy2).exp();
        let row = &map.row(y)[x0..=x1];
        let (mut r0, mut r1, mut r2) = (0.0, 0.0, 0.0);
        for (s, &(dx, g)) in row.iter().zip(&gx) {
            let v = s * g;
            r0 += v;
            r1 += v * dx;
            r2 += v * dx * dx;
        }
        m[0] += wy * r0;
        m[1] += wy * r1;
        m[2] += wy * r2;
        m[3] += wy * r0 * dy;
        m[4] += wy * r0 * dy * dy;
    }
    let norm = 1.0 / ((2.0 * PI).sqrt() * sigma.0 * sigma.1);
    [
        norm * m[1] / sx2,
        norm * m[3] / sy2,
        norm * (m[2] / (sx2 * sigma.0) - m[0] / sigma.0),
        norm * (m[4] / (sy2 * sigma.1) - m[0] / sigma.1),
    ]
}

/// Fits one focus to `residual` by regularized gradient ascent from its
/// argmax.
pub fn fit_focus(residual: &GrayMap, cfg: &GwtaConfig) -> Result<GaussianFocus> {
    if !(residual.max() > 0.0) {
        return Err(BiasError::ZeroMap("gwta residual"));
    }
    let (w, h) = residual.dims();
    let lambda = cfg.lambda(w);
    let s_max = cfg.sigma_max_px(w);
    let clamp_sigma = |s: f64| s.clamp(cfg.sigma_min, s_max);
    let (ax, ay) = residual.argmax();
    let mut mu = (ax as f64, ay as f64);
    let s0 = clamp_sigma(cfg.sigma_init_px(w));
    let mut sigma = (s0, s0);
    for _ in 0..cfg.max_steps {
        let g = objective_gradient(residual, mu, sigma, WINDOW);
        mu = (
            (mu.0 + cfg.step_mu * g[0]).clamp(0.0, (w - 1) as f64),
            (mu.1 + cfg.step_mu * g[1]).clamp(0.0, (h - 1) as f64),
        );
        sigma = (
            clamp_sigma(sigma.0 + cfg.step_sigma * (g[2] + lambda / sigma.0)),
            clamp_sigma(sigma.1 + cfg.step_sigma * (g[3] + lambda / sigma.1)),
        );
    }
    Ok(GaussianFocus {
        mu,
        sigma,
        amplitude: residual.sample_bilinear(mu.0, mu.1).max(0.0),
        steps_used: cfg.max_steps,
    })
}

/// `Σ_i a_i · exp(−½ (x−μ_i)ᵀ Σ_i⁻¹ (x−μ_i))` on a `width × height` grid,
/// clamped to `[0, 1]`.
pub fn render_foci(foci: &[GaussianFocus], width: usize, height: usize) -> GrayMap {
    let mut out = GrayMap::zeros(width, height);
    for f in foci {
        add_focus(&mut out, f, 1.0);
    }
    out.map(|v| v.clamp(0.0, 1.0))
}

fn add_focus(map: &mut GrayMap, f: &GaussianFocus, sign: f64) {
    let w = map.width();
    let gx = axis_profile(w, f.mu.0, f.sigma.0);
    let gy = axis_profile(map.height(), f.mu.1, f.sigma.1);
    for (row, wy) in map.data_mut().chunks_mut(w).zip(&gy) {
        let k = sign * f.amplitude * wy;
        for (v, g) in row.iter_mut().zip(&gx) {
            *v += k * g;
        }
    }
}

/// Greedy fit: foci are added while the residual maximum is at least
/// `residual_stop`, up to `max_foci`. A nonzero map always yields one focus.
pub fn gwta(map: &GrayMap, cfg: &GwtaConfig) -> Result<(Vec<GaussianFocus>, GrayMap)> {
    let (w, h) = map.dims();
    let mut foci = Vec::new();
    if !(map.max() > 0.0) {
        return Ok((foci, GrayMap::zeros(w, h)));
    }
    let mut residual = map.map(|v| v.max(0.0));
    while foci.len() < cfg.max_foci {
        let peak = residual.max();
        if !(peak > 0.0) || (!foci.is_empty() && peak < cfg.residual_stop) {
            break;
        }
        let focus = fit_focus(&residual, cfg)?;
        if !(focus.amplitude > 0.0) {
            break;
        }
        add_focus(&mut residual, &focus, -1.0);
        residual = residual.map(|v| v.max(0.0));
        foci.push(focus);
    }
    let rendered = render_foci(&foci, w, h);
    Ok((foci, rendered))
}

/// Anisotropic Gaussian centred at `(W/2, H/2)` with `σ = (W/3, H/3)`.
pub fn center_prior(width: usize, height: usize) -> GrayMap {
    let prior = GaussianFocus {
        mu: (width as f64 / 2.0, height as f64 / 2.0),
        sigma: (width as f64 / 3.0, height as f64 / 3.0),
        amplitude: 1.0,
        steps_used: 0,
    };
    let gx = axis_profile(width, prior.mu.0, prior.sigma.0);
    let gy = axis_profile(height, prior.mu.1, prior.sigma.1);
    GrayMap::from_fn(width, height, |x, y| gx[x] * gy[y])
}

/// `F = GWTA ∘ P`
pub fn apply_prior(map: &GrayMap, prior: &GrayMap) -> Result<GrayMap> {
    map.zip_map(prior, |a, b| a * b)
}

/// Running `F̃_t = α·F_t + (1−α)·F̃_{t−1}`, seeded with the first map.
#[derive(Clone, Debug, Default)]
pub struct EwmaState {
    smoothed: Option<GrayMap>,
}

impl EwmaState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_initialized(&self) -> bool {
        self.smoothed.is_some()
    }

    pub fn smoothed(&self) -> Option<&GrayMap> {
        self.smoothed.as_ref()
    }

    pub fn step(&mut self, f: &GrayMap, alpha: f64) -> Result<GrayMap> {
        let next = match &self.smoothed {
            None => f.clone(),
            Some(_) if alpha == 1.0 => {
                self.ensure_dims(f)?;
                f.clone()
            }
            // prev + α(F − prev): a steady input is a fixed point
            Some(prev) => prev.zip_map(f, |p, v| p + alpha * (v - p))?,
        };
        self.smoothed = Some(next.clone());
        Ok(next)
    }

    fn ensure_dims(&self, f: &GrayMap) -> Result<()> {
        match &self.smoothed {
            Some(prev) => prev.ensure_same_dims(f),
            None => Ok(()),
        }
    }
}

pub fn ewma_step(state: &mut EwmaState, f: &GrayMap, alpha: f64) -> Result<GrayMap> {
    state.step(f, alpha)
}
