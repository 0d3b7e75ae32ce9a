//! Pipeline configuration.
//!
//! The on-disk form is a flat TOML table: every field is a top-level key and
//! the fixation-fitting constants carry a `gwta_` prefix. Absent keys take
//! their default values. The same key names are accepted by
//! [`PipelineConfig::apply_override`], which backs the CLI's `--set key=value`.

use serde::{Deserialize, Serialize};

use crate::error::{BiasError, Result};

/// Blend weights `(a, b, c)` of the master map:
/// `a·N(SS∘DS) + b·N(SS) + c·N(DS)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionWeights {
    pub product: f64,
    pub static_: f64,
    pub dynamic: f64,
}

impl FusionWeights {
    pub const fn new(product: f64, static_: f64, dynamic: f64) -> Self {
        Self {
            product,
            static_,
            dynamic,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.product, self.static_, self.dynamic]
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self::new(1.0, 0.3, 0.3)
    }
}

/// Constants of the greedy Gaussian winner-take-all fit.
///
/// Lengths in `sigma_init` and `sigma_max` are fractions of the fitted map's
/// width; `sigma_min` is in pixels of that map.
#[derive(Clone, Debug, PartialEq)]
pub struct GwtaConfig {
    pub step_mu: f64,
    pub step_sigma: f64,
    /// λ = `lambda_coeff · √W`.
    pub lambda_coeff: f64,
    pub max_steps: usize,
    pub residual_stop: f64,
    pub max_foci: usize,
    pub sigma_init: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for GwtaConfig {
    fn default() -> Self {
        Self {
            step_mu: 0.1,
            step_sigma: 4.0,
            lambda_coeff: 0.03,
            max_steps: 15,
            residual_stop: 0.2,
            max_foci: 12,
            sigma_init: 0.05,
            sigma_min: 2.0,
            sigma_max: 0.5,
        }
    }
}

impl GwtaConfig {
    pub fn lambda(&self, width: usize) -> f64 {
        self.lambda_coeff * (width as f64).sqrt()
    }

    pub fn sigma_init_px(&self, width: usize) -> f64 {
        self.sigma_init * width as f64
    }

    pub fn sigma_max_px(&self, width: usize) -> f64 {
        (self.sigma_max * width as f64).max(self.sigma_min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub center_scales: Vec<usize>,
    pub deltas: Vec<usize>,
    pub tau_set: Vec<usize>,
    pub gamma: f64,
    pub fusion_weights: FusionWeights,
    pub ewma_alpha: f64,
    pub gwta: GwtaConfig,
    pub enable_gwta: bool,
    pub enable_ewma: bool,
    pub enable_center_prior: bool,
    pub threads: usize,
    pub pyramid_levels: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            center_scales: vec![2],
            deltas: vec![4],
            tau_set: vec![1, 3, 7, 15],
            gamma: 0.8,
            fusion_weights: FusionWeights::default(),
            ewma_alpha: 0.9,
            gwta: GwtaConfig::default(),
            enable_gwta: true,
            enable_ewma: true,
            enable_center_prior: true,
            threads: 4,
            pyramid_levels: 8,
        }
    }
}

impl PipelineConfig {
    /// The classic multi-scale grid: c ∈ {2,3,4}, δ ∈ {3,4}.
    pub fn itti_grid() -> Self {
        Self {
            center_scales: vec![2, 3, 4],
            deltas: vec![3, 4],
            ..Self::default()
        }
    }

    /// Checks every invariant and reports the first violation by name.
    pub fn validate(self) -> Result<Self> {
        validate_config(self)
    }

    /// All `(center, surround)` pairs in configuration order.
    pub fn scale_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.center_scales.len() * self.deltas.len());
        for &c in &self.center_scales {
            for &d in &self.deltas {
                out.push((c, c + d));
            }
        }
        out
    }

    /// The grid on which conspicuity maps are accumulated: the finest center scale.
    pub fn accumulation_scale(&self) -> usize {
        self.center_scales.iter().copied().min().unwrap_or(0)
    }

    pub fn max_tau(&self) -> usize {
        self.tau_set.iter().copied().max().unwrap_or(0)
    }

    /// Deepest pyramid level any feature map reads.
    pub fn max_surround(&self) -> usize {
        self.scale_pairs()
            .iter()
            .map(|&(_, s)| s)
            .max()
            .unwrap_or(0)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let flat: FlatConfig =
            toml::from_str(text).map_err(|e| BiasError::ConfigParse(e.to_string()))?;
        Ok(flat.into())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&FlatConfig::from(self)).expect("flat config always serializes")
    }

    /// Applies `key = value` overrides (TOML value syntax) on top of this config.
    pub fn with_overrides<'a>(
        &self,
        overrides: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(&self.to_toml_string())
            .map_err(|e| BiasError::ConfigParse(e.to_string()))?;
        for (key, raw) in overrides {
            let value = parse_toml_value(raw)
                .map_err(|e| BiasError::ConfigParse(format!("--set {key}: {e}")))?;
            table.insert(key.trim().to_string(), value);
        }
        let flat: FlatConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| BiasError::ConfigParse(e.to_string()))?;
        Ok(flat.into())
    }

    /// Single `key=value` override.
    pub fn apply_override(&self, assignment: &str) -> Result<Self> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            BiasError::ConfigParse(format!("override '{assignment}' is not key=value"))
        })?;
        self.with_overrides([(key, value)])
    }
}

fn parse_toml_value(raw: &str) -> std::result::Result<toml::Value, String> {
    let doc = format!("v = {}", raw.trim());
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => Ok(t.remove("v").expect("key present")),
        // bare words are read as strings so `--set foo=bar` gives a type error
        // from the schema rather than a syntax error here
        Err(_) => Ok(toml::Value::String(raw.trim().to_string())),
    }
}

/// Validates a configuration; returns it unchanged when every invariant holds.
pub fn validate_config(cfg: PipelineConfig) -> Result<PipelineConfig> {
    if cfg.pyramid_levels == 0 || cfg.pyramid_levels > 16 {
        return Err(BiasError::config(
            "pyramid_levels out of range",
            format!("{} not in 1..=16", cfg.pyramid_levels),
        ));
    }
    check_set("center_scales", &cfg.center_scales)?;
    check_set("deltas", &cfg.deltas)?;
    check_set("tau_set", &cfg.tau_set)?;
    if cfg.deltas.contains(&0) {
        return Err(BiasError::config("delta must be positive", "δ = 0"));
    }
    if cfg.tau_set.contains(&0) {
        return Err(BiasError::config("tau must be positive", "τ = 0"));
    }
    for &c in &cfg.center_scales {
        for &d in &cfg.deltas {
            if c + d > cfg.pyramid_levels {
                return Err(BiasError::config(
                    "c+δ exceeds pyramid depth",
                    format!("c={c}, δ={d}, levels={}", cfg.pyramid_levels),
                ));
            }
        }
    }
    if !(cfg.gamma > 0.0 && cfg.gamma <= 1.0) {
        return Err(BiasError::config(
            "gamma out of range",
            format!("{} not in (0, 1]", cfg.gamma),
        ));
    }
    let w = cfg.fusion_weights.as_array();
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(BiasError::config(
            "fusion weights must be non-negative",
            format!("{w:?}"),
        ));
    }
    if w.iter().all(|v| *v == 0.0) {
        return Err(BiasError::config("fusion weights all zero", format!("{w:?}")));
    }
    if !(cfg.ewma_alpha > 0.0 && cfg.ewma_alpha <= 1.0) {
        return Err(BiasError::config(
            "ewma_alpha out of range",
            format!("{} not in (0, 1]", cfg.ewma_alpha),
        ));
    }
    if cfg.threads == 0 {
        return Err(BiasError::config("threads must be positive", "threads = 0"));
    }
    validate_gwta(&cfg.gwta)?;
    Ok(cfg)
}

fn check_set(name: &'static str, values: &[usize]) -> Result<()> {
    if values.is_empty() {
        return Err(BiasError::config("empty set", name));
    }
    for (i, v) in values.iter().enumerate() {
        if values[..i].contains(v) {
            return Err(BiasError::config(
                "duplicate set entry",
                format!("{name} contains {v} twice"),
            ));
        }
    }
    Ok(())
}

fn validate_gwta(g: &GwtaConfig) -> Result<()> {
    if g.max_steps < 1 {
        return Err(BiasError::config("gwta max_steps must be >= 1", "0"));
    }
    if !(g.residual_stop > 0.0 && g.residual_stop < 1.0) {
        return Err(BiasError::config(
            "gwta residual_stop out of range",
            format!("{} not in (0, 1)", g.residual_stop),
        ));
    }
    if g.max_foci < 1 {
        return Err(BiasError::config("gwta max_foci must be >= 1", "0"));
    }
    for (name, v) in [
        ("step_mu", g.step_mu),
        ("step_sigma", g.step_sigma),
        ("lambda_coeff", g.lambda_coeff),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(BiasError::config(
                "gwta step/regularizer must be non-negative",
                format!("{name} = {v}"),
            ));
        }
    }
    if !(g.sigma_min > 0.0 && g.sigma_min.is_finite()) {
        return Err(BiasError::config(
            "gwta sigma_min must be positive",
            format!("{}", g.sigma_min),
        ));
    }
    if !(g.sigma_init > 0.0 && g.sigma_max > 0.0 && g.sigma_init <= g.sigma_max) {
        return Err(BiasError::config(
            "gwta sigma bounds inconsistent",
            format!("init {} max {}", g.sigma_init, g.sigma_max),
        ));
    }
    Ok(())
}

/// Flat on-disk schema.
#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlatConfig {
    center_scales: Vec<usize>,
    deltas: Vec<usize>,
    tau_set: Vec<usize>,
    gamma: f64,
    fusion_weights: [f64; 3],
    ewma_alpha: f64,
    enable_gwta: bool,
    enable_ewma: bool,
    enable_center_prior: bool,
    threads: usize,
    pyramid_levels: usize,
    gwta_step_mu: f64,
    gwta_step_sigma: f64,
    gwta_lambda_coeff: f64,
    gwta_max_steps: usize,
    gwta_residual_stop: f64,
    gwta_max_foci: usize,
    gwta_sigma_init: f64,
    gwta_sigma_min: f64,
    gwta_sigma_max: f64,
}

impl Default for FlatConfig {
    fn default() -> Self {
        FlatConfig::from(&PipelineConfig::default())
    }
}

impl From<&PipelineConfig> for FlatConfig {
    fn from(c: &PipelineConfig) -> Self {
        FlatConfig {
            center_scales: c.center_scales.clone(),
            deltas: c.deltas.clone(),
            tau_set: c.tau_set.clone(),
            gamma: c.gamma,
            fusion_weights: c.fusion_weights.as_array(),
            ewma_alpha: c.ewma_alpha,
            enable_gwta: c.enable_gwta,
            enable_ewma: c.enable_ewma,
            enable_center_prior: c.enable_center_prior,
            threads: c.threads,
            pyramid_levels: c.pyramid_levels,
            gwta_step_mu: c.gwta.step_mu,
            gwta_step_sigma: c.gwta.step_sigma,
            gwta_lambda_coeff: c.gwta.lambda_coeff,
            gwta_max_steps: c.gwta.max_steps,
            gwta_residual_stop: c.gwta.residual_stop,
            gwta_max_foci: c.gwta.max_foci,
            gwta_sigma_init: c.gwta.sigma_init,
            gwta_sigma_min: c.gwta.sigma_min,
            gwta_sigma_max: c.gwta.sigma_max,
        }
    }
}

impl From<FlatConfig> for PipelineConfig {
    fn from(f: FlatConfig) -> Self {
        let [a, b, c] = f.fusion_weights;
        PipelineConfig {
            center_scales: f.center_scales,
            deltas: f.deltas,
            tau_set: f.tau_set,
            gamma: f.gamma,
            fusion_weights: FusionWeights::new(a, b, c),
            ewma_alpha: f.ewma_alpha,
            gwta: GwtaConfig {
                step_mu: f.gwta_step_mu,
                step_sigma: f.gwta_step_sigma,
                lambda_coeff: f.gwta_lambda_coeff,
                max_steps: f.gwta_max_steps,
                residual_stop: f.gwta_residual_stop,
                max_foci: f.gwta_max_foci,
                sigma_init: f.gwta_sigma_init,
                sigma_min: f.gwta_sigma_min,
                sigma_max: f.gwta_sigma_max,
            },
            enable_gwta: f.enable_gwta,
            enable_ewma: f.enable_ewma,
            enable_center_prior: f.enable_center_prior,
            threads: f.threads,
            pyramid_levels: f.pyramid_levels,
        }
    }
}
