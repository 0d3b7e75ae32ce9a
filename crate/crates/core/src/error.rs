use thiserror::Error;

pub type Result<T> = std::result::Result<T, BiasError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiasError {
    /// A configuration invariant does not hold. `rule` is the stable name of the
    /// violated invariant.
    #[error("{rule}: {detail}")]
    InvalidConfig { rule: &'static str, detail: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("map {width}x{height} too small for {levels} pyramid levels")]
    TooSmall {
        width: usize,
        height: usize,
        levels: usize,
    },

    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    #[error("buffer length {got} does not match {width}x{height}")]
    BufferLength {
        width: usize,
        height: usize,
        got: usize,
    },

    #[error("pixel value {value} at ({x}, {y}) is outside [0, 255] or not finite")]
    PixelRange { x: usize, y: usize, value: f64 },

    #[error("invalid scale pair: center {center}, surround {surround}")]
    InvalidScalePair { center: usize, surround: usize },

    #[error("pyramid scale {scale} not available (depth {depth})")]
    MissingScale { scale: usize, depth: usize },

    #[error("temporal offset {tau} unavailable: {available} frame(s) in history")]
    HistoryUnavailable { tau: usize, available: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero map: {0}")]
    ZeroMap(&'static str),

    #[error("fixation ({x}, {y}) outside {width}x{height} frame")]
    FixationOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<BiasError>,
    },

    #[error("frame source error at frame {index}: {message}")]
    Source { index: usize, message: String },

    #[error("worker pool: {0}")]
    Pool(String),
}

impl BiasError {
    pub(crate) fn config(rule: &'static str, detail: impl Into<String>) -> Self {
        BiasError::InvalidConfig {
            rule,
            detail: detail.into(),
        }
    }

    pub(crate) fn mismatch(expected: (usize, usize), got: (usize, usize)) -> Self {
        BiasError::DimensionMismatch {
            expected_w: expected.0,
            expected_h: expected.1,
            got_w: got.0,
            got_h: got.1,
        }
    }

    /// Short machine-readable kind tag, used by the CLI's one-line error output.
    pub fn kind(&self) -> &'static str {
        match self {
            BiasError::InvalidConfig { .. } => "invalid-config",
            BiasError::ConfigParse(_) => "config-parse",
            BiasError::DimensionMismatch { .. } => "dimension-mismatch",
            BiasError::TooSmall { .. } => "too-small",
            BiasError::InvalidDimensions { .. } => "invalid-dimensions",
            BiasError::BufferLength { .. } => "buffer-length",
            BiasError::PixelRange { .. } => "pixel-range",
            BiasError::InvalidScalePair { .. } => "invalid-scale-pair",
            BiasError::MissingScale { .. } => "missing-scale",
            BiasError::HistoryUnavailable { .. } => "history-unavailable",
            BiasError::Empty(_) => "empty-input",
            BiasError::ZeroMap(_) => "zero-map",
            BiasError::FixationOutOfBounds { .. } => "fixation-out-of-bounds",
            BiasError::Frame { source, .. } => source.kind(),
            BiasError::Source { .. } => "source",
            BiasError::Pool(_) => "pool",
        }
    }
}
