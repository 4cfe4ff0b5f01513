use thiserror::Error;

/// Errors produced anywhere in the backpropagation pipeline or the link simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("signal duration {duration:e} s does not match normalization window {window:e} s")]
    WindowMismatch { duration: f64, window: f64 },

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("normalizer 1+kappa|E|^2 is not positive at sample {index} (|E| = {magnitude})")]
    NormalizerSingular { index: usize, magnitude: f64 },

    #[error("degenerate scattering data at layer {layer}: a0 = 0")]
    DegeneratePair { layer: usize },

    #[error("non-contractive scattering data at layer {layer}: |b0/a0| = {ratio}")]
    NonContractive { layer: usize, ratio: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("reference symbols carry zero energy")]
    ZeroReference,

    #[error("Q-factor undefined for BER {0}")]
    UndefinedQ(f64),

    #[error("guard time {guard:e} s is shorter than the dispersion memory {memory:e} s")]
    GuardTooShort { guard: f64, memory: f64 },

    #[error("polynomial degree {degree} exceeds the root-finder cap {cap}")]
    DegreeTooLarge { degree: usize, cap: usize },

    #[error("root finder did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
