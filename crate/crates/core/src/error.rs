//! Crate-wide error type.

use thiserror::Error;

/// Errors shared across the laboratory modules.
#[derive(Debug, Error)]
pub enum Error {
    /// p outside (1, 1 + 4/(N−1)] (the upper bound applies for N ≥ 2 only).
    #[error("invalid exponent p = {p} for N = {n}: need p > 1{}", if *n >= 2 { format!(" and p <= 1 + 4/(N-1) = {}", 1.0 + 4.0 / (*n as f64 - 1.0)) } else { String::new() })]
    InvalidExponent { p: f64, n: u32 },

    /// Sub-power q outside [1, p) or bound constant M <= 0.
    #[error("invalid lower-order bound: q = {q}, M = {m} (need 1 <= q < p = {p}, M > 0)")]
    InvalidBound { q: f64, m: f64, p: f64 },

    /// Expression source failed to parse.
    #[error("expression parse error at byte {at}: {reason} (in `{src}`)")]
    ExprParse { src: String, at: usize, reason: String },

    /// Expression references a variable not in scope for its slot.
    #[error("unknown variable `{name}` in `{src}` (allowed: {allowed})")]
    ExprVariable { src: String, name: String, allowed: &'static str },

    /// A sampled hypothesis bound failed.
    #[error("hypothesis check failed: {detail}")]
    Hypothesis { detail: String },

    /// Grid construction rejected.
    #[error("invalid grid: {detail}")]
    InvalidGrid { detail: String },

    /// Non-finite value produced by a time integration.
    #[error("non-finite state at t = {t} (step {step}): numerical instability")]
    NonFinite { t: f64, step: usize },

    /// Disturbance reached the spatial boundary before blow-up threshold.
    #[error("disturbance reached the r-boundary at t = {t} before blow-up; enlarge the domain")]
    DomainTooSmall { t: f64 },

    /// Amplitude never entered the asymptotic fitting window.
    #[error("insufficient growth at r-index {index}: peak |u| = {peak:.3e} below fitting floor {floor:.3e}")]
    InsufficientGrowth { index: usize, peak: f64, floor: f64 },

    /// Requested similarity point maps outside the stored trajectory.
    #[error("similarity point (y = {y}, s = {s}) maps outside the trajectory domain: {detail}")]
    OutOfDomain { y: f64, s: f64, detail: String },

    /// Energy concentrated at the |y| cutoff during a w-evolution.
    #[error("cutoff violation at s = {s}: edge amplitude {edge:.3e} exceeds 10x interior median {median:.3e}")]
    CutoffViolation { s: f64, edge: f64, median: f64 },

    /// Quadrature or functional input mismatch.
    #[error("functional input error: {detail}")]
    FunctionalInput { detail: String },

    /// Soliton fit could not bracket a minimum.
    #[error("fit failure: {detail}")]
    FitFailure { detail: String },

    /// Center system step failure (gap collapse or ordering violation).
    #[error("center system step failure at s = {s}: {detail}")]
    StepFailure { s: f64, detail: String },

    /// Corner fit window spans too little of |r - r0|.
    #[error("insufficient range for corner fit: {decades:.2} decades on the {side} side (need >= {need:.1})")]
    InsufficientRange { decades: f64, side: &'static str, need: f64 },

    /// Radial state does not cover the shrinking ball.
    #[error("domain coverage: {detail}")]
    DomainCoverage { detail: String },

    /// Config ingestion failure.
    #[error("config error: {detail}")]
    Config { detail: String },

    /// Replay artifact differs from the manifest's recorded run.
    #[error("replay mismatch in {artifact}: {detail}")]
    Mismatch { artifact: String, detail: String },

    /// Replay input missing on disk.
    #[error("missing input for replay: {path}")]
    MissingInput { path: String },

    /// A module error annotated with the pipeline stage it occurred in.
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Attach pipeline stage context to an error.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| Error::Stage { stage: stage.to_string(), source: Box::new(e) })
    }
}
