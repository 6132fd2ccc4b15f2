//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures reported by profile evaluation, discretization, time stepping,
/// diagnostics and configuration handling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of an evaluator.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is missing, out of range, or inconsistent.
    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// Array lengths do not agree with the grid or with each other.
    #[error("shape error: expected {expected} samples, got {got}")]
    Shape { expected: usize, got: usize },

    /// A negative-power weighted norm was requested for samples that do not
    /// vanish at the endpoints.
    #[error("weighted norm with power {power} needs vanishing endpoint samples (found {left:e}, {right:e})")]
    Degeneracy { power: f64, left: f64, right: f64 },

    /// The flow map lost invertibility: `min(1 + θ_ξ)` fell to or below the floor.
    #[error("flow map degeneracy at t = {t}: min eta_xi = {min_eta_xi} <= floor {floor}")]
    FlowMapDegeneracy { t: f64, min_eta_xi: f64, floor: f64 },

    /// The flow map left the window `[lower, upper]` imposed in general-data mode.
    #[error("flow map left the window [{lower}, {upper}] at t = {t}: eta_xi in [{min_eta_xi}, {max_eta_xi}]")]
    FlowMapWindow {
        t: f64,
        min_eta_xi: f64,
        max_eta_xi: f64,
        lower: f64,
        upper: f64,
    },

    /// The flow map is not strictly increasing, so no Eulerian fields exist.
    #[error("non-monotone flow map at t = {t}: x does not increase after node {index}")]
    NonMonotoneMap { t: f64, index: usize },

    /// Newton iteration failed to reduce the residual below tolerance.
    #[error("newton divergence at t = {t}: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence { t: f64, residual: f64, iterations: usize },

    /// A linear system was singular to working precision.
    #[error("singular linear system: zero pivot in column {0}")]
    Singular(usize),

    /// An eigenvalue computation did not produce a usable result.
    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    /// The target height and the reference profile carry different masses.
    #[error("incompatible mass: target {target}, reference {reference} (relative mismatch {relative:e})")]
    IncompatibleMass { target: f64, reference: f64, relative: f64 },

    /// A height profile violates positivity, endpoint, or monotonicity requirements.
    #[error("invalid height profile: {0}")]
    InvalidHeight(String),

    /// A least-squares fit could not be performed.
    #[error("fit error: {0}")]
    Fit(String),

    /// The Hardy inequality borderline `k + 1/p = 1` is not supported.
    #[error("borderline Hardy exponent k + 1/p = 1 (k = {k}, p = {p}) is unsupported")]
    HardyBorderline { k: f64, p: f64 },

    /// Projection onto the mean-zero subspace did not remove the weighted mean.
    #[error("projection failed: residual weighted mean {0:e}")]
    Projection(f64),

    /// No admissible coupling constant was found in the sweep.
    #[error("no admissible coupling constant: {0}")]
    NoAdmissibleCoupling(String),

    /// A query produced no qualifying samples.
    #[error("empty result: {0}")]
    Empty(String),

    /// File or serialization failure.
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable snake-case name of the variant, used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Config { .. } => "config",
            Error::Shape { .. } => "shape",
            Error::Degeneracy { .. } => "degeneracy",
            Error::FlowMapDegeneracy { .. } => "flow_map_degeneracy",
            Error::FlowMapWindow { .. } => "flow_map_window",
            Error::NonMonotoneMap { .. } => "non_monotone_map",
            Error::NewtonDivergence { .. } => "newton_divergence",
            Error::Singular(_) => "singular",
            Error::Eigen(_) => "eigen",
            Error::IncompatibleMass { .. } => "incompatible_mass",
            Error::InvalidHeight(_) => "invalid_height",
            Error::Fit(_) => "fit",
            Error::HardyBorderline { .. } => "hardy_borderline",
            Error::Projection(_) => "projection",
            Error::NoAdmissibleCoupling(_) => "no_admissible_coupling",
            Error::Empty(_) => "empty",
            Error::Io(_) => "io",
        }
    }

    /// Structured JSON form `{error, message}` plus `field` for configuration errors.
    pub fn to_json(&self) -> serde_json::Value {
        let mut doc = serde_json::json!({"error": self.kind(), "message": self.to_string()});
        if let Error::Config { field, .. } = self {
            doc["field"] = serde_json::Value::String(field.clone());
        }
        doc
    }

    /// Builds a configuration error for a named field.
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
