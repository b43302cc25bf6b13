use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the modelling and validation pipeline.
#[derive(Debug, Error)]
pub enum HfeError {
    #[error("degenerate calibration: {0}")]
    CalibrationDegenerate(String),

    #[error("volume kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("point ({x:.4}, {y:.4}, {z:.4}) lies outside the sampled domain")]
    OutOfBounds { x: f64, y: f64, z: f64 },

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element {element} has a non-positive Jacobian ({det:.3e})")]
    InvertedElement { element: u64, det: f64 },

    #[error("elements with zero overlap with the volume: {0:?}")]
    ZeroOverlap(Vec<u64>),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("non-positive apparent density {0}: element has no yield point")]
    NoYield(f64),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("solver did not converge{}: residual {residual:.3e} after {iterations} iterations", step.map(|s| format!(" at load step {s}")).unwrap_or_default())]
    Convergence {
        step: Option<usize>,
        iterations: usize,
        residual: f64,
    },

    #[error("node {node} is not constrained along axis {axis}")]
    NotConstrained { node: u64, axis: usize },

    #[error("grid geometry mismatch: {0}")]
    GridMismatch(String),

    #[error("no fully correlated cell: strains cannot be differentiated")]
    EmptyStrain,

    #[error("insufficient BC coverage: {0}")]
    InsufficientCoverage(String),

    #[error("BC nodes project outside the correlated slice region: {0:?}")]
    BcCoverage(Vec<u64>),

    #[error("no comparison points qualify")]
    EmptyComparison,

    #[error("insufficient data: {needed} points needed, {found} available")]
    InsufficientData { needed: usize, found: usize },

    #[error("degenerate regression: independent variable has zero variance")]
    DegenerateRegression,

    #[error("invalid phantom specification: {0}")]
    Spec(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed ({artifact}): {source}")]
    Stage {
        stage: &'static str,
        artifact: String,
        #[source]
        source: Box<HfeError>,
    },
}

pub type Result<T> = std::result::Result<T, HfeError>;

impl HfeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HfeError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        HfeError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
