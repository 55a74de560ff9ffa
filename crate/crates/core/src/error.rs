use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibError {
    #[error("empty transcript: at least one step is required")]
    Empty,

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid outcome {value} at step {step}: outcomes must be 0 or 1")]
    InvalidOutcome { step: usize, value: u8 },

    #[error("invalid prediction {value} at step {step}: predictions must lie in [0, 1]")]
    InvalidPrediction { step: usize, value: f64 },

    #[error("invalid transport plan: {0}")]
    InvalidPlan(String),

    #[error("plan is not calibrated: destination {destination} has residual {residual:e}")]
    NotCalibrated { destination: f64, residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("instance too large for exact oracle: T = {horizon} exceeds the cap of {cap}")]
    TooLarge { horizon: usize, cap: usize },

    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),

    #[error("walk strategy emitted move {value} at step {step}; moves must satisfy |move| <= 1/2")]
    IllegalMove { step: usize, value: f64 },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("problem is infeasible (phase one residual {0:e})")]
    Infeasible(f64),

    #[error("problem is unbounded")]
    Unbounded,

    #[error("simplex did not converge within {0} pivots")]
    IterationLimit(usize),

    #[error("optimality certificate failed: duality gap {gap:e}, dual infeasibility {dual_infeasibility:e}")]
    Certificate { gap: f64, dual_infeasibility: f64 },
}

impl From<std::io::Error> for CalibError {
    fn from(e: std::io::Error) -> Self {
        CalibError::Io(e.to_string())
    }
}

pub type Result<T, E = CalibError> = std::result::Result<T, E>;
