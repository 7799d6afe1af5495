use thiserror::Error;

use crate::ipiter::SolveReport;
use crate::sclqr::RiccatiSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    /// `H W⁻¹ Hᵀ` could not be factored: the output map has lost full row
    /// rank at the evaluated point.
    #[error("rank deficient output Jacobian (pivot {pivot} = {value:e})")]
    RankDeficient { pivot: usize, value: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value returned by evaluator `{evaluator}`")]
    NonFiniteEvaluation { evaluator: &'static str },

    #[error("input matrix is singular")]
    SingularInputMatrix,

    #[error("p2 design requested with an empty active set")]
    EmptyActiveSet,

    #[error("iteration did not reach tolerance after {} iterations (|eta| = {:e})", .report.iterations, .report.final_eta_norm)]
    MaxIterationsExceeded { report: Box<SolveReport> },

    #[error("Riccati integration did not settle within the horizon ({} time units)", .solution.settle_time)]
    NoSettle { solution: Box<RiccatiSolution> },

    #[error("leading block of the null-space basis is singular")]
    NormalizationUnavailable,

    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("reference cost integral is not positive ({0:e})")]
    ZeroReferenceCost(f64),

    #[error("degenerate trend fit: {0}")]
    DegenerateFit(&'static str),

    #[error("empty input")]
    Empty,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Short machine-readable tag, used in JSON error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::NotSymmetric { .. } => "NotSymmetric",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteEvaluation { .. } => "NonFiniteEvaluation",
            Error::SingularInputMatrix => "SingularInputMatrix",
            Error::EmptyActiveSet => "EmptyActiveSet",
            Error::MaxIterationsExceeded { .. } => "MaxIterationsExceeded",
            Error::NoSettle { .. } => "NoSettle",
            Error::NormalizationUnavailable => "NormalizationUnavailable",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::ZeroReferenceCost(_) => "ZeroReferenceCost",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::Empty => "Empty",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }
}
