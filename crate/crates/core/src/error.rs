use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid CGP configuration: {0}")]
    InvalidConfig(String),

    #[error("genotypes were built for different CGP configurations")]
    ConfigMismatch,

    #[error("input matrix has {got} columns, network expects {expected}")]
    InputShape { expected: usize, got: usize },

    #[error("non-finite input value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },

    #[error("objective returned a non-finite value ({value}) at evaluation {evaluation}")]
    NonFiniteFitness { value: f64, evaluation: usize },

    #[error("malformed genotype text at line {line}: {reason}")]
    GenotypeParse { line: usize, reason: String },

    #[error("invalid distance parameters: {0}")]
    InvalidDistance(String),

    #[error("GIDD recursion exceeded {limit} levels")]
    RecursionLimit { limit: usize },

    #[error("invalid training data for Kriging: {0}")]
    InvalidTrainingData(String),

    #[error("degenerate correlation matrix: factorization failed at nugget {nugget:e}")]
    DegenerateCorrelation { nugget: f64 },

    #[error("{path}: row {row}: {reason}")]
    Dataset {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("invalid design request: {0}")]
    InvalidDesign(String),

    #[error("invalid experiment configuration: {0}")]
    InvalidExperiment(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
