use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegromError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("solution blew up at step {step} (non-finite value in the field)")]
    BlowUp { step: usize },

    #[error("singular linear system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("requested {requested} modes but the snapshot set has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("operator is not symmetric (relative defect {defect:e})")]
    Asymmetric { defect: f64 },

    #[error("reference moments have zero norm")]
    ZeroReference,

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, RegromError>;
