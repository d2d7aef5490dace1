use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice must have an odd number of sites >= 3 (got {0}); even sizes are only available through the even_naive mode")]
    EvenLattice(usize),

    #[error("even_naive mode requires an even number of sites >= 2 (got {0})")]
    OddLatticeInEvenMode(usize),

    #[error("lattice constant must be positive and finite (got {0})")]
    InvalidLatticeConstant(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state has zero norm and cannot be normalized")]
    DegenerateState,

    #[error("state and kernels were built for different lattices")]
    LatticeMismatch,

    #[error("{operation} requires {expected} parity")]
    ParityMismatch {
        operation: &'static str,
        expected: &'static str,
    },

    #[error("{quantity}: imaginary residue {residue:e} exceeds tolerance {tolerance:e}")]
    ImaginaryResidue {
        quantity: &'static str,
        residue: f64,
        tolerance: f64,
    },

    #[error("time step violates tau*g^2*N^2 < {limit} (got {value})")]
    TimeStepTooLarge { value: f64, limit: f64 },

    #[error("non-finite value encountered at step {step}")]
    NonFinite { step: usize },

    #[error("malformed state file: {0}")]
    StateFormat(String),

    #[error("invalid run configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
