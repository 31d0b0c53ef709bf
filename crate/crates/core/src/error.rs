use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: {n} qubits exceeds the cap of {cap}")]
    Size { what: &'static str, n: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    Index { index: usize, n_qubits: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A non-finite energy or gradient; `energies` is the trace up to the failure.
    #[error("numerical failure after {} recorded energies: {message}", energies.len())]
    Numerical { message: String, energies: Vec<f64> },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("training failed at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("vector of length {len} exceeds model capacity {d_max}")]
    Capacity { len: usize, d_max: usize },

    #[error("model format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("malformed model file: {0}")]
    Deserialize(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
