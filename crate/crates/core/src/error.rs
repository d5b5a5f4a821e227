use thiserror::Error;

/// Errors raised by the noise-model pipeline.
#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("invalid Pauli label {0:?}")]
    InvalidLabel(String),
    #[error("qubit count mismatch: expected {expected}, found {found}")]
    QubitMismatch { expected: usize, found: usize },
    #[error("{n} qubits exceeds the configured cap of {cap}")]
    QubitCap { n: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("dissipator matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("negative rate {0}")]
    NegativeRate(f64),
    #[error("matrix logarithm undefined: eigenvalue {0} on the negative real axis")]
    BranchCut(String),
    #[error("matrix logarithm undefined: singular matrix (eigenvalue magnitude {0:.3e})")]
    Singular(f64),
    #[error("imaginary residue {0:.3e} in a real-valued quantity")]
    ImaginaryResidue(f64),
    #[error("channel is not trace preserving (identity fidelity {0})")]
    NotTracePreserving(f64),
    #[error("non-positive Pauli fidelity {value} for {label}")]
    LogDomain { label: String, value: f64 },
    #[error("fit is rank deficient ({rank} of {unknowns} unknowns determined)")]
    RankDeficient { rank: usize, unknowns: usize },
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("layout mismatch: {0}")]
    Layout(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {inner}")]
    Context { context: String, inner: Box<ForgeError> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl ForgeError {
    /// True for failures of a numerical stage (logarithm, fit, refinement) as
    /// opposed to rejected input.
    pub fn is_numerical(&self) -> bool {
        if let ForgeError::Context { inner, .. } = self {
            return inner.is_numerical();
        }
        matches!(
            self,
            ForgeError::NonConvergence(_)
                | ForgeError::BranchCut(_)
                | ForgeError::Singular(_)
                | ForgeError::ImaginaryResidue(_)
                | ForgeError::NotTracePreserving(_)
                | ForgeError::LogDomain { .. }
                | ForgeError::RankDeficient { .. }
        )
    }
}

/// Attaches a context string to errors.
pub trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| ForgeError::Context { context: context(), inner: Box::new(e) })
    }
}

pub type Result<T> = std::result::Result<T, ForgeError>;
