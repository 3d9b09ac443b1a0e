use thiserror::Error;

/// Library error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("out of system: {0}")]
    OutOfSystem(String),

    #[error("cube family is empty")]
    EmptyFamily,

    #[error("grid functions live on different systems")]
    MeshMismatch,

    #[error("invalid exponent data: {0}")]
    InvalidExponents(String),

    #[error("divergent integral: |x|^{exponent} is not integrable near the origin")]
    DivergentIntegral { exponent: f64 },

    #[error("degenerate regression: {0}")]
    DegenerateFit(String),

    #[error("zero mass: {0}")]
    ZeroMass(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: config problems exit 2, everything
    /// else (including invariant violations found by check commands) exits 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidExponents(_) | Error::Parse(_) => 2,
            _ => 1,
        }
    }
}
