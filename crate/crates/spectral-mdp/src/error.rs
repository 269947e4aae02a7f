use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Library-wide error type.
///
/// `Domain` covers violated preconditions on parameters; the two support
/// variants report the first decomposition variable that leaves its admissible
/// range (the exact failure criterion for measures that are not supported on
/// the half line / unit interval); `NonConvergence` carries iteration
/// diagnostics from the eigensolver and the tail continued fractions.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("measure not supported on [0,inf): z[{index}] = {value}")]
    NotHalfLineSupported { index: usize, value: f64 },
    #[error("measure not supported on [0,1]: p[{index}] = {value}")]
    NotUnitIntervalSupported { index: usize, value: f64 },
    #[error("not a moment sequence of a nondegenerate measure (fails at order {order})")]
    NotMomentSequence { order: usize },
    #[error("moment inversion at depth {k} exceeds the conditioning guard ({limit}); use the unguarded variant to proceed")]
    ConditioningGuard { k: usize, limit: usize },
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the command-line tool: usage problems are
    /// reported by the argument parser (exit 2); everything here is a numeric
    /// or domain failure (exit 1).
    pub fn exit_code(&self) -> i32 {
        1
    }
}
