use thiserror::Error;

/// Errors raised by the library.
///
/// Checker and certificate failures are not errors: they are reported in
/// their respective report structs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid input: malformed config, inadmissible exponent, bad mesh.
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// A numeric routine produced a non-finite value or failed to converge.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// `R(s u0)` stayed nonnegative over the whole doubling schedule.
    #[error("anticoercivity failure for potential `{potential}`: R(s*u0) = {last_value:e} >= 0 after {doublings} doublings")]
    Anticoercivity {
        potential: String,
        doublings: u32,
        last_value: f64,
    },

    /// Descent ran below the unbounded-below guard.
    #[error("energy unbounded below: R = {value:e} crossed the guard {guard:e}")]
    UnboundedBelow { value: f64, guard: f64 },

    /// An internal invariant was violated.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
