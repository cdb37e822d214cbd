use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested coverage `1 - epsilon` is at or above the interference-limited
    /// ceiling `1/beta'`, so no transmit power can reach it.
    #[error("QoS target {target} is not reachable by power control alone (ceiling {ceiling})")]
    InfeasibleQos { target: f64, ceiling: f64 },

    #[error("quadrature did not converge: estimated absolute error {abs_err:e}")]
    QuadratureNonconvergence { abs_err: f64 },

    #[error("empty field: total base-station intensity is zero")]
    EmptyField,

    #[error("quantity {quantity:e} exceeds seller capacity {cap:e}")]
    OutOfCap { quantity: f64, cap: f64 },

    #[error("LP oracle supports at most {max} offers, got {got}")]
    InstanceTooLarge { max: usize, got: usize },

    #[error(
        "best-response iteration did not converge after {iterations} iterations \
         (residual {residual:e}, oscillating: {oscillating})"
    )]
    Nonconvergence {
        iterations: usize,
        residual: f64,
        oscillating: bool,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// True for the numerical failures the CLI reports with exit code 2.
    pub fn is_nonconvergence(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNonconvergence { .. } | Error::Nonconvergence { .. }
        )
    }

    /// True for input problems the CLI reports with exit code 1.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Parse { .. } | Error::Validation(_) | Error::Io { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
