use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes shared by every layer of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("deformation parameters differ: {left} vs {right}")]
    ThetaMismatch { left: f64, right: f64 },

    #[error("degenerate module geometry: {0}")]
    Degenerate(String),

    #[error("integrability error: {0}")]
    Integrability(String),

    #[error("spectral precondition violated: estimated spectrum [{lower:.6e}, {upper:.6e}] not inside {allowed}")]
    Spectrum {
        lower: f64,
        upper: f64,
        allowed: &'static str,
    },

    #[error("element is not invertible: spectral lower bound {lower:.6e}")]
    NotInvertible { lower: f64 },

    #[error("no convergence after {iterations} iterations, last residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("input is not a projection: {0}")]
    NotProjection(String),

    #[error("charge is not integral: raw value {re:.12} + {im:.3e}i")]
    ChargeNotIntegral { re: f64, im: f64 },

    #[error("truncation window too small: {0}")]
    Window(String),

    #[error("test-section battery is ill-conditioned (condition estimate {condition:.3e})")]
    Basis { condition: f64 },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by malformed input or parameters, as opposed
    /// to numerical failures on otherwise valid input.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_)
                | Error::ThetaMismatch { .. }
                | Error::Degenerate(_)
                | Error::Format(_)
                | Error::Json(_)
                | Error::Io(_)
        )
    }
}
