use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid array / medium / session configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid stimulus geometry, e.g. a chord longer than the diameter.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Evaluation point coincides with a transducer.
    #[error("singularity: point ({x:.6}, {y:.6}, {z:.6}) m coincides with transducer {transducer}")]
    Singularity {
        transducer: usize,
        x: f64,
        y: f64,
        z: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("frame ordering error: frame {index} at t={t} s precedes t={prev} s")]
    Ordering { index: usize, t: f64, prev: f64 },

    #[error("drive log format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("state error: {0}")]
    State(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("unknown {kind} '{name}'; valid: {valid}")]
    Lookup {
        kind: &'static str,
        name: String,
        valid: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed user input (schemas, names, arguments),
    /// as opposed to failures of the domain computation itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Lookup { .. } | Error::Json(_) | Error::Argument(_)
        )
    }
}
