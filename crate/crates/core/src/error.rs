use thiserror::Error;

/// Every failure the library can report.
///
/// The `Display` text of each variant starts with a stable keyword
/// (`dimension`, `arity`, `divergent`, ...) so callers and scripts can
/// match on it without depending on the rest of the message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("arity: expected 1 or 3, got {0}")]
    Arity(usize),

    #[error("invalid-plan: {0}")]
    InvalidPlan(String),

    #[error("degenerate-parameter: {0}")]
    DegenerateParameter(String),

    #[error("family: expected family {expected}, got {got}")]
    Family { expected: String, got: String },

    #[error("empty-sample: no samples to measure")]
    EmptySample,

    #[error("scale-overflow: |scale|^{n} exceeds the double range")]
    ScaleOverflow { n: u32 },

    #[error("numeric: {0}")]
    Numeric(String),

    #[error("not-converged: {scheme} did not converge at {point}")]
    NotConverged { scheme: String, point: String },

    #[error("divergent: term ratio {ratio} >= 1 ({condition})")]
    Divergent { ratio: f64, condition: String },

    #[error("inadmissible: {0}")]
    Inadmissible(String),

    #[error("out-of-regime: {0}")]
    OutOfRegime(String),

    #[error("degenerate-scale: |scale| = 1")]
    DegenerateScale,

    #[error("singular-point: zero norm raised to negative power {r}")]
    SingularPoint { r: f64 },

    #[error("scheme: {0}")]
    Scheme(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("io: json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for the parameter/convergence failures the CLI maps to exit code 2.
    pub fn is_regime_failure(&self) -> bool {
        matches!(
            self.root(),
            Error::Inadmissible(_)
                | Error::Divergent { .. }
                | Error::OutOfRegime(_)
                | Error::DegenerateParameter(_)
                | Error::DegenerateScale
                | Error::NotConverged { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
