use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed record in an input file; `line` is 1-based and counts the header.
    #[error("{source_name}:{line}: {msg}")]
    Parse {
        source_name: String,
        line: u64,
        msg: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown {kind} `{id}`")]
    Lookup { kind: &'static str, id: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("column `{0}` has no observed values")]
    EmptyColumn(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("point `{0}` has no travel-time entry for any station")]
    Unreachable(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("stage `{stage}` failed for station `{station}`: {source}")]
    Stage {
        stage: &'static str,
        station: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str, station: &str) -> Self {
        Error::Stage {
            stage,
            station: station.to_string(),
            source: Box::new(self),
        }
    }

    /// True for failures caused by the input data or configuration rather
    /// than by the environment or a bug.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Io(_) => false,
            Error::Stage { source, .. } => source.is_data_error(),
            _ => true,
        }
    }
}
