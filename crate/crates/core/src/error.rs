use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MsfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MsfError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch} (last good epoch: {last_good:?}): {reason}")]
    Diverged {
        epoch: usize,
        last_good: Option<usize>,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("lookup failed: {0}")]
    Lookup(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("empty partition: {0}")]
    EmptyPartition(String),

    #[error("cannot partition: {0}")]
    Partition(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("file too short: {0}")]
    Length(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<MsfError>,
    },
}

impl MsfError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MsfError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        MsfError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
