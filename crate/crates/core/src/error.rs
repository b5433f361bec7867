use std::fmt;
use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage that produced an error, used to attribute failures in the
/// end-node and cloud-node pipelines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Downsample,
    KeyFrameSelection,
    RedundancyDetection,
    Pack,
    Transport,
    Unpack,
    Reconstruct,
    Restore,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Downsample => "downsample",
            Stage::KeyFrameSelection => "key-frame selection",
            Stage::RedundancyDetection => "redundancy detection",
            Stage::Pack => "pack",
            Stage::Transport => "transport",
            Stage::Unpack => "unpack",
            Stage::Reconstruct => "reconstruct",
            Stage::Restore => "restore",
            Stage::Evaluate => "evaluate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncated data: {0}")]
    Truncated(String),

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("external command failed: {0}")]
    External(String),

    #[error("reconstructor contract violated: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] io::Error),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Innermost error, skipping stage attribution wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Whether the failure came from an external process (codec or reconstructor command).
    pub fn is_external(&self) -> bool {
        matches!(self.root(), Error::External(_))
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
