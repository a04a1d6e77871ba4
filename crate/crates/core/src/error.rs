use std::path::PathBuf;

use thiserror::Error;

use crate::frame::{Frame, Topic};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file}: key `{key}`: {message}")]
    Parse {
        file: String,
        key: String,
        message: String,
    },

    #[error("topic {topic} has {have} articles, need more than {need} for validation+test")]
    TooFewArticles {
        topic: Topic,
        have: usize,
        need: usize,
    },

    #[error("no candidate sentences for frame {0} in the adversarial pool")]
    EmptyPool(Frame),

    #[error("frame {0} has no training instances")]
    NoTrainingInstances(Frame),

    #[error("frame {0} has no documents")]
    EmptyFrame(Frame),

    #[error("instance {0} is not from the training split")]
    NonTrainingInstance(String),

    #[error("instance {id} contains reserved token `{token}`")]
    ReservedToken { id: String, token: String },

    #[error("entity sidecar is missing ids: {}", .0.join(", "))]
    MissingEntities(Vec<String>),

    #[error("negative input to harmonic mean: ({0}, {1})")]
    NegativeScore(f64, f64),

    #[error("annotation record {id}: {message}")]
    Annotation { id: String, message: String },

    #[error("score table is empty")]
    EmptyTable,

    #[error("missing artifact {path}; run `reframe {command}` first")]
    MissingArtifact {
        path: PathBuf,
        command: &'static str,
    },

    #[error(
        "artifact {path} was produced with config hash {found}, current config hash is {expected}"
    )]
    ConfigHashMismatch {
        path: String,
        expected: String,
        found: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Generation(#[from] crate::gateway::GenerationError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        file: impl Into<String>,
        key: impl Into<String>,
        message: impl ToString,
    ) -> Self {
        Error::Parse {
            file: file.into(),
            key: key.into(),
            message: message.to_string(),
        }
    }
}
