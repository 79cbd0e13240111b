use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty anchor set")]
    EmptyAnchorSet,

    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("negative variance {0}")]
    NegativeVariance(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("attacked count {f} must be smaller than node count {n}")]
    TooManyAttacked { n: usize, f: usize },

    #[error("range pair ({0}, {0}) does not name two distinct nodes")]
    SelfPair(usize),

    #[error("node id {id} out of range for swarm of {n}")]
    UnknownNode { id: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty peer set")]
    EmptyPeerSet,

    #[error("insufficient calibration sample: {0} trials (need at least 30)")]
    InsufficientCalibration(usize),

    #[error("insufficient anchors: {got} (need {need})")]
    InsufficientAnchors { got: usize, need: usize },

    #[error("not leader")]
    NotLeader,

    #[error("no live majority: round {0} could not commit")]
    NoQuorum(u64),

    #[error("calibration requires honest configuration")]
    AttackEnabled,

    #[error("could not place {n} nodes with separation {min_separation} m in a {bounding_box} m box")]
    InfeasibleFormation {
        n: usize,
        min_separation: f64,
        bounding_box: f64,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than the runtime.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::ConfigParse { .. }
                | Error::AttackEnabled
                | Error::TooFewNodes(_)
                | Error::TooManyAttacked { .. }
                | Error::InsufficientCalibration(_)
                | Error::NegativeVariance(_)
                | Error::InfeasibleFormation { .. }
        )
    }
}
