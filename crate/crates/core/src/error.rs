use thiserror::Error;

use crate::model::JointId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("joint {0} missing from frame")]
    MissingJoint(JointId),
    #[error("unknown joint name `{0}`")]
    UnknownJoint(String),
    #[error("joint {0} has a non-finite coordinate")]
    NonFinite(JointId),
    #[error("joint {0} confidence {1} outside [0, 1]")]
    BadConfidence(JointId, f64),
    #[error("degenerate geometry: elbow within 1 mm of a neighboring joint")]
    DegenerateGeometry,
    #[error("insufficient calibration: {qualifying} qualifying frames, need {required}")]
    InsufficientCalibration { qualifying: usize, required: usize },
    #[error("anthropometry out of range: height {height_m} m, arm {arm_length_m} m")]
    InvalidAnthropometry { height_m: f64, arm_length_m: f64 },
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed frame at line {line}: {reason}")]
    MalformedFrame { line: usize, reason: String },
    #[error("non-monotonic timestamp at line {0}")]
    NonMonotonicTimestamp(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ReplayError {
    pub(crate) fn frame(line: usize, reason: impl Into<String>) -> Self {
        ReplayError::MalformedFrame { line, reason: reason.into() }
    }
}

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("could not bind {addr}: {source}")]
    BindFailure {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("handshake failed: {0}")]
    HandshakeFailure(String),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemplateError {
    #[error("scale factor {0} outside [0.3, 2.0]")]
    BadScale(f64),
    #[error("degenerate path: arc length {0} m below 1 cm")]
    DegeneratePath(f64),
    #[error("invalid template: {0}")]
    Invalid(String),
    #[error("template file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config value for `{key}` out of range: {value}")]
    OutOfRange { key: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("frame at {got} ms does not follow {previous} ms")]
    OutOfOrderFrame { previous: u64, got: u64 },
    #[error("block must contain exactly 10 scores, got {0}")]
    WrongArity(usize),
    #[error("score {0} is not a multiple of 10 in [0, 100]")]
    BadScore(u32),
    #[error("malformed log at line {line}: {reason}")]
    MalformedLog { line: usize, reason: String },
    #[error("session is not running")]
    NotRunning,
    #[error("{0}")]
    Rejected(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssessmentError {
    #[error("expected {expected} entries, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("event at {t_ms} ms lies outside the 30000 ms window")]
    OutOfWindowEvent { t_ms: u64 },
    #[error("trial file line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("cell ({group}, {time}) has no observations")]
    EmptyCell { group: String, time: String },
    #[error("subject {0} lacks a complete set of time points")]
    IncompleteCases(String),
    #[error("subject {subject} has more than one value at time {time}")]
    DuplicateObservation { subject: String, time: String },
    #[error("subject {0} appears in more than one group")]
    GroupConflict(String),
    #[error("group {0} has fewer than 2 subjects")]
    TooFewSubjects(String),
    #[error("design needs at least {0}")]
    BadDesign(&'static str),
    #[error("contrast covariance is singular")]
    SingularContrastCovariance,
    #[error("non-positive error variance")]
    NonPositiveVariance,
    #[error("response {value} to question {question} is outside 1..=5")]
    OutOfRangeResponse { question: usize, value: u8 },
    #[error("non-finite value for subject {0}")]
    NonFinite(String),
    #[error("csv line {line}: {reason}")]
    Csv { line: u64, reason: String },
}
