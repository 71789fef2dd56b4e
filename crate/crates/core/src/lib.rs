//! Forehand-drive shadow-training engine.
//!
//! Skeleton frames come in from replay files, a live socket feed, or the
//! synthetic generator. The [`session`] state machine validates the stance
//! against four posture markers, scores each swing against a ten-ball stroke
//! template and assigns a feedback tier after every ten runs. [`assessment`]
//! and [`stats`] cover the evaluation side: skill-test scoring and a two-way
//! mixed ANOVA with sphericity corrections and Tukey-HSD post-hoc tests.

pub mod assessment;
pub mod config;
pub mod error;
pub mod model;
pub mod posture;
pub mod session;
pub mod stats;
pub mod stream;
pub mod stroke;

pub use config::Config;
pub use error::{
    AssessmentError, ConfigError, ModelError, ReplayError, SessionError, StatsError, StreamError,
    TemplateError,
};
pub use model::{Anthropometry, JointId, JointSample, Side, SkeletonFrame, Vec3};
