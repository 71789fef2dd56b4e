//! Frame ingestion, telemetry events and the live session server.

pub mod replay;
pub mod serve;
pub mod synth;
pub mod telemetry;

pub use replay::{read_replay, write_replay, ReplayReader};
pub use serve::{serve_session, FrameSource, ServeConfig, ServeHandle, ServeReport, ShutdownSignal};
pub use synth::{synthesize_stroke_stream, synthesize_with, Profile, SynthOptions};
pub use telemetry::{EventKind, TelemetryEvent};
