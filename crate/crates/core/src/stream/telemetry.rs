//! Engine telemetry events and their text encoding.
//!
//! Each event is one record `E <seq> <t_ms> <kind> <payload>`:
//!
//! | kind            | payload                                   |
//! |-----------------|-------------------------------------------|
//! | `PostureUpdate` | `<marker> on\|off`                        |
//! | `BallHit`       | `<run> <ball>` (both 1-based)             |
//! | `RunScored`     | `<run> <score>`                           |
//! | `BlockFeedback` | `<tier> <complete-runs>`                  |
//! | `Encouragement` | `<run>`                                   |
//! | `SessionPhase`  | `<session> <phase> [<run>\|<reason>]`     |
//!
//! Markers are `LFoot RFoot LKnee RKnee`; tiers are `need-more-effort`,
//! `moderate`, `good`, `excellent`; phases are `Instruction Calibration
//! PostureAdjust StrokeRuns BlockFeedback Complete Aborted`. `StrokeRuns`
//! carries the run index and `Aborted` a reason slug.

use std::fmt;
use std::str::FromStr;

use crate::posture::MarkerId;
use crate::session::{AbortReason, FeedbackTier, SessionPhase};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    PostureUpdate { marker: MarkerId, satisfied: bool },
    BallHit { run: u8, ball: u8 },
    RunScored { run: u8, score: u32 },
    BlockFeedback { tier: FeedbackTier, complete: u8 },
    Encouragement { run: u8 },
    SessionPhase { session: u32, phase: SessionPhase },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::PostureUpdate { .. } => "PostureUpdate",
            EventKind::BallHit { .. } => "BallHit",
            EventKind::RunScored { .. } => "RunScored",
            EventKind::BlockFeedback { .. } => "BlockFeedback",
            EventKind::Encouragement { .. } => "Encouragement",
            EventKind::SessionPhase { .. } => "SessionPhase",
        }
    }
}

/// An engine event. Within a session, `seq` numbers are dense from 0 and
/// `(t_ms, seq)` is strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TelemetryEvent {
    pub seq: u64,
    pub t_ms: u64,
    pub kind: EventKind,
}

impl fmt::Display for TelemetryEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E {} {} {} ", self.seq, self.t_ms, self.kind.name())?;
        match &self.kind {
            EventKind::PostureUpdate { marker, satisfied } => {
                write!(f, "{} {}", marker.name(), if *satisfied { "on" } else { "off" })
            }
            EventKind::BallHit { run, ball } => write!(f, "{run} {ball}"),
            EventKind::RunScored { run, score } => write!(f, "{run} {score}"),
            EventKind::BlockFeedback { tier, complete } => write!(f, "{} {complete}", tier.slug()),
            EventKind::Encouragement { run } => write!(f, "{run}"),
            EventKind::SessionPhase { session, phase } => write!(f, "{session} {phase}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseEventError(pub String);

impl fmt::Display for ParseEventError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bad telemetry record: {}", self.0)
    }
}

impl std::error::Error for ParseEventError {}

fn num<T: FromStr>(token: Option<&str>, what: &str) -> Result<T, ParseEventError> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| ParseEventError(format!("bad {what}")))
}

impl FromStr for TelemetryEvent {
    type Err = ParseEventError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut tokens = s.split(' ');
        if tokens.next() != Some("E") {
            return Err(ParseEventError(format!("expected `E` record: `{s}`")));
        }
        let seq = num(tokens.next(), "sequence number")?;
        let t_ms = num(tokens.next(), "timestamp")?;
        let kind_name = tokens.next().ok_or_else(|| ParseEventError("missing kind".into()))?;
        let kind = match kind_name {
            "PostureUpdate" => {
                let marker = tokens
                    .next()
                    .and_then(|m| m.parse().ok())
                    .ok_or_else(|| ParseEventError("bad marker".into()))?;
                let satisfied = match tokens.next() {
                    Some("on") => true,
                    Some("off") => false,
                    _ => return Err(ParseEventError("bad marker state".into())),
                };
                EventKind::PostureUpdate { marker, satisfied }
            }
            "BallHit" => EventKind::BallHit {
                run: num(tokens.next(), "run")?,
                ball: num(tokens.next(), "ball")?,
            },
            "RunScored" => EventKind::RunScored {
                run: num(tokens.next(), "run")?,
                score: num(tokens.next(), "score")?,
            },
            "BlockFeedback" => {
                let tier = tokens
                    .next()
                    .and_then(FeedbackTier::from_slug)
                    .ok_or_else(|| ParseEventError("bad tier".into()))?;
                EventKind::BlockFeedback { tier, complete: num(tokens.next(), "count")? }
            }
            "Encouragement" => EventKind::Encouragement { run: num(tokens.next(), "run")? },
            "SessionPhase" => {
                let session = num(tokens.next(), "session id")?;
                let rest: Vec<&str> = tokens.by_ref().collect();
                let phase = SessionPhase::parse_tokens(&rest)
                    .ok_or_else(|| ParseEventError(format!("bad phase `{}`", rest.join(" "))))?;
                EventKind::SessionPhase { session, phase }
            }
            other => return Err(ParseEventError(format!("unknown kind `{other}`"))),
        };
        if tokens.next().is_some() {
            return Err(ParseEventError(format!("trailing tokens in `{s}`")));
        }
        Ok(TelemetryEvent { seq, t_ms, kind })
    }
}

impl fmt::Display for SessionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionPhase::Instruction => f.write_str("Instruction"),
            SessionPhase::Calibration => f.write_str("Calibration"),
            SessionPhase::PostureAdjust => f.write_str("PostureAdjust"),
            SessionPhase::StrokeRuns(run) => write!(f, "StrokeRuns {run}"),
            SessionPhase::BlockFeedback => f.write_str("BlockFeedback"),
            SessionPhase::Complete => f.write_str("Complete"),
            SessionPhase::Aborted(reason) => write!(f, "Aborted {}", reason.slug()),
        }
    }
}

impl SessionPhase {
    fn parse_tokens(tokens: &[&str]) -> Option<SessionPhase> {
        Some(match tokens {
            ["Instruction"] => SessionPhase::Instruction,
            ["Calibration"] => SessionPhase::Calibration,
            ["PostureAdjust"] => SessionPhase::PostureAdjust,
            ["StrokeRuns", run] => {
                let run: u8 = run.parse().ok()?;
                if !(1..=10).contains(&run) {
                    return None;
                }
                SessionPhase::StrokeRuns(run)
            }
            ["BlockFeedback"] => SessionPhase::BlockFeedback,
            ["Complete"] => SessionPhase::Complete,
            ["Aborted", reason] => SessionPhase::Aborted(AbortReason::from_slug(reason)?),
            _ => return None,
        })
    }
}
