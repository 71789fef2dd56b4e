//! The practice workflow as a deterministic state machine.
//!
//! ```text
//! Instruction -> Calibration -> PostureAdjust -> StrokeRuns(1..=10)
//!             -> BlockFeedback -> Complete
//! ```
//!
//! Any phase can move to `Aborted` (stream ended early, out-of-order frame,
//! operator stop). [`Session::step`] is the only mutator; feeding the same
//! frames under the same setup always yields the same [`SessionLog`].

mod log;

use std::sync::Arc;

pub use log::{read_log, write_log, Calibration, LogEntry, SessionLog};

use crate::config::EngineConfig;
use crate::error::{SessionError, TemplateError};
use crate::model::{estimate_anthropometry, estimate_root, SkeletonFrame, Vec3, CALIBRATION_CONFIDENCE, MIN_CALIBRATION_FRAMES};
use crate::posture::{instantiate_markers, posture_scale, PostureTemplate, PostureTracker};
use crate::stroke::{
    advance_run, finish_run, resample_path, scale_template, segment_sphere_entry, ExpertPath,
    RunResult, RunState, StrokeTemplate, BALL_COUNT, MAX_SCORE,
};
use crate::stream::telemetry::{EventKind, TelemetryEvent};

/// Runs per feedback block.
pub const BLOCK_RUNS: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbortReason {
    StreamEnded,
    OutOfOrderFrame,
    Stopped,
}

impl AbortReason {
    pub fn slug(self) -> &'static str {
        match self {
            AbortReason::StreamEnded => "stream-ended",
            AbortReason::OutOfOrderFrame => "out-of-order-frame",
            AbortReason::Stopped => "stopped",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        [AbortReason::StreamEnded, AbortReason::OutOfOrderFrame, AbortReason::Stopped]
            .into_iter()
            .find(|r| r.slug() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionPhase {
    Instruction,
    Calibration,
    PostureAdjust,
    /// Run index in `1..=10`.
    StrokeRuns(u8),
    BlockFeedback,
    Complete,
    Aborted(AbortReason),
}

impl SessionPhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionPhase::Complete | SessionPhase::Aborted(_))
    }
}

/// Block feedback after ten runs, keyed on the number of complete (100)
/// scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FeedbackTier {
    NeedMoreEffort,
    Moderate,
    Good,
    Excellent,
}

impl FeedbackTier {
    pub const ALL: [FeedbackTier; 4] = [
        FeedbackTier::NeedMoreEffort,
        FeedbackTier::Moderate,
        FeedbackTier::Good,
        FeedbackTier::Excellent,
    ];

    pub fn from_complete_count(complete: u8) -> Self {
        match complete {
            0..=2 => FeedbackTier::NeedMoreEffort,
            3..=5 => FeedbackTier::Moderate,
            6..=9 => FeedbackTier::Good,
            _ => FeedbackTier::Excellent,
        }
    }

    /// Text shown to the player.
    pub fn phrase(self) -> &'static str {
        match self {
            FeedbackTier::NeedMoreEffort => "need more effort",
            FeedbackTier::Moderate => "moderate performance",
            FeedbackTier::Good => "good performance",
            FeedbackTier::Excellent => "excellent performance",
        }
    }

    /// Token used on the wire and in logs.
    pub fn slug(self) -> &'static str {
        match self {
            FeedbackTier::NeedMoreEffort => "need-more-effort",
            FeedbackTier::Moderate => "moderate",
            FeedbackTier::Good => "good",
            FeedbackTier::Excellent => "excellent",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.slug() == s)
    }
}

/// Tier for one block of exactly ten run scores.
pub fn classify_block(scores: &[u32]) -> Result<FeedbackTier, SessionError> {
    if scores.len() != BLOCK_RUNS as usize {
        return Err(SessionError::WrongArity(scores.len()));
    }
    if let Some(bad) = scores.iter().find(|s| **s > MAX_SCORE || **s % 10 != 0) {
        return Err(SessionError::BadScore(*bad));
    }
    let complete = scores.iter().filter(|s| **s == MAX_SCORE).count() as u8;
    Ok(FeedbackTier::from_complete_count(complete))
}

/// Validated inputs shared by every session of a server.
#[derive(Debug, Clone)]
pub struct SessionSetup {
    config: EngineConfig,
    posture: PostureTemplate,
    path: ExpertPath,
    waypoints: [Vec3; BALL_COUNT],
}

impl SessionSetup {
    pub fn new(
        config: EngineConfig,
        posture: PostureTemplate,
        path: ExpertPath,
    ) -> Result<Self, TemplateError> {
        config.validate().map_err(|e| TemplateError::Invalid(e.to_string()))?;
        let posture = posture.with_half_extents(config.foot_half_extent_m, config.knee_half_extent_m)?;
        let waypoints = resample_path(&path)?;
        Ok(Self { config, posture, path, waypoints })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn posture(&self) -> &PostureTemplate {
        &self.posture
    }

    pub fn path(&self) -> &ExpertPath {
        &self.path
    }

    pub fn waypoints(&self) -> &[Vec3; BALL_COUNT] {
        &self.waypoints
    }

    /// Header lines recorded at the top of every log.
    fn header(&self, session_id: u32) -> Vec<(String, String)> {
        let mut header = vec![("session_id".to_string(), session_id.to_string())];
        header.extend(self.config.entries().into_iter().map(|(k, v)| (k.to_string(), v)));
        let expert = self.path.anthropometry();
        header.push(("expert_id".into(), self.path.id().to_string()));
        header.push(("expert_height_m".into(), expert.height_m().to_string()));
        header.push(("expert_arm_length_m".into(), expert.arm_length_m().to_string()));
        header.push(("posture_reference_height_m".into(), self.posture.reference_height_m().to_string()));
        header
    }
}

impl Default for SessionSetup {
    fn default() -> Self {
        Self::new(EngineConfig::default(), PostureTemplate::default(), ExpertPath::default())
            .expect("bundled templates are valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum StrokeState {
    /// Waiting for the ready posture.
    Idle,
    /// Ready; a run starts on entering ball 1 or leaving the armed position.
    Armed { at: Vec3 },
    Running(RunState),
}

pub struct Session {
    id: u32,
    setup: Arc<SessionSetup>,
    phase: SessionPhase,
    log: SessionLog,
    next_seq: u64,
    last_t: Option<u64>,
    last_racket: Option<Vec3>,
    calibration: Vec<SkeletonFrame>,
    tracker: Option<PostureTracker>,
    template: Option<StrokeTemplate>,
    stroke: StrokeState,
}

impl Session {
    pub fn new(id: u32, setup: Arc<SessionSetup>) -> Self {
        let log = SessionLog::new(setup.header(id));
        Self {
            id,
            setup,
            phase: SessionPhase::Instruction,
            log,
            next_seq: 0,
            last_t: None,
            last_racket: None,
            calibration: Vec::new(),
            tracker: None,
            template: None,
            stroke: StrokeState::Idle,
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn into_log(self) -> SessionLog {
        self.log
    }

    pub fn setup(&self) -> &SessionSetup {
        &self.setup
    }

    pub fn stroke_template(&self) -> Option<&StrokeTemplate> {
        self.template.as_ref()
    }

    pub fn posture(&self) -> Option<&PostureTracker> {
        self.tracker.as_ref()
    }

    /// Consume one frame. Returns the log entries it appended, in order.
    pub fn step(&mut self, frame: &SkeletonFrame) -> Result<Vec<LogEntry>, SessionError> {
        let mark = self.log.entries().len();
        if self.phase.is_terminal() {
            return Ok(Vec::new());
        }
        let t = frame.t_ms();
        if let Some(previous) = self.last_t {
            if t <= previous {
                self.abort_at(previous, AbortReason::OutOfOrderFrame);
                return Err(SessionError::OutOfOrderFrame { previous, got: t });
            }
        }
        self.last_t = Some(t);
        let previous_racket = self.last_racket.replace(frame.racket_point());

        if self.phase == SessionPhase::Instruction {
            self.enter(t, SessionPhase::Calibration);
        }
        match self.phase {
            SessionPhase::Calibration => self.calibrate(frame),
            SessionPhase::PostureAdjust => {
                self.track_posture(frame);
                let tracker = self.tracker.as_ref().expect("tracker exists after calibration");
                if tracker.ready(frame, self.setup.config.hold_ms, self.setup.config.elbow_range()) {
                    self.enter(t, SessionPhase::StrokeRuns(1));
                    self.stroke = StrokeState::Armed { at: frame.racket_point() };
                }
            }
            SessionPhase::StrokeRuns(run) => {
                let broke = self.track_posture(frame);
                self.stroke_frame(run, frame, previous_racket.unwrap_or(frame.racket_point()), broke);
            }
            _ => {}
        }
        Ok(self.log.entries()[mark..].to_vec())
    }

    /// Close the session at end of input. Sessions that did not complete are
    /// marked aborted.
    pub fn end_of_stream(&mut self) -> Vec<LogEntry> {
        self.abort_if_running(AbortReason::StreamEnded)
    }

    /// Operator stop.
    pub fn stop(&mut self) -> Vec<LogEntry> {
        self.abort_if_running(AbortReason::Stopped)
    }

    fn abort_if_running(&mut self, reason: AbortReason) -> Vec<LogEntry> {
        let mark = self.log.entries().len();
        if !self.phase.is_terminal() {
            self.abort_at(self.last_t.unwrap_or(0), reason);
        }
        self.log.entries()[mark..].to_vec()
    }

    fn abort_at(&mut self, t: u64, reason: AbortReason) {
        self.enter(t, SessionPhase::Aborted(reason));
    }

    fn emit(&mut self, t_ms: u64, kind: EventKind) {
        let event = TelemetryEvent { seq: self.next_seq, t_ms, kind };
        self.next_seq += 1;
        self.log.push(LogEntry::Event(event));
    }

    fn enter(&mut self, t: u64, phase: SessionPhase) {
        if self.next_seq == 0 {
            self.emit(t, EventKind::SessionPhase { session: self.id, phase: SessionPhase::Instruction });
        }
        self.phase = phase;
        self.emit(t, EventKind::SessionPhase { session: self.id, phase });
    }

    fn calibrate(&mut self, frame: &SkeletonFrame) {
        if frame.is_confident(CALIBRATION_CONFIDENCE) {
            self.calibration.push(frame.clone());
        }
        if self.calibration.len() < MIN_CALIBRATION_FRAMES {
            return;
        }
        let frames = std::mem::take(&mut self.calibration);
        // Implausible measurements restart the calibration window.
        let Ok(anthropometry) = estimate_anthropometry(&frames) else {
            return;
        };
        let root = estimate_root(&frames).expect("calibration frames are confident");
        let setup = Arc::clone(&self.setup);
        let Ok(markers) = instantiate_markers(setup.posture(), &anthropometry, root) else {
            return;
        };
        let Ok(template) = scale_template(
            setup.waypoints(),
            setup.path().anthropometry(),
            &anthropometry,
            root,
            setup.config.ball_radius_m,
            setup.path().id(),
        ) else {
            return;
        };
        self.log.push(LogEntry::Calibrated(Calibration {
            anthropometry,
            root,
            posture_scale: posture_scale(setup.posture(), &anthropometry),
            arm_scale: template.arm_scale(),
            height_scale: template.height_scale(),
        }));
        self.tracker = Some(PostureTracker::new(markers));
        self.template = Some(template);
        self.enter(frame.t_ms(), SessionPhase::PostureAdjust);
    }

    /// Update markers and log transitions. Returns true if any marker went off.
    fn track_posture(&mut self, frame: &SkeletonFrame) -> bool {
        let tracker = self.tracker.as_mut().expect("tracker exists after calibration");
        let transitions = tracker.update(frame);
        let broke = transitions.iter().any(|tr| !tr.satisfied);
        for tr in transitions {
            self.emit(frame.t_ms(), EventKind::PostureUpdate { marker: tr.marker, satisfied: tr.satisfied });
        }
        broke
    }

    fn stroke_frame(&mut self, run: u8, frame: &SkeletonFrame, previous: Vec3, posture_broke: bool) {
        let t = frame.t_ms();
        let config = self.setup.config.clone();
        let template = self.template.clone().expect("template exists after calibration");
        let point = frame.racket_point();

        if self.stroke == StrokeState::Idle {
            let tracker = self.tracker.as_ref().expect("tracker exists after calibration");
            if tracker.ready(frame, config.hold_ms, config.elbow_range()) {
                self.stroke = StrokeState::Armed { at: point };
            }
            return;
        }
        if let StrokeState::Armed { at } = self.stroke {
            let ball = template.ball(0);
            let entered = segment_sphere_entry(previous, point, ball.center, ball.radius).is_some();
            if !entered && point.distance(at) <= config.run_start_displacement_m {
                return;
            }
            self.stroke = StrokeState::Running(RunState::new(run, t, previous, config.ordered_hits));
        }
        let StrokeState::Running(state) = &self.stroke else {
            unreachable!("armed state resolved above")
        };
        let mut state = state.clone();
        if t.saturating_sub(state.start_ms) >= config.run_timeout_ms {
            self.complete_run(run, &state, t);
            return;
        }
        let (mut next, hits) = advance_run(frame, &template, &state);
        for hit in hits {
            self.emit(t, EventKind::BallHit { run, ball: hit.ball });
        }
        if posture_broke && config.void_on_posture_break {
            next.voided = true;
        }
        state = next;
        if state.all_hit() {
            self.complete_run(run, &state, t);
        } else {
            self.stroke = StrokeState::Running(state);
        }
    }

    fn complete_run(&mut self, run: u8, state: &RunState, t: u64) {
        let result = finish_run(state, t);
        let score = result.score;
        let encourage = result.encouragement();
        self.log.push(LogEntry::Run(result));
        self.emit(t, EventKind::RunScored { run, score });
        if encourage {
            self.emit(t, EventKind::Encouragement { run });
        }
        self.stroke = StrokeState::Idle;
        if run < BLOCK_RUNS {
            self.enter(t, SessionPhase::StrokeRuns(run + 1));
            return;
        }
        self.enter(t, SessionPhase::BlockFeedback);
        let scores: Vec<u32> = self.log.runs().map(|r| r.score).collect();
        let tier = classify_block(&scores).expect("a block holds ten valid scores");
        let complete = scores.iter().filter(|s| **s == MAX_SCORE).count() as u8;
        self.emit(t, EventKind::BlockFeedback { tier, complete });
        self.log.push(LogEntry::Tier(tier, complete));
        self.enter(t, SessionPhase::Complete);
    }
}

/// Run a whole frame sequence through a fresh session. Frames after an
/// out-of-order violation are not consumed.
pub fn run_session<I>(id: u32, setup: Arc<SessionSetup>, frames: I) -> SessionLog
where
    I: IntoIterator<Item = SkeletonFrame>,
{
    let mut session = Session::new(id, setup);
    for frame in frames {
        if session.step(&frame).is_err() || session.phase().is_terminal() {
            break;
        }
    }
    session.end_of_stream();
    session.into_log()
}

/// Scores of a completed block in run order.
pub fn block_scores(results: &[RunResult]) -> Vec<u32> {
    results.iter().map(|r| r.score).collect()
}
