//! Seeded synthetic skeleton streams for tests and fixtures.
//!
//! A stream is 30 Hz and has four parts:
//!
//! 1. 45 calibration frames in a neutral stance, arms hanging straight.
//! 2. One second in the expert stance (ankles and knees on the marker
//!    centers) with the right elbow bent to 100° and the racket at the ready
//!    point.
//! 3. Ten swing cycles. Each holds the ready pose for 600 ms, then drives the
//!    racket from the ready point through the ten ball centers and back with
//!    the elbow straight, then rests long enough for a run timeout to fire.
//!    A missed ball is replaced by a detour 0.3 m (scaled) off the path.
//! 4. Rest frames until `min_duration_ms` is reached.
//!
//! The racket is carried on the `RacketTip` joint, so the arm pose is free to
//! encode the elbow angle. Ball centers are visited exactly, and every path
//! vertex is a frame, so corners are never cut. The generator mirrors the
//! engine's own calibration on the quantized frames, so the template it aims
//! at is the one the engine builds.
//!
//! The seed picks the player's position, the confidences, a small jitter on
//! joints the engine does not measure and the racket step length.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::TemplateError;
use crate::model::{
    estimate_anthropometry, estimate_root, Anthropometry, JointId, JointSample, SkeletonFrame, Vec3,
    MIN_CALIBRATION_FRAMES,
};
use crate::posture::{instantiate_markers, MarkerId, PostureMarkerSet};
use crate::session::{SessionSetup, BLOCK_RUNS};
use crate::stroke::{scale_template, StrokeTemplate, BALL_COUNT};

pub const SYNTH_RATE_HZ: u64 = 30;
const CALIBRATION_FRAMES: u64 = 45;
const STANCE_FRAMES: u64 = 30;
const HOLD_FRAMES: u64 = 18;
const READY_ELBOW_DEG: f64 = 100.0;
/// Ready point relative to the expert root, expert meters.
const READY_OFFSET: Vec3 = Vec3::new(0.30, 1.10, -0.55);
const APPROACH_OFFSET: Vec3 = Vec3::new(0.10, -0.25, 0.0);
const FOLLOW_THROUGH_OFFSET: Vec3 = Vec3::new(0.0, 0.0, -0.30);
const DETOUR_M: f64 = 0.30;
/// Extra distance a posture-error joint is pushed past its box face.
const POSTURE_ERROR_MARGIN_M: f64 = 0.05;

/// What the synthetic player does.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Profile {
    Perfect,
    /// Balls (1-based) skipped on every run.
    MissSet(Vec<u8>),
    /// The marker's joint stays outside its box after calibration.
    PostureError(MarkerId),
    /// One miss set per run; missing trailing runs are perfect.
    PerRun(Vec<Vec<u8>>),
}

impl Profile {
    fn misses(&self, run: usize) -> &[u8] {
        match self {
            Profile::Perfect | Profile::PostureError(_) => &[],
            Profile::MissSet(s) => s,
            Profile::PerRun(runs) => runs.get(run).map_or(&[], |s| s.as_slice()),
        }
    }

    fn validate(&self) -> Result<(), TemplateError> {
        let sets: Vec<&Vec<u8>> = match self {
            Profile::MissSet(s) => vec![s],
            Profile::PerRun(runs) if runs.len() > BLOCK_RUNS as usize => {
                return Err(TemplateError::Invalid("more than ten runs in profile".into()))
            }
            Profile::PerRun(runs) => runs.iter().collect(),
            _ => Vec::new(),
        };
        match sets.iter().flat_map(|s| s.iter()).find(|b| !(1..=BALL_COUNT as u8).contains(b)) {
            Some(b) => Err(TemplateError::Invalid(format!("ball {b} outside 1..=10"))),
            None => Ok(()),
        }
    }
}

fn write_set(f: &mut fmt::Formatter<'_>, set: &[u8]) -> fmt::Result {
    let parts: Vec<String> = set.iter().map(u8::to_string).collect();
    f.write_str(&parts.join(","))
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Perfect => f.write_str("perfect"),
            Profile::MissSet(s) => {
                f.write_str("miss-set:")?;
                write_set(f, s)
            }
            Profile::PostureError(m) => write!(f, "posture-error:{m}"),
            Profile::PerRun(runs) => {
                f.write_str("per-run:")?;
                for (i, s) in runs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("/")?;
                    }
                    write_set(f, s)?;
                }
                Ok(())
            }
        }
    }
}

fn parse_set(s: &str) -> Result<Vec<u8>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|b| b.trim().parse::<u8>().map_err(|_| format!("bad ball index `{b}`")))
        .collect()
}

/// `perfect`, `miss-set:3,6`, `posture-error:LKnee` or `per-run:4/4,5//…`.
impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let profile = match kind {
            "perfect" if arg.is_empty() => Profile::Perfect,
            "miss-set" => Profile::MissSet(parse_set(arg)?),
            "posture-error" => Profile::PostureError(arg.parse()?),
            "per-run" => Profile::PerRun(arg.split('/').map(parse_set).collect::<Result<_, _>>()?),
            _ => return Err(format!("unknown profile `{s}`")),
        };
        profile.validate().map_err(|e| e.to_string())?;
        Ok(profile)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOptions {
    /// Templates and config the stream is aimed at.
    pub setup: Arc<SessionSetup>,
    /// Pad with rest frames until the last timestamp reaches this.
    pub min_duration_ms: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { setup: Arc::new(SessionSetup::default()), min_duration_ms: 0 }
    }
}

/// Frame timestamp for index `i` at 30 Hz.
pub fn frame_time_ms(i: u64) -> u64 {
    (i * 1000 + SYNTH_RATE_HZ / 2) / SYNTH_RATE_HZ
}

fn mm(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn quantize(v: Vec3) -> Vec3 {
    Vec3::new(mm(v.x), mm(v.y), mm(v.z))
}

#[derive(Debug, Clone, Copy)]
struct Pose {
    stance: bool,
    elbow_bent: bool,
    racket: Vec3,
}

struct Body {
    height: f64,
    arm_upper: f64,
    arm_lower: f64,
    root: Vec3,
}

struct Generator<'a> {
    body: Body,
    rng: ChaCha8Rng,
    markers: Option<PostureMarkerSet>,
    posture_error: Option<MarkerId>,
    frames: Vec<SkeletonFrame>,
    options: &'a SynthOptions,
}

impl Generator<'_> {
    fn joints(&mut self, pose: Pose) -> BTreeMap<JointId, JointSample> {
        let b = &self.body;
        let (h, r) = (b.height, b.root);
        let at = |dx: f64, fy: f64| quantize(Vec3::new(r.x + dx * h, r.y + fy * h, r.z));
        let mut p: BTreeMap<JointId, Vec3> = BTreeMap::new();
        p.insert(JointId::Head, at(0.0, 1.0));
        p.insert(JointId::SpineBase, at(0.0, 0.53));
        p.insert(JointId::LHip, at(-0.06, 0.52));
        p.insert(JointId::RHip, at(0.06, 0.52));
        p.insert(JointId::LKnee, at(-0.06, 0.28));
        p.insert(JointId::RKnee, at(0.06, 0.28));
        p.insert(JointId::LAnkle, at(-0.06, 0.0));
        p.insert(JointId::RAnkle, at(0.06, 0.0));

        let down = |s: Vec3, d: f64| quantize(s - Vec3::new(0.0, d, 0.0));
        let ls = at(-0.11, 0.82);
        p.insert(JointId::LShoulder, ls);
        p.insert(JointId::LElbow, down(ls, b.arm_upper));
        p.insert(JointId::LWrist, down(ls, b.arm_upper + b.arm_lower));
        let rs = at(0.11, 0.82);
        let re = down(rs, b.arm_upper);
        p.insert(JointId::RShoulder, rs);
        p.insert(JointId::RElbow, re);
        let rw = if pose.elbow_bent {
            let a = READY_ELBOW_DEG.to_radians();
            quantize(re + Vec3::new(0.0, a.cos(), -a.sin()) * b.arm_lower)
        } else {
            down(rs, b.arm_upper + b.arm_lower)
        };
        p.insert(JointId::RWrist, rw);
        p.insert(JointId::RacketTip, quantize(pose.racket));

        if pose.stance {
            if let Some(markers) = &self.markers {
                for m in markers.iter() {
                    let mut target = m.bounds.center;
                    if self.posture_error == Some(m.id) {
                        let sign = if matches!(m.id, MarkerId::LFoot | MarkerId::LKnee) { -1.0 } else { 1.0 };
                        target.x += sign * (m.bounds.half_extents.x + POSTURE_ERROR_MARGIN_M);
                    }
                    p.insert(m.id.joint(), quantize(target));
                }
            }
        }

        // Jitter joints the engine never measures.
        for id in [JointId::LShoulder, JointId::LElbow, JointId::LWrist, JointId::LHip, JointId::RHip] {
            let j = Vec3::new(
                f64::from(self.rng.random_range(-5i32..=5)) / 1000.0,
                f64::from(self.rng.random_range(-5i32..=5)) / 1000.0,
                f64::from(self.rng.random_range(-5i32..=5)) / 1000.0,
            );
            let q = quantize(p[&id] + j);
            p.insert(id, q);
        }
        p.into_iter()
            .map(|(id, pos)| {
                let conf = f64::from(self.rng.random_range(80u8..=100)) / 100.0;
                (id, JointSample::new(pos, conf))
            })
            .collect()
    }

    fn push(&mut self, pose: Pose) {
        let t = frame_time_ms(self.frames.len() as u64);
        let joints = self.joints(pose);
        let frame = SkeletonFrame::new(t, joints).expect("generated frames carry every joint");
        self.frames.push(frame);
    }
}

/// Racket path for one swing: vertices between the ready point and back.
fn swing_vertices(template: &StrokeTemplate, place: &dyn Fn(Vec3) -> Vec3, waypoints: &[Vec3; BALL_COUNT], misses: &[u8]) -> Vec<Vec3> {
    let centers: Vec<Vec3> = template.balls().iter().map(|b| b.center).collect();
    let mut verts = vec![place(waypoints[0] + APPROACH_OFFSET)];
    for j in 0..BALL_COUNT {
        if misses.contains(&(j as u8 + 1)) {
            let tangent = centers[(j + 1).min(BALL_COUNT - 1)] - centers[j.saturating_sub(1)];
            let side = tangent.cross(Vec3::new(0.0, 1.0, 0.0));
            let side = side / side.norm();
            verts.push(centers[j] + side * (DETOUR_M * template.arm_scale()));
        } else {
            verts.push(centers[j]);
        }
    }
    verts.push(place(waypoints[BALL_COUNT - 1] + FOLLOW_THROUGH_OFFSET));
    verts
}

/// Generate a stream with the bundled templates and default config.
pub fn synthesize_stroke_stream(
    profile: &Profile,
    player: Anthropometry,
    seed: u64,
) -> Result<Vec<SkeletonFrame>, TemplateError> {
    synthesize_with(profile, player, seed, &SynthOptions::default())
}

pub fn synthesize_with(
    profile: &Profile,
    player: Anthropometry,
    seed: u64,
    options: &SynthOptions,
) -> Result<Vec<SkeletonFrame>, TemplateError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = Vec3::new(
        f64::from(rng.random_range(-200i32..=200)) / 1000.0,
        f64::from(rng.random_range(-1000i32..=-600)) / 1000.0,
        f64::from(rng.random_range(2300i32..=2800)) / 1000.0,
    );
    let arm = mm(player.arm_length_m());
    let arm_upper = mm(arm / 2.0);
    let body = Body { height: mm(player.height_m()), arm_upper, arm_lower: mm(arm - arm_upper), root };
    let mut g = Generator { body, rng, markers: None, posture_error: None, frames: Vec::new(), options };

    // Neutral stance; the racket hangs below the right hand.
    let hang = {
        let b = &g.body;
        Vec3::new(root.x + 0.11 * b.height, root.y + 0.82 * b.height - arm - 0.1, root.z - 0.1)
    };
    let neutral = Pose { stance: false, elbow_bent: false, racket: hang };
    for _ in 0..CALIBRATION_FRAMES {
        g.push(neutral);
    }

    // Aim at what the engine will measure from these frames.
    let calib = &g.frames[..MIN_CALIBRATION_FRAMES];
    let measured = estimate_anthropometry(calib).map_err(|e| TemplateError::Invalid(e.to_string()))?;
    let measured_root = estimate_root(calib).expect("calibration frames are confident");
    let setup = &g.options.setup;
    let markers = instantiate_markers(setup.posture(), &measured, measured_root)?;
    let template = scale_template(
        setup.waypoints(),
        setup.path().anthropometry(),
        &measured,
        measured_root,
        setup.config().ball_radius_m,
        setup.path().id(),
    )?;
    let waypoints = *setup.waypoints();
    let run_timeout_ms = setup.config().run_timeout_ms;
    let (s_arm, s_h) = (template.arm_scale(), template.height_scale());
    let first_y = waypoints[0].y;
    let place = move |o: Vec3| {
        measured_root + Vec3::new(o.x * s_arm, first_y * s_h + (o.y - first_y) * s_arm, o.z * s_arm)
    };
    g.markers = Some(markers);
    if let Profile::PostureError(m) = profile {
        g.posture_error = Some(*m);
    }

    let ready = quantize(place(READY_OFFSET));
    let ready_pose = Pose { stance: true, elbow_bent: true, racket: ready };
    let rest_pose = Pose { stance: true, elbow_bent: false, racket: ready };
    for _ in 0..STANCE_FRAMES {
        g.push(ready_pose);
    }

    let timeout_frames = run_timeout_ms * SYNTH_RATE_HZ / 1000 + 2;
    for run in 0..BLOCK_RUNS as usize {
        for _ in 0..HOLD_FRAMES {
            g.push(ready_pose);
        }
        let step = g.rng.random_range(0.05..0.09) * s_arm;
        let mut verts = swing_vertices(&template, &place, &waypoints, profile.misses(run));
        verts.push(ready);
        let mut motion = 0;
        let mut from = ready;
        for v in verts {
            let pieces = ((v.distance(from) / step).ceil() as u64).max(1);
            for k in 1..=pieces {
                g.push(Pose { stance: true, elbow_bent: false, racket: from.lerp(v, k as f64 / pieces as f64) });
                motion += 1;
            }
            from = v;
        }
        for _ in 0..timeout_frames.saturating_sub(motion) + 3 {
            g.push(rest_pose);
        }
    }
    while g.frames.last().map_or(0, SkeletonFrame::t_ms) < g.options.min_duration_ms {
        g.push(rest_pose);
    }
    Ok(g.frames)
}
