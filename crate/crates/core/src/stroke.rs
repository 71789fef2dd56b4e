//! Ten-ball stroke template and per-run scoring.

use std::io::BufRead;

use crate::error::TemplateError;
use crate::model::{Anthropometry, SkeletonFrame, Vec3};
use crate::stream::replay::{RecordReader, RACKET_JOINT_SET};

pub const BALL_COUNT: usize = 10;
pub const POINTS_PER_BALL: u32 = 10;
pub const MAX_SCORE: u32 = POINTS_PER_BALL * BALL_COUNT as u32;
pub const DEFAULT_BALL_RADIUS_M: f64 = 0.06;
pub const DEFAULT_RUN_TIMEOUT_MS: u64 = 3000;
/// Paths shorter than this cannot be resampled.
pub const MIN_ARC_LENGTH_M: f64 = 0.01;
/// Pseudo-joint name used by racket path files.
pub const RACKET_JOINT: &str = "RACKET";

/// Expert racket-point samples, relative to the expert's SpineBase ground
/// projection, plus the expert's body size.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPath {
    id: String,
    samples: Vec<(u64, Vec3)>,
    anthropometry: Anthropometry,
}

impl ExpertPath {
    pub fn new(
        id: impl Into<String>,
        samples: Vec<(u64, Vec3)>,
        anthropometry: Anthropometry,
    ) -> Result<Self, TemplateError> {
        if samples.len() < BALL_COUNT {
            return Err(TemplateError::Invalid(format!(
                "expert path needs at least {BALL_COUNT} samples, got {}",
                samples.len()
            )));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(TemplateError::Invalid("expert path timestamps must increase".into()));
        }
        if samples.iter().any(|(_, p)| !p.is_finite()) {
            return Err(TemplateError::Invalid("non-finite expert path sample".into()));
        }
        let path = Self { id: id.into(), samples, anthropometry };
        if path.arc_length() <= 0.0 {
            return Err(TemplateError::Invalid("expert path has zero length".into()));
        }
        Ok(path)
    }

    /// Load a `racket` joint-set stream. Metadata keys `id`, `height_m` and
    /// `arm_length_m` are required.
    pub fn load<R: BufRead>(source: R) -> Result<Self, TemplateError> {
        let bad = |reason: String| TemplateError::Invalid(reason);
        let reader = RecordReader::new(source).map_err(|e| bad(e.to_string()))?;
        if reader.joint_set() != RACKET_JOINT_SET {
            return Err(bad(format!("expected joint set `{RACKET_JOINT_SET}`")));
        }
        let meta_f64 = |key: &str| -> Result<f64, TemplateError> {
            reader
                .meta_value(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("missing or bad metadata `{key}`")))
        };
        let anthropometry = Anthropometry::new(meta_f64("height_m")?, meta_f64("arm_length_m")?)
            .map_err(|e| bad(e.to_string()))?;
        let id = reader
            .meta_value("id")
            .ok_or_else(|| bad("missing metadata `id`".into()))?
            .to_string();
        let mut samples = Vec::new();
        for record in reader {
            let record = record.map_err(|e| bad(e.to_string()))?;
            match record.joints.as_slice() {
                [j] if j.name == RACKET_JOINT => samples.push((record.t_ms, j.position())),
                _ => return Err(bad(format!("frame at {} ms must hold exactly one RACKET joint", record.t_ms))),
            }
        }
        Self::new(id, samples, anthropometry)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn samples(&self) -> &[(u64, Vec3)] {
        &self.samples
    }

    pub fn points(&self) -> Vec<Vec3> {
        self.samples.iter().map(|(_, p)| *p).collect()
    }

    pub fn anthropometry(&self) -> &Anthropometry {
        &self.anthropometry
    }

    pub fn arc_length(&self) -> f64 {
        self.samples.windows(2).map(|w| w[0].1.distance(w[1].1)).sum()
    }
}

impl Default for ExpertPath {
    /// The bundled expert forehand drive.
    fn default() -> Self {
        Self::load(include_str!("../fixtures/expert_path.sks").as_bytes())
            .expect("bundled expert path is valid")
    }
}

/// Points at equal arc-length spacing along a polyline, both endpoints
/// included.
pub fn resample_polyline(points: &[Vec3], count: usize) -> Vec<Vec3> {
    assert!(count >= 2 && points.len() >= 2);
    let cumulative: Vec<f64> = std::iter::once(0.0)
        .chain(points.windows(2).scan(0.0, |acc, w| {
            *acc += w[0].distance(w[1]);
            Some(*acc)
        }))
        .collect();
    let total = *cumulative.last().unwrap();
    let last = points.len() - 1;
    let mut segment = 0;
    (0..count)
        .map(|i| {
            if i == 0 {
                return points[0];
            }
            if i == count - 1 {
                return points[last];
            }
            let target = total * i as f64 / (count - 1) as f64;
            while segment < last - 1 && cumulative[segment + 1] < target {
                segment += 1;
            }
            let len = cumulative[segment + 1] - cumulative[segment];
            let t = if len > 0.0 { (target - cumulative[segment]) / len } else { 0.0 };
            points[segment].lerp(points[segment + 1], t)
        })
        .collect()
}

/// Ten waypoints at arc-length fractions 0, 1/9, ..., 1 of the expert path.
pub fn resample_path(path: &ExpertPath) -> Result<[Vec3; BALL_COUNT], TemplateError> {
    let length = path.arc_length();
    if length < MIN_ARC_LENGTH_M {
        return Err(TemplateError::DegeneratePath(length));
    }
    let points = resample_polyline(&path.points(), BALL_COUNT);
    Ok(points.try_into().expect("resample returns BALL_COUNT points"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetBall {
    pub center: Vec3,
    pub radius: f64,
    pub points: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrokeTemplate {
    balls: [TargetBall; BALL_COUNT],
    expert_id: String,
    arm_scale: f64,
    height_scale: f64,
}

impl StrokeTemplate {
    pub fn balls(&self) -> &[TargetBall; BALL_COUNT] {
        &self.balls
    }

    pub fn ball(&self, index: usize) -> &TargetBall {
        &self.balls[index]
    }

    pub fn expert_id(&self) -> &str {
        &self.expert_id
    }

    pub fn arm_scale(&self) -> f64 {
        self.arm_scale
    }

    pub fn height_scale(&self) -> f64 {
        self.height_scale
    }

    pub fn total_points(&self) -> u32 {
        self.balls.iter().map(|b| b.points).sum()
    }
}

/// Scale factors applied by [`scale_template`]: `(arm, height)`.
pub fn template_scales(expert: &Anthropometry, player: &Anthropometry) -> (f64, f64) {
    (
        player.arm_length_m() / expert.arm_length_m(),
        player.height_m() / expert.height_m(),
    )
}

/// Fit expert waypoints to a player.
///
/// `waypoints` are offsets from the expert root. Horizontal offsets and the
/// vertical spread relative to ball 1 scale with arm length; ball 1's height
/// above the ground scales with body height. Radii scale with arm length.
pub fn scale_template(
    waypoints: &[Vec3; BALL_COUNT],
    expert: &Anthropometry,
    player: &Anthropometry,
    root: Vec3,
    base_radius_m: f64,
    expert_id: &str,
) -> Result<StrokeTemplate, TemplateError> {
    let (s_arm, s_h) = template_scales(expert, player);
    for s in [s_arm, s_h] {
        if !(0.3..=2.0).contains(&s) {
            return Err(TemplateError::BadScale(s));
        }
    }
    if !(base_radius_m.is_finite() && base_radius_m > 0.0) {
        return Err(TemplateError::Invalid("ball radius must be positive".into()));
    }
    let first_y = waypoints[0].y;
    let balls = waypoints.map(|w| {
        let offset = Vec3::new(w.x * s_arm, first_y * s_h + (w.y - first_y) * s_arm, w.z * s_arm);
        TargetBall { center: root + offset, radius: base_radius_m * s_arm, points: POINTS_PER_BALL }
    });
    if balls.windows(2).any(|w| w[0].center == w[1].center) {
        return Err(TemplateError::Invalid("consecutive ball centers coincide".into()));
    }
    Ok(StrokeTemplate { balls, expert_id: expert_id.to_string(), arm_scale: s_arm, height_scale: s_h })
}

/// Smallest `t` in `[0, 1]` at which `a + t (b - a)` lies within `radius`
/// of `center` (closed ball), if any.
pub fn segment_sphere_entry(a: Vec3, b: Vec3, center: Vec3, radius: f64) -> Option<f64> {
    let f = a - center;
    let c = f.norm_sq() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let d = b - a;
    let dd = d.norm_sq();
    if dd == 0.0 {
        return None;
    }
    let fd = f.dot(d);
    let disc = fd * fd - dd * c;
    if disc < 0.0 {
        return None;
    }
    // `a` is outside, so both roots share a sign; the smaller one is the entry.
    let t = (-fd - disc.sqrt()) / dd;
    (0.0..=1.0).contains(&t).then_some(t)
}

/// In-progress run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub run: u8,
    pub start_ms: u64,
    pub hit_times: [Option<u64>; BALL_COUNT],
    pub last_point: Vec3,
    pub ordered: bool,
    pub voided: bool,
}

impl RunState {
    pub fn new(run: u8, start_ms: u64, last_point: Vec3, ordered: bool) -> Self {
        Self { run, start_ms, hit_times: [None; BALL_COUNT], last_point, ordered, voided: false }
    }

    pub fn hit_count(&self) -> usize {
        self.hit_times.iter().filter(|t| t.is_some()).count()
    }

    /// Lowest-indexed ball not yet hit (0-based).
    pub fn active_ball(&self) -> Option<usize> {
        self.hit_times.iter().position(Option::is_none)
    }

    pub fn all_hit(&self) -> bool {
        self.active_ball().is_none()
    }
}

/// A ball credited during a frame; `ball` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BallHit {
    pub ball: u8,
    pub t_ms: u64,
}

/// Sweep the racket point from its previous position to the one in `frame`
/// and credit balls. Under ordered collection only the active ball can be
/// hit, but one sweep may collect several consecutive balls in order.
pub fn advance_run(
    frame: &SkeletonFrame,
    template: &StrokeTemplate,
    state: &RunState,
) -> (RunState, Vec<BallHit>) {
    let point = frame.racket_point();
    let mut next = state.clone();
    let mut hits = Vec::new();
    let t_ms = frame.t_ms();
    if state.ordered {
        let mut from = state.last_point;
        while let Some(active) = next.active_ball() {
            let ball = template.ball(active);
            let Some(t) = segment_sphere_entry(from, point, ball.center, ball.radius) else {
                break;
            };
            next.hit_times[active] = Some(t_ms);
            hits.push(BallHit { ball: active as u8 + 1, t_ms });
            from = from.lerp(point, t);
        }
    } else {
        let mut entered: Vec<(f64, usize)> = (0..BALL_COUNT)
            .filter(|i| next.hit_times[*i].is_none())
            .filter_map(|i| {
                let ball = template.ball(i);
                segment_sphere_entry(state.last_point, point, ball.center, ball.radius).map(|t| (t, i))
            })
            .collect();
        entered.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, i) in entered {
            next.hit_times[i] = Some(t_ms);
            hits.push(BallHit { ball: i as u8 + 1, t_ms });
        }
    }
    next.last_point = point;
    (next, hits)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub run: u8,
    pub hit_times: [Option<u64>; BALL_COUNT],
    pub score: u32,
    pub start_ms: u64,
    pub end_ms: u64,
    /// Posture broke during the run and voiding was enabled; scores 0.
    pub voided: bool,
}

impl RunResult {
    pub fn hits(&self) -> [bool; BALL_COUNT] {
        self.hit_times.map(|t| t.is_some())
    }

    pub fn hit_count(&self) -> usize {
        self.hit_times.iter().filter(|t| t.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.score == MAX_SCORE
    }

    /// A complete score earns audiovisual encouragement.
    pub fn encouragement(&self) -> bool {
        self.is_complete()
    }
}

pub fn finish_run(state: &RunState, end_ms: u64) -> RunResult {
    let score = if state.voided { 0 } else { POINTS_PER_BALL * state.hit_count() as u32 };
    RunResult {
        run: state.run,
        hit_times: state.hit_times,
        score,
        start_ms: state.start_ms,
        end_ms,
        voided: state.voided,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JointId, JointSample};
    use std::collections::BTreeMap;

    fn racket_frame(t: u64, p: Vec3) -> SkeletonFrame {
        let mut joints: BTreeMap<_, _> = JointId::REQUIRED
            .iter()
            .map(|id| (*id, JointSample::new(Vec3::new(0.0, 1.0, 2.5), 1.0)))
            .collect();
        joints.insert(JointId::RacketTip, JointSample::new(p, 1.0));
        SkeletonFrame::new(t, joints).unwrap()
    }

    fn line_template() -> StrokeTemplate {
        let expert = Anthropometry::new(1.75, 0.7).unwrap();
        let wp: [Vec3; 10] = std::array::from_fn(|i| Vec3::new(0.1 * i as f64, 1.0, 0.0));
        scale_template(&wp, &expert, &expert, Vec3::ZERO, 0.03, "line").unwrap()
    }

    fn path(points: Vec<Vec3>) -> ExpertPath {
        let samples = points.into_iter().enumerate().map(|(i, p)| (i as u64 * 10, p)).collect();
        ExpertPath::new("t", samples, Anthropometry::new(1.75, 0.7).unwrap()).unwrap()
    }

    #[test]
    fn straight_segment_resamples_uniformly() {
        let mut pts = vec![Vec3::ZERO];
        pts.extend((1..10).map(|i| Vec3::new(0.9 * (i as f64 / 10.0).powi(2), 0.0, 0.0)));
        pts.push(Vec3::new(0.9, 0.0, 0.0));
        let w = resample_path(&path(pts)).unwrap();
        for (i, p) in w.iter().enumerate() {
            assert!((p.x - 0.1 * i as f64).abs() < 1e-12, "{i}: {p:?}");
            assert_eq!((p.y, p.z), (0.0, 0.0));
        }
    }

    #[test]
    fn equally_spaced_samples_are_fixed_points() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(0.0, 0.05 * i as f64, 0.1)).collect();
        let w = resample_path(&path(pts.clone())).unwrap();
        for (a, b) in w.iter().zip(&pts) {
            assert!((*a - *b).norm() < 1e-12);
        }
    }

    #[test]
    fn short_path_is_degenerate() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(0.0005 * i as f64, 0.0, 0.0)).collect();
        assert!(matches!(resample_path(&path(pts)), Err(TemplateError::DegeneratePath(_))));
    }

    #[test]
    fn expert_path_loads() {
        let p = ExpertPath::default();
        assert_eq!(p.id(), "expert-forehand-drive-01");
        assert_eq!(p.samples().len(), 40);
        assert_eq!(p.anthropometry().height_m(), 1.75);
        let w = resample_path(&p).unwrap();
        assert_eq!(w[0], p.samples()[0].1);
        assert_eq!(w[9], p.samples()[39].1);
    }

    #[test]
    fn identity_scaling() {
        let expert = Anthropometry::new(1.75, 0.7).unwrap();
        let w = resample_path(&ExpertPath::default()).unwrap();
        let root = Vec3::new(0.1, 0.05, 2.4);
        let t = scale_template(&w, &expert, &expert, root, 0.06, "x").unwrap();
        for (b, w) in t.balls().iter().zip(&w) {
            assert!((b.center - (root + *w)).norm() < 1e-12);
            assert_eq!(b.radius, 0.06);
        }
        assert_eq!(t.total_points(), 100);
    }

    #[test]
    fn half_size_player_halves_offsets() {
        let expert = Anthropometry::new(1.75, 0.7).unwrap();
        let player = Anthropometry::new(0.875, 0.35).unwrap();
        let w = resample_path(&ExpertPath::default()).unwrap();
        let t = scale_template(&w, &expert, &player, Vec3::ZERO, 0.06, "x").unwrap();
        for (b, w) in t.balls().iter().zip(&w) {
            assert!((b.center - *w * 0.5).norm() < 1e-12);
            assert_eq!(b.radius, 0.03);
        }
    }

    #[test]
    fn arm_and_height_scale_independently() {
        let expert = Anthropometry::new(1.75, 0.70).unwrap();
        let player = Anthropometry::new(1.40, 0.55).unwrap();
        let w = resample_path(&ExpertPath::default()).unwrap();
        let root = Vec3::new(0.0, 0.08, 2.5);
        let t = scale_template(&w, &expert, &player, root, 0.06, "x").unwrap();
        let s_arm = 0.55 / 0.70;
        assert!((t.arm_scale() - 0.785_714_285_714_285_7).abs() < 1e-15);
        assert!((t.height_scale() - 0.8).abs() < 1e-15);
        // affine map written out per coordinate
        for (b, w0) in t.balls().iter().zip(&w) {
            let x = 0.0 + s_arm * w0.x;
            let y = 0.08 + 0.8 * w[0].y + s_arm * (w0.y - w[0].y);
            let z = 2.5 + s_arm * w0.z;
            assert!((b.center - Vec3::new(x, y, z)).norm() < 1e-12);
            assert!((b.radius - 0.06 * s_arm).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_scale() {
        let expert = Anthropometry::new(1.75, 0.70).unwrap();
        let w = resample_path(&ExpertPath::default()).unwrap();
        let tiny = Anthropometry::new(1.75, 0.2).unwrap();
        assert!(matches!(
            scale_template(&w, &expert, &tiny, Vec3::ZERO, 0.06, "x"),
            Err(TemplateError::BadScale(_))
        ));
    }

    #[test]
    fn entry_parameter() {
        let c = Vec3::new(0.5, 0.0, 0.0);
        let t = segment_sphere_entry(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), c, 0.25).unwrap();
        assert!((t - 0.25).abs() < 1e-15);
        assert_eq!(segment_sphere_entry(c, c, c, 0.1), Some(0.0));
        assert_eq!(segment_sphere_entry(Vec3::ZERO, Vec3::new(0.2, 0.0, 0.0), c, 0.25), None);
        assert_eq!(segment_sphere_entry(Vec3::new(0.0, 0.3, 0.0), Vec3::new(1.0, 0.3, 0.0), c, 0.25), None);
        // tangent counts as a hit
        let t = segment_sphere_entry(Vec3::new(0.0, 0.25, 0.0), Vec3::new(1.0, 0.25, 0.0), c, 0.25);
        assert!(t.is_some());
    }

    fn run_through(template: &StrokeTemplate, points: &[Vec3], ordered: bool) -> RunResult {
        let mut state = RunState::new(1, 0, points[0], ordered);
        for (i, p) in points.iter().enumerate().skip(1) {
            state = advance_run(&racket_frame(i as u64 * 33, *p), template, &state).0;
        }
        finish_run(&state, points.len() as u64 * 33)
    }

    #[test]
    fn path_through_all_centers_hits_all() {
        let t = line_template();
        let mut pts = vec![Vec3::new(-0.2, 1.0, 0.0)];
        pts.extend(t.balls().iter().map(|b| b.center));
        let r = run_through(&t, &pts, true);
        assert_eq!(r.hit_count(), 10);
        assert_eq!(r.score, 100);
        assert!(r.encouragement());
    }

    #[test]
    fn one_sweep_collects_consecutive_balls() {
        let t = line_template();
        let r = run_through(&t, &[Vec3::new(-0.2, 1.0, 0.0), Vec3::new(1.2, 1.0, 0.0)], true);
        assert_eq!(r.score, 100);
        // backwards sweep collects nothing past ball 1 ordering
        let r = run_through(&t, &[Vec3::new(1.2, 1.0, 0.0), Vec3::new(0.85, 1.0, 0.0)], true);
        assert_eq!(r.score, 0);
    }

    #[test]
    fn skipped_ball_blocks_later_credit() {
        let t = line_template();
        let mut pts = vec![Vec3::new(-0.2, 1.0, 0.0)];
        for (i, b) in t.balls().iter().enumerate() {
            let detour = if i == 3 { Vec3::new(0.0, 0.3, 0.0) } else { Vec3::ZERO };
            pts.push(b.center + detour);
        }
        let r = run_through(&t, &pts, true);
        assert_eq!(r.hits(), [true, true, true, false, false, false, false, false, false, false]);
        assert_eq!(r.score, 30);
        assert!(!r.encouragement());

        let r = run_through(&t, &pts, false);
        assert_eq!(r.score, 90);
    }

    #[test]
    fn finish_scores() {
        let mut s = RunState::new(2, 100, Vec3::ZERO, true);
        assert_eq!(finish_run(&s, 200).score, 0);
        for i in 0..7 {
            s.hit_times[i] = Some(150);
        }
        let r = finish_run(&s, 200);
        assert_eq!((r.score, r.encouragement()), (70, false));
        s.voided = true;
        assert_eq!(finish_run(&s, 200).score, 0);
    }
}
