//! Lower-body posture markers: two foot squares and two knee cubes placed
//! from an expert stance and scaled to the player's height.

use std::fmt;
use std::str::FromStr;

use crate::error::TemplateError;
use crate::model::{elbow_angle, Anthropometry, JointId, Side, SkeletonFrame, Vec3};

/// Joints below this confidence never satisfy a marker.
pub const MIN_JOINT_CONFIDENCE: f64 = 0.5;
pub const DEFAULT_FOOT_HALF_EXTENT_M: f64 = 0.10;
pub const DEFAULT_KNEE_HALF_EXTENT_M: f64 = 0.12;
pub const DEFAULT_HOLD_MS: u64 = 500;
pub const DEFAULT_ELBOW_RANGE_DEG: (f64, f64) = (90.0, 110.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MarkerId {
    LFoot,
    RFoot,
    LKnee,
    RKnee,
}

impl MarkerId {
    pub const ALL: [MarkerId; 4] = [MarkerId::LFoot, MarkerId::RFoot, MarkerId::LKnee, MarkerId::RKnee];

    pub fn name(self) -> &'static str {
        match self {
            MarkerId::LFoot => "LFoot",
            MarkerId::RFoot => "RFoot",
            MarkerId::LKnee => "LKnee",
            MarkerId::RKnee => "RKnee",
        }
    }

    /// The tracked joint judged against this marker. Ankles stand in for
    /// the soles, which are not tracked.
    pub fn joint(self) -> JointId {
        match self {
            MarkerId::LFoot => JointId::LAnkle,
            MarkerId::RFoot => JointId::RAnkle,
            MarkerId::LKnee => JointId::LKnee,
            MarkerId::RKnee => JointId::RKnee,
        }
    }

    pub fn is_foot(self) -> bool {
        matches!(self, MarkerId::LFoot | MarkerId::RFoot)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MarkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MarkerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MarkerId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown marker `{s}`"))
    }
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub center: Vec3,
    pub half_extents: Vec3,
}

impl Aabb {
    pub fn contains(&self, p: Vec3) -> bool {
        let d = p - self.center;
        d.x.abs() <= self.half_extents.x
            && d.y.abs() <= self.half_extents.y
            && d.z.abs() <= self.half_extents.z
    }
}

/// Marker placement in expert meters relative to the expert's SpineBase
/// ground projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerSpec {
    pub offset: Vec3,
    pub half_extents: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostureTemplate {
    markers: [MarkerSpec; 4],
    reference_height_m: f64,
}

impl PostureTemplate {
    /// Markers are given in `MarkerId::ALL` order.
    pub fn new(markers: [MarkerSpec; 4], reference_height_m: f64) -> Result<Self, TemplateError> {
        let invalid = |s: &str| Err(TemplateError::Invalid(s.to_string()));
        if !(reference_height_m.is_finite() && reference_height_m > 0.0) {
            return invalid("reference height must be positive");
        }
        for spec in &markers {
            let h = spec.half_extents;
            if !(spec.offset.is_finite() && h.is_finite()) || h.x <= 0.0 || h.y <= 0.0 || h.z <= 0.0 {
                return invalid("half-extents must be finite and strictly positive");
            }
        }
        let [lfoot, rfoot, lknee, rknee] = markers;
        if lfoot.offset.y != 0.0 || rfoot.offset.y != 0.0 {
            return invalid("foot markers must rest on the ground (offset y = 0)");
        }
        if lknee.offset.y <= lfoot.offset.y || rknee.offset.y <= rfoot.offset.y {
            return invalid("knee markers must sit above the foot markers");
        }
        // The player faces -Z, so "further back" is +Z.
        if rfoot.offset.z <= lfoot.offset.z {
            return invalid("right foot must be behind the left foot");
        }
        Ok(Self { markers, reference_height_m })
    }

    pub fn marker(&self, id: MarkerId) -> &MarkerSpec {
        &self.markers[id.index()]
    }

    pub fn reference_height_m(&self) -> f64 {
        self.reference_height_m
    }

    /// Replace every half-extent with a cube of the given size (expert meters).
    pub fn with_half_extents(&self, foot_m: f64, knee_m: f64) -> Result<Self, TemplateError> {
        let mut markers = self.markers;
        for id in MarkerId::ALL {
            let h = if id.is_foot() { foot_m } else { knee_m };
            markers[id.index()].half_extents = Vec3::new(h, h, h);
        }
        Self::new(markers, self.reference_height_m)
    }

    /// Parse the text template format:
    ///
    /// ```text
    /// POSTURE 1
    /// reference_height_m <meters>
    /// marker <LFoot|RFoot|LKnee|RKnee> <ox> <oy> <oz> <hx> <hy> <hz>
    /// ```
    ///
    /// Blank lines and `#` comments are ignored; all four markers are required.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let err = |line: usize, reason: &str| TemplateError::Parse { line, reason: reason.to_string() };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, "POSTURE 1")) => {}
            Some((n, _)) => return Err(err(n, "expected `POSTURE 1` header")),
            None => return Err(err(1, "empty template")),
        }
        let mut height = None;
        let mut specs: [Option<MarkerSpec>; 4] = [None; 4];
        for (n, line) in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                ["reference_height_m", v] => {
                    height = Some(v.parse::<f64>().map_err(|_| err(n, "bad reference height"))?);
                }
                ["marker", name, rest @ ..] if rest.len() == 6 => {
                    let id: MarkerId = name.parse().map_err(|e: String| err(n, &e))?;
                    let v: Vec<f64> = rest
                        .iter()
                        .map(|t| t.parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err(n, "bad number"))?;
                    if specs[id.index()].is_some() {
                        return Err(err(n, "duplicate marker"));
                    }
                    specs[id.index()] = Some(MarkerSpec {
                        offset: Vec3::new(v[0], v[1], v[2]),
                        half_extents: Vec3::new(v[3], v[4], v[5]),
                    });
                }
                _ => return Err(err(n, "unrecognized line")),
            }
        }
        let height = height.ok_or_else(|| err(0, "missing reference_height_m"))?;
        let mut markers = [MarkerSpec { offset: Vec3::ZERO, half_extents: Vec3::ZERO }; 4];
        for id in MarkerId::ALL {
            markers[id.index()] = specs[id.index()]
                .ok_or_else(|| err(0, &format!("missing marker {id}")))?;
        }
        Self::new(markers, height)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("POSTURE 1\nreference_height_m {}\n", self.reference_height_m);
        for id in MarkerId::ALL {
            let m = self.marker(id);
            out.push_str(&format!(
                "marker {} {} {} {} {} {} {}\n",
                id, m.offset.x, m.offset.y, m.offset.z, m.half_extents.x, m.half_extents.y, m.half_extents.z
            ));
        }
        out
    }
}

impl Default for PostureTemplate {
    /// The bundled expert stance.
    fn default() -> Self {
        Self::parse(include_str!("../fixtures/expert_posture.txt"))
            .expect("bundled posture template is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostureMarker {
    pub id: MarkerId,
    pub bounds: Aabb,
    pub satisfied: bool,
}

/// Four boxes in sensor coordinates with their live state.
#[derive(Debug, Clone, PartialEq)]
pub struct PostureMarkerSet {
    markers: [PostureMarker; 4],
}

impl PostureMarkerSet {
    pub fn get(&self, id: MarkerId) -> &PostureMarker {
        &self.markers[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PostureMarker> {
        self.markers.iter()
    }

    pub fn all_satisfied(&self) -> bool {
        self.markers.iter().all(|m| m.satisfied)
    }

    pub fn satisfied_set(&self) -> [bool; 4] {
        self.markers.map(|m| m.satisfied)
    }
}

/// Player-over-expert height ratio used for every marker.
pub fn posture_scale(template: &PostureTemplate, player: &Anthropometry) -> f64 {
    player.height_m() / template.reference_height_m()
}

/// Place the template's markers around `root`, the player's SpineBase ground
/// projection. All markers start unsatisfied.
pub fn instantiate_markers(
    template: &PostureTemplate,
    player: &Anthropometry,
    root: Vec3,
) -> Result<PostureMarkerSet, TemplateError> {
    let s = posture_scale(template, player);
    if !(0.3..=2.0).contains(&s) {
        return Err(TemplateError::BadScale(s));
    }
    let markers = MarkerId::ALL.map(|id| {
        let spec = template.marker(id);
        PostureMarker {
            id,
            bounds: Aabb { center: root + spec.offset * s, half_extents: spec.half_extents * s },
            satisfied: false,
        }
    });
    Ok(PostureMarkerSet { markers })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkerTransition {
    pub marker: MarkerId,
    pub satisfied: bool,
}

/// Re-evaluate every marker against one frame.
pub fn check_posture(
    frame: &SkeletonFrame,
    markers: &PostureMarkerSet,
) -> (PostureMarkerSet, Vec<MarkerTransition>) {
    let mut next = markers.clone();
    let mut transitions = Vec::new();
    for m in next.markers.iter_mut() {
        let inside = frame
            .get(m.id.joint())
            .filter(|s| s.confidence >= MIN_JOINT_CONFIDENCE)
            .is_some_and(|s| m.bounds.contains(s.position));
        if inside != m.satisfied {
            transitions.push(MarkerTransition { marker: m.id, satisfied: inside });
        }
        m.satisfied = inside;
    }
    (next, transitions)
}

/// Tracks how long all four markers have been continuously satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct PostureTracker {
    markers: PostureMarkerSet,
    satisfied_since: Option<u64>,
}

impl PostureTracker {
    pub fn new(markers: PostureMarkerSet) -> Self {
        Self { markers, satisfied_since: None }
    }

    pub fn markers(&self) -> &PostureMarkerSet {
        &self.markers
    }

    pub fn satisfied_since(&self) -> Option<u64> {
        self.satisfied_since
    }

    pub fn update(&mut self, frame: &SkeletonFrame) -> Vec<MarkerTransition> {
        let (markers, transitions) = check_posture(frame, &self.markers);
        self.markers = markers;
        if self.markers.all_satisfied() {
            self.satisfied_since.get_or_insert(frame.t_ms());
        } else {
            self.satisfied_since = None;
        }
        transitions
    }

    /// See [`posture_ready`].
    pub fn ready(&self, frame: &SkeletonFrame, hold_ms: u64, elbow_range: (f64, f64)) -> bool {
        posture_ready(self.satisfied_since, frame, hold_ms, elbow_range, frame.t_ms())
    }
}

/// True when all markers have held for `hold_ms` up to `now` and the right
/// elbow angle on `frame` lies in `elbow_range` (inclusive).
pub fn posture_ready(
    satisfied_since: Option<u64>,
    frame: &SkeletonFrame,
    hold_ms: u64,
    elbow_range: (f64, f64),
    now: u64,
) -> bool {
    let held = satisfied_since.is_some_and(|since| now.saturating_sub(since) >= hold_ms);
    held && elbow_angle(frame, Side::Right)
        .is_ok_and(|a| a >= elbow_range.0 && a <= elbow_range.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JointSample;
    use std::collections::BTreeMap;

    fn unit_box(center: Vec3, h: f64) -> Aabb {
        Aabb { center, half_extents: Vec3::new(h, h, h) }
    }

    fn template() -> PostureTemplate {
        PostureTemplate::default()
    }

    /// A frame with the four governed joints at the given positions and the
    /// right arm bent to `elbow_deg`.
    pub(crate) fn posed(t: u64, joints4: [Vec3; 4], elbow_deg: f64) -> SkeletonFrame {
        let mut joints = BTreeMap::new();
        for id in JointId::REQUIRED {
            joints.insert(id, JointSample::new(Vec3::new(0.0, 1.0, 2.5), 1.0));
        }
        for (m, p) in MarkerId::ALL.iter().zip(joints4) {
            joints.insert(m.joint(), JointSample::new(p, 1.0));
        }
        let shoulder = Vec3::new(0.2, 1.4, 2.5);
        let elbow = Vec3::new(0.2, 1.1, 2.5);
        let a = elbow_deg.to_radians();
        let wrist = elbow + Vec3::new(0.0, a.cos(), -a.sin()) * 0.28;
        joints.insert(JointId::RShoulder, JointSample::new(shoulder, 1.0));
        joints.insert(JointId::RElbow, JointSample::new(elbow, 1.0));
        joints.insert(JointId::RWrist, JointSample::new(wrist, 1.0));
        SkeletonFrame::new(t, joints).unwrap()
    }

    fn centers(set: &PostureMarkerSet) -> [Vec3; 4] {
        MarkerId::ALL.map(|m| set.get(m).bounds.center)
    }

    #[test]
    fn identity_scale_keeps_offsets() {
        let t = template();
        let player = Anthropometry::new(t.reference_height_m(), 0.6).unwrap();
        let set = instantiate_markers(&t, &player, Vec3::ZERO).unwrap();
        for id in MarkerId::ALL {
            assert_eq!(set.get(id).bounds.center, t.marker(id).offset);
            assert_eq!(set.get(id).bounds.half_extents, t.marker(id).half_extents);
            assert!(!set.get(id).satisfied);
        }
    }

    #[test]
    fn half_height_halves_everything() {
        let t = template();
        let player = Anthropometry::new(t.reference_height_m() / 2.0, 0.3).unwrap();
        let set = instantiate_markers(&t, &player, Vec3::ZERO).unwrap();
        for id in MarkerId::ALL {
            assert_eq!(set.get(id).bounds.center, t.marker(id).offset * 0.5);
            assert_eq!(set.get(id).bounds.half_extents, t.marker(id).half_extents * 0.5);
        }
    }

    #[test]
    fn scaled_centers_match_hand_computation() {
        let t = template();
        assert_eq!(t.reference_height_m(), 1.75);
        let player = Anthropometry::new(1.40, 0.55).unwrap();
        let s = posture_scale(&t, &player);
        assert!((s - 0.80).abs() < 1e-15);
        let root = Vec3::new(0.05, 0.08, 2.40);
        let set = instantiate_markers(&t, &player, root).unwrap();
        // LFoot offset (-0.30, 0, -0.08) and RKnee (0.26, 0.45, 0.02) from the fixture
        let lfoot = Vec3::new(0.05 + 0.8 * -0.30, 0.08, 2.40 + 0.8 * -0.08);
        let rknee = Vec3::new(0.05 + 0.8 * 0.26, 0.08 + 0.8 * 0.45, 2.40 + 0.8 * 0.02);
        assert!((set.get(MarkerId::LFoot).bounds.center - lfoot).norm() < 1e-12);
        assert!((set.get(MarkerId::RKnee).bounds.center - rknee).norm() < 1e-12);
    }

    #[test]
    fn bad_scale_rejected() {
        let t = template();
        let player = Anthropometry::new(0.5, 0.3).unwrap();
        assert!(matches!(instantiate_markers(&t, &player, Vec3::ZERO), Err(TemplateError::BadScale(_))));
    }

    #[test]
    fn closed_box_boundary() {
        // binary-exact values so the face lies exactly at center + half-extent
        let b = unit_box(Vec3::new(1.0, 0.5, 2.0), 0.125);
        assert!(b.contains(b.center));
        assert!(b.contains(Vec3::new(1.125, 0.5, 2.0)));
        assert!(b.contains(Vec3::new(1.125, 0.375, 2.125)));
        assert!(!b.contains(Vec3::new(1.126, 0.5, 2.0)));
        assert!(!b.contains(Vec3::new(1.0, 0.5, 1.874)));
    }

    #[test]
    fn check_reports_transitions_and_low_confidence() {
        let t = template();
        let player = Anthropometry::new(1.75, 0.7).unwrap();
        let set = instantiate_markers(&t, &player, Vec3::ZERO).unwrap();
        let f = posed(0, centers(&set), 100.0);
        let (on, transitions) = check_posture(&f, &set);
        assert!(on.all_satisfied());
        assert_eq!(transitions.len(), 4);
        let (again, none) = check_posture(&f, &on);
        assert_eq!(again, on);
        assert!(none.is_empty());

        let mut joints = f.joints().clone();
        joints.get_mut(&JointId::LKnee).unwrap().confidence = 0.4;
        let shaky = SkeletonFrame::new(33, joints).unwrap();
        let (after, transitions) = check_posture(&shaky, &on);
        assert!(!after.get(MarkerId::LKnee).satisfied);
        assert_eq!(transitions, vec![MarkerTransition { marker: MarkerId::LKnee, satisfied: false }]);
    }

    #[test]
    fn hold_threshold_and_elbow_range() {
        let t = template();
        let player = Anthropometry::new(1.75, 0.7).unwrap();
        let set = instantiate_markers(&t, &player, Vec3::ZERO).unwrap();
        let c = centers(&set);
        let mut tracker = PostureTracker::new(set);
        tracker.update(&posed(1000, c, 100.0));
        assert!(!tracker.ready(&posed(1499, c, 100.0), 500, DEFAULT_ELBOW_RANGE_DEG));
        tracker.update(&posed(1499, c, 100.0));
        assert!(!tracker.ready(&posed(1499, c, 100.0), 500, DEFAULT_ELBOW_RANGE_DEG));
        let f = posed(1500, c, 100.0);
        tracker.update(&f);
        assert!(tracker.ready(&f, 500, DEFAULT_ELBOW_RANGE_DEG));
        let straight = posed(1500, c, 180.0);
        assert!(!tracker.ready(&straight, 500, DEFAULT_ELBOW_RANGE_DEG));
        // trig-built arms land a few ulps off the exact range ends
        assert!(tracker.ready(&posed(1500, c, 90.001), 500, DEFAULT_ELBOW_RANGE_DEG));
        assert!(tracker.ready(&posed(1500, c, 109.999), 500, DEFAULT_ELBOW_RANGE_DEG));
        assert!(!tracker.ready(&posed(1500, c, 110.01), 500, DEFAULT_ELBOW_RANGE_DEG));
    }

    #[test]
    fn flicker_resets_hold_clock() {
        let t = template();
        let player = Anthropometry::new(1.75, 0.7).unwrap();
        let set = instantiate_markers(&t, &player, Vec3::ZERO).unwrap();
        let c = centers(&set);
        let mut off = c;
        off[2] = off[2] + Vec3::new(0.0, 0.5, 0.0);
        let mut tracker = PostureTracker::new(set);
        tracker.update(&posed(0, c, 100.0));
        tracker.update(&posed(300, off, 100.0));
        assert_eq!(tracker.satisfied_since(), None);
        tracker.update(&posed(333, c, 100.0));
        let f = posed(832, c, 100.0);
        tracker.update(&f);
        assert!(!tracker.ready(&f, 500, DEFAULT_ELBOW_RANGE_DEG));
        let f = posed(833, c, 100.0);
        tracker.update(&f);
        assert!(tracker.ready(&f, 500, DEFAULT_ELBOW_RANGE_DEG));
    }

    #[test]
    fn template_text_round_trip_and_validation() {
        let t = template();
        assert_eq!(PostureTemplate::parse(&t.to_text()).unwrap(), t);
        let swapped = t.to_text().replace("marker RFoot 0.3 0 0.12", "marker RFoot 0.3 0 -0.2");
        assert!(matches!(PostureTemplate::parse(&swapped), Err(TemplateError::Invalid(_))));
        assert!(PostureTemplate::parse("POSTURE 2\n").is_err());
        assert!(t.with_half_extents(0.0, 0.1).is_err());
    }
}
