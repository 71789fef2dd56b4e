//! Geometric and skeletal domain types.
//!
//! Coordinates are meters in a right-handed sensor frame with +Y up and the
//! origin at the sensor. The player stands on the +Z side facing the sensor,
//! so "behind the player" is +Z and the player's right-hand side is +X.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use crate::error::ModelError;

/// A point or displacement in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Linear interpolation, `t = 0` gives `self`.
    pub fn lerp(self, other: Vec3, t: f64) -> Vec3 {
        self + (other - self) * t
    }

    /// Component-wise product.
    pub fn scale_by(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x * other.x, self.y * other.y, self.z * other.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Tracked joints. The first 14 are required in every frame; `RacketTip` is
/// optional and falls back to `RWrist`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JointId {
    Head,
    SpineBase,
    LShoulder,
    RShoulder,
    LElbow,
    RElbow,
    LWrist,
    RWrist,
    LHip,
    RHip,
    LKnee,
    RKnee,
    LAnkle,
    RAnkle,
    RacketTip,
}

impl JointId {
    pub const REQUIRED: [JointId; 14] = [
        JointId::Head,
        JointId::SpineBase,
        JointId::LShoulder,
        JointId::RShoulder,
        JointId::LElbow,
        JointId::RElbow,
        JointId::LWrist,
        JointId::RWrist,
        JointId::LHip,
        JointId::RHip,
        JointId::LKnee,
        JointId::RKnee,
        JointId::LAnkle,
        JointId::RAnkle,
    ];

    pub const ALL: [JointId; 15] = [
        JointId::Head,
        JointId::SpineBase,
        JointId::LShoulder,
        JointId::RShoulder,
        JointId::LElbow,
        JointId::RElbow,
        JointId::LWrist,
        JointId::RWrist,
        JointId::LHip,
        JointId::RHip,
        JointId::LKnee,
        JointId::RKnee,
        JointId::LAnkle,
        JointId::RAnkle,
        JointId::RacketTip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JointId::Head => "Head",
            JointId::SpineBase => "SpineBase",
            JointId::LShoulder => "LShoulder",
            JointId::RShoulder => "RShoulder",
            JointId::LElbow => "LElbow",
            JointId::RElbow => "RElbow",
            JointId::LWrist => "LWrist",
            JointId::RWrist => "RWrist",
            JointId::LHip => "LHip",
            JointId::RHip => "RHip",
            JointId::LKnee => "LKnee",
            JointId::RKnee => "RKnee",
            JointId::LAnkle => "LAnkle",
            JointId::RAnkle => "RAnkle",
            JointId::RacketTip => "RacketTip",
        }
    }

    pub fn is_required(self) -> bool {
        self != JointId::RacketTip
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JointId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JointId::ALL
            .iter()
            .copied()
            .find(|j| j.name() == s)
            .ok_or_else(|| ModelError::UnknownJoint(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A tracked joint position with its confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSample {
    pub position: Vec3,
    pub confidence: f64,
}

impl JointSample {
    pub fn new(position: Vec3, confidence: f64) -> Self {
        Self { position, confidence }
    }
}

/// One timestamped pose. Construct through [`SkeletonFrame::new`] so the
/// joint-set invariants hold.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    t_ms: u64,
    joints: BTreeMap<JointId, JointSample>,
}

impl SkeletonFrame {
    pub fn new(t_ms: u64, joints: BTreeMap<JointId, JointSample>) -> Result<Self, ModelError> {
        for id in JointId::REQUIRED {
            if !joints.contains_key(&id) {
                return Err(ModelError::MissingJoint(id));
            }
        }
        for (id, sample) in &joints {
            if !sample.position.is_finite() {
                return Err(ModelError::NonFinite(*id));
            }
            if !(0.0..=1.0).contains(&sample.confidence) {
                return Err(ModelError::BadConfidence(*id, sample.confidence));
            }
        }
        Ok(Self { t_ms, joints })
    }

    pub fn t_ms(&self) -> u64 {
        self.t_ms
    }

    pub fn joints(&self) -> &BTreeMap<JointId, JointSample> {
        &self.joints
    }

    pub fn get(&self, id: JointId) -> Option<&JointSample> {
        self.joints.get(&id)
    }

    /// Position of a joint. Required joints are always present.
    pub fn position(&self, id: JointId) -> Option<Vec3> {
        self.joints.get(&id).map(|s| s.position)
    }

    pub fn confidence(&self, id: JointId) -> f64 {
        self.joints.get(&id).map_or(0.0, |s| s.confidence)
    }

    /// The racket point: `RacketTip` when tracked, else the right wrist.
    pub fn racket_point(&self) -> Vec3 {
        self.position(JointId::RacketTip)
            .unwrap_or_else(|| self.joints[&JointId::RWrist].position)
    }

    /// True when every required joint is at or above `min_confidence`.
    pub fn is_confident(&self, min_confidence: f64) -> bool {
        JointId::REQUIRED
            .iter()
            .all(|id| self.confidence(*id) >= min_confidence)
    }
}

/// Minimum separation between the elbow and either neighbor.
const MIN_SEGMENT_M: f64 = 1e-3;

/// Interior angle at the elbow of the shoulder–elbow–wrist triangle, in degrees.
pub fn elbow_angle(frame: &SkeletonFrame, side: Side) -> Result<f64, ModelError> {
    let (shoulder, elbow, wrist) = match side {
        Side::Left => (JointId::LShoulder, JointId::LElbow, JointId::LWrist),
        Side::Right => (JointId::RShoulder, JointId::RElbow, JointId::RWrist),
    };
    let p = |id| frame.position(id).ok_or(ModelError::MissingJoint(id));
    joint_angle(p(shoulder)?, p(elbow)?, p(wrist)?)
}

/// Angle at `vertex` between the rays to `a` and `b`, in degrees.
pub fn joint_angle(a: Vec3, vertex: Vec3, b: Vec3) -> Result<f64, ModelError> {
    let u = a - vertex;
    let v = b - vertex;
    if u.norm() < MIN_SEGMENT_M || v.norm() < MIN_SEGMENT_M {
        return Err(ModelError::DegenerateGeometry);
    }
    // atan2 of |u×v| and u·v stays accurate near 0° and 180° where acos does not.
    Ok(u.cross(v).norm().atan2(u.dot(v)).to_degrees())
}

/// Player body dimensions used to scale markers and the stroke template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anthropometry {
    height_m: f64,
    arm_length_m: f64,
}

impl Anthropometry {
    pub fn new(height_m: f64, arm_length_m: f64) -> Result<Self, ModelError> {
        let valid = (0.5..=2.5).contains(&height_m)
            && (0.2..=1.2).contains(&arm_length_m)
            && arm_length_m < height_m;
        if !valid {
            return Err(ModelError::InvalidAnthropometry { height_m, arm_length_m });
        }
        Ok(Self { height_m, arm_length_m })
    }

    pub fn height_m(&self) -> f64 {
        self.height_m
    }

    pub fn arm_length_m(&self) -> f64 {
        self.arm_length_m
    }
}

/// Frames needed before the body can be measured.
pub const MIN_CALIBRATION_FRAMES: usize = 30;
/// Joint confidence a frame needs to count toward calibration.
pub const CALIBRATION_CONFIDENCE: f64 = 0.5;

/// Head-to-lowest-ankle height of one frame.
pub fn frame_height(frame: &SkeletonFrame) -> f64 {
    let head = frame.joints[&JointId::Head].position.y;
    let l = frame.joints[&JointId::LAnkle].position.y;
    let r = frame.joints[&JointId::RAnkle].position.y;
    head - l.min(r)
}

/// Shoulder–elbow plus elbow–wrist length of the right arm in one frame.
pub fn frame_arm_length(frame: &SkeletonFrame) -> f64 {
    let s = frame.joints[&JointId::RShoulder].position;
    let e = frame.joints[&JointId::RElbow].position;
    let w = frame.joints[&JointId::RWrist].position;
    s.distance(e) + e.distance(w)
}

/// Median body measurements over the confident frames.
pub fn estimate_anthropometry(frames: &[SkeletonFrame]) -> Result<Anthropometry, ModelError> {
    let qualifying: Vec<&SkeletonFrame> = frames
        .iter()
        .filter(|f| f.is_confident(CALIBRATION_CONFIDENCE))
        .collect();
    if qualifying.len() < MIN_CALIBRATION_FRAMES {
        return Err(ModelError::InsufficientCalibration {
            qualifying: qualifying.len(),
            required: MIN_CALIBRATION_FRAMES,
        });
    }
    let height = median(qualifying.iter().map(|f| frame_height(f)).collect());
    let arm = median(qualifying.iter().map(|f| frame_arm_length(f)).collect());
    Anthropometry::new(height, arm)
}

/// The player's SpineBase projected onto the estimated ground (the lower
/// ankle height), taken as medians over the confident frames.
pub fn estimate_root(frames: &[SkeletonFrame]) -> Option<Vec3> {
    let qualifying: Vec<&SkeletonFrame> = frames
        .iter()
        .filter(|f| f.is_confident(CALIBRATION_CONFIDENCE))
        .collect();
    if qualifying.is_empty() {
        return None;
    }
    let spine = |f: &&SkeletonFrame| f.joints[&JointId::SpineBase].position;
    let x = median(qualifying.iter().map(|f| spine(f).x).collect());
    let z = median(qualifying.iter().map(|f| spine(f).z).collect());
    let ground = median(
        qualifying
            .iter()
            .map(|f| {
                let l = f.joints[&JointId::LAnkle].position.y;
                let r = f.joints[&JointId::RAnkle].position.y;
                l.min(r)
            })
            .collect(),
    );
    Some(Vec3::new(x, ground, z))
}

/// Median of a non-empty sample; even counts average the middle pair.
pub(crate) fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn arm_frame(shoulder: Vec3, elbow: Vec3, wrist: Vec3) -> SkeletonFrame {
        let mut joints = BTreeMap::new();
        for id in JointId::REQUIRED {
            joints.insert(id, JointSample::new(Vec3::new(0.0, 1.0, 2.0), 1.0));
        }
        joints.insert(JointId::RShoulder, JointSample::new(shoulder, 1.0));
        joints.insert(JointId::RElbow, JointSample::new(elbow, 1.0));
        joints.insert(JointId::RWrist, JointSample::new(wrist, 1.0));
        SkeletonFrame::new(0, joints).unwrap()
    }

    #[test]
    fn collinear_arm_is_straight() {
        let f = arm_frame(
            Vec3::new(0.0, 1.4, 0.0),
            Vec3::new(0.0, 1.1, 0.0),
            Vec3::new(0.0, 0.8, 0.0),
        );
        assert!((elbow_angle(&f, Side::Right).unwrap() - 180.0).abs() < 1e-12);
    }

    #[test]
    fn perpendicular_arm_is_right_angle() {
        let f = arm_frame(
            Vec3::new(0.0, 1.4, 0.0),
            Vec3::new(0.0, 1.1, 0.0),
            Vec3::new(0.3, 1.1, 0.0),
        );
        assert!((elbow_angle(&f, Side::Right).unwrap() - 90.0).abs() < 1e-12);
    }

    #[test]
    fn skewed_arm_matches_acos_oracle() {
        let s = [0.12, 1.38, 0.05];
        let e = [0.15, 1.10, 0.02];
        let w = [0.40, 1.18, 0.10];
        // acos of the normalized dot product over the raw coordinates
        let u: Vec<f64> = (0..3).map(|i| s[i] - e[i]).collect();
        let v: Vec<f64> = (0..3).map(|i| w[i] - e[i]).collect();
        let dot: f64 = (0..3).map(|i| u[i] * v[i]).sum();
        let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let oracle = (dot / (nu * nv)).acos().to_degrees();

        let f = arm_frame(
            Vec3::new(s[0], s[1], s[2]),
            Vec3::new(e[0], e[1], e[2]),
            Vec3::new(w[0], w[1], w[2]),
        );
        let got = elbow_angle(&f, Side::Right).unwrap();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
        assert!((got - 77.137_117_81).abs() < 1e-8);
    }

    #[test]
    fn coincident_elbow_is_degenerate() {
        let f = arm_frame(
            Vec3::new(0.0, 1.1, 0.0),
            Vec3::new(0.0, 1.1005, 0.0),
            Vec3::new(0.3, 1.1, 0.0),
        );
        assert_eq!(elbow_angle(&f, Side::Right), Err(ModelError::DegenerateGeometry));
    }

    #[test]
    fn frame_requires_all_joints() {
        let mut joints = BTreeMap::new();
        for id in JointId::REQUIRED.iter().skip(1) {
            joints.insert(*id, JointSample::new(Vec3::ZERO, 1.0));
        }
        assert_eq!(
            SkeletonFrame::new(0, joints).unwrap_err(),
            ModelError::MissingJoint(JointId::Head)
        );
    }

    #[test]
    fn anthropometry_ranges() {
        assert!(Anthropometry::new(1.4, 0.55).is_ok());
        assert!(Anthropometry::new(0.4, 0.3).is_err());
        assert!(Anthropometry::new(1.0, 1.1).is_err());
        assert!(Anthropometry::new(1.8, 0.1).is_err());
    }

    #[test]
    fn joint_names_round_trip() {
        for id in JointId::ALL {
            assert_eq!(id.name().parse::<JointId>().unwrap(), id);
        }
        assert!("Nose".parse::<JointId>().is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
