//! Keypoint sequences, body-segment mass fractions and the center-of-mass
//! trajectory.
//!
//! The COM of a closed system follows the free-fall parabola even while the
//! limbs articulate, and for affine cameras the projected COM equals the
//! mass-weighted mean of the projected joints. That lets the COM be computed
//! directly in the image.

use std::fmt::Write as _;

use nalgebra::{Rotation2, Vector2};
use thiserror::Error;

/// Default minimum mean keypoint score for a frame to contribute.
pub const DEFAULT_CONF_THRESHOLD: f64 = 2.0;

/// Number of joints in the COCO body layout.
pub const COCO_JOINT_COUNT: usize = 17;

/// COCO-17 joint indices. Nose first, ankles last.
pub mod joints {
    pub const NOSE: usize = 0;
    pub const LEFT_EYE: usize = 1;
    pub const RIGHT_EYE: usize = 2;
    pub const LEFT_EAR: usize = 3;
    pub const RIGHT_EAR: usize = 4;
    pub const LEFT_SHOULDER: usize = 5;
    pub const RIGHT_SHOULDER: usize = 6;
    pub const LEFT_ELBOW: usize = 7;
    pub const RIGHT_ELBOW: usize = 8;
    pub const LEFT_WRIST: usize = 9;
    pub const RIGHT_WRIST: usize = 10;
    pub const LEFT_HIP: usize = 11;
    pub const RIGHT_HIP: usize = 12;
    pub const LEFT_KNEE: usize = 13;
    pub const RIGHT_KNEE: usize = 14;
    pub const LEFT_ANKLE: usize = 15;
    pub const RIGHT_ANKLE: usize = 16;

    pub const NAMES: [&str; 17] = [
        "nose",
        "left_eye",
        "right_eye",
        "left_ear",
        "right_ear",
        "left_shoulder",
        "right_shoulder",
        "left_elbow",
        "right_elbow",
        "left_wrist",
        "right_wrist",
        "left_hip",
        "right_hip",
        "left_knee",
        "right_knee",
        "left_ankle",
        "right_ankle",
    ];
}

const DEFAULT_MASS_TABLE: &str = include_str!("../data/mass_table_coco17.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComError {
    #[error("frames per second must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("image height must be positive and finite, got {0}")]
    InvalidImageHeight(f64),
    #[error("frame {frame} has {found} joints, expected {expected}")]
    JointCountMismatch {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("frame {frame} has a negative or non-finite score")]
    InvalidScore { frame: usize },
    #[error("mass table covers {table} joints but the sequence has {joints}")]
    MassTableMismatch { table: usize, joints: usize },
    #[error("mass table: {0}")]
    InvalidMassTable(String),
    #[error("no frame passed the confidence rule")]
    EmptyTrajectory,
    #[error("no person detections to choose from")]
    NoDetections,
    #[error("sample times must be finite and strictly increasing (index {0})")]
    NonMonotonicTime(usize),
}

/// Joint positions of one person in one frame, in image pixels (y down).
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointFrame {
    pub joints: Vec<Vector2<f64>>,
    pub scores: Vec<f64>,
}

impl KeypointFrame {
    pub fn new(joints: Vec<Vector2<f64>>, scores: Vec<f64>) -> Self {
        debug_assert_eq!(joints.len(), scores.len());
        Self { joints, scores }
    }

    /// A frame with every joint missing (score zero).
    pub fn missing(joint_count: usize) -> Self {
        Self {
            joints: vec![Vector2::zeros(); joint_count],
            scores: vec![0.0; joint_count],
        }
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn mean_score(&self) -> f64 {
        if self.scores.is_empty() {
            return 0.0;
        }
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }

    /// Whether the frame passes the confidence rule: every joint present
    /// (score above zero, finite position) and mean score at least
    /// `threshold`.
    pub fn is_confident(&self, threshold: f64) -> bool {
        let complete = self
            .scores
            .iter()
            .zip(&self.joints)
            .all(|(&s, p)| s > 0.0 && p.x.is_finite() && p.y.is_finite());
        complete && !self.scores.is_empty() && self.mean_score() >= threshold
    }

    /// Area of the bounding box over joints with a positive score.
    pub fn bbox_area(&self) -> f64 {
        let mut min = Vector2::repeat(f64::INFINITY);
        let mut max = Vector2::repeat(f64::NEG_INFINITY);
        let mut any = false;
        for (p, &s) in self.joints.iter().zip(&self.scores) {
            if s > 0.0 && p.x.is_finite() && p.y.is_finite() {
                min = min.inf(p);
                max = max.sup(p);
                any = true;
            }
        }
        if any {
            (max.x - min.x) * (max.y - min.y)
        } else {
            0.0
        }
    }
}

/// Per-frame keypoints of the tracked subject.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    frames: Vec<KeypointFrame>,
    fps: f64,
    image_height: f64,
    joint_count: usize,
}

impl PoseSequence {
    /// Frames are indexed contiguously from zero. `image_height` is used to
    /// flip image rows into an up-positive vertical axis.
    pub fn new(
        frames: Vec<KeypointFrame>,
        fps: f64,
        image_height: f64,
        joint_count: usize,
    ) -> Result<Self, ComError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(ComError::InvalidFps(fps));
        }
        if !(image_height.is_finite() && image_height > 0.0) {
            return Err(ComError::InvalidImageHeight(image_height));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.joints.len() != joint_count || f.scores.len() != joint_count {
                return Err(ComError::JointCountMismatch {
                    frame: i,
                    expected: joint_count,
                    found: f.joints.len().min(f.scores.len()),
                });
            }
            if f.scores.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(ComError::InvalidScore { frame: i });
            }
        }
        Ok(Self {
            frames,
            fps,
            image_height,
            joint_count,
        })
    }

    pub fn frames(&self) -> &[KeypointFrame] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn image_height(&self) -> f64 {
        self.image_height
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 / self.fps
    }

    /// Same keypoints with every pixel coordinate multiplied by `s`,
    /// including the image height.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            frames: self
                .frames
                .iter()
                .map(|f| KeypointFrame::new(f.joints.iter().map(|p| p * s).collect(), f.scores.clone()))
                .collect(),
            fps: self.fps,
            image_height: self.image_height * s,
            joint_count: self.joint_count,
        }
    }
}

/// Mass fraction per joint, normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MassTable {
    weights: Vec<f64>,
}

impl MassTable {
    /// Normalizes nonnegative weights to unit sum.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, ComError> {
        if weights.is_empty() {
            return Err(ComError::InvalidMassTable("no weights".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ComError::InvalidMassTable(format!(
                "weight for joint {i} must be finite and nonnegative"
            )));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(ComError::InvalidMassTable("weights sum to zero".into()));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// COCO-17 table shipped with the crate (`data/mass_table_coco17.txt`).
    ///
    /// Segment fractions (head 7.3 %, trunk 50.7 %, upper arm 2.6 %, forearm
    /// 1.6 %, hand 0.7 %, thigh 10.3 %, shank 4.3 %, foot 1.5 %) are split
    /// equally between the keypoints bounding each segment; hands and feet go
    /// to the wrist and ankle.
    pub fn default_coco17() -> Self {
        Self::parse(DEFAULT_MASS_TABLE).expect("bundled mass table is valid")
    }

    /// Parses `index weight` lines. Blank lines and `#` comments are ignored;
    /// indices must cover `0..n` exactly once.
    pub fn parse(text: &str) -> Result<Self, ComError> {
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(idx), Some(w), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(ComError::InvalidMassTable(format!(
                    "line {}: expected `index weight`",
                    lineno + 1
                )));
            };
            let idx: usize = idx.parse().map_err(|_| {
                ComError::InvalidMassTable(format!("line {}: bad joint index {idx:?}", lineno + 1))
            })?;
            let w: f64 = w.parse().map_err(|_| {
                ComError::InvalidMassTable(format!("line {}: bad weight {w:?}", lineno + 1))
            })?;
            entries.push((idx, w));
        }
        let n = entries.len();
        let mut weights = vec![f64::NAN; n];
        for (idx, w) in entries {
            if idx >= n || !weights[idx].is_nan() {
                return Err(ComError::InvalidMassTable(format!(
                    "joint index {idx} duplicated or out of range 0..{n}"
                )));
            }
            weights[idx] = w;
        }
        Self::from_weights(weights)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# joint_index mass_fraction\n");
        for (i, w) in self.weights.iter().enumerate() {
            let _ = writeln!(out, "{i} {w}");
        }
        out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Mass-weighted mean of the joint positions.
///
/// Panics if the table and frame disagree on the joint count.
pub fn com_point(frame: &KeypointFrame, masses: &MassTable) -> Vector2<f64> {
    assert_eq!(
        frame.joints.len(),
        masses.len(),
        "mass table must cover every joint"
    );
    frame
        .joints
        .iter()
        .zip(masses.weights())
        .fold(Vector2::zeros(), |acc, (p, &r)| acc + p * r)
}

/// One trajectory sample. `point` is `None` for frames that were excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub point: Option<Vector2<f64>>,
}

/// Time series of 2D points with an up-positive vertical axis. Gaps are
/// represented by samples without a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory2D {
    samples: Vec<Sample>,
}

impl Trajectory2D {
    pub fn new(samples: Vec<Sample>) -> Result<Self, ComError> {
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || (i > 0 && s.t <= samples[i - 1].t) {
                return Err(ComError::NonMonotonicTime(i));
            }
        }
        Ok(Self { samples })
    }

    /// Samples at `t = index / fps`.
    pub fn from_points(fps: f64, points: Vec<Option<Vector2<f64>>>) -> Result<Self, ComError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(ComError::InvalidFps(fps));
        }
        Self::new(
            points
                .into_iter()
                .enumerate()
                .map(|(i, point)| Sample {
                    t: i as f64 / fps,
                    point,
                })
                .collect(),
        )
    }

    /// Vertical-only trajectory with x fixed at zero.
    pub fn from_heights(fps: f64, ys: &[f64]) -> Result<Self, ComError> {
        Self::from_points(fps, ys.iter().map(|&y| Some(Vector2::new(0.0, y))).collect())
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.samples[i].t
    }

    pub fn point(&self, i: usize) -> Option<Vector2<f64>> {
        self.samples.get(i).and_then(|s| s.point)
    }

    pub fn y(&self, i: usize) -> Option<f64> {
        self.point(i).map(|p| p.y)
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.point(i).is_some()
    }

    pub fn valid_count(&self) -> usize {
        self.samples.iter().filter(|s| s.point.is_some()).count()
    }

    /// `(t, y)` pairs of the valid samples in `start..=end`.
    pub fn vertical_samples(&self, start: usize, end: usize) -> Vec<(f64, f64)> {
        self.samples[start..=end]
            .iter()
            .filter_map(|s| s.point.map(|p| (s.t, p.y)))
            .collect()
    }

    /// `(t, x)` pairs of the valid samples in `start..=end`.
    pub fn horizontal_samples(&self, start: usize, end: usize) -> Vec<(f64, f64)> {
        self.samples[start..=end]
            .iter()
            .filter_map(|s| s.point.map(|p| (s.t, p.x)))
            .collect()
    }

    pub fn map_points(&self, f: impl Fn(Vector2<f64>) -> Vector2<f64>) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    t: s.t,
                    point: s.point.map(&f),
                })
                .collect(),
        }
    }

    /// Rotates every point about the origin by `angle` radians
    /// (counter-clockwise in the up-positive frame).
    pub fn rotated(&self, angle: f64) -> Self {
        let rot = Rotation2::new(angle);
        self.map_points(|p| rot * p)
    }
}

/// COM trajectory of a pose sequence, one sample per frame at
/// `t = index / fps`, flipped to an up-positive vertical axis
/// (`y' = image_height - y`).
///
/// A frame is excluded when any joint is missing or its mean score is below
/// `conf_threshold`.
pub fn com_trajectory(
    seq: &PoseSequence,
    masses: &MassTable,
    conf_threshold: f64,
) -> Result<Trajectory2D, ComError> {
    if masses.len() != seq.joint_count() {
        return Err(ComError::MassTableMismatch {
            table: masses.len(),
            joints: seq.joint_count(),
        });
    }
    let h = seq.image_height();
    let points: Vec<Option<Vector2<f64>>> = seq
        .frames()
        .iter()
        .map(|f| {
            f.is_confident(conf_threshold).then(|| {
                let c = com_point(f, masses);
                Vector2::new(c.x, h - c.y)
            })
        })
        .collect();
    if points.iter().all(Option::is_none) {
        return Err(ComError::EmptyTrajectory);
    }
    Trajectory2D::from_points(seq.fps(), points)
}

/// Index of the detection with the largest joint bounding box; ties go to
/// the lowest index.
pub fn select_primary_person(detections: &[KeypointFrame]) -> Result<usize, ComError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, d) in detections.iter().enumerate() {
        let area = d.bbox_area();
        match best {
            Some((_, a)) if area <= a => {}
            _ => best = Some((i, area)),
        }
    }
    best.map(|(i, _)| i).ok_or(ComError::NoDetections)
}
