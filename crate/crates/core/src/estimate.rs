//! End-to-end height estimation and error reporting.

use nalgebra::{Rotation2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::com::{self, com_trajectory, joints, ComError, MassTable, PoseSequence, Trajectory2D};
use crate::events::{detect_flight_segments, DetectionOptions, EventsError, FlightSegment};
use crate::fit::{self, FitError, RansacConfig};
use crate::physics::{
    self, conversion_factor, pixel_to_metric_height, ConversionFactor, HeightMeasurement,
    PhysicsError,
};
use crate::stats::{mean, median, sample_std};

/// Population mean height used as a naive reference in reports, in cm.
pub const POPULATION_MEAN_HEIGHT_CM: f64 = 168.9;

pub const DEFAULT_STANDING_FRAMES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error(transparent)]
    Com(#[from] ComError),
    #[error(transparent)]
    Events(#[from] EventsError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("no usable flight segment detected")]
    NoFlightDetected,
    #[error("segment {id}: {source}")]
    Segment { id: usize, source: SegmentError },
    #[error("no frame in the first {0} has nose and ankles detected")]
    NoValidSamples(usize),
    #[error("no predictions to evaluate")]
    EmptyInput,
    #[error("rotation estimate failed: {0}")]
    Rotation(FitError),
}

impl EstimateError {
    /// Stable machine-readable name.
    pub fn name(&self) -> &'static str {
        match self {
            Self::Com(ComError::EmptyTrajectory) => "EmptyTrajectory",
            Self::Com(_) => "InvalidInput",
            Self::Events(EventsError::NoValidSamples(_)) => "NoValidSamples",
            Self::Events(_) => "EventDetectionError",
            Self::Physics(_) => "NonPositiveAcceleration",
            Self::NoFlightDetected => "NoFlightDetected",
            Self::Segment { .. } => "SegmentError",
            Self::NoValidSamples(_) => "NoValidSamples",
            Self::EmptyInput => "EmptyInput",
            Self::Rotation(_) => "RotationError",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AccelerationMethod {
    /// Least-squares parabola over the whole segment.
    #[default]
    CurveFit,
    /// Peak-to-end displacement.
    DistanceBased,
}

impl AccelerationMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::CurveFit => "curve-fit",
            Self::DistanceBased => "distance-based",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    pub method: AccelerationMethod,
    pub detection: DetectionOptions,
    /// RANSAC on top of the confidence filter; `None` disables it.
    pub ransac: Option<RansacConfig>,
    pub conf_threshold: f64,
    pub correction_c: f64,
    pub gravity: f64,
    pub standing_frames: usize,
    /// Rotate the trajectory so gravity points straight down before
    /// detection.
    pub rotate: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            method: AccelerationMethod::CurveFit,
            detection: DetectionOptions::default(),
            ransac: None,
            conf_threshold: com::DEFAULT_CONF_THRESHOLD,
            correction_c: physics::DEFAULT_NOSE_ANKLE_CORRECTION,
            gravity: physics::DEFAULT_GRAVITY,
            standing_frames: DEFAULT_STANDING_FRAMES,
            rotate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentEstimate {
    pub id: usize,
    pub segment: FlightSegment,
    pub a_px: f64,
    pub q: ConversionFactor,
    pub h_px: f64,
    pub h: f64,
    /// Samples used by the fit and how many were rejected as outliers.
    pub fit_samples: usize,
    pub outliers: usize,
    /// Per-sample inlier flags aligned with `segment.start..=segment.end`
    /// (missing samples are `false`).
    #[serde(skip)]
    pub inlier_flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeightEstimate {
    pub per_segment: Vec<SegmentEstimate>,
    /// Median of the per-segment heights, m.
    pub aggregate_h: f64,
    pub method: AccelerationMethod,
    /// Standing nose-to-ankle span, px.
    pub h_px: f64,
    pub rotation_angle: f64,
    pub floor_y: Option<f64>,
    pub excluded_frames: Vec<usize>,
    pub warnings: Vec<String>,
    /// COM trajectory the segments index into (after rotation).
    pub trajectory: Trajectory2D,
}

impl HeightEstimate {
    pub fn per_segment_heights(&self) -> Vec<f64> {
        self.per_segment.iter().map(|s| s.h).collect()
    }
}

/// Median over the first `n_frames` of the vertical nose-to-ankle span in
/// pixels, the ankle being the mean of both ankles. Frames missing any of
/// the three joints are skipped.
pub fn measure_standing_height_px(seq: &PoseSequence, n_frames: usize) -> Result<f64, EstimateError> {
    measure_standing_height_px_rotated(seq, n_frames, 0.0)
}

/// As [`measure_standing_height_px`], measured along the vertical axis of
/// the image after rotating it by `angle` (see
/// [`fit::rotate_to_max_acceleration`]).
pub fn measure_standing_height_px_rotated(
    seq: &PoseSequence,
    n_frames: usize,
    angle: f64,
) -> Result<f64, EstimateError> {
    let rot = Rotation2::new(angle);
    let spans: Vec<f64> = seq
        .frames()
        .iter()
        .take(n_frames)
        .filter(|f| {
            [joints::NOSE, joints::LEFT_ANKLE, joints::RIGHT_ANKLE]
                .iter()
                .all(|&j| f.scores.get(j).is_some_and(|&s| s > 0.0))
        })
        .map(|f| {
            let nose = f.joints[joints::NOSE];
            let ankle = 0.5 * (f.joints[joints::LEFT_ANKLE] + f.joints[joints::RIGHT_ANKLE]);
            if angle == 0.0 {
                ankle.y - nose.y
            } else {
                // image rows grow downward; flip to up-positive before rotating
                let up = Vector2::new(nose.x - ankle.x, ankle.y - nose.y);
                (rot * up).y
            }
        })
        .collect();
    median(&spans).ok_or(EstimateError::NoValidSamples(n_frames))
}

struct SegmentAccel {
    id: usize,
    segment: FlightSegment,
    a_px: f64,
    fit_samples: usize,
    outliers: usize,
    flags: Vec<bool>,
}

/// Accelerations of every detected segment of a trajectory.
struct SegmentAccelerations {
    ok: Vec<SegmentAccel>,
    failed: Vec<(usize, SegmentError)>,
}

fn segment_accelerations(
    traj: &Trajectory2D,
    segments: &[FlightSegment],
    fps: f64,
    cfg: &EstimateConfig,
) -> SegmentAccelerations {
    let mut out = SegmentAccelerations {
        ok: Vec::new(),
        failed: Vec::new(),
    };
    for (id, seg) in segments.iter().enumerate() {
        let result: Result<_, FitError> = match cfg.method {
            AccelerationMethod::CurveFit => {
                let samples = traj.vertical_samples(seg.start, seg.end);
                let fit = match &cfg.ransac {
                    Some(r) => fit::fit_parabola_ransac(&samples, r),
                    None => fit::fit_parabola_lsq(&samples),
                };
                fit.map(|f| {
                    let mut flags = Vec::with_capacity(seg.len());
                    let mut k = 0;
                    for i in seg.start..=seg.end {
                        if traj.is_valid(i) {
                            flags.push(f.inliers[k]);
                            k += 1;
                        } else {
                            flags.push(false);
                        }
                    }
                    // up-positive axis: falling means negative curvature
                    (-f.acceleration(), samples.len(), samples.len() - f.inlier_count(), flags)
                })
            }
            AccelerationMethod::DistanceBased => fit::acceleration_distance_based(traj, seg, fps)
                .map(|a| (a, 2, 0, (seg.start..=seg.end).map(|i| i == seg.peak || i == seg.end).collect())),
        };
        match result {
            Ok((a_px, fit_samples, outliers, flags)) => out.ok.push(SegmentAccel {
                id,
                segment: *seg,
                a_px,
                fit_samples,
                outliers,
                flags,
            }),
            Err(e) => out.failed.push((id, e.into())),
        }
    }
    out
}

/// COM trajectory → segment detection → per-segment acceleration → `q` →
/// metric height per segment, aggregated by the median.
pub fn estimate_height(
    seq: &PoseSequence,
    masses: &MassTable,
    cfg: &EstimateConfig,
) -> Result<HeightEstimate, EstimateError> {
    let mut traj = com_trajectory(seq, masses, cfg.conf_threshold)?;
    let excluded_frames: Vec<usize> = (0..traj.len()).filter(|&i| !traj.is_valid(i)).collect();
    let mut warnings = Vec::new();
    if !excluded_frames.is_empty() {
        warnings.push(format!(
            "{} of {} frames excluded by the confidence rule",
            excluded_frames.len(),
            traj.len()
        ));
    }

    let mut rotation_angle = 0.0;
    if cfg.rotate {
        rotation_angle = gravity_alignment_angle(&traj, &cfg.detection)?;
        if rotation_angle != 0.0 {
            traj = traj.rotated(rotation_angle);
        }
    }

    let detection = detect_flight_segments(&traj, &cfg.detection)?;
    if detection.segments.is_empty() {
        return Err(EstimateError::NoFlightDetected);
    }
    let h_px = measure_standing_height_px_rotated(seq, cfg.standing_frames, rotation_angle)?;
    let measurement = HeightMeasurement::nose_ankle(h_px, cfg.correction_c)?;

    let accs = segment_accelerations(&traj, &detection.segments, seq.fps(), cfg);
    let mut per_segment = Vec::new();
    let mut failures = accs.failed;
    for s in accs.ok {
        match conversion_factor(s.a_px, cfg.gravity) {
            Ok(q) => {
                if s.outliers > 0 {
                    warnings.push(format!(
                        "segment {}: {} of {} samples rejected as outliers",
                        s.id, s.outliers, s.fit_samples
                    ));
                }
                per_segment.push(SegmentEstimate {
                    id: s.id,
                    segment: s.segment,
                    a_px: s.a_px,
                    q,
                    h_px,
                    h: pixel_to_metric_height(&measurement, &q),
                    fit_samples: s.fit_samples,
                    outliers: s.outliers,
                    inlier_flags: s.flags,
                })
            }
            Err(e) => failures.push((s.id, e.into())),
        }
    }
    failures.sort_by_key(|(id, _)| *id);
    for (id, e) in &failures {
        warnings.push(format!("segment {id} skipped: {e}"));
    }
    if per_segment.is_empty() {
        let (id, source) = failures.into_iter().next().expect("segments were detected");
        return Err(EstimateError::Segment { id, source });
    }

    let aggregate_h = median(&per_segment.iter().map(|s| s.h).collect::<Vec<_>>())
        .expect("at least one segment");
    Ok(HeightEstimate {
        per_segment,
        aggregate_h,
        method: cfg.method,
        h_px,
        rotation_angle,
        floor_y: detection.floor_y,
        excluded_frames,
        warnings,
        trajectory: traj,
    })
}

/// Median over the detected segments of the angle that aligns their fitted
/// acceleration with the downward axis.
fn gravity_alignment_angle(
    traj: &Trajectory2D,
    opts: &DetectionOptions,
) -> Result<f64, EstimateError> {
    let detection = detect_flight_segments(traj, opts)?;
    let mut angles = Vec::new();
    let mut first_err = None;
    for seg in &detection.segments {
        match fit::max_acceleration_angle(traj, seg) {
            Ok(a) => angles.push(a),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match median(&angles) {
        Some(a) => Ok(a),
        None => Err(match first_err {
            Some(e) => EstimateError::Rotation(e),
            None => EstimateError::NoFlightDetected,
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidSizeEstimate {
    pub per_segment: Vec<SegmentEstimate>,
    /// Median of the per-segment sizes, m.
    pub aggregate: f64,
    pub method: AccelerationMethod,
    pub warnings: Vec<String>,
}

/// Size of a rigid falling object from its center trajectory (up-positive)
/// and its pixel extent. No nose-to-ankle correction is applied.
pub fn estimate_rigid_size(
    center_traj: &Trajectory2D,
    size_px: f64,
    fps: f64,
    cfg: &EstimateConfig,
) -> Result<RigidSizeEstimate, EstimateError> {
    let measurement = HeightMeasurement::total(size_px)?;
    let detection = detect_flight_segments(center_traj, &cfg.detection)?;
    if detection.segments.is_empty() {
        return Err(EstimateError::NoFlightDetected);
    }
    let accs = segment_accelerations(center_traj, &detection.segments, fps, cfg);
    let mut per_segment = Vec::new();
    let mut failures = accs.failed;
    for s in accs.ok {
        match conversion_factor(s.a_px, cfg.gravity) {
            Ok(q) => per_segment.push(SegmentEstimate {
                id: s.id,
                segment: s.segment,
                a_px: s.a_px,
                q,
                h_px: size_px,
                h: pixel_to_metric_height(&measurement, &q),
                fit_samples: s.fit_samples,
                outliers: s.outliers,
                inlier_flags: s.flags,
            }),
            Err(e) => failures.push((s.id, e.into())),
        }
    }
    failures.sort_by_key(|(id, _)| *id);
    let warnings = failures
        .iter()
        .map(|(id, e)| format!("segment {id} skipped: {e}"))
        .collect();
    if per_segment.is_empty() {
        let (id, source) = failures.into_iter().next().expect("segments were detected");
        return Err(EstimateError::Segment { id, source });
    }
    let aggregate = median(&per_segment.iter().map(|s| s.h).collect::<Vec<_>>())
        .expect("at least one segment");
    Ok(RigidSizeEstimate {
        per_segment,
        aggregate,
        method: cfg.method,
        warnings,
    })
}

/// Accuracy and bias over a set of predictions, in centimeters and percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub count: usize,
    /// Mean absolute error, cm.
    pub mae: f64,
    /// Mean signed error, cm.
    pub me: f64,
    /// Sample SD of the absolute errors, cm.
    pub sd_abs: f64,
    /// Sample SD of the signed errors, cm.
    pub sd_signed: f64,
    pub rel_mae: f64,
    pub rel_me: f64,
    pub rel_sd_abs: f64,
    pub rel_sd_signed: f64,
}

/// Error statistics for `(predicted, true)` pairs given in meters. SDs use
/// the `n - 1` denominator; relative errors are normalized by the truth.
pub fn compute_error_report(predictions: &[(f64, f64)]) -> Result<ErrorReport, EstimateError> {
    if predictions.is_empty() {
        return Err(EstimateError::EmptyInput);
    }
    let signed: Vec<f64> = predictions.iter().map(|(p, t)| (p - t) * 100.0).collect();
    let abs: Vec<f64> = signed.iter().map(|e| e.abs()).collect();
    let rel: Vec<f64> = predictions.iter().map(|(p, t)| (p - t) / t * 100.0).collect();
    let rel_abs: Vec<f64> = rel.iter().map(|e| e.abs()).collect();
    let stat = |v: &[f64]| (mean(v).unwrap_or(0.0), sample_std(v).unwrap_or(0.0));
    let (me, sd_signed) = stat(&signed);
    let (mae, sd_abs) = stat(&abs);
    let (rel_me, rel_sd_signed) = stat(&rel);
    let (rel_mae, rel_sd_abs) = stat(&rel_abs);
    Ok(ErrorReport {
        count: predictions.len(),
        mae,
        me,
        sd_abs,
        sd_signed,
        rel_mae,
        rel_me,
        rel_sd_abs,
        rel_sd_signed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::com::KeypointFrame;
    use approx::assert_relative_eq;

    fn standing_frame(nose_y: f64, ankle_y: f64) -> KeypointFrame {
        let mut joints = vec![Vector2::new(100.0, 0.5 * (nose_y + ankle_y)); 17];
        joints[joints::NOSE] = Vector2::new(100.0, nose_y);
        joints[joints::LEFT_ANKLE] = Vector2::new(90.0, ankle_y);
        joints[joints::RIGHT_ANKLE] = Vector2::new(110.0, ankle_y);
        KeypointFrame::new(joints, vec![5.0; 17])
    }

    #[test]
    fn standing_height_constant_pose() {
        // image rows: nose at 50 from the top, ankles at 400 -> 350 px
        let frames = vec![standing_frame(50.0, 400.0); 20];
        let seq = PoseSequence::new(frames, 30.0, 450.0, 17).unwrap();
        assert_eq!(measure_standing_height_px(&seq, 100).unwrap(), 350.0);
    }

    #[test]
    fn standing_height_jitter_is_bounded() {
        let frames = (0..101)
            .map(|i| {
                let j = [-1.0, 0.0, 1.0][i % 3];
                standing_frame(50.0 + j, 400.0 - 0.5 * j)
            })
            .collect();
        let seq = PoseSequence::new(frames, 30.0, 450.0, 17).unwrap();
        let h = measure_standing_height_px(&seq, 100).unwrap();
        assert!((h - 350.0).abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn standing_height_needs_joints() {
        let mut f = standing_frame(50.0, 400.0);
        f.scores[joints::NOSE] = 0.0;
        let seq = PoseSequence::new(vec![f], 30.0, 450.0, 17).unwrap();
        assert_eq!(
            measure_standing_height_px(&seq, 100),
            Err(EstimateError::NoValidSamples(100))
        );
    }

    #[test]
    fn standing_only_clip_has_no_flight() {
        let frames = vec![standing_frame(50.0, 400.0); 150];
        let seq = PoseSequence::new(frames, 30.0, 450.0, 17).unwrap();
        let err = estimate_height(&seq, &MassTable::default_coco17(), &EstimateConfig::default());
        assert_eq!(err.unwrap_err(), EstimateError::NoFlightDetected);
    }

    #[test]
    fn report_zero_when_exact() {
        let r = compute_error_report(&[(1.7, 1.7), (1.8, 1.8)]).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.me, 0.0);
    }

    #[test]
    fn report_cancellation() {
        let r = compute_error_report(&[(1.72, 1.70), (1.78, 1.80)]).unwrap();
        assert_relative_eq!(r.me, 0.0, epsilon = 1e-9);
        assert_relative_eq!(r.mae, 2.0, epsilon = 1e-9);
        assert_eq!(compute_error_report(&[]), Err(EstimateError::EmptyInput));
    }

    #[test]
    fn error_names_are_stable() {
        assert_eq!(EstimateError::NoFlightDetected.name(), "NoFlightDetected");
        assert_eq!(
            EstimateError::Com(ComError::EmptyTrajectory).name(),
            "EmptyTrajectory"
        );
    }
}
