//! Synthetic scenes with known ground truth.
//!
//! World frame: X to the right, Y up (ground plane at Y = 0), Z pointing away
//! from the camera. Cameras look along +Z from their center; image
//! coordinates produced by [`project`] are relative to the principal point
//! with v pointing up, and [`ImageFrame`] converts them to pixel rows and
//! columns.

use std::f64::consts::PI;

use nalgebra::{Matrix2x3, Rotation3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::com::{KeypointFrame, MassTable, PoseSequence, Trajectory2D, COCO_JOINT_COUNT};
use crate::estimate::{estimate_height, EstimateConfig, EstimateError};
use crate::events::SegmentMode;
use crate::physics::{FreeFallParams, DEFAULT_GRAVITY, DEFAULT_NOSE_ANKLE_CORRECTION};

/// Score assigned to every synthetic keypoint.
pub const SYNTHETIC_SCORE: f64 = 10.0;

pub const DEFAULT_RESTITUTION: f64 = 0.707;

/// Focal length and frame rate of the fixed error-table setup.
pub const TABLE_FOCAL_PX: f64 = 1000.0;
pub const TABLE_FPS: f64 = 30.0;
pub const TABLE_DISTANCES_M: [f64; 4] = [4.0, 7.0, 15.0, 30.0];
pub const TABLE_ANGLES_DEG: [f64; 4] = [0.0, 10.0, 45.0, 90.0];

/// Height of the optical center above the ground in the default scenes, m.
pub const DEFAULT_CAMERA_HEIGHT: f64 = 0.0;

/// Sub-frame takeoff phases averaged per error-table cell.
pub const TABLE_PHASES: usize = 8;

// Timeline of a jumper scene, seconds and meters.
const REPOSITION_S: f64 = 0.5;
const CROUCH_S: f64 = 0.25;
const REST_S: f64 = 0.75;

/// Countermovement depth of the on-spot scenes, m.
pub const DEFAULT_CROUCH_DEPTH: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("point at depth {0} m is not in front of the camera")]
    BehindCamera(f64),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid corruption settings: {0}")]
    InvalidCorruption(String),
}

/// Camera intrinsics and the 3D-to-2D mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Projection {
    /// `(f·X/Z, f·Y/Z)`.
    Perspective { f: f64 },
    /// `(f/d)·(X, Y)`.
    ScaledOrthographic { f: f64, d: f64 },
    /// Arbitrary linear map applied to camera-frame `(X, Y, Z)`.
    Affine { matrix: [[f64; 3]; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CameraKind {
    Perspective,
    ScaledOrthographic,
    Affine,
}

impl CameraKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Perspective => "perspective",
            Self::ScaledOrthographic => "scaled-orthographic",
            Self::Affine => "affine",
        }
    }
}

/// Camera placed at `center`, looking along +Z, then rotated by yaw (about
/// Y), pitch (about X) and roll (about the optical axis), in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub projection: Projection,
    pub center: [f64; 3],
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl CameraModel {
    pub fn new(projection: Projection) -> Self {
        Self {
            projection,
            center: [0.0; 3],
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
        }
    }

    pub fn perspective(f: f64) -> Self {
        Self::new(Projection::Perspective { f })
    }

    pub fn scaled_orthographic(f: f64, d: f64) -> Self {
        Self::new(Projection::ScaledOrthographic { f, d })
    }

    pub fn affine(matrix: Matrix2x3<f64>) -> Self {
        let m = [
            [matrix[(0, 0)], matrix[(0, 1)], matrix[(0, 2)]],
            [matrix[(1, 0)], matrix[(1, 1)], matrix[(1, 2)]],
        ];
        Self::new(Projection::Affine { matrix: m })
    }

    /// Camera of the given kind framing a subject at distance `d`.
    ///
    /// The affine variant is a weak-perspective camera with small shear
    /// terms, so that it is not merely a scaled orthographic one.
    pub fn of_kind(kind: CameraKind, f: f64, d: f64) -> Self {
        match kind {
            CameraKind::Perspective => Self::perspective(f),
            CameraKind::ScaledOrthographic => Self::scaled_orthographic(f, d),
            CameraKind::Affine => {
                let s = f / d;
                Self::affine(Matrix2x3::new(s, 0.05 * s, 0.1 * s, 0.02 * s, s, 0.02 * s))
            }
        }
    }

    pub fn kind(&self) -> CameraKind {
        match self.projection {
            Projection::Perspective { .. } => CameraKind::Perspective,
            Projection::ScaledOrthographic { .. } => CameraKind::ScaledOrthographic,
            Projection::Affine { .. } => CameraKind::Affine,
        }
    }

    pub fn with_center(mut self, center: Vector3<f64>) -> Self {
        self.center = [center.x, center.y, center.z];
        self
    }

    pub fn with_roll(mut self, roll: f64) -> Self {
        self.roll = roll;
        self
    }

    pub fn with_orientation(mut self, roll: f64, pitch: f64, yaw: f64) -> Self {
        self.roll = roll;
        self.pitch = pitch;
        self.yaw = yaw;
        self
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), self.roll)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), self.pitch)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), self.yaw)
    }

    pub fn to_camera_frame(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * (p - Vector3::from(self.center))
    }

    /// Image-plane pixels per meter for a vertical world segment at depth
    /// `d`, along the image vertical. This is `1 / q` for upright cameras.
    pub fn vertical_scale(&self, d: f64) -> f64 {
        let down = self.rotation() * Vector3::new(0.0, -1.0, 0.0);
        -self.linear_part(d).row(1).dot(&down.transpose())
    }

    /// Pixels per meter along the image direction of gravity.
    pub fn gravity_scale(&self, d: f64) -> f64 {
        let down = self.rotation() * Vector3::new(0.0, -1.0, 0.0);
        (self.linear_part(d) * down).norm()
    }

    /// The projection linearized at depth `d` (exact for the affine kinds).
    fn linear_part(&self, d: f64) -> Matrix2x3<f64> {
        match self.projection {
            Projection::Perspective { f } => Matrix2x3::new(f / d, 0.0, 0.0, 0.0, f / d, 0.0),
            Projection::ScaledOrthographic { f, d } => Matrix2x3::new(f / d, 0.0, 0.0, 0.0, f / d, 0.0),
            Projection::Affine { matrix } => Matrix2x3::new(
                matrix[0][0],
                matrix[0][1],
                matrix[0][2],
                matrix[1][0],
                matrix[1][1],
                matrix[1][2],
            ),
        }
    }
}

/// Projects one world point to image-plane coordinates (principal point at
/// the origin, v up).
pub fn project_point(camera: &CameraModel, p: &Vector3<f64>) -> Result<Vector2<f64>, SimError> {
    let c = camera.to_camera_frame(p);
    match camera.projection {
        Projection::Perspective { f } => {
            if c.z <= 0.0 {
                return Err(SimError::BehindCamera(c.z));
            }
            Ok(Vector2::new(f * c.x / c.z, f * c.y / c.z))
        }
        Projection::ScaledOrthographic { f, d } => Ok(Vector2::new(c.x, c.y) * (f / d)),
        Projection::Affine { .. } => Ok(camera.linear_part(1.0) * c),
    }
}

pub fn project(camera: &CameraModel, points: &[Vector3<f64>]) -> Result<Vec<Vector2<f64>>, SimError> {
    points.iter().map(|p| project_point(camera, p)).collect()
}

/// Pixel raster the image-plane coordinates are mapped into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageFrame {
    pub width: f64,
    pub height: f64,
}

impl Default for ImageFrame {
    fn default() -> Self {
        Self {
            width: 1920.0,
            height: 1080.0,
        }
    }
}

impl ImageFrame {
    /// Column/row pixel coordinates (rows grow downward).
    pub fn to_pixels(&self, uv: Vector2<f64>) -> Vector2<f64> {
        Vector2::new(0.5 * self.width + uv.x, 0.5 * self.height - uv.y)
    }
}

/// COCO-17 joint offsets from the point on the ground between the feet, for
/// a person of the given height facing the camera. All joints lie in one
/// fronto-parallel plane; the nose-to-ankle span is `height / 1.17`.
pub fn skeleton_offsets(height: f64) -> [Vector3<f64>; COCO_JOINT_COUNT] {
    let ankle = 0.039;
    let nose = ankle + 1.0 / DEFAULT_NOSE_ANKLE_CORRECTION;
    // (lateral, vertical) as fractions of body height
    let layout: [(f64, f64); COCO_JOINT_COUNT] = [
        (0.0, nose),
        (0.032, 0.910),
        (-0.032, 0.910),
        (0.068, 0.905),
        (-0.068, 0.905),
        (0.129, 0.818),
        (-0.129, 0.818),
        (0.160, 0.630),
        (-0.160, 0.630),
        (0.170, 0.485),
        (-0.170, 0.485),
        (0.090, 0.530),
        (-0.090, 0.530),
        (0.085, 0.285),
        (-0.085, 0.285),
        (0.075, ankle),
        (-0.075, ankle),
    ];
    layout.map(|(x, y)| Vector3::new(x * height, y * height, 0.0))
}

/// Setup of a synthetic jumping person.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumperScene {
    pub person_height: f64,
    /// Rise of the body during flight, m.
    pub jump_height: f64,
    /// Horizontal travel per jump, m.
    pub jump_length: f64,
    /// Jump direction: 0° is parallel to the image plane, 90° straight at the
    /// camera.
    pub approach_angle_deg: f64,
    /// Depth of the standing position, m.
    pub distance: f64,
    pub fps: f64,
    pub duration: f64,
    pub jumps: usize,
    /// Standing time before the first jump, s.
    pub stance_s: f64,
    pub camera_height: f64,
    /// Root drop of the countermovement before takeoff and after landing,
    /// m. Zero gives an instantaneous takeoff from the stance.
    pub crouch_depth: f64,
}

impl JumperScene {
    /// Single 1 m long, 15 cm high jump of a 1.8 m person, framed at
    /// `distance` and recorded at 30 fps.
    pub fn reference_jump(distance: f64, approach_angle_deg: f64) -> Self {
        let mut s = Self {
            person_height: 1.8,
            jump_height: 0.15,
            jump_length: 1.0,
            approach_angle_deg,
            distance,
            fps: TABLE_FPS,
            duration: 0.0,
            jumps: 1,
            stance_s: 2.0,
            camera_height: DEFAULT_CAMERA_HEIGHT,
            crouch_depth: 0.0,
        };
        s.duration = s.required_duration();
        s
    }

    /// On-spot jumps (no horizontal travel).
    pub fn on_spot(person_height: f64, jump_height: f64, jumps: usize, distance: f64, fps: f64) -> Self {
        let mut s = Self {
            person_height,
            jump_height,
            jump_length: 0.0,
            approach_angle_deg: 0.0,
            distance,
            fps,
            duration: 0.0,
            jumps,
            stance_s: 2.0,
            camera_height: DEFAULT_CAMERA_HEIGHT,
            crouch_depth: DEFAULT_CROUCH_DEPTH,
        };
        s.duration = s.required_duration();
        s
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("person_height", self.person_height),
            ("fps", self.fps),
            ("duration", self.duration),
            ("distance", self.distance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidScene(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("jump_height", self.jump_height),
            ("jump_length", self.jump_length),
            ("stance_s", self.stance_s),
            ("crouch_depth", self.crouch_depth),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::InvalidScene(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !self.approach_angle_deg.is_finite() || !self.camera_height.is_finite() {
            return Err(SimError::InvalidScene("angles and camera height must be finite".into()));
        }
        Ok(())
    }

    pub fn takeoff_speed(&self) -> f64 {
        (2.0 * DEFAULT_GRAVITY * self.jump_height).sqrt()
    }

    pub fn flight_duration(&self) -> f64 {
        2.0 * self.takeoff_speed() / DEFAULT_GRAVITY
    }

    fn push_duration(&self) -> f64 {
        let v = self.takeoff_speed();
        if v > 0.0 {
            2.0 * self.crouch_depth / v
        } else {
            0.0
        }
    }

    fn crouch_duration(&self) -> f64 {
        if self.crouch_depth > 0.0 {
            CROUCH_S
        } else {
            0.0
        }
    }

    fn jump_cycle(&self) -> f64 {
        2.0 * (self.crouch_duration() + self.push_duration()) + self.flight_duration() + REST_S
    }

    /// Time needed for all jumps plus a final rest.
    pub fn required_duration(&self) -> f64 {
        self.stance_s + REPOSITION_S + self.jumps as f64 * self.jump_cycle() + REST_S
    }

    fn direction(&self) -> Vector3<f64> {
        let a = self.approach_angle_deg.to_radians();
        Vector3::new(a.cos(), 0.0, -a.sin())
    }
}

/// Ground-point trajectory of a jumper and its 3D joints over time.
#[derive(Debug, Clone, PartialEq)]
pub struct JumperMotion {
    pub scene: JumperScene,
    pub times: Vec<f64>,
    /// Point on the ground between the feet (raised with the body in flight).
    pub root: Vec<Vector3<f64>>,
    pub joints: Vec<[Vector3<f64>; COCO_JOINT_COUNT]>,
    pub com: Vec<Vector3<f64>>,
    pub contact: Vec<bool>,
    pub flight_intervals: Vec<(f64, f64)>,
    pub apex_times: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Stand(Vector3<f64>),
    Reposition(Vector3<f64>, Vector3<f64>),
    CrouchDown(Vector3<f64>),
    Push(Vector3<f64>),
    Flight(Vector3<f64>),
    Land(Vector3<f64>),
    Recover(Vector3<f64>),
}

/// Builds the stance / reposition / jump timeline of `scene` and samples it
/// at `k / fps`.
///
/// The subject first stands at depth `distance`, then steps to the takeoff
/// mark so that the jumps are centered on the standing position. Each jump
/// is a cosine crouch, a constant-acceleration push-off, a ballistic flight,
/// a symmetric landing and a recovery back to standing; with zero crouch
/// depth the flight leaves and rejoins the stance directly. Only flight
/// frames are free of ground contact.
pub fn generate_jumper(scene: &JumperScene) -> Result<JumperMotion, SimError> {
    scene.validate()?;
    let dir = scene.direction();
    let stand = Vector3::new(0.0, 0.0, scene.distance);
    // a jump that never leaves the ground does not travel
    let step = if scene.jump_height > 0.0 { scene.jump_length } else { 0.0 };
    let travel = step * scene.jumps as f64;
    let start = stand - dir * (0.5 * travel);
    let v_to = scene.takeoff_speed();
    let push = scene.push_duration();
    let flight = scene.flight_duration();

    let mut phases: Vec<(f64, f64, Phase)> = Vec::new();
    fn add(phases: &mut Vec<(f64, f64, Phase)>, dur: f64, p: Phase) {
        if dur > 0.0 {
            let t = phases.last().map_or(0.0, |&(s, d, _)| s + d);
            phases.push((t, dur, p));
        }
    }
    add(&mut phases, scene.stance_s, Phase::Stand(stand));
    add(&mut phases, REPOSITION_S, Phase::Reposition(stand, start));
    let mut flight_intervals = Vec::new();
    let mut apex_times = Vec::new();
    for k in 0..scene.jumps {
        let takeoff = start + dir * (step * k as f64);
        let landing = takeoff + dir * step;
        add(&mut phases, scene.crouch_duration(), Phase::CrouchDown(takeoff));
        add(&mut phases, push, Phase::Push(takeoff));
        if flight > 0.0 {
            let t = phases.last().map_or(0.0, |&(s, d, _)| s + d);
            flight_intervals.push((t, t + flight));
            apex_times.push(t + 0.5 * flight);
        }
        add(&mut phases, flight, Phase::Flight(takeoff));
        add(&mut phases, push, Phase::Land(landing));
        add(&mut phases, scene.crouch_duration(), Phase::Recover(landing));
        add(&mut phases, REST_S, Phase::Stand(landing));
    }
    let end_pos = start + dir * travel;

    let offsets = skeleton_offsets(scene.person_height);
    let masses = MassTable::default_coco17();
    let com_offset: Vector3<f64> = offsets
        .iter()
        .zip(masses.weights())
        .fold(Vector3::zeros(), |acc, (o, &w)| acc + o * w);

    let n = (scene.duration * scene.fps).round() as usize;
    let mut motion = JumperMotion {
        scene: *scene,
        times: Vec::with_capacity(n),
        root: Vec::with_capacity(n),
        joints: Vec::with_capacity(n),
        com: Vec::with_capacity(n),
        contact: Vec::with_capacity(n),
        flight_intervals,
        apex_times,
    };
    for k in 0..n {
        let t = k as f64 / scene.fps;
        let phase = phases.iter().find(|(s, d, _)| t >= *s && t < s + d);
        let (root, contact) = match phase {
            None => (end_pos, true),
            Some(&(s, d, p)) => {
                let tau = t - s;
                let ease = 0.5 * (1.0 - (PI * tau / d).cos());
                match p {
                    Phase::Stand(at) => (at, true),
                    Phase::Reposition(a, b) => (a + (b - a) * ease, true),
                    Phase::CrouchDown(at) => (at - Vector3::y() * (scene.crouch_depth * ease), true),
                    Phase::Push(at) => {
                        let acc = v_to * v_to / (2.0 * scene.crouch_depth);
                        (at + Vector3::y() * (-scene.crouch_depth + 0.5 * acc * tau * tau), true)
                    }
                    Phase::Flight(at) => {
                        let params = FreeFallParams::new(at, Vector3::y() * v_to + dir * (scene.jump_length / flight));
                        (params.position(tau), tau <= 0.0)
                    }
                    Phase::Land(at) => {
                        let acc = v_to * v_to / (2.0 * scene.crouch_depth);
                        (at + Vector3::y() * (-v_to * tau + 0.5 * acc * tau * tau), true)
                    }
                    Phase::Recover(at) => (at - Vector3::y() * (scene.crouch_depth * (1.0 - ease)), true),
                }
            }
        };
        motion.times.push(t);
        motion.root.push(root);
        motion.joints.push(offsets.map(|o| root + o));
        motion.com.push(root + com_offset);
        motion.contact.push(contact);
    }
    Ok(motion)
}

/// Oracle annotations of a rendered synthetic sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// Meters per pixel along the image vertical at the standing depth.
    pub q_true: f64,
    /// Meters per pixel along the image direction of gravity.
    pub q_gravity: f64,
    pub h_true: f64,
    pub fps: f64,
    pub contact: Vec<bool>,
    pub apex_times: Vec<f64>,
    pub flight_intervals: Vec<(f64, f64)>,
}

/// A rendered scene: keypoints as a detector would report them, plus truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub pose: PoseSequence,
    pub truth: Truth,
    pub camera: CameraModel,
    pub image: ImageFrame,
    /// Image-plane COM per frame (projection of the 3D COM, v up).
    pub projected_com: Vec<Vector2<f64>>,
}

impl JumperMotion {
    pub fn render(&self, camera: &CameraModel, image: &ImageFrame) -> Result<SyntheticSequence, SimError> {
        let mut frames = Vec::with_capacity(self.times.len());
        let mut projected_com = Vec::with_capacity(self.times.len());
        for (js, com) in self.joints.iter().zip(&self.com) {
            let pts = project(camera, js)?;
            frames.push(KeypointFrame::new(
                pts.into_iter().map(|uv| image.to_pixels(uv)).collect(),
                vec![SYNTHETIC_SCORE; COCO_JOINT_COUNT],
            ));
            projected_com.push(project_point(camera, com)?);
        }
        let pose = PoseSequence::new(frames, self.scene.fps, image.height, COCO_JOINT_COUNT)
            .map_err(|e| SimError::InvalidScene(e.to_string()))?;
        let d = self.scene.distance;
        Ok(SyntheticSequence {
            pose,
            truth: Truth {
                q_true: 1.0 / camera.vertical_scale(d),
                q_gravity: 1.0 / camera.gravity_scale(d),
                h_true: self.scene.person_height,
                fps: self.scene.fps,
                contact: self.contact.clone(),
                apex_times: self.apex_times.clone(),
                flight_intervals: self.flight_intervals.clone(),
            },
            camera: *camera,
            image: *image,
            projected_com,
        })
    }
}

/// Camera at `scene.camera_height` above the ground, looking horizontally.
pub fn scene_camera(scene: &JumperScene, kind: CameraKind, f: f64) -> CameraModel {
    CameraModel::of_kind(kind, f, scene.distance).with_center(Vector3::new(0.0, scene.camera_height, 0.0))
}

/// One sample of a bouncing projectile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectileSample {
    pub t: f64,
    pub position: Vector3<f64>,
    pub contact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectileTrack {
    pub samples: Vec<ProjectileSample>,
    /// Times at which the body reached the ground.
    pub contact_times: Vec<f64>,
    /// Apex times of each airborne arc, the release included when it starts
    /// at rest.
    pub apex_times: Vec<f64>,
}

/// Samples free fall at `k / fps` with bounces on the plane `Y = ground_y`.
///
/// Each impact reflects the vertical velocity scaled by `restitution`; with
/// zero restitution (or once bounces become negligible) the body rests on
/// the ground. Gravity is taken from `params` and must point down for
/// bounces to occur.
pub fn generate_projectile(
    params: &FreeFallParams,
    fps: f64,
    duration: f64,
    ground_y: f64,
    restitution: f64,
) -> Result<ProjectileTrack, SimError> {
    if !(fps > 0.0 && duration > 0.0 && fps.is_finite() && duration.is_finite()) {
        return Err(SimError::InvalidScene("fps and duration must be positive".into()));
    }
    if !(0.0..=1.0).contains(&restitution) {
        return Err(SimError::InvalidScene(format!("restitution {restitution} outside [0, 1]")));
    }
    let gy = params.gravity.y;
    let mut arc_start = 0.0;
    let mut p = params.p0;
    let mut v = params.v0;
    let mut resting = false;
    let mut contact_times = Vec::new();
    let mut apex_times = Vec::new();
    if gy < 0.0 && v.y >= 0.0 {
        apex_times.push(v.y / -gy);
    }

    let n = (duration * fps).round() as usize;
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / fps;
        while !resting {
            let Some(dt) = time_to_ground(p.y - ground_y, v.y, gy) else { break };
            let tc = arc_start + dt;
            if tc > t {
                break;
            }
            let arc = FreeFallParams {
                p0: p,
                v0: v,
                gravity: params.gravity,
            };
            p = arc.position(dt);
            p.y = ground_y;
            v = arc.velocity(dt);
            v.y *= -restitution;
            arc_start = tc;
            contact_times.push(tc);
            if v.y < 1e-6 || contact_times.len() > 10_000 {
                resting = true;
                v = Vector3::zeros();
            } else {
                apex_times.push(tc + v.y / -gy);
            }
        }
        let (position, contact) = if resting {
            (p, true)
        } else {
            let arc = FreeFallParams {
                p0: p,
                v0: v,
                gravity: params.gravity,
            };
            (arc.position(t - arc_start), contact_times.last() == Some(&t))
        };
        samples.push(ProjectileSample { t, position, contact });
    }
    Ok(ProjectileTrack {
        samples,
        contact_times,
        apex_times,
    })
}

/// First positive time at which `h + v·τ + ½·g·τ² = 0`.
fn time_to_ground(h: f64, v: f64, g: f64) -> Option<f64> {
    if g >= 0.0 {
        return None;
    }
    let a = 0.5 * g;
    let disc = v * v - 4.0 * a * h;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let roots = [(-v - sq) / (2.0 * a), (-v + sq) / (2.0 * a)];
    roots
        .into_iter()
        .filter(|&r| r > 1e-12)
        .min_by(f64::total_cmp)
}

/// Dropped ball recorded from the front.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallScene {
    pub diameter: f64,
    /// Height of the ball's center at release, m.
    pub drop_height: f64,
    pub distance: f64,
    pub fps: f64,
    pub duration: f64,
    pub restitution: f64,
    pub camera_height: f64,
}

impl Default for BallScene {
    fn default() -> Self {
        Self {
            diameter: 0.073,
            drop_height: 1.0,
            distance: 2.0,
            fps: 120.0,
            duration: 1.6,
            restitution: DEFAULT_RESTITUTION,
            camera_height: DEFAULT_CAMERA_HEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallSequence {
    /// Ball center per frame in image pixels (rows down).
    pub centers_px: Vec<Vector2<f64>>,
    /// Apparent diameter per frame, px.
    pub diameters_px: Vec<f64>,
    pub fps: f64,
    pub image: ImageFrame,
    pub diameter_true: f64,
    pub q_true: f64,
    pub track: ProjectileTrack,
}

impl BallSequence {
    /// Up-positive center trajectory.
    pub fn center_trajectory(&self) -> Trajectory2D {
        let h = self.image.height;
        Trajectory2D::from_points(
            self.fps,
            self.centers_px.iter().map(|c| Some(Vector2::new(c.x, h - c.y))).collect(),
        )
        .expect("fps is positive")
    }
}

/// Drops a ball from rest and renders its center and apparent diameter.
pub fn generate_ball(scene: &BallScene, camera: &CameraModel, image: &ImageFrame) -> Result<BallSequence, SimError> {
    let r = 0.5 * scene.diameter;
    let params = FreeFallParams::new(Vector3::new(0.0, scene.drop_height, scene.distance), Vector3::zeros());
    let track = generate_projectile(&params, scene.fps, scene.duration, r, scene.restitution)?;
    let mut centers_px = Vec::with_capacity(track.samples.len());
    let mut diameters_px = Vec::with_capacity(track.samples.len());
    for s in &track.samples {
        let c = project_point(camera, &s.position)?;
        let depth = camera.to_camera_frame(&s.position).z;
        let scale = match camera.projection {
            Projection::Perspective { f } => f / depth,
            _ => camera.vertical_scale(scene.distance),
        };
        centers_px.push(image.to_pixels(c));
        diameters_px.push(scene.diameter * scale);
    }
    Ok(BallSequence {
        centers_px,
        diameters_px,
        fps: scene.fps,
        image: *image,
        diameter_true: scene.diameter,
        q_true: 1.0 / camera.vertical_scale(scene.distance),
        track,
    })
}

/// Noise and outlier injection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    /// Isotropic Gaussian noise per joint coordinate, px.
    pub noise_sigma: f64,
    /// Fraction of joints replaced by outliers.
    pub outlier_rate: f64,
    /// Outliers are displaced by a length drawn uniformly from
    /// `[magnitude, 2·magnitude)` in a random direction, px.
    pub outlier_magnitude: f64,
    /// Score given to outlier joints; `None` keeps the original score.
    pub outlier_score: Option<f64>,
}

impl Corruption {
    pub fn noise(sigma: f64) -> Self {
        Self {
            noise_sigma: sigma,
            outlier_rate: 0.0,
            outlier_magnitude: 0.0,
            outlier_score: None,
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(SimError::InvalidCorruption("noise_sigma must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_rate) {
            return Err(SimError::InvalidCorruption("outlier_rate must lie in [0, 1]".into()));
        }
        if !(self.outlier_magnitude.is_finite() && self.outlier_magnitude >= 0.0) {
            return Err(SimError::InvalidCorruption("outlier_magnitude must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Adds noise and outliers to every joint of `seq`, deterministically per
/// `seed`. Truth annotations are kept.
pub fn corrupt(seq: &SyntheticSequence, c: &Corruption, seed: u64) -> Result<SyntheticSequence, SimError> {
    c.validate()?;
    if c.noise_sigma == 0.0 && c.outlier_rate == 0.0 {
        return Ok(seq.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, c.noise_sigma.max(f64::MIN_POSITIVE)).expect("sigma is valid");
    let frames = seq
        .pose
        .frames()
        .iter()
        .map(|f| {
            let mut f = f.clone();
            for (p, s) in f.joints.iter_mut().zip(f.scores.iter_mut()) {
                if c.noise_sigma > 0.0 {
                    p.x += normal.sample(&mut rng);
                    p.y += normal.sample(&mut rng);
                }
                if c.outlier_rate > 0.0 && rng.random::<f64>() < c.outlier_rate {
                    let angle = rng.random::<f64>() * 2.0 * PI;
                    let len = c.outlier_magnitude * (1.0 + rng.random::<f64>());
                    *p += Vector2::new(angle.cos(), angle.sin()) * len;
                    if let Some(score) = c.outlier_score {
                        *s = score;
                    }
                }
            }
            f
        })
        .collect();
    let pose = PoseSequence::new(frames, seq.pose.fps(), seq.pose.image_height(), seq.pose.joint_count())
        .map_err(|e| SimError::InvalidCorruption(e.to_string()))?;
    Ok(SyntheticSequence { pose, ..seq.clone() })
}

/// Displaces `round(rate·n)` distinct samples by `±magnitude` (random sign)
/// and returns which ones were hit.
pub fn inject_outliers(samples: &mut [(f64, f64)], rate: f64, magnitude: f64, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let k = ((rate * n as f64).round() as usize).min(n);
    let mut hit = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, k) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        samples[i].1 += sign * magnitude;
        hit[i] = true;
    }
    hit
}

/// Adds Gaussian noise of standard deviation `sigma` to each value.
pub fn add_noise(samples: &mut [(f64, f64)], sigma: f64, seed: u64) {
    if sigma <= 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is positive");
    for s in samples {
        s.1 += normal.sample(&mut rng);
    }
}

/// Absolute height errors of the full pipeline on noiseless jumper scenes,
/// by approach angle (rows) and distance (columns), in cm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorTable {
    pub camera: CameraKind,
    pub angles_deg: Vec<f64>,
    pub distances_m: Vec<f64>,
    pub abs_error_cm: Vec<Vec<f64>>,
}

impl ErrorTable {
    /// Cells covered by the negligible-error claim (α ≤ 10° or d ≥ 15 m).
    pub fn is_negligible_cell(angle_deg: f64, distance_m: f64) -> bool {
        angle_deg <= 10.0 || distance_m >= 15.0
    }

    pub fn cell(&self, angle_deg: f64, distance_m: f64) -> Option<f64> {
        let i = self.angles_deg.iter().position(|&a| a == angle_deg)?;
        let j = self.distances_m.iter().position(|&d| d == distance_m)?;
        Some(self.abs_error_cm[i][j])
    }
}

/// Pipeline settings of the error table: the jumps travel, so flights are
/// cut with the max-min rule rather than against the standing floor.
pub fn table_config() -> EstimateConfig {
    let mut cfg = EstimateConfig::default();
    cfg.detection.mode = SegmentMode::Lateral;
    cfg
}

pub fn reference_error_table(kind: CameraKind) -> Result<ErrorTable, EstimateError> {
    error_table(kind, &TABLE_ANGLES_DEG, &TABLE_DISTANCES_M)
}

/// Each cell is the mean absolute error over [`TABLE_PHASES`] evenly spaced
/// sub-frame offsets of the jump against the frame clock, so that the table
/// reflects projection rather than where the samples happen to fall.
pub fn error_table(kind: CameraKind, angles_deg: &[f64], distances_m: &[f64]) -> Result<ErrorTable, EstimateError> {
    let masses = MassTable::default_coco17();
    let cfg = table_config();
    let image = ImageFrame::default();
    let mut rows = Vec::with_capacity(angles_deg.len());
    for &a in angles_deg {
        let mut row = Vec::with_capacity(distances_m.len());
        for &d in distances_m {
            let mut sum = 0.0;
            for k in 0..TABLE_PHASES {
                let mut scene = JumperScene::reference_jump(d, a);
                scene.stance_s += k as f64 / (TABLE_PHASES as f64 * scene.fps);
                scene.duration = scene.required_duration();
                let camera = scene_camera(&scene, kind, TABLE_FOCAL_PX);
                let seq = generate_jumper(&scene)
                    .and_then(|m| m.render(&camera, &image))
                    .expect("reference scenes are valid and in front of the camera");
                let est = estimate_height(&seq.pose, &masses, &cfg)?;
                sum += (est.aggregate_h - scene.person_height).abs();
            }
            row.push(sum / TABLE_PHASES as f64 * 100.0);
        }
        rows.push(row);
    }
    Ok(ErrorTable {
        camera: kind,
        angles_deg: angles_deg.to_vec(),
        distances_m: distances_m.to_vec(),
        abs_error_cm: rows,
    })
}
