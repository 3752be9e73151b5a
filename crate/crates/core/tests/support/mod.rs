//! Fixtures and property checks shared by the integration tests.

#![allow(dead_code)]

use std::sync::OnceLock;

use nalgebra::{Matrix2x3, Vector2, Vector3};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use freefall::com::{com_point, KeypointFrame, MassTable, COCO_JOINT_COUNT};
use freefall::estimate::{compute_error_report, estimate_height, EstimateConfig};
use freefall::events::SegmentMode;
use freefall::fit::fit_parabola_lsq;
use freefall::sim::{
    generate_jumper, project, project_point, scene_camera, CameraKind, CameraModel, ImageFrame,
    JumperScene, SyntheticSequence,
};

pub const FOCAL_PX: f64 = 1000.0;

/// Renders `scene` through a camera of `kind` placed at the scene's camera
/// height.
pub fn render(scene: &JumperScene, kind: CameraKind) -> SyntheticSequence {
    let camera = scene_camera(scene, kind, FOCAL_PX);
    generate_jumper(scene)
        .and_then(|m| m.render(&camera, &ImageFrame::default()))
        .expect("scene renders")
}

/// Pipeline settings matching the motion class of `scene`.
pub fn config_for(scene: &JumperScene) -> EstimateConfig {
    let mut cfg = EstimateConfig::default();
    if scene.jump_length > 0.0 {
        cfg.detection.mode = SegmentMode::Lateral;
    }
    cfg
}

/// Random noiseless jumper: on-spot jumps with a countermovement, or
/// travelling jumps from a static stance in a random direction.
pub fn random_scene(rng: &mut ChaCha8Rng) -> JumperScene {
    let fps = [25.0, 30.0, 50.0, 60.0][rng.random_range(0..4)];
    let mut scene = JumperScene::on_spot(
        rng.random_range(1.5..2.0),
        rng.random_range(0.15..0.4),
        rng.random_range(1..=3),
        rng.random_range(3.0..30.0),
        fps,
    );
    if rng.random::<bool>() {
        scene.jump_length = rng.random_range(0.3..1.2);
        scene.approach_angle_deg = rng.random_range(0.0..90.0);
        scene.crouch_depth = 0.0;
    }
    scene.camera_height = rng.random_range(0.0..1.5);
    scene.duration = scene.required_duration();
    scene
}

/// A few noiseless jumpers, rendered once per process.
pub fn scale_fixtures() -> &'static [(SyntheticSequence, EstimateConfig)] {
    static FIXTURES: OnceLock<Vec<(SyntheticSequence, EstimateConfig)>> = OnceLock::new();
    FIXTURES.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..4)
            .map(|i| {
                let scene = random_scene(&mut rng);
                let kind = if i % 2 == 0 { CameraKind::Perspective } else { CameraKind::Affine };
                (render(&scene, kind), config_for(&scene))
            })
            .collect()
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn check_pixel_scale(fixture: usize, s: f64) -> Result<(), TestCaseError> {
    let (seq, cfg) = &scale_fixtures()[fixture];
    let masses = MassTable::default_coco17();
    let base = estimate_height(&seq.pose, &masses, cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let scaled = estimate_height(&seq.pose.scaled(s), &masses, cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(base.per_segment.len(), scaled.per_segment.len());
    for (a, b) in base.per_segment.iter().zip(&scaled.per_segment) {
        prop_assert!(close(a.h, b.h, 1e-6), "segment {}: {} vs {}", a.id, a.h, b.h);
    }
    prop_assert!(close(base.aggregate_h, scaled.aggregate_h, 1e-6));
    Ok(())
}

pub fn check_time_shift(c: (f64, f64, f64), n: usize, fps: f64, shift: f64, seed: u64) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ys: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = i as f64 / fps;
            (t, c.0 * t * t + c.1 * t + c.2 + rng.random_range(-2.0..2.0))
        })
        .collect();
    let shifted: Vec<(f64, f64)> = ys.iter().map(|&(t, y)| (t + shift, y)).collect();
    let a = fit_parabola_lsq(&ys).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let b = fit_parabola_lsq(&shifted).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let scale = a.c2.abs().max(1.0);
    prop_assert!((a.c2 - b.c2).abs() <= 1e-6 * scale, "{} vs {}", a.c2, b.c2);
    Ok(())
}

pub fn check_com_projection(points: &[[f64; 3]], weights: &[f64], m: [f64; 6], affine: bool) -> Result<(), TestCaseError> {
    let masses = MassTable::from_weights(weights.to_vec()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let pts: Vec<Vector3<f64>> = points.iter().map(|p| Vector3::new(p[0], p[1], p[2] + 20.0)).collect();
    let camera = if affine {
        CameraModel::affine(Matrix2x3::from_row_slice(&m))
    } else {
        CameraModel::scaled_orthographic(m[0].abs() * 1000.0 + 1.0, 5.0)
    };
    let projected = project(&camera, &pts).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let frame = KeypointFrame::new(projected, vec![1.0; COCO_JOINT_COUNT]);
    let com_2d = com_point(&frame, &masses);
    let com_3d = pts
        .iter()
        .zip(masses.weights())
        .fold(Vector3::zeros(), |acc, (p, &w)| acc + p * w);
    let via_3d: Vector2<f64> = project_point(&camera, &com_3d).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let scale = com_2d.norm().max(1.0);
    prop_assert!((com_2d - via_3d).norm() <= 1e-9 * scale, "{com_2d} vs {via_3d}");
    Ok(())
}

pub fn check_mass_normalization(weights: &[f64]) -> Result<(), TestCaseError> {
    let table = MassTable::from_weights(weights.to_vec()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let sum: f64 = table.weights().iter().sum();
    prop_assert!((sum - 1.0).abs() < 1e-12, "sum {sum}");
    let total: f64 = weights.iter().sum();
    for (w, r) in weights.iter().zip(table.weights()) {
        prop_assert!(close(w / total, *r, 1e-12));
    }
    let reparsed = MassTable::parse(&table.to_text()).map_err(|e| TestCaseError::fail(e.to_string()))?;
    for (a, b) in reparsed.weights().iter().zip(table.weights()) {
        prop_assert!(close(*a, *b, 1e-12));
    }
    Ok(())
}

pub fn check_mae_bounds_me(pairs: &[(f64, f64)]) -> Result<(), TestCaseError> {
    let r = compute_error_report(pairs).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!(r.mae + 1e-12 >= r.me.abs(), "mae {} me {}", r.mae, r.me);
    prop_assert!(r.rel_mae + 1e-12 >= r.rel_me.abs());
    prop_assert!(r.sd_abs >= 0.0 && r.sd_signed >= 0.0);
    Ok(())
}

pub fn pixel_scale_strategy() -> impl Strategy<Value = (usize, f64)> {
    (0..4usize, 0.05f64..20.0)
}

pub fn time_shift_strategy() -> impl Strategy<Value = ((f64, f64, f64), usize, f64, f64, u64)> {
    (
        (-5000.0f64..5000.0, -500.0f64..500.0, -1000.0f64..1000.0),
        3usize..60,
        prop::sample::select(vec![25.0, 30.0, 60.0, 120.0, 240.0]),
        -3600.0f64..3600.0,
        any::<u64>(),
    )
}

pub fn com_projection_strategy() -> impl Strategy<Value = (Vec<[f64; 3]>, Vec<f64>, [f64; 6], bool)> {
    (
        prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), COCO_JOINT_COUNT),
        prop::collection::vec(0.01f64..10.0, COCO_JOINT_COUNT),
        prop::array::uniform6(-500.0f64..500.0),
        any::<bool>(),
    )
}

pub fn weights_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-3f64..100.0, 1..40)
}

pub fn error_pairs_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1.0f64..2.5, 1.0f64..2.5), 1..60)
}
