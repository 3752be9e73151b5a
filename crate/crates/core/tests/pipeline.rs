mod support;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use freefall::com::{com_trajectory, KeypointFrame, MassTable, PoseSequence};
use freefall::estimate::{estimate_height, estimate_rigid_size, AccelerationMethod, EstimateConfig, EstimateError};
use freefall::events::{detect_flight_segments, find_peaks, SegmentMode};
use freefall::sim::{
    corrupt, generate_ball, generate_jumper, BallScene, CameraKind, CameraModel, Corruption, ImageFrame,
    JumperScene,
};
use support::{config_for, random_scene, render, FOCAL_PX};

fn masses() -> MassTable {
    MassTable::default_coco17()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn linear_cameras_recover_height_and_scale() {
    for kind in [CameraKind::ScaledOrthographic, CameraKind::Affine] {
        let scene = JumperScene::on_spot(1.72, 0.3, 3, 6.0, 30.0);
        let seq = render(&scene, kind);
        let est = estimate_height(&seq.pose, &masses(), &EstimateConfig::default()).unwrap();
        assert_eq!(est.per_segment.len(), 3, "{kind:?}");
        assert!(rel(est.aggregate_h, 1.72) < 1e-6, "{kind:?}: {}", est.aggregate_h);
        let q0 = est.per_segment[0].q.q;
        for s in &est.per_segment {
            assert!(rel(s.q.q, q0) < 1e-6);
            assert!(rel(s.q.q, seq.truth.q_true) < 1e-6);
        }
    }
}

#[test]
fn standing_span_times_scale_is_height() {
    let scene = JumperScene::on_spot(1.8, 0.3, 1, 4.0, 30.0);
    let seq = render(&scene, CameraKind::Perspective);
    let h_px = freefall::estimate::measure_standing_height_px(&seq.pose, 100).unwrap();
    assert!((h_px * seq.truth.q_true * 1.17 - 1.8).abs() < 1e-6);
}

#[test]
fn three_jumps_give_three_peaks_at_the_apexes() {
    let scene = JumperScene::on_spot(1.8, 0.3, 3, 4.0, 30.0);
    let seq = render(&scene, CameraKind::Perspective);
    let traj = com_trajectory(&seq.pose, &masses(), 2.0).unwrap();
    let peaks = find_peaks(&traj, 10);
    assert_eq!(peaks.len(), 3);
    for (p, apex) in peaks.iter().zip(&seq.truth.apex_times) {
        assert!((*p as f64 / scene.fps - apex).abs() <= 1.0 / scene.fps, "{p} vs {apex}");
    }
}

#[test]
fn selected_flight_frames_are_airborne() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut scenes: Vec<JumperScene> = (0..12).map(|_| random_scene(&mut rng)).collect();
    for (d, a) in [(4.0, 0.0), (4.0, 90.0), (7.0, 45.0), (30.0, 10.0)] {
        scenes.push(JumperScene::reference_jump(d, a));
    }
    for scene in &scenes {
        for kind in [CameraKind::Perspective, CameraKind::ScaledOrthographic] {
            let seq = render(scene, kind);
            let traj = com_trajectory(&seq.pose, &masses(), 2.0).unwrap();
            let det = detect_flight_segments(&traj, &config_for(scene).detection).unwrap();
            assert!(!det.segments.is_empty(), "{scene:?}");
            for s in &det.segments {
                for i in s.start..=s.end {
                    assert!(!seq.truth.contact[i], "frame {i} of {s:?} touches the ground in {scene:?}");
                }
            }
        }
    }
}

#[test]
fn median_survives_one_corrupted_jump() {
    let scene = JumperScene::on_spot(1.75, 0.3, 4, 5.0, 30.0);
    let clean = render(&scene, CameraKind::Perspective);
    let noisy = corrupt(&clean, &Corruption::noise(0.5), 9).unwrap();
    // Third flight stretched 1.5x about its takeoff pose: one clean-looking
    // parabola with the wrong curvature.
    let (t0, t1) = noisy.truth.flight_intervals[2];
    let i0 = (t0 * scene.fps).ceil() as usize;
    let takeoff = noisy.pose.frames()[i0].clone();
    let frames: Vec<KeypointFrame> = noisy
        .pose
        .frames()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut f = f.clone();
            if i as f64 / scene.fps < t1 && i >= i0 {
                for (p, r) in f.joints.iter_mut().zip(&takeoff.joints) {
                    p.y = r.y + 1.5 * (p.y - r.y);
                }
            }
            f
        })
        .collect();
    let pose = PoseSequence::new(frames, scene.fps, noisy.pose.image_height(), 17).unwrap();
    let est = estimate_height(&pose, &masses(), &EstimateConfig::default()).unwrap();
    // Stance jitter may add short spurious segments; the median absorbs them.
    let hs = est.per_segment_heights();
    assert!(hs.len() >= 4, "{hs:?}");
    assert!(hs.iter().any(|h| rel(*h, 1.75) > 0.2), "{hs:?}");
    assert!(rel(est.aggregate_h, 1.75) < 0.03, "{}", est.aggregate_h);
}

#[test]
fn standing_only_clip_reports_no_flight() {
    let mut scene = JumperScene::on_spot(1.8, 0.0, 2, 4.0, 30.0);
    scene.duration = scene.required_duration();
    let seq = render(&scene, CameraKind::Perspective);
    let err = estimate_height(&seq.pose, &masses(), &EstimateConfig::default()).unwrap_err();
    assert_eq!(err, EstimateError::NoFlightDetected);
}

#[test]
fn rolled_camera_is_undone_by_rotation() {
    let scene = JumperScene::on_spot(1.8, 0.3, 2, 5.0, 30.0);
    let camera = CameraModel::scaled_orthographic(FOCAL_PX, scene.distance).with_roll(0.15);
    let seq = generate_jumper(&scene).unwrap().render(&camera, &ImageFrame::default()).unwrap();
    let cfg = EstimateConfig { rotate: true, ..Default::default() };
    let est = estimate_height(&seq.pose, &masses(), &cfg).unwrap();
    assert!((est.rotation_angle + 0.15).abs() < 1e-9, "{}", est.rotation_angle);
    assert!(rel(est.aggregate_h, 1.8) < 1e-6, "{}", est.aggregate_h);
}

#[test]
fn distance_based_method_is_close_but_biased() {
    let scene = JumperScene::on_spot(1.8, 0.3, 3, 5.0, 60.0);
    let seq = render(&scene, CameraKind::ScaledOrthographic);
    let cfg = EstimateConfig {
        method: AccelerationMethod::DistanceBased,
        ..Default::default()
    };
    let est = estimate_height(&seq.pose, &masses(), &cfg).unwrap();
    assert!(rel(est.aggregate_h, 1.8) < 0.1, "{}", est.aggregate_h);
}

fn ball_config() -> EstimateConfig {
    let mut cfg = EstimateConfig::default();
    cfg.detection.mode = SegmentMode::Lateral;
    cfg
}

#[test]
fn bounce_arcs_agree_on_scale() {
    let scene = BallScene::default();
    let camera = CameraModel::perspective(FOCAL_PX).with_center(Vector3::new(0.0, scene.camera_height, 0.0));
    let ball = generate_ball(&scene, &camera, &ImageFrame::default()).unwrap();
    let size_px = freefall::stats::median(&ball.diameters_px).unwrap();
    let est = estimate_rigid_size(&ball.center_trajectory(), size_px, ball.fps, &ball_config()).unwrap();
    let bounces: Vec<_> = est.per_segment.iter().filter(|s| s.segment.peak > 0).collect();
    assert!(bounces.len() >= 2, "{:?}", est.per_segment);
    for s in &est.per_segment {
        assert!(rel(s.q.q, ball.q_true) < 1e-6);
    }
    assert!((est.aggregate - 0.073).abs() < 1e-6);
}

#[test]
fn ball_size_is_scale_equivariant() {
    let scene = BallScene::default();
    let camera = CameraModel::scaled_orthographic(FOCAL_PX, scene.distance);
    let ball = generate_ball(&scene, &camera, &ImageFrame::default()).unwrap();
    let traj = ball.center_trajectory();
    let size_px = ball.diameters_px[0];
    let a = estimate_rigid_size(&traj, size_px, ball.fps, &ball_config()).unwrap();
    let doubled = traj.map_points(|p| p * 2.0);
    let b = estimate_rigid_size(&doubled, 2.0 * size_px, ball.fps, &ball_config()).unwrap();
    assert!(rel(a.aggregate, b.aggregate) < 1e-9);
}
