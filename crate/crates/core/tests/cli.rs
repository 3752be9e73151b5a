use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freefall::io::parse_keypoints;
use freefall::sim::{generate_jumper, scene_camera, CameraKind, ImageFrame, JumperScene, TABLE_FOCAL_PX};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freefall"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares against a checked-in file; `UPDATE_GOLDEN=1` rewrites it.
fn assert_golden(name: &str, actual: &str) {
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden file {name} differs");
}

fn head(text: &str, n: usize) -> String {
    text.lines().take(n).map(|l| format!("{l}\n")).collect()
}

fn simulate_default(dir: &Path) -> (PathBuf, PathBuf) {
    let kp = dir.join("jumper.jsonl");
    let truth = dir.join("truth.json");
    ok(&["simulate", "jumper", "--out", s(&kp), "--truth", s(&truth)]);
    (kp, truth)
}

#[test]
fn simulated_file_round_trips_field_for_field() {
    let dir = tempfile::tempdir().unwrap();
    let (kp, _) = simulate_default(dir.path());
    let parsed = parse_keypoints(&std::fs::read_to_string(&kp).unwrap(), None).unwrap();
    let scene = JumperScene::on_spot(1.8, 0.3, 3, 4.0, 30.0);
    let camera = scene_camera(&scene, CameraKind::Perspective, TABLE_FOCAL_PX);
    let seq = generate_jumper(&scene).unwrap().render(&camera, &ImageFrame::default()).unwrap();
    assert_eq!(parsed.pose, seq.pose);
    assert_eq!(parsed.image_width, Some(ImageFrame::default().width));
}

#[test]
fn golden_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (kp, truth) = simulate_default(dir.path());
    let text = std::fs::read_to_string(&kp).unwrap();
    assert_golden("jumper_head.jsonl", &head(&text, 2));
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    assert_eq!(sidecar["truth"]["h_true"], 1.8);
    assert_eq!(sidecar["seed"], 0);

    let plot = dir.path().join("plot.csv");
    let report = ok(&["estimate", s(&kp), "--plot", s(&plot)]);
    let report = report.replace(s(&kp), "jumper.jsonl");
    assert_golden("estimate_report.txt", &report);
    let plot = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(plot.lines().count(), text.lines().count());
    assert_golden("plot_head.csv", &head(&plot, 3));

    let ball = dir.path().join("ball.jsonl");
    ok(&["simulate", "ball", "--out", s(&ball)]);
    assert_golden("ball_head.jsonl", &head(&std::fs::read_to_string(&ball).unwrap(), 2));
    let report = ok(&["ball", s(&ball)]).replace(s(&ball), "ball.jsonl");
    assert_golden("ball_report.txt", &report);
}

#[test]
fn report_matches_embedded_truth() {
    let dir = tempfile::tempdir().unwrap();
    let kp = dir.path().join("j.jsonl");
    let truth = dir.path().join("t.json");
    ok(&["simulate", "jumper", "--camera", "scaled-orthographic", "--height", "1.64", "--out", s(&kp), "--truth", s(&truth)]);
    let report = ok(&["estimate", s(&kp)]);
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    let h_true = sidecar["truth"]["h_true"].as_f64().unwrap();
    assert!(report.contains(&format!("aggregate height: {h_true:.4} m")), "{report}");
}

#[test]
fn fixed_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let kp = dir.path().join(format!("n{k}.jsonl"));
        let rep = dir.path().join(format!("r{k}.txt"));
        ok(&["simulate", "jumper", "--noise", "1.5", "--outlier-rate", "0.05", "--seed", "7", "--out", s(&kp)]);
        ok(&["estimate", s(&kp), "--ransac", "--seed", "3", "-o", s(&rep)]);
        outputs.push((std::fs::read(&kp).unwrap(), std::fs::read_to_string(&rep).unwrap()));
    }
    assert_eq!(outputs[0].0, outputs[1].0);
    let strip = |r: &str, k: usize| r.replace(&format!("n{k}.jsonl"), "n.jsonl");
    assert_eq!(strip(&outputs[0].1, 0), strip(&outputs[1].1, 1));
}

fn expect_failure(args: &[&str], code: i32, name: &str) -> String {
    let out = run(args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(out.status.code(), Some(code), "{args:?}: {stderr}");
    assert!(stderr.starts_with(&format!("error[{name}]")), "{stderr}");
    stderr
}

#[test]
fn errors_map_to_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    expect_failure(&["estimate", s(&empty)], 3, "ParseError");

    let (kp, _) = simulate_default(dir.path());
    let text = std::fs::read_to_string(&kp).unwrap();
    let no_fps = dir.path().join("nofps.jsonl");
    std::fs::write(&no_fps, text.replacen("\"fps\":30.0,", "", 1)).unwrap();
    let msg = expect_failure(&["estimate", s(&no_fps)], 3, "ParseError");
    assert!(msg.contains("`fps`"), "{msg}");
    assert!(ok(&["estimate", s(&no_fps), "--fps", "30"]).contains("aggregate height: 1.8000 m"));

    let still = dir.path().join("still.jsonl");
    ok(&["simulate", "jumper", "--jump-height", "0", "--out", s(&still)]);
    expect_failure(&["estimate", s(&still)], 4, "NoFlightDetected");

    expect_failure(&["estimate", s(&dir.path().join("missing.jsonl"))], 5, "IoError");
    expect_failure(&["estimate", s(&kp), "--g=-9.81"], 6, "ConfigError");
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "gravty = 9.81\n").unwrap();
    expect_failure(&["estimate", s(&kp), "--config", s(&bad_cfg)], 6, "ConfigError");
    expect_failure(&["simulate", "jumper", "--height=-1", "--out", s(&still)], 6, "InvalidScene");
    assert_eq!(run(&["estimate"]).status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (kp, _) = simulate_default(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "method = \"distance-based\"\ncorrection_c = 1.2\n").unwrap();
    let from_file = ok(&["estimate", s(&kp), "--config", s(&cfg)]);
    assert!(from_file.contains("method: distance-based"));
    assert!(from_file.contains("c = 1.20"));
    let flagged = ok(&["estimate", s(&kp), "--config", s(&cfg), "--method", "curve-fit"]);
    assert!(flagged.contains("method: curve-fit"));
    assert!(flagged.contains("c = 1.20"));
}

#[test]
fn custom_mass_table_is_loaded() {
    let dir = tempfile::tempdir().unwrap();
    let (kp, _) = simulate_default(dir.path());
    let table = dir.path().join("masses.txt");
    std::fs::write(&table, freefall::MassTable::default_coco17().to_text()).unwrap();
    let a = ok(&["estimate", s(&kp)]);
    let b = ok(&["estimate", s(&kp), "--mass-table", s(&table)]);
    assert_eq!(a, b);
    std::fs::write(&table, "0 1\n").unwrap();
    expect_failure(&["estimate", s(&kp), "--mass-table", s(&table)], 7, "InvalidInput");
}
