//! Deterministic text and CSV renderings of estimation results.

use std::fmt::Write;

use crate::config::RunConfig;
use crate::estimate::{HeightEstimate, RigidSizeEstimate, SegmentEstimate, POPULATION_MEAN_HEIGHT_CM};
use crate::physics::NOSE_ANKLE_CORRECTION_SD;
use crate::sim::ErrorTable;

/// Negligible-error bound of the error table, cm.
pub const NEGLIGIBLE_CM: f64 = 1.0;
/// Bound for cells that should vanish under an affine camera, cm.
pub const AFFINE_ZERO_CM: f64 = 1e-4;
/// Rounding slack of the monotonicity checks, cm.
pub const MONOTONE_SLACK_CM: f64 = 1e-6;

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn mode_name(cfg: &RunConfig) -> &'static str {
    match cfg.segment_mode {
        crate::events::SegmentMode::OnSpot => "on-spot",
        crate::events::SegmentMode::Lateral => "lateral",
    }
}

/// Collapses sorted indices into `a-b` ranges.
fn ranges(indices: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < indices.len() {
        let mut j = i;
        while j + 1 < indices.len() && indices[j + 1] == indices[j] + 1 {
            j += 1;
        }
        if i == j {
            parts.push(indices[i].to_string());
        } else {
            parts.push(format!("{}-{}", indices[i], indices[j]));
        }
        i = j + 1;
    }
    parts.join(",")
}

fn segment_table(out: &mut String, segments: &[SegmentEstimate], size_label: &str) {
    writeln!(
        out,
        "{:>3} {:>6} {:>6} {:>6} {:>12} {:>10} {:>9} {:>8} {:>8} {:>8}",
        "seg", "start", "end", "peak", "a_px[px/s2]", "q[m/px]", "extent_px", size_label, "samples", "outliers"
    )
    .unwrap();
    for s in segments {
        writeln!(
            out,
            "{:>3} {:>6} {:>6} {:>6} {:>12.3} {:>10.6} {:>9.3} {:>8.4} {:>8} {:>8}",
            s.id,
            s.segment.start,
            s.segment.end,
            s.segment.peak,
            s.a_px,
            s.q.q,
            s.h_px,
            s.h,
            s.fit_samples,
            s.outliers
        )
        .unwrap();
    }
}

fn warnings(out: &mut String, items: &[String]) {
    out.push_str("warnings:\n");
    if items.is_empty() {
        out.push_str("  none\n");
    }
    for w in items {
        writeln!(out, "  {w}").unwrap();
    }
}

/// Human-readable report of a height estimate.
pub fn render_height_report(source: &str, cfg: &RunConfig, frames: usize, fps: f64, est: &HeightEstimate) -> String {
    let mut out = String::new();
    out.push_str("freefall height report\n");
    writeln!(out, "input: {source}").unwrap();
    writeln!(
        out,
        "frames: {frames}  fps: {fps}  method: {}  segments: {}  ransac: {}  rotate: {}",
        est.method.as_str(),
        mode_name(cfg),
        on_off(cfg.ransac),
        on_off(cfg.rotate)
    )
    .unwrap();
    let floor = est.floor_y.map_or("n/a".to_string(), |f| format!("{f:.3} px"));
    writeln!(
        out,
        "standing nose-ankle span: {:.3} px  floor: {floor}  rotation: {:.6} rad",
        est.h_px, est.rotation_angle
    )
    .unwrap();
    out.push('\n');
    segment_table(&mut out, &est.per_segment, "h[m]");
    out.push('\n');
    writeln!(
        out,
        "aggregate height: {:.4} m (median of {} segment{})",
        est.aggregate_h,
        est.per_segment.len(),
        if est.per_segment.len() == 1 { "" } else { "s" }
    )
    .unwrap();
    writeln!(
        out,
        "systematic uncertainty from c = {:.2} +- {:.2}: +-{:.4} m",
        cfg.correction_c,
        NOSE_ANKLE_CORRECTION_SD,
        est.aggregate_h * NOSE_ANKLE_CORRECTION_SD / cfg.correction_c
    )
    .unwrap();
    writeln!(out, "population mean reference: {:.3} m", POPULATION_MEAN_HEIGHT_CM / 100.0).unwrap();
    let mut notes = est.warnings.clone();
    if !est.excluded_frames.is_empty() {
        notes.push(format!("excluded frames: {}", ranges(&est.excluded_frames)));
    }
    warnings(&mut out, &notes);
    out
}

/// Human-readable report of a rigid-object size estimate.
pub fn render_size_report(source: &str, cfg: &RunConfig, frames: usize, fps: f64, est: &RigidSizeEstimate) -> String {
    let mut out = String::new();
    out.push_str("freefall size report\n");
    writeln!(out, "input: {source}").unwrap();
    writeln!(
        out,
        "frames: {frames}  fps: {fps}  method: {}  segments: {}  ransac: {}",
        est.method.as_str(),
        mode_name(cfg),
        on_off(cfg.ransac)
    )
    .unwrap();
    out.push('\n');
    segment_table(&mut out, &est.per_segment, "size[m]");
    out.push('\n');
    writeln!(
        out,
        "aggregate size: {:.6} m (median of {} segment{})",
        est.aggregate,
        est.per_segment.len(),
        if est.per_segment.len() == 1 { "" } else { "s" }
    )
    .unwrap();
    let mut notes: Vec<String> = est
        .per_segment
        .iter()
        .filter(|s| s.outliers > 0)
        .map(|s| format!("segment {}: {} RANSAC outliers rejected", s.id, s.outliers))
        .collect();
    notes.extend(est.warnings.iter().cloned());
    warnings(&mut out, &notes);
    out
}

/// Per-frame `t,x,y,valid,inlier` rows of the (possibly rotated) COM
/// trajectory; `inlier` marks samples that entered a segment fit.
pub fn trajectory_csv(traj: &crate::com::Trajectory2D, segments: &[SegmentEstimate]) -> String {
    let mut inlier = vec![false; traj.len()];
    for s in segments {
        for (k, &flag) in s.inlier_flags.iter().enumerate() {
            inlier[s.segment.start + k] |= flag;
        }
    }
    let mut out = String::from("t,x,y,valid,inlier\n");
    for (i, s) in traj.samples().iter().enumerate() {
        match s.point {
            Some(p) => writeln!(out, "{},{},{},1,{}", s.t, p.x, p.y, u8::from(inlier[i])).unwrap(),
            None => writeln!(out, "{},,,0,0", s.t).unwrap(),
        }
    }
    out
}

/// Named pass/fail checks of an error table.
pub fn table_checks(table: &ErrorTable) -> Vec<(String, bool)> {
    let mut checks = Vec::new();
    let mut negligible = true;
    for (i, &a) in table.angles_deg.iter().enumerate() {
        for (j, &d) in table.distances_m.iter().enumerate() {
            if ErrorTable::is_negligible_cell(a, d) {
                negligible &= table.abs_error_cm[i][j] < NEGLIGIBLE_CM;
            }
        }
    }
    checks.push(("cells with angle <= 10 deg or distance >= 15 m below 1 cm".to_string(), negligible));
    for (i, &a) in table.angles_deg.iter().enumerate() {
        if a == 0.0 || a > 10.0 {
            let row = &table.abs_error_cm[i];
            let ok = row.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK_CM);
            checks.push((format!("angle {a} deg non-increasing in distance"), ok));
        }
    }
    if table.camera == crate::sim::CameraKind::Affine {
        let ok = table.abs_error_cm.iter().flatten().all(|&e| e < AFFINE_ZERO_CM);
        checks.push(("all cells below 1e-4 cm under the affine camera".to_string(), ok));
    }
    checks
}

/// Error table as CSV: one row per angle, one column per distance, cm.
pub fn table_csv(table: &ErrorTable) -> String {
    let mut out = String::from("angle_deg");
    for d in &table.distances_m {
        write!(out, ",d_{d}m").unwrap();
    }
    out.push('\n');
    for (a, row) in table.angles_deg.iter().zip(&table.abs_error_cm) {
        write!(out, "{a}").unwrap();
        for e in row {
            write!(out, ",{e:.6}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Error table with its checks, as printed by the CLI.
pub fn render_table(table: &ErrorTable) -> String {
    let mut out = format!("absolute height error [cm], {} camera\n", table.camera.as_str());
    write!(out, "{:>10}", "angle").unwrap();
    for d in &table.distances_m {
        write!(out, " {:>10}", format!("d={d}m")).unwrap();
    }
    out.push('\n');
    for (a, row) in table.angles_deg.iter().zip(&table.abs_error_cm) {
        write!(out, "{:>10}", format!("{a}deg")).unwrap();
        for e in row {
            write!(out, " {e:>10.4}").unwrap();
        }
        out.push('\n');
    }
    for (name, ok) in table_checks(table) {
        writeln!(out, "{} {name}", if ok { "PASS" } else { "FAIL" }).unwrap();
    }
    out
}
