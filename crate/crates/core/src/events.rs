//! Free-fall segment detection on a COM trajectory.
//!
//! Two selection rules are provided. The on-spot rule compares samples to a
//! floor level estimated from the opening frames and keeps the run around a
//! peak that stays a fraction of the jump height above it. The lateral rule
//! has no stable floor and instead keeps, on each side of a peak, the upper
//! half of the descent to the nearest local minimum.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::com::Trajectory2D;
use crate::stats::median;

pub const DEFAULT_PEAK_HALF_WINDOW: usize = 10;
pub const DEFAULT_FLOOR_FRAMES: usize = 100;
pub const DEFAULT_FLIGHT_FRACTION: f64 = 0.15;
/// Share of the peak-to-minimum drop kept by the lateral rule.
pub const LATERAL_KEEP_FRACTION: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventsError {
    #[error("no valid samples in the first {0} frames")]
    NoValidSamples(usize),
    #[error("peak index {0} is missing or not above the floor")]
    InvalidPeak(usize),
    #[error("flight segment around peak {peak} has {len} samples, need at least 3")]
    SegmentTooShort { peak: usize, len: usize },
    #[error("flight fraction {0} must lie in [0, 1]")]
    InvalidFraction(f64),
    #[error("segment around peak {0} runs into the clip boundary")]
    Unbounded(usize),
}

/// Inclusive index range of a trajectory attributed to free fall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSegment {
    pub start: usize,
    pub end: usize,
    pub peak: usize,
    /// Floor level used for the selection (on-spot rule only).
    pub floor_y: Option<f64>,
}

impl FlightSegment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: usize) -> bool {
        (self.start..=self.end).contains(&i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentMode {
    /// Floor from the opening frames plus the fractional height rule.
    #[default]
    OnSpot,
    /// Upper half between a peak and its neighboring minima.
    Lateral,
}

/// Widest run of equal samples still read as one apex.
pub const MAX_FLAT_TOP: usize = 2;

/// Indices of samples that dominate their `±half_window` neighborhood.
///
/// A valid index `m` qualifies when it is strictly above every earlier valid
/// sample in the window and not below any later one, so a flat top yields
/// only its first index. A flat run longer than [`MAX_FLAT_TOP`] samples is
/// a rest, not an apex, and yields none. Windows are truncated at the ends
/// and invalid samples are ignored.
pub fn find_peaks(traj: &Trajectory2D, half_window: usize) -> Vec<usize> {
    let n = traj.len();
    let mut peaks = Vec::new();
    for m in 0..n {
        let Some(ym) = traj.y(m) else { continue };
        let lo = m.saturating_sub(half_window);
        let hi = (m + half_window).min(n - 1);
        let before = (lo..m).filter_map(|t| traj.y(t)).all(|y| ym > y);
        let after = (m + 1..=hi).filter_map(|t| traj.y(t)).all(|y| ym >= y);
        let flat = (m..n).take_while(|&t| traj.y(t) == Some(ym)).count();
        if before && after && flat <= MAX_FLAT_TOP {
            peaks.push(m);
        }
    }
    peaks
}

/// Median height of the valid samples among the first `n_frames`.
pub fn estimate_floor(traj: &Trajectory2D, n_frames: usize) -> Result<f64, EventsError> {
    let upto = n_frames.min(traj.len());
    let ys: Vec<f64> = (0..upto).filter_map(|i| traj.y(i)).collect();
    median(&ys).ok_or(EventsError::NoValidSamples(n_frames))
}

/// Maximal contiguous valid run around `peak` whose samples all reach
/// `floor_y + fraction·(y_peak - floor_y)`.
pub fn select_flight_segment(
    traj: &Trajectory2D,
    peak: usize,
    floor_y: f64,
    fraction: f64,
) -> Result<FlightSegment, EventsError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(EventsError::InvalidFraction(fraction));
    }
    let ym = traj
        .y(peak)
        .filter(|&y| y > floor_y)
        .ok_or(EventsError::InvalidPeak(peak))?;
    let threshold = floor_y + fraction * (ym - floor_y);
    let keep = |i: usize| traj.y(i).is_some_and(|y| y >= threshold);

    let mut start = peak;
    while start > 0 && keep(start - 1) {
        start -= 1;
    }
    let mut end = peak;
    while end + 1 < traj.len() && keep(end + 1) {
        end += 1;
    }
    checked_segment(start, end, peak, Some(floor_y))
}

/// Lateral-motion variant: on each side of `peak`, walks down to the nearest
/// local minimum (a trajectory end or gap counts as one) and keeps the
/// contiguous samples in the upper half of that side's drop.
pub fn select_flight_segment_lateral(
    traj: &Trajectory2D,
    peak: usize,
) -> Result<FlightSegment, EventsError> {
    let ym = traj.y(peak).ok_or(EventsError::InvalidPeak(peak))?;
    let n = traj.len();

    // left side
    let mut min_left = peak;
    while min_left > 0 {
        match (traj.y(min_left - 1), traj.y(min_left)) {
            (Some(a), Some(b)) if a <= b => min_left -= 1,
            _ => break,
        }
    }
    let thr_left = side_threshold(ym, traj.y(min_left).unwrap_or(ym));
    let mut start = peak;
    while start > min_left && traj.y(start - 1).is_some_and(|y| y >= thr_left) {
        start -= 1;
    }

    // right side
    let mut min_right = peak;
    while min_right + 1 < n {
        match (traj.y(min_right + 1), traj.y(min_right)) {
            (Some(a), Some(b)) if a <= b => min_right += 1,
            _ => break,
        }
    }
    let thr_right = side_threshold(ym, traj.y(min_right).unwrap_or(ym));
    let mut end = peak;
    while end < min_right && traj.y(end + 1).is_some_and(|y| y >= thr_right) {
        end += 1;
    }

    checked_segment(start, end, peak, None)
}

fn side_threshold(peak_y: f64, minimum: f64) -> f64 {
    minimum + LATERAL_KEEP_FRACTION * (peak_y - minimum)
}

fn checked_segment(
    start: usize,
    end: usize,
    peak: usize,
    floor_y: Option<f64>,
) -> Result<FlightSegment, EventsError> {
    let len = end - start + 1;
    if len < 3 {
        return Err(EventsError::SegmentTooShort { peak, len });
    }
    Ok(FlightSegment {
        start,
        end,
        peak,
        floor_y,
    })
}

/// Parameters of the full detection pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOptions {
    pub mode: SegmentMode,
    pub half_window: usize,
    pub floor_frames: usize,
    pub fraction: f64,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        Self {
            mode: SegmentMode::OnSpot,
            half_window: DEFAULT_PEAK_HALF_WINDOW,
            floor_frames: DEFAULT_FLOOR_FRAMES,
            fraction: DEFAULT_FLIGHT_FRACTION,
        }
    }
}

/// Outcome of a detection pass: usable segments in time order plus the
/// peaks that were rejected and why.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Detection {
    pub floor_y: Option<f64>,
    pub segments: Vec<FlightSegment>,
    pub rejected: Vec<(usize, EventsError)>,
}

/// Runs peak finding and segment selection. Peaks whose segment coincides
/// with an earlier one are dropped.
pub fn detect_flight_segments(
    traj: &Trajectory2D,
    opts: &DetectionOptions,
) -> Result<Detection, EventsError> {
    let floor_y = match opts.mode {
        SegmentMode::OnSpot => Some(estimate_floor(traj, opts.floor_frames)?),
        SegmentMode::Lateral => None,
    };
    let mut out = Detection {
        floor_y,
        ..Detection::default()
    };
    for peak in find_peaks(traj, opts.half_window) {
        let seg = match floor_y {
            Some(f) => select_flight_segment(traj, peak, f, opts.fraction),
            None => select_flight_segment_lateral(traj, peak),
        };
        // On-spot flights must take off and land inside the clip; a run that
        // touches either end is a raised stance, not a confirmed flight.
        let last = traj.len() - 1;
        let seg = seg.and_then(|s| match floor_y {
            Some(_) if s.start == 0 || s.end == last => Err(EventsError::Unbounded(peak)),
            _ => Ok(s),
        });
        match seg {
            Ok(s) => {
                let dup = out
                    .segments
                    .iter()
                    .any(|o| o.start == s.start && o.end == s.end);
                if !dup {
                    out.segments.push(s);
                }
            }
            Err(e) => out.rejected.push((peak, e)),
        }
    }
    Ok(out)
}
