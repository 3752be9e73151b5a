//! Image-space acceleration from a flight segment.
//!
//! The curve method fits `y(t) = c2·t² + c1·t + c0` by least squares (with
//! an optional RANSAC consensus step) and reads the acceleration as `2·c2`.
//! The distance method assumes zero vertical velocity at the peak and solves
//! `y_m - y_e = ½·a·(t_e - t_m)²` directly.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::com::Trajectory2D;
use crate::events::FlightSegment;

pub const DEFAULT_RANSAC_ITERATIONS: usize = 500;
pub const DEFAULT_RANSAC_INLIER_TOL: f64 = 3.0;
pub const RANSAC_MIN_CONSENSUS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample times do not span three distinct values")]
    DegenerateDesign,
    #[error("best consensus set has {0} inliers, need at least 4")]
    NoConsensus(usize),
    #[error("peak and end sample coincide")]
    ZeroDuration,
    #[error("sample {0} is missing")]
    InvalidSample(usize),
    #[error("fitted acceleration vanishes on both axes")]
    NoAcceleration,
}

/// Quadratic model of one coordinate over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolaFit {
    /// px/s²
    pub c2: f64,
    /// px/s
    pub c1: f64,
    /// px
    pub c0: f64,
    pub inliers: Vec<bool>,
    /// RMS residual over the inliers, px.
    pub rms_residual: f64,
}

impl ParabolaFit {
    /// Signed acceleration, always exactly `2·c2`.
    pub fn acceleration(&self) -> f64 {
        2.0 * self.c2
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.c2 * t + self.c1) * t + self.c0
    }

    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Least-squares parabola through `(t, y)` samples.
///
/// Solved through the normal equations on `u = (t - t_mid) / half_span`,
/// which keeps the 3×3 system well conditioned regardless of where the
/// segment sits in the video; coefficients are mapped back to `t`.
pub fn fit_parabola_lsq(samples: &[(f64, f64)]) -> Result<ParabolaFit, FitError> {
    let (c2, c1, c0) = solve_lsq(samples)?;
    let mut fit = ParabolaFit {
        c2,
        c1,
        c0,
        inliers: vec![true; samples.len()],
        rms_residual: 0.0,
    };
    fit.rms_residual = rms(&fit, samples, &fit.inliers);
    Ok(fit)
}

fn solve_lsq(samples: &[(f64, f64)]) -> Result<(f64, f64, f64), FitError> {
    if samples.len() < 3 {
        return Err(FitError::TooFewSamples(samples.len()));
    }
    let mut times: Vec<f64> = samples.iter().map(|s| s.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if times.len() < 3 || times.iter().any(|t| !t.is_finite()) {
        return Err(FitError::DegenerateDesign);
    }
    let t_min = times[0];
    let t_max = times[times.len() - 1];
    let center = 0.5 * (t_min + t_max);
    let half = 0.5 * (t_max - t_min);

    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for &(t, y) in samples {
        let u = (t - center) / half;
        let row = Vector3::new(u * u, u, 1.0);
        ata += row * row.transpose();
        aty += row * y;
    }
    let b = ata
        .cholesky()
        .map(|c| c.solve(&aty))
        .ok_or(FitError::DegenerateDesign)?;
    if !b.iter().all(|v| v.is_finite()) {
        return Err(FitError::DegenerateDesign);
    }
    // y = b2·u² + b1·u + b0 with u = (t - center) / half
    let (b2, b1, b0) = (b[0], b[1], b[2]);
    let c2 = b2 / (half * half);
    let c1 = b1 / half - 2.0 * c2 * center;
    let c0 = c2 * center * center - b1 * center / half + b0;
    Ok((c2, c1, c0))
}

fn rms(fit: &ParabolaFit, samples: &[(f64, f64)], mask: &[bool]) -> f64 {
    let (ss, n) = samples
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(ss, n), (&(t, y), _)| {
            let r = y - fit.eval(t);
            (ss + r * r, n + 1)
        });
    if n == 0 {
        0.0
    } else {
        (ss / n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Maximum vertical residual of an inlier, px.
    pub inlier_tol: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_RANSAC_ITERATIONS,
            inlier_tol: DEFAULT_RANSAC_INLIER_TOL,
            seed: 0,
        }
    }
}

/// RANSAC parabola fit seeded from `config.seed`.
pub fn fit_parabola_ransac(
    samples: &[(f64, f64)],
    config: &RansacConfig,
) -> Result<ParabolaFit, FitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    fit_parabola_ransac_with_rng(samples, config.iterations, config.inlier_tol, &mut rng)
}

/// Fits exact parabolas through random triples, keeps the one with the
/// largest consensus within `inlier_tol`, then refits its inliers by least
/// squares. Fewer than 4 samples fall back to plain least squares.
pub fn fit_parabola_ransac_with_rng<R: Rng + ?Sized>(
    samples: &[(f64, f64)],
    iterations: usize,
    inlier_tol: f64,
    rng: &mut R,
) -> Result<ParabolaFit, FitError> {
    let n = samples.len();
    if n < RANSAC_MIN_CONSENSUS {
        return fit_parabola_lsq(samples);
    }

    let mut best_count = 0usize;
    let mut best_mask = vec![false; n];
    for _ in 0..iterations {
        let idx = sample_indices(rng, n, 3);
        let tri = [samples[idx.index(0)], samples[idx.index(1)], samples[idx.index(2)]];
        let Some((c2, c1, c0)) = interpolate(tri) else {
            continue;
        };
        let mask: Vec<bool> = samples
            .iter()
            .map(|&(t, y)| (y - ((c2 * t + c1) * t + c0)).abs() <= inlier_tol)
            .collect();
        let count = mask.iter().filter(|&&b| b).count();
        if count > best_count {
            best_count = count;
            best_mask = mask;
            if count == n {
                break;
            }
        }
    }
    if best_count < RANSAC_MIN_CONSENSUS {
        return Err(FitError::NoConsensus(best_count));
    }

    let inlier_samples: Vec<(f64, f64)> = samples
        .iter()
        .zip(&best_mask)
        .filter(|(_, &m)| m)
        .map(|(&s, _)| s)
        .collect();
    let (c2, c1, c0) = solve_lsq(&inlier_samples)?;
    let mut fit = ParabolaFit {
        c2,
        c1,
        c0,
        inliers: best_mask,
        rms_residual: 0.0,
    };
    fit.rms_residual = rms(&fit, samples, &fit.inliers);
    Ok(fit)
}

/// Parabola through three points via divided differences.
fn interpolate(p: [(f64, f64); 3]) -> Option<(f64, f64, f64)> {
    let [(t0, y0), (t1, y1), (t2, y2)] = p;
    if t0 == t1 || t1 == t2 || t0 == t2 {
        return None;
    }
    let d01 = (y1 - y0) / (t1 - t0);
    let d12 = (y2 - y1) / (t2 - t1);
    let c2 = (d12 - d01) / (t2 - t0);
    let c1 = d01 - c2 * (t0 + t1);
    let c0 = y0 - (c2 * t0 + c1) * t0;
    [c2, c1, c0]
        .iter()
        .all(|v| v.is_finite())
        .then_some((c2, c1, c0))
}

/// Peak-to-end estimate `a = 2·(y_peak - y_end) / Δt²` with
/// `Δt = (end - peak) / fps`. Positive for a downward fall.
///
/// Biased when the true apex falls between samples.
pub fn acceleration_distance_based(
    traj: &Trajectory2D,
    segment: &FlightSegment,
    fps: f64,
) -> Result<f64, FitError> {
    let (m, e) = (segment.peak, segment.end);
    if e <= m {
        return Err(FitError::ZeroDuration);
    }
    let ym = traj.y(m).ok_or(FitError::InvalidSample(m))?;
    let ye = traj.y(e).ok_or(FitError::InvalidSample(e))?;
    let dt = (e - m) as f64 / fps;
    Ok(2.0 * (ym - ye) / (dt * dt))
}

/// A trajectory rotated about the image origin, with the angle applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotated {
    pub trajectory: Trajectory2D,
    /// Counter-clockwise rotation in radians.
    pub angle: f64,
}

/// Angle that turns the segment's fitted 2D acceleration `(2·c2x, 2·c2y)`
/// onto the negative vertical axis.
pub fn max_acceleration_angle(traj: &Trajectory2D, segment: &FlightSegment) -> Result<f64, FitError> {
    let fx = fit_parabola_lsq(&traj.horizontal_samples(segment.start, segment.end))?;
    let fy = fit_parabola_lsq(&traj.vertical_samples(segment.start, segment.end))?;
    let (ax, ay) = (fx.acceleration(), fy.acceleration());
    if ax == 0.0 && ay == 0.0 {
        return Err(FitError::NoAcceleration);
    }
    let mut angle = -0.5 * PI - ay.atan2(ax);
    if angle <= -PI {
        angle += 2.0 * PI;
    } else if angle > PI {
        angle -= 2.0 * PI;
    }
    Ok(angle)
}

/// Rotates the whole trajectory so that gravity on `segment` points straight
/// down.
pub fn rotate_to_max_acceleration(
    traj: &Trajectory2D,
    segment: &FlightSegment,
) -> Result<Rotated, FitError> {
    let angle = max_acceleration_angle(traj, segment)?;
    let trajectory = if angle == 0.0 {
        traj.clone()
    } else {
        traj.rotated(angle)
    };
    Ok(Rotated { trajectory, angle })
}
