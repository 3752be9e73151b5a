//! Free-fall kinematics and the pixel-to-meter conversion.
//!
//! Under a scaled-orthographic (or any affine) camera, the image of a body in
//! free fall is again a parabola. Its vertical image acceleration `a_px`
//! relates to gravity through a single factor `q = g / a_px` (meters per
//! pixel), which converts vertical pixel extents at the same depth into
//! meters.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity used unless overridden, in m/s².
pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Ratio between full standing height and the nose-to-ankle span.
pub const DEFAULT_NOSE_ANKLE_CORRECTION: f64 = 1.17;

/// Spread of [`DEFAULT_NOSE_ANKLE_CORRECTION`] across subjects. Reported as a
/// systematic uncertainty, never propagated into estimates.
pub const NOSE_ANKLE_CORRECTION_SD: f64 = 0.03;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("image acceleration {0} px/s² is not positive; no measurable gravity")]
    NonPositiveAcceleration(f64),
    #[error("gravity magnitude {0} m/s² must be positive and finite")]
    InvalidGravity(f64),
    #[error("pixel height {0} must be positive and finite")]
    InvalidPixelHeight(f64),
    #[error("height correction factor {0} must be positive and finite")]
    InvalidCorrection(f64),
}

/// Initial state and constant acceleration of a body in free fall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeFallParams {
    pub p0: Vector3<f64>,
    pub v0: Vector3<f64>,
    /// Gravity vector: direction times magnitude, m/s².
    pub gravity: Vector3<f64>,
}

impl FreeFallParams {
    /// Body released from `p0` with velocity `v0` under standard gravity
    /// pointing along -Y.
    pub fn new(p0: Vector3<f64>, v0: Vector3<f64>) -> Self {
        Self {
            p0,
            v0,
            gravity: Vector3::new(0.0, -DEFAULT_GRAVITY, 0.0),
        }
    }

    pub fn with_gravity(mut self, gravity: Vector3<f64>) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        free_fall_position(self, t)
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        self.gravity * t + self.v0
    }
}

/// `p(t) = ½·g·t² + v0·t + p0`.
pub fn free_fall_position(params: &FreeFallParams, t: f64) -> Vector3<f64> {
    params.gravity * (0.5 * t * t) + params.v0 * t + params.p0
}

/// Meters-per-pixel factor derived from a measured vertical image
/// acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConversionFactor {
    /// Meters per pixel.
    pub q: f64,
    /// Gravity-induced vertical image acceleration, px/s², positive.
    pub a_px: f64,
    /// Gravity magnitude the factor was derived with, m/s².
    pub g: f64,
}

impl ConversionFactor {
    /// Recomputes `g / a_px`; must agree with the stored `q`.
    pub fn recompute(&self) -> f64 {
        self.g / self.a_px
    }
}

/// `q = g / a_px`.
///
/// `a_px` must already be sign-normalized so that acceleration towards the
/// floor is positive.
pub fn conversion_factor(a_px: f64, g: f64) -> Result<ConversionFactor, PhysicsError> {
    if !(g.is_finite() && g > 0.0) {
        return Err(PhysicsError::InvalidGravity(g));
    }
    if !(a_px.is_finite() && a_px > 0.0) {
        return Err(PhysicsError::NonPositiveAcceleration(a_px));
    }
    Ok(ConversionFactor {
        q: g / a_px,
        a_px,
        g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeightKind {
    /// Full head-to-heel extent.
    TotalPx,
    /// Nose-to-ankle extent; needs the correction factor to reach full height.
    NoseAnklePx,
}

/// A vertical pixel extent measured at the depth of the falling body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightMeasurement {
    h_px: f64,
    kind: HeightKind,
    correction_c: f64,
}

impl HeightMeasurement {
    pub fn total(h_px: f64) -> Result<Self, PhysicsError> {
        Self::new(h_px, HeightKind::TotalPx, DEFAULT_NOSE_ANKLE_CORRECTION)
    }

    pub fn nose_ankle(h_px: f64, correction_c: f64) -> Result<Self, PhysicsError> {
        Self::new(h_px, HeightKind::NoseAnklePx, correction_c)
    }

    pub fn new(h_px: f64, kind: HeightKind, correction_c: f64) -> Result<Self, PhysicsError> {
        if !(h_px.is_finite() && h_px > 0.0) {
            return Err(PhysicsError::InvalidPixelHeight(h_px));
        }
        if !(correction_c.is_finite() && correction_c > 0.0) {
            return Err(PhysicsError::InvalidCorrection(correction_c));
        }
        Ok(Self {
            h_px,
            kind,
            correction_c,
        })
    }

    pub fn h_px(&self) -> f64 {
        self.h_px
    }

    pub fn kind(&self) -> HeightKind {
        self.kind
    }

    pub fn correction_c(&self) -> f64 {
        self.correction_c
    }
}

/// `h = h_px·q`, times the correction factor for nose-to-ankle measurements.
pub fn pixel_to_metric_height(m: &HeightMeasurement, q: &ConversionFactor) -> f64 {
    match m.kind {
        HeightKind::TotalPx => m.h_px * q.q,
        HeightKind::NoseAnklePx => m.h_px * q.q * m.correction_c,
    }
}
