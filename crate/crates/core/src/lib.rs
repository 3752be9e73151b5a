//! Metric height estimation from monocular video, using gravity as the
//! scale reference.
//!
//! A body in free fall follows a parabola whose image-space curvature is
//! proportional to `g`. Measuring that curvature in pixels per second
//! squared yields a meters-per-pixel factor `q = g / a_px` that converts any
//! vertical image extent of the falling object into meters, without camera
//! calibration.
//!
//! The crate is organized as a pipeline:
//!
//! * [`com`] turns per-frame keypoints into a center-of-mass trajectory,
//! * [`events`] finds the free-fall segments of that trajectory,
//! * [`fit`] estimates the image acceleration on each segment,
//! * [`physics`] converts accelerations and pixel extents to meters,
//! * [`estimate`] orchestrates the above and aggregates across jumps,
//! * [`sim`] generates synthetic scenes with known ground truth,
//! * [`io`] and [`config`] hold the file formats and run configuration
//!   used by the `freefall` binary.

pub mod com;
pub mod config;

pub mod estimate;
pub mod events;
pub mod fit;
pub mod io;

pub mod physics;
pub mod report;

pub mod sim;
pub mod stats;

pub use com::{KeypointFrame, MassTable, PoseSequence, Sample, Trajectory2D};
pub use estimate::{
    compute_error_report, estimate_height, estimate_rigid_size, ErrorReport, EstimateConfig,
    EstimateError, HeightEstimate,
};
pub use events::FlightSegment;
pub use fit::ParabolaFit;
pub use physics::{ConversionFactor, FreeFallParams, HeightKind, HeightMeasurement};
