//! Run configuration shared by the CLI verbs.
//!
//! Values come from the built-in defaults, then an optional TOML file, then
//! command-line flags, each layer overriding the previous one.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::com::{self, MassTable};
use crate::estimate::{AccelerationMethod, EstimateConfig, DEFAULT_STANDING_FRAMES};
use crate::events::{self, DetectionOptions, SegmentMode};
use crate::fit::{self, RansacConfig};
use crate::physics;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("{field} must be {requirement}, got {value}")]
    OutOfRange {
        field: &'static str,
        requirement: &'static str,
        value: String,
    },
    #[error("mass table {path}: {message}")]
    MassTable { path: PathBuf, message: String },
}

/// Every tunable of the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Replaces the frame rate stored in the input file.
    pub fps: Option<f64>,
    pub method: AccelerationMethod,
    pub segment_mode: SegmentMode,
    pub ransac: bool,
    pub ransac_iterations: usize,
    /// px
    pub ransac_tolerance: f64,
    pub seed: u64,
    pub conf_threshold: f64,
    pub fraction: f64,
    pub peak_half_window: usize,
    pub floor_frames: usize,
    pub standing_frames: usize,
    /// Ratio of total height to nose-to-ankle span.
    pub correction_c: f64,
    /// m/s²
    pub gravity: f64,
    pub rotate: bool,
    /// Text file in the format of [`MassTable::parse`]; the built-in COCO-17
    /// table when absent.
    pub mass_table: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fps: None,
            method: AccelerationMethod::CurveFit,
            segment_mode: SegmentMode::OnSpot,
            ransac: false,
            ransac_iterations: fit::DEFAULT_RANSAC_ITERATIONS,
            ransac_tolerance: fit::DEFAULT_RANSAC_INLIER_TOL,
            seed: 0,
            conf_threshold: com::DEFAULT_CONF_THRESHOLD,
            fraction: events::DEFAULT_FLIGHT_FRACTION,
            peak_half_window: events::DEFAULT_PEAK_HALF_WINDOW,
            floor_frames: events::DEFAULT_FLOOR_FRAMES,
            standing_frames: DEFAULT_STANDING_FRAMES,
            correction_c: physics::DEFAULT_NOSE_ANKLE_CORRECTION,
            gravity: physics::DEFAULT_GRAVITY,
            rotate: false,
            mass_table: None,
        }
    }
}

fn out_of_range(field: &'static str, requirement: &'static str, value: impl ToString) -> ConfigError {
    ConfigError::OutOfRange {
        field,
        requirement,
        value: value.to_string(),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        Self::default().overlay_toml(text, origin)
    }

    /// `self` with every key present in `text` replaced.
    pub fn overlay_toml(&self, text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let syntax = |message: String| ConfigError::Syntax {
            path: origin.to_path_buf(),
            message,
        };
        let overlay: toml::Table = toml::from_str(text).map_err(|e| syntax(e.message().to_string()))?;
        let mut merged = toml::Table::try_from(self).expect("config serializes");
        merged.extend(overlay);
        merged.try_into().map_err(|e: toml::de::Error| syntax(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::default().overlay_file(path)
    }

    pub fn overlay_file(&self, path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        self.overlay_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("conf_threshold", self.conf_threshold, false),
            ("correction_c", self.correction_c, true),
            ("gravity", self.gravity, true),
            ("ransac_tolerance", self.ransac_tolerance, true),
        ];
        for (field, v, strict) in positive {
            let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
            if !ok {
                let req = if strict { "positive" } else { "nonnegative" };
                return Err(out_of_range(field, req, v));
            }
        }
        if let Some(fps) = self.fps {
            if !(fps.is_finite() && fps > 0.0) {
                return Err(out_of_range("fps", "positive", fps));
            }
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(out_of_range("fraction", "in [0, 1]", self.fraction));
        }
        let counts = [
            ("ransac_iterations", self.ransac_iterations),
            ("peak_half_window", self.peak_half_window),
            ("floor_frames", self.floor_frames),
            ("standing_frames", self.standing_frames),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(out_of_range(field, "at least 1", v));
            }
        }
        Ok(())
    }

    pub fn estimate_config(&self) -> EstimateConfig {
        EstimateConfig {
            method: self.method,
            detection: DetectionOptions {
                mode: self.segment_mode,
                half_window: self.peak_half_window,
                floor_frames: self.floor_frames,
                fraction: self.fraction,
            },
            ransac: self.ransac.then_some(RansacConfig {
                iterations: self.ransac_iterations,
                inlier_tol: self.ransac_tolerance,
                seed: self.seed,
            }),
            conf_threshold: self.conf_threshold,
            correction_c: self.correction_c,
            gravity: self.gravity,
            standing_frames: self.standing_frames,
            rotate: self.rotate,
        }
    }

    /// The configured mass table, read from disk when a path is set.
    pub fn load_mass_table(&self) -> Result<MassTable, ConfigError> {
        let Some(path) = &self.mass_table else {
            return Ok(MassTable::default_coco17());
        };
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.clone(),
            source,
        })?;
        MassTable::parse(&text).map_err(|e| ConfigError::MassTable {
            path: path.clone(),
            message: e.to_string(),
        })
    }
}
