//! Line-delimited JSON formats read and written by the `freefall` binary.
//!
//! Keypoint files start with a header line
//!
//! ```text
//! {"format":"freefall-keypoints","version":1,"fps":30.0,"image_width":1920.0,"image_height":1080.0,"joint_count":17}
//! ```
//!
//! followed by one line per frame, frames numbered contiguously from zero:
//!
//! ```text
//! {"frame":0,"persons":[{"keypoints":[x0,y0,s0,x1,y1,s1,...]}]}
//! ```
//!
//! Coordinates are image pixels with rows growing downward; joints follow the
//! COCO-17 order (nose first, ankles last). A frame with no person is a
//! missed detection; with several, the largest bounding box is kept. `fps`
//! may be omitted or null when the caller supplies it.
//!
//! Ball files use the same layout with `"format":"freefall-ball"` and frame
//! lines `{"frame":0,"center":[x,y],"diameter":d}`, where `center` and
//! `diameter` may be null for a missed detection.

use std::io::BufRead;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::com::{select_primary_person, ComError, KeypointFrame, PoseSequence, Trajectory2D};
use crate::stats::median;

pub const KEYPOINT_FORMAT: &str = "freefall-keypoints";
pub const BALL_FORMAT: &str = "freefall-ball";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("input is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("line {line}: expected format `{expected}`, found `{found}`")]
    WrongFormat {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: unsupported version {found}")]
    UnsupportedVersion { line: usize, found: u32 },
    #[error("line {line}: expected frame {expected}, found {found}")]
    FrameOrder {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: expected {expected} keypoint values, found {found}")]
    KeypointCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {field} must be positive and finite")]
    InvalidValue { line: usize, field: &'static str },
    #[error(transparent)]
    Invalid(#[from] ComError),
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joint_count: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Person {
    keypoints: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    frame: usize,
    persons: Vec<Person>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BallRecord {
    frame: usize,
    center: Option<[f64; 2]>,
    diameter: Option<f64>,
}

/// A parsed keypoint file.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointFile {
    pub pose: PoseSequence,
    pub image_width: Option<f64>,
}

fn non_empty_lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
}

fn parse_line<T: for<'de> Deserialize<'de>>(line: usize, text: &str) -> Result<T, ParseError> {
    serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        // serde reports absent fields as "missing field `name`"
        match message.split('`').nth(1) {
            Some(field) if message.starts_with("missing field") => ParseError::MissingField {
                line,
                field: field.to_string(),
            },
            _ => ParseError::Syntax { line, message },
        }
    })
}

fn read_header<I>(lines: &mut I, expected: &'static str) -> Result<(usize, Header), ParseError>
where
    I: Iterator<Item = (usize, std::io::Result<String>)>,
{
    let (line, text) = lines.next().ok_or(ParseError::Empty)?;
    let header: Header = parse_line(line, &text?)?;
    if header.format != expected {
        return Err(ParseError::WrongFormat {
            line,
            expected,
            found: header.format,
        });
    }
    if header.version != FORMAT_VERSION {
        return Err(ParseError::UnsupportedVersion {
            line,
            found: header.version,
        });
    }
    Ok((line, header))
}

fn positive(line: usize, field: &'static str, v: Option<f64>) -> Result<f64, ParseError> {
    let v = v.ok_or_else(|| ParseError::MissingField {
        line,
        field: field.to_string(),
    })?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ParseError::InvalidValue { line, field })
    }
}

/// Reads a keypoint file. `fps_override`, when given, replaces the header
/// frame rate (which may then be absent).
pub fn read_keypoints<R: BufRead>(reader: R, fps_override: Option<f64>) -> Result<KeypointFile, ParseError> {
    let mut lines = non_empty_lines(reader);
    let (hl, header) = read_header(&mut lines, KEYPOINT_FORMAT)?;
    let fps = positive(hl, "fps", fps_override.or(header.fps))?;
    let image_height = positive(hl, "image_height", header.image_height)?;
    let joint_count = header.joint_count.ok_or_else(|| ParseError::MissingField {
        line: hl,
        field: "joint_count".to_string(),
    })?;
    if joint_count == 0 {
        return Err(ParseError::InvalidValue { line: hl, field: "joint_count" });
    }
    let mut frames = Vec::new();
    for (line, text) in lines {
        let rec: FrameRecord = parse_line(line, &text?)?;
        if rec.frame != frames.len() {
            return Err(ParseError::FrameOrder {
                line,
                expected: frames.len(),
                found: rec.frame,
            });
        }
        let mut persons = Vec::with_capacity(rec.persons.len());
        for p in rec.persons {
            if p.keypoints.len() != 3 * joint_count {
                return Err(ParseError::KeypointCount {
                    line,
                    expected: 3 * joint_count,
                    found: p.keypoints.len(),
                });
            }
            let joints = p.keypoints.chunks(3).map(|c| Vector2::new(c[0], c[1])).collect();
            let scores = p.keypoints.chunks(3).map(|c| c[2]).collect();
            persons.push(KeypointFrame::new(joints, scores));
        }
        let frame = match select_primary_person(&persons) {
            Ok(i) => persons.swap_remove(i),
            Err(_) => KeypointFrame::missing(joint_count),
        };
        frames.push(frame);
    }
    let pose = PoseSequence::new(frames, fps, image_height, joint_count)?;
    Ok(KeypointFile {
        pose,
        image_width: header.image_width,
    })
}

pub fn parse_keypoints(text: &str, fps_override: Option<f64>) -> Result<KeypointFile, ParseError> {
    read_keypoints(text.as_bytes(), fps_override)
}

/// Serializes a sequence, one person per frame. Frames whose scores are all
/// zero are written with an empty person list.
pub fn write_keypoints(pose: &PoseSequence, image_width: Option<f64>) -> String {
    let header = Header {
        format: KEYPOINT_FORMAT.to_string(),
        version: FORMAT_VERSION,
        fps: Some(pose.fps()),
        image_width,
        image_height: Some(pose.image_height()),
        joint_count: Some(pose.joint_count()),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (i, f) in pose.frames().iter().enumerate() {
        let persons = if f.scores.iter().all(|&s| s == 0.0) {
            Vec::new()
        } else {
            let keypoints = f
                .joints
                .iter()
                .zip(&f.scores)
                .flat_map(|(p, &s)| [p.x, p.y, s])
                .collect();
            vec![Person { keypoints }]
        };
        let rec = FrameRecord { frame: i, persons };
        out.push_str(&serde_json::to_string(&rec).expect("frame serializes"));
        out.push('\n');
    }
    out
}

/// Per-frame ball detections in image pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct BallTrack {
    pub fps: f64,
    pub image_height: f64,
    pub image_width: Option<f64>,
    pub centers: Vec<Option<Vector2<f64>>>,
    pub diameters: Vec<Option<f64>>,
}

impl BallTrack {
    /// Up-positive center trajectory.
    pub fn center_trajectory(&self) -> Result<Trajectory2D, ComError> {
        let h = self.image_height;
        Trajectory2D::from_points(
            self.fps,
            self.centers.iter().map(|c| c.map(|c| Vector2::new(c.x, h - c.y))).collect(),
        )
    }

    /// Median detected diameter, px.
    pub fn diameter_px(&self) -> Option<f64> {
        let d: Vec<f64> = self.diameters.iter().flatten().copied().collect();
        median(&d)
    }
}

pub fn read_ball<R: BufRead>(reader: R, fps_override: Option<f64>) -> Result<BallTrack, ParseError> {
    let mut lines = non_empty_lines(reader);
    let (hl, header) = read_header(&mut lines, BALL_FORMAT)?;
    let fps = positive(hl, "fps", fps_override.or(header.fps))?;
    let image_height = positive(hl, "image_height", header.image_height)?;
    let mut track = BallTrack {
        fps,
        image_height,
        image_width: header.image_width,
        centers: Vec::new(),
        diameters: Vec::new(),
    };
    for (line, text) in lines {
        let rec: BallRecord = parse_line(line, &text?)?;
        if rec.frame != track.centers.len() {
            return Err(ParseError::FrameOrder {
                line,
                expected: track.centers.len(),
                found: rec.frame,
            });
        }
        if rec.diameter.is_some_and(|d| !(d.is_finite() && d > 0.0)) {
            return Err(ParseError::InvalidValue { line, field: "diameter" });
        }
        track.centers.push(rec.center.map(|[x, y]| Vector2::new(x, y)));
        track.diameters.push(rec.diameter);
    }
    Ok(track)
}

pub fn parse_ball(text: &str, fps_override: Option<f64>) -> Result<BallTrack, ParseError> {
    read_ball(text.as_bytes(), fps_override)
}

pub fn write_ball(track: &BallTrack) -> String {
    let header = Header {
        format: BALL_FORMAT.to_string(),
        version: FORMAT_VERSION,
        fps: Some(track.fps),
        image_width: track.image_width,
        image_height: Some(track.image_height),
        joint_count: None,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (i, (c, d)) in track.centers.iter().zip(&track.diameters).enumerate() {
        let rec = BallRecord {
            frame: i,
            center: c.map(|c| [c.x, c.y]),
            diameter: *d,
        };
        out.push_str(&serde_json::to_string(&rec).expect("frame serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(fps: &str) -> String {
        format!(
            "{{\"format\":\"freefall-keypoints\",\"version\":1,{fps}\"image_height\":100.0,\"joint_count\":2}}\n"
        )
    }

    #[test]
    fn empty_input() {
        assert!(matches!(parse_keypoints("", None), Err(ParseError::Empty)));
        assert!(matches!(parse_keypoints("\n\n", None), Err(ParseError::Empty)));
    }

    #[test]
    fn missing_fps_names_the_field() {
        let text = header("");
        match parse_keypoints(&text, None) {
            Err(e @ ParseError::MissingField { .. }) => {
                assert_eq!(e.to_string(), "line 1: missing field `fps`")
            }
            other => panic!("unexpected {other:?}"),
        }
        let ok = parse_keypoints(&text, Some(25.0)).unwrap();
        assert_eq!(ok.pose.fps(), 25.0);
        assert!(parse_keypoints(&header("\"fps\":null,"), None).is_err());
    }

    #[test]
    fn frames_and_persons() {
        let mut text = header("\"fps\":30.0,");
        text += "{\"frame\":0,\"persons\":[{\"keypoints\":[0,0,1,1,1,1]},{\"keypoints\":[0,0,1,10,10,1]}]}\n";
        text += "{\"frame\":1,\"persons\":[]}\n";
        let f = parse_keypoints(&text, None).unwrap();
        assert_eq!(f.pose.len(), 2);
        assert_eq!(f.pose.frames()[0].joints[1], Vector2::new(10.0, 10.0));
        assert_eq!(f.pose.frames()[1].scores, vec![0.0, 0.0]);
        let back = parse_keypoints(&write_keypoints(&f.pose, None), None).unwrap();
        assert_eq!(back.pose, f.pose);
    }

    #[test]
    fn malformed_frames() {
        let base = header("\"fps\":30.0,");
        let gap = base.clone() + "{\"frame\":1,\"persons\":[]}\n";
        assert!(matches!(
            parse_keypoints(&gap, None),
            Err(ParseError::FrameOrder { expected: 0, found: 1, .. })
        ));
        let short = base.clone() + "{\"frame\":0,\"persons\":[{\"keypoints\":[1,2,3]}]}\n";
        assert!(matches!(
            parse_keypoints(&short, None),
            Err(ParseError::KeypointCount { expected: 6, found: 3, .. })
        ));
        let junk = base + "{frame:0}\n";
        assert!(matches!(parse_keypoints(&junk, None), Err(ParseError::Syntax { line: 2, .. })));
        let wrong = "{\"format\":\"other\",\"version\":1}\n";
        assert!(matches!(parse_keypoints(wrong, None), Err(ParseError::WrongFormat { .. })));
    }

    #[test]
    fn ball_round_trip() {
        let track = BallTrack {
            fps: 120.0,
            image_height: 1080.0,
            image_width: Some(1920.0),
            centers: vec![Some(Vector2::new(1.5, 2.25)), None],
            diameters: vec![Some(36.5), None],
        };
        let back = parse_ball(&write_ball(&track), None).unwrap();
        assert_eq!(back, track);
        assert_eq!(back.diameter_px(), Some(36.5));
    }
}
