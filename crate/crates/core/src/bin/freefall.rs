//! `freefall` command-line interface.
//!
//! Exit codes: 0 success, 2 usage error, 3 unreadable input format,
//! 4 no flight detected, 5 file I/O failure, 6 invalid configuration or
//! scene, 7 any other estimation failure.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use serde::Serialize;
use thiserror::Error;

use freefall::config::{ConfigError, RunConfig};
use freefall::estimate::{estimate_height, estimate_rigid_size, AccelerationMethod, EstimateError};
use freefall::events::SegmentMode;
use freefall::io::{self, BallTrack, ParseError};
use freefall::report;
use freefall::sim::{
    self, corrupt, generate_ball, generate_jumper, scene_camera, BallScene, CameraKind, CameraModel,
    Corruption, ImageFrame, JumperScene, SimError, Truth, TABLE_FOCAL_PX,
};

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}: no ball diameter detected in any frame")]
    NoDiameter(PathBuf),
}

impl CliError {
    fn name(&self) -> &'static str {
        match self {
            Self::Parse { .. } => "ParseError",
            Self::Estimate(e) => e.name(),
            Self::Io { .. } => "IoError",
            Self::Config(_) => "ConfigError",
            Self::Sim(_) => "InvalidScene",
            Self::NoDiameter(_) => "NoValidSamples",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Parse { source: ParseError::Io(_), .. } | Self::Io { .. } => 5,
            Self::Parse { .. } => 3,
            Self::Estimate(EstimateError::NoFlightDetected) => 4,
            Self::Config(_) | Self::Sim(_) => 6,
            Self::Estimate(_) | Self::NoDiameter(_) => 7,
        }
    }
}

#[derive(Parser)]
#[command(name = "freefall", version, about = "Metric height from video using gravity as the scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a person's height from a keypoint file.
    Estimate {
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Write the per-frame trajectory CSV here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Estimate the size of a falling rigid object from a ball file.
    Ball {
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate a synthetic keypoint or ball file with its ground truth.
    Simulate {
        #[command(subcommand)]
        scene: SimScene,
    },
    /// Height error matrix of the pipeline over approach angle and distance.
    Table {
        #[arg(long, value_enum, default_value_t = CameraArg::Perspective)]
        camera: CameraArg,
        /// Write the matrix as CSV here; the text summary still goes to stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    CurveFit,
    DistanceBased,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    OnSpot,
    Lateral,
}

#[derive(Clone, Copy, ValueEnum)]
enum CameraArg {
    Perspective,
    ScaledOrthographic,
    Affine,
}

impl From<CameraArg> for CameraKind {
    fn from(c: CameraArg) -> Self {
        match c {
            CameraArg::Perspective => CameraKind::Perspective,
            CameraArg::ScaledOrthographic => CameraKind::ScaledOrthographic,
            CameraArg::Affine => CameraKind::Affine,
        }
    }
}

/// Pipeline flags; each one overrides the config file.
#[derive(Args)]
struct RunArgs {
    /// TOML file with any subset of the run settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Fit each segment with RANSAC.
    #[arg(long)]
    ransac: bool,
    #[arg(long)]
    ransac_iterations: Option<usize>,
    /// Inlier tolerance, px.
    #[arg(long)]
    ransac_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    conf_threshold: Option<f64>,
    /// Flight threshold as a fraction of the peak height above the floor.
    #[arg(long)]
    fraction: Option<f64>,
    /// Total height over nose-to-ankle span.
    #[arg(long = "c")]
    correction_c: Option<f64>,
    /// Gravity, m/s².
    #[arg(long = "g")]
    gravity: Option<f64>,
    #[arg(long)]
    mass_table: Option<PathBuf>,
    /// Align the fitted acceleration with the image vertical first.
    #[arg(long)]
    rotate: bool,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    /// `base`, then the config file, then the flags.
    fn resolve(&self, base: RunConfig) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => base.overlay_file(path)?,
            None => base,
        };
        if let Some(v) = self.fps {
            cfg.fps = Some(v);
        }
        if let Some(m) = self.method {
            cfg.method = match m {
                MethodArg::CurveFit => AccelerationMethod::CurveFit,
                MethodArg::DistanceBased => AccelerationMethod::DistanceBased,
            };
        }
        if let Some(m) = self.mode {
            cfg.segment_mode = match m {
                ModeArg::OnSpot => SegmentMode::OnSpot,
                ModeArg::Lateral => SegmentMode::Lateral,
            };
        }
        cfg.ransac |= self.ransac;
        cfg.rotate |= self.rotate;
        if let Some(v) = self.ransac_iterations {
            cfg.ransac_iterations = v;
        }
        if let Some(v) = self.ransac_tol {
            cfg.ransac_tolerance = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.conf_threshold {
            cfg.conf_threshold = v;
        }
        if let Some(v) = self.fraction {
            cfg.fraction = v;
        }
        if let Some(v) = self.correction_c {
            cfg.correction_c = v;
        }
        if let Some(v) = self.gravity {
            cfg.gravity = v;
        }
        if let Some(p) = &self.mass_table {
            cfg.mass_table = Some(p.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum SimScene {
    /// A person jumping, rendered as COCO-17 keypoints.
    Jumper(JumperArgs),
    /// A ball dropped from rest and bouncing.
    Ball(BallArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Preset {
    /// On-spot jumps with a countermovement.
    OnSpot,
    /// One 1 m long, 15 cm high jump of a 1.8 m person at 30 fps.
    ReferenceJump,
}

#[derive(Args)]
struct CameraArgs {
    #[arg(long, value_enum, default_value_t = CameraArg::Perspective)]
    camera: CameraArg,
    /// Focal length, px.
    #[arg(long, default_value_t = TABLE_FOCAL_PX)]
    focal: f64,
    /// Height of the optical center above the ground, m.
    #[arg(long, default_value_t = sim::DEFAULT_CAMERA_HEIGHT)]
    camera_height: f64,
}

#[derive(Args)]
struct JumperArgs {
    #[arg(long, value_enum, default_value_t = Preset::OnSpot)]
    preset: Preset,
    /// Person height, m.
    #[arg(long)]
    height: Option<f64>,
    /// Rise of the body during flight, m.
    #[arg(long)]
    jump_height: Option<f64>,
    /// Horizontal travel per jump, m.
    #[arg(long)]
    jump_length: Option<f64>,
    #[arg(long)]
    jumps: Option<usize>,
    /// Jump direction, degrees from the image plane.
    #[arg(long)]
    angle: Option<f64>,
    /// Standing depth, m.
    #[arg(long, default_value_t = 4.0)]
    distance: f64,
    #[arg(long)]
    fps: Option<f64>,
    /// Countermovement depth, m.
    #[arg(long)]
    crouch: Option<f64>,
    /// Standing time before the first jump, s.
    #[arg(long)]
    stance: Option<f64>,
    #[command(flatten)]
    camera: CameraArgs,
    /// Gaussian keypoint noise, px.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Fraction of keypoints replaced by outliers.
    #[arg(long, default_value_t = 0.0)]
    outlier_rate: f64,
    /// Outlier displacement, px.
    #[arg(long, default_value_t = 50.0)]
    outlier_magnitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keypoint file to write.
    #[arg(long)]
    out: PathBuf,
    /// JSON ground-truth sidecar to write.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct BallArgs {
    /// Ball diameter, m.
    #[arg(long, default_value_t = BallScene::default().diameter)]
    diameter: f64,
    /// Height of the ball center at release, m.
    #[arg(long, default_value_t = BallScene::default().drop_height)]
    drop_height: f64,
    #[arg(long, default_value_t = BallScene::default().distance)]
    distance: f64,
    #[arg(long, default_value_t = BallScene::default().fps)]
    fps: f64,
    /// Clip length, s.
    #[arg(long, default_value_t = BallScene::default().duration)]
    duration: f64,
    #[arg(long, default_value_t = BallScene::default().restitution)]
    restitution: f64,
    #[command(flatten)]
    camera: CameraArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Serialize)]
struct JumperSidecar<'a> {
    scene: &'a JumperScene,
    camera: &'a CameraModel,
    corruption: &'a Corruption,
    seed: u64,
    truth: &'a Truth,
}

#[derive(Serialize)]
struct BallSidecar<'a> {
    scene: &'a BallScene,
    camera: &'a CameraModel,
    diameter_true: f64,
    q_true: f64,
    contact_times: &'a [f64],
    apex_times: &'a [f64],
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => write_file(path, text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("sidecar serializes");
    s.push('\n');
    s
}

fn cmd_estimate(input: &Path, run: &RunArgs, plot: Option<&Path>) -> Result<(), CliError> {
    let cfg = run.resolve(RunConfig::default())?;
    let masses = cfg.load_mass_table()?;
    let file = io::read_keypoints(open(input)?, cfg.fps).map_err(|source| CliError::Parse {
        path: input.to_path_buf(),
        source,
    })?;
    let est = estimate_height(&file.pose, &masses, &cfg.estimate_config())?;
    if let Some(path) = plot {
        write_file(path, &report::trajectory_csv(&est.trajectory, &est.per_segment))?;
    }
    let text = report::render_height_report(
        &input.display().to_string(),
        &cfg,
        file.pose.len(),
        file.pose.fps(),
        &est,
    );
    emit(run.output.as_deref(), &text)
}

/// Bouncing objects are not resting during the opening frames, so arcs are
/// cut with the lateral rule unless configured otherwise.
fn cmd_ball(input: &Path, run: &RunArgs) -> Result<(), CliError> {
    let base = RunConfig {
        segment_mode: SegmentMode::Lateral,
        ..RunConfig::default()
    };
    let cfg = run.resolve(base)?;
    let track = io::read_ball(open(input)?, cfg.fps).map_err(|source| CliError::Parse {
        path: input.to_path_buf(),
        source,
    })?;
    let size_px = track.diameter_px().ok_or_else(|| CliError::NoDiameter(input.to_path_buf()))?;
    let traj = track.center_trajectory().map_err(EstimateError::from)?;
    let est = estimate_rigid_size(&traj, size_px, track.fps, &cfg.estimate_config())?;
    let text = report::render_size_report(
        &input.display().to_string(),
        &cfg,
        track.centers.len(),
        track.fps,
        &est,
    );
    emit(run.output.as_deref(), &text)
}

fn cmd_simulate_jumper(a: &JumperArgs) -> Result<(), CliError> {
    let mut scene = match a.preset {
        Preset::OnSpot => JumperScene::on_spot(1.8, 0.3, 3, a.distance, 30.0),
        Preset::ReferenceJump => JumperScene::reference_jump(a.distance, 0.0),
    };
    scene.person_height = a.height.unwrap_or(scene.person_height);
    scene.jump_height = a.jump_height.unwrap_or(scene.jump_height);
    scene.jump_length = a.jump_length.unwrap_or(scene.jump_length);
    scene.jumps = a.jumps.unwrap_or(scene.jumps);
    scene.approach_angle_deg = a.angle.unwrap_or(scene.approach_angle_deg);
    scene.fps = a.fps.unwrap_or(scene.fps);
    scene.crouch_depth = a.crouch.unwrap_or(scene.crouch_depth);
    scene.stance_s = a.stance.unwrap_or(scene.stance_s);
    scene.camera_height = a.camera.camera_height;
    scene.validate()?;
    scene.duration = scene.required_duration();

    let camera = scene_camera(&scene, a.camera.camera.into(), a.camera.focal);
    let image = ImageFrame::default();
    let clean = generate_jumper(&scene)?.render(&camera, &image)?;
    let corruption = Corruption {
        noise_sigma: a.noise,
        outlier_rate: a.outlier_rate,
        outlier_magnitude: a.outlier_magnitude,
        outlier_score: None,
    };
    let seq = corrupt(&clean, &corruption, a.seed)?;
    write_file(&a.out, &io::write_keypoints(&seq.pose, Some(image.width)))?;
    if let Some(path) = &a.truth {
        let sidecar = JumperSidecar {
            scene: &scene,
            camera: &camera,
            corruption: &corruption,
            seed: a.seed,
            truth: &seq.truth,
        };
        write_file(path, &to_json(&sidecar))?;
    }
    Ok(())
}

fn cmd_simulate_ball(a: &BallArgs) -> Result<(), CliError> {
    let scene = BallScene {
        diameter: a.diameter,
        drop_height: a.drop_height,
        distance: a.distance,
        fps: a.fps,
        duration: a.duration,
        restitution: a.restitution,
        camera_height: a.camera.camera_height,
    };
    let camera = CameraModel::of_kind(a.camera.camera.into(), a.camera.focal, scene.distance)
        .with_center(Vector3::new(0.0, scene.camera_height, 0.0));
    let image = ImageFrame::default();
    let ball = generate_ball(&scene, &camera, &image)?;
    let track = BallTrack {
        fps: ball.fps,
        image_height: image.height,
        image_width: Some(image.width),
        centers: ball.centers_px.iter().map(|&c| Some(c)).collect(),
        diameters: ball.diameters_px.iter().map(|&d| Some(d)).collect(),
    };
    write_file(&a.out, &io::write_ball(&track))?;
    if let Some(path) = &a.truth {
        let sidecar = BallSidecar {
            scene: &scene,
            camera: &camera,
            diameter_true: ball.diameter_true,
            q_true: ball.q_true,
            contact_times: &ball.track.contact_times,
            apex_times: &ball.track.apex_times,
        };
        write_file(path, &to_json(&sidecar))?;
    }
    Ok(())
}

fn cmd_table(camera: CameraArg, csv: Option<&Path>) -> Result<(), CliError> {
    let table = sim::reference_error_table(camera.into())?;
    if let Some(path) = csv {
        write_file(path, &report::table_csv(&table))?;
    }
    emit(None, &report::render_table(&table))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate { input, run, plot } => cmd_estimate(&input, &run, plot.as_deref()),
        Command::Ball { input, run } => cmd_ball(&input, &run),
        Command::Simulate { scene: SimScene::Jumper(a) } => cmd_simulate_jumper(&a),
        Command::Simulate { scene: SimScene::Ball(a) } => cmd_simulate_ball(&a),
        Command::Table { camera, csv } => cmd_table(camera, csv.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(e.exit_code())
        }
    }
}
