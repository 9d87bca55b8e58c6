//! Pipeline configuration: one options file covers the simulator, alignment,
//! linking, optimizer, and evaluation stages. Every tunable has a documented
//! default; a TOML file overrides only the fields it names.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pose;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Survey geometry, camera rig, measurement-noise, and fragmentation model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SurveyConfig {
    /// Imaged patch extent in meters (x by y).
    pub patch_size: [f64; 2],
    /// Spacing between boustrophedon rows in meters.
    pub row_spacing: f64,
    /// Rig speed along the survey path, m/s.
    pub speed: f64,
    /// Localization camera trajectory sample rate, Hz.
    pub loc_rate_hz: f64,
    /// Documentation keyframe rate, Hz.
    pub doc_keyframe_hz: f64,
    /// Phase offset of documentation keyframes against trajectory samples,
    /// seconds; keeps keyframe times off the interpolation knots.
    pub doc_phase_s: f64,
    /// Localization camera pitch below the horizon, degrees.
    pub loc_pitch_deg: f64,
    /// Documentation camera offset from the localization camera, expressed in
    /// the localization camera frame, meters.
    pub doc_offset_m: [f64; 3],
    /// Optional explicit rig extrinsic truth; when unset it is derived from
    /// `loc_pitch_deg` and `doc_offset_m` with the documentation camera
    /// looking straight down.
    pub mount: Option<Pose>,
    /// Height of the rig above the ground plane, meters.
    pub rig_height_m: f64,
    /// Ground-point density, per square meter.
    pub landmark_density: f64,
    /// Amplitude of the smooth ground height field, meters.
    pub height_amplitude_m: f64,
    /// Pixel noise sigma added to every observation, pixels.
    pub pixel_noise_px: f64,
    /// Time-sync jitter bound on keyframe time priors, seconds (must be
    /// <= 0.5).
    pub time_jitter_s: f64,
    /// Per-bit flip probability applied to observation descriptors.
    pub descriptor_flip_prob: f64,
    /// Rotation magnitude of the extrinsic-prior perturbation, degrees.
    pub extrinsic_noise_rot_deg: f64,
    /// Translation magnitude of the extrinsic-prior perturbation, meters.
    pub extrinsic_noise_trans_m: f64,
    /// Trajectory lead-in/lead-out beyond the documentation window, seconds.
    pub margin_s: f64,
    pub tracking_loss: TrackingLossConfig,
    pub fragment_corruption: FragmentCorruptionConfig,
    /// Documentation camera intrinsics.
    pub camera: CameraConfig,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        SurveyConfig {
            patch_size: [10.0, 10.0],
            row_spacing: 2.0,
            speed: 1.0,
            loc_rate_hz: 60.0,
            doc_keyframe_hz: 4.0,
            doc_phase_s: 0.0083,
            loc_pitch_deg: 25.0,
            doc_offset_m: [0.0, 0.25, -0.10],
            mount: None,
            rig_height_m: 1.5,
            landmark_density: 8.0,
            height_amplitude_m: 0.05,
            pixel_noise_px: 1.0,
            time_jitter_s: 0.2,
            descriptor_flip_prob: 0.02,
            extrinsic_noise_rot_deg: 2.0,
            extrinsic_noise_trans_m: 0.02,
            margin_s: 1.0,
            tracking_loss: TrackingLossConfig::default(),
            fragment_corruption: FragmentCorruptionConfig::default(),
            camera: CameraConfig::default(),
        }
    }
}

impl SurveyConfig {
    /// Zero measurement noise, exact priors; fragmentation and the random
    /// per-fragment similarity corruption stay on.
    pub fn noiseless(mut self) -> Self {
        self.pixel_noise_px = 0.0;
        self.time_jitter_s = 0.0;
        self.descriptor_flip_prob = 0.0;
        self.extrinsic_noise_rot_deg = 0.0;
        self.extrinsic_noise_trans_m = 0.0;
        self
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let positive = [
            ("patch_size.x", self.patch_size[0]),
            ("patch_size.y", self.patch_size[1]),
            ("row_spacing", self.row_spacing),
            ("speed", self.speed),
            ("loc_rate_hz", self.loc_rate_hz),
            ("doc_keyframe_hz", self.doc_keyframe_hz),
            ("rig_height_m", self.rig_height_m),
            ("landmark_density", self.landmark_density),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=0.5).contains(&self.time_jitter_s) {
            return Err(ConfigError::Invalid(format!(
                "time_jitter_s must lie in [0, 0.5], got {}",
                self.time_jitter_s
            )));
        }
        if !(0.0..=1.0).contains(&self.descriptor_flip_prob) {
            return Err(ConfigError::Invalid(format!(
                "descriptor_flip_prob must lie in [0, 1], got {}",
                self.descriptor_flip_prob
            )));
        }
        if self.pixel_noise_px < 0.0 {
            return Err(ConfigError::Invalid(format!(
                "pixel_noise_px must be >= 0, got {}",
                self.pixel_noise_px
            )));
        }
        if self.margin_s <= self.time_jitter_s {
            return Err(ConfigError::Invalid(format!(
                "margin_s ({}) must exceed time_jitter_s ({})",
                self.margin_s, self.time_jitter_s
            )));
        }
        self.camera.check()?;
        Ok(())
    }
}

/// Where tracking losses split the documentation keyframe stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingLossConfig {
    /// Lose tracking at every row turn.
    pub split_at_turns: bool,
    /// Expected number of additional mid-row losses per survey (Poisson).
    pub mid_row_losses_mean: f64,
    /// Split points that would leave a fragment shorter than this many
    /// keyframes are skipped.
    pub min_fragment_keyframes: usize,
}

impl Default for TrackingLossConfig {
    fn default() -> Self {
        TrackingLossConfig {
            split_at_turns: true,
            mid_row_losses_mean: 2.0,
            min_fragment_keyframes: 5,
        }
    }
}

/// The random similarity applied to each fragment so it arrives unscaled and
/// misaligned, mimicking monocular SLAM output.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FragmentCorruptionConfig {
    pub scale_range: [f64; 2],
    pub max_rotation_deg: f64,
    pub max_translation_m: f64,
}

impl Default for FragmentCorruptionConfig {
    fn default() -> Self {
        FragmentCorruptionConfig {
            scale_range: [0.2, 5.0],
            max_rotation_deg: 30.0,
            max_translation_m: 5.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            fx: 1000.0,
            fy: 1000.0,
            cx: 1024.0,
            cy: 540.0,
            width: 2048,
            height: 1080,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> crate::scene::CameraIntrinsics {
        crate::scene::CameraIntrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        }
    }

    fn check(&self) -> Result<(), ConfigError> {
        self.intrinsics()
            .check()
            .map_err(ConfigError::Invalid)
    }
}

/// Scale bootstrap, rescale, and two-step alignment parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignmentConfig {
    /// Length of the unit-axis augmentation points, meters.
    pub axis_point_length_m: f64,
    /// Motions shorter than this are a degenerate baseline, meters.
    pub min_motion_m: f64,
    /// Constant-velocity sub-map registration gives up after this many frames.
    pub constant_velocity_max_frames: u32,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            axis_point_length_m: crate::geometry::DEFAULT_AXIS_POINT_LENGTH,
            min_motion_m: 1e-6,
            constant_velocity_max_frames: 30,
        }
    }
}

/// Landmark-merge thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkingConfig {
    /// Spatial pre-filter radius around keyframe centers, meters.
    pub search_radius_m: f64,
    /// Candidates beyond this depth are not considered visible, meters.
    pub max_depth_m: f64,
    /// Reprojection gate for a candidate-to-keypoint match, pixels.
    pub pixel_threshold_px: f64,
    /// Descriptor Hamming-distance gate, bits out of 256.
    pub descriptor_threshold_bits: u32,
    /// Keyframes that must agree before two landmarks merge.
    pub min_correspondences: usize,
}

impl Default for LinkingConfig {
    fn default() -> Self {
        LinkingConfig {
            search_radius_m: 5.0,
            max_depth_m: 10.0,
            pixel_threshold_px: 4.0,
            descriptor_threshold_bits: 50,
            min_correspondences: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Squared,
    Huber,
}

/// Factor weights, robust kernels, and termination criteria for the global
/// optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Reprojection weight: identity / sigma_px^2.
    pub sigma_px: f64,
    /// Trajectory-pose factor rotation sigma, radians.
    pub sigma_rot: f64,
    /// Trajectory-pose factor translation sigma, meters.
    pub sigma_trans: f64,
    /// Time-prior sigma, seconds (half the 0.5 s sync bound).
    pub sigma_time: f64,
    /// Extrinsic-prior rotation sigma, radians.
    pub sigma_extrinsic_rot: f64,
    /// Extrinsic-prior translation sigma, meters.
    pub sigma_extrinsic_trans: f64,
    /// Huber delta for reprojection factors, in whitened residual-norm units
    /// (pixels when sigma_px = 1); default sqrt(5.99), the 95% chi-square
    /// quantile for 2 DOF.
    pub huber_delta_px: f64,
    /// Kernel for the trajectory-pose term; squared by default.
    pub pose_kernel: KernelKind,
    pub max_iterations: u32,
    /// Terminate when the relative cost decrease of an accepted step falls
    /// below this.
    pub cost_rel_tol: f64,
    /// Terminate when the gradient infinity-norm falls below this.
    pub gradient_tol: f64,
    /// Include the trajectory-pose factors (disable for ablation runs).
    pub use_trajectory_factors: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            sigma_px: 1.0,
            sigma_rot: 0.05,
            sigma_trans: 0.05,
            sigma_time: 0.25,
            sigma_extrinsic_rot: 0.02,
            sigma_extrinsic_trans: 0.01,
            huber_delta_px: 5.99f64.sqrt(),
            pose_kernel: KernelKind::Squared,
            max_iterations: 50,
            cost_rel_tol: 1e-9,
            gradient_tol: 1e-10,
            use_trajectory_factors: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackprojectionMode {
    Mean,
    Median,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    /// How per-view marker backprojections combine into one position.
    pub backprojection: BackprojectionMode,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            backprojection: BackprojectionMode::Mean,
        }
    }
}

/// The single options document ingested by every CLI subcommand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub survey: SurveyConfig,
    pub alignment: AlignmentConfig,
    pub linking: LinkingConfig,
    pub optimizer: OptimizerConfig,
    pub evaluation: EvaluationConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: PipelineConfig = toml::from_str(&text)?;
        cfg.survey.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
