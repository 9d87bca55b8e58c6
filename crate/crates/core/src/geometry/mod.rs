//! Lie-group and absolute-orientation kernel.
//!
//! Everything here is a pure function over immutable values: rigid transforms
//! on SE(3) in the camera-to-world convention, the se(3) exponential/logarithm
//! pair, closed-form similarity and rotation alignment of point sets, and
//! geodesic pose interpolation.

mod horn;
mod interp;
mod pose;
mod se3;

pub use horn::{horn_sim3, horn_sim3_lenient, horn_so3_augmented, SimilarityTransform, DEFAULT_AXIS_POINT_LENGTH};
pub use interp::{geodesic_interpolate, slerp};
pub use pose::{ExtrinsicTransform, Pose};
pub use se3::{rot_part, se3_exp, se3_log, trans_part, twist, Twist};

use thiserror::Error;

/// Errors raised by geometry kernels.
#[derive(Debug, Error)]
pub enum GeometryError {
    /// The SE(3) log map is two-valued at rotation angle pi; callers must not
    /// rely on either branch.
    #[error("se3 log-map branch ambiguity: rotation angle {angle} is within {tol} of pi")]
    LogBranchAmbiguity { angle: f64, tol: f64 },

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("source and destination point sets differ in length ({src} vs {dst})")]
    MismatchedLengths { src: usize, dst: usize },

    /// The point configuration does not pin down the transform (collinear or
    /// coincident points).
    #[error("degenerate point configuration: {0}")]
    Degenerate(String),

    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
}

pub type Result<T> = std::result::Result<T, GeometryError>;
