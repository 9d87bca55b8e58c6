use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector6};

use super::{GeometryError, Pose, Result};

/// Tangent-space coordinates of SE(3): rotational part (radians) first,
/// translational part (meters) second.
pub type Twist = Vector6<f64>;

/// Builds a twist from its rotational and translational parts.
pub fn twist(rot: Vector3<f64>, trans: Vector3<f64>) -> Twist {
    Vector6::new(rot.x, rot.y, rot.z, trans.x, trans.y, trans.z)
}

pub fn rot_part(xi: &Twist) -> Vector3<f64> {
    Vector3::new(xi[0], xi[1], xi[2])
}

pub fn trans_part(xi: &Twist) -> Vector3<f64> {
    Vector3::new(xi[3], xi[4], xi[5])
}

fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

// Below this angle the closed-form coefficients lose precision and the
// series expansions are exact to double precision.
const SMALL_ANGLE: f64 = 1e-5;

/// How close to pi the rotation angle may get before the log map is rejected.
pub const LOG_BRANCH_TOL: f64 = 1e-9;

/// Exponential map se(3) -> SE(3).
pub fn se3_exp(xi: &Twist) -> Pose {
    let w = rot_part(xi);
    let v = trans_part(xi);
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();

    let (rotation, b, c);
    if theta < SMALL_ANGLE {
        // exp via quaternion series: q = (cos(t/2), sinc(t/2)/2 * w)
        let real = 1.0 - theta2 / 8.0 + theta2 * theta2 / 384.0;
        let imag = 0.5 - theta2 / 48.0 + theta2 * theta2 / 3840.0;
        rotation = UnitQuaternion::new_normalize(Quaternion::from_parts(real, imag * w));
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
        c = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
    } else {
        let half = 0.5 * theta;
        rotation = UnitQuaternion::new_normalize(Quaternion::from_parts(
            half.cos(),
            (half.sin() / theta) * w,
        ));
        b = (1.0 - theta.cos()) / theta2;
        c = (theta - theta.sin()) / (theta2 * theta);
    }
    let omega = hat(&w);
    let v_mat = Matrix3::identity() + b * omega + c * (omega * omega);
    Pose::new(rotation, v_mat * v)
}

/// Logarithm map SE(3) -> se(3).
///
/// Errors when the rotation angle is within [`LOG_BRANCH_TOL`] of pi, where
/// the log map is two-valued.
pub fn se3_log(p: &Pose) -> Result<Twist> {
    // Canonical quaternion with non-negative scalar part so theta in [0, pi].
    let q = p.rotation.into_inner();
    let q = if q.w < 0.0 { -q } else { q };
    let im = Vector3::new(q.i, q.j, q.k);
    let im_norm = im.norm();
    let theta = 2.0 * im_norm.atan2(q.w);

    if (std::f64::consts::PI - theta).abs() < LOG_BRANCH_TOL {
        return Err(GeometryError::LogBranchAmbiguity {
            angle: theta,
            tol: LOG_BRANCH_TOL,
        });
    }

    let w = if im_norm < 1e-12 {
        // theta/sin(theta/2) -> 2 as theta -> 0
        im * (2.0 / q.w)
    } else {
        im * (theta / im_norm)
    };

    let theta2 = theta * theta;
    let d = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    } else {
        // (1 - theta*sin/(2*(1-cos))) / theta^2
        (1.0 - theta * theta.sin() / (2.0 * (1.0 - theta.cos()))) / theta2
    };
    let omega = hat(&w);
    let v_inv = Matrix3::identity() - 0.5 * omega + d * (omega * omega);
    Ok(twist(w, v_inv * p.translation))
}
