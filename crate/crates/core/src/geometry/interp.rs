use nalgebra::{Quaternion, UnitQuaternion};

use super::Pose;

/// Shortest-path spherical linear interpolation between unit quaternions.
///
/// Falls back to normalized linear interpolation when the quaternions are
/// nearly parallel, where the slerp formula loses precision.
pub fn slerp(q0: &UnitQuaternion<f64>, q1: &UnitQuaternion<f64>, alpha: f64) -> UnitQuaternion<f64> {
    let a = q0.into_inner();
    let mut b = q1.into_inner();
    let mut dot = a.dot(&b);
    if dot < 0.0 {
        b = -b;
        dot = -dot;
    }
    if dot > 1.0 - 1e-12 {
        let lerped: Quaternion<f64> = a * (1.0 - alpha) + b * alpha;
        return UnitQuaternion::new_normalize(lerped);
    }
    let theta = dot.clamp(-1.0, 1.0).acos();
    let sin_theta = theta.sin();
    let w0 = ((1.0 - alpha) * theta).sin() / sin_theta;
    let w1 = (alpha * theta).sin() / sin_theta;
    UnitQuaternion::new_normalize(a * w0 + b * w1)
}

/// Piecewise-geodesic interpolation between two poses: linear in translation,
/// spherical-linear in rotation. Exact at `alpha = 0` and `alpha = 1`.
pub fn geodesic_interpolate(a: &Pose, b: &Pose, alpha: f64) -> Pose {
    if alpha == 0.0 {
        return *a;
    }
    if alpha == 1.0 {
        return *b;
    }
    Pose::new(
        slerp(&a.rotation, &b.rotation, alpha),
        a.translation * (1.0 - alpha) + b.translation * alpha,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn translation_midpoint() {
        let a = Pose::from_translation(0.0, 0.0, 0.0);
        let b = Pose::from_translation(2.0, 0.0, 0.0);
        let m = geodesic_interpolate(&a, &b, 0.5);
        assert_relative_eq!(m.translation, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        assert!(m.rotation_angle() < 1e-15);
    }

    #[test]
    fn rotation_midpoint_is_half_angle() {
        let a = Pose::identity();
        let b = Pose::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2),
            Vector3::zeros(),
        );
        let m = geodesic_interpolate(&a, &b, 0.5);
        let expected = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2 / 2.0);
        assert!(m.rotation.angle_to(&expected) < 1e-12);
    }

    #[test]
    fn endpoints_bit_exact() {
        let a = Pose::new(
            UnitQuaternion::from_euler_angles(0.3, -0.1, 0.9),
            Vector3::new(1.0, 2.0, 3.0),
        );
        let b = Pose::new(
            UnitQuaternion::from_euler_angles(-0.2, 0.5, 0.1),
            Vector3::new(-1.0, 0.0, 4.0),
        );
        assert_eq!(geodesic_interpolate(&a, &b, 0.0).translation, a.translation);
        assert_eq!(geodesic_interpolate(&a, &b, 1.0).translation, b.translation);
        assert_eq!(
            geodesic_interpolate(&a, &b, 0.0).rotation.into_inner(),
            a.rotation.into_inner()
        );
    }

    #[test]
    fn slerp_handles_antipodal_representation() {
        let q0 = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.1);
        let q1_neg =
            UnitQuaternion::new_normalize(-UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.3).into_inner());
        let m = slerp(&q0, &q1_neg, 0.5);
        let expected = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.2);
        assert!(m.angle_to(&expected) < 1e-12);
    }
}
