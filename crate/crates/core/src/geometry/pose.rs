use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Rigid transform on SE(3), camera-to-world convention.
///
/// `pose.transform_point(p_cam)` maps a point from the camera frame into the
/// world frame; `pose.translation` is the camera center in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

/// Rig extrinsic: pose of one camera expressed in the frame of another.
///
/// Composes on the right of a camera-to-world pose, `x_d = x_l * t_dl`.
pub type ExtrinsicTransform = Pose;

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Camera-to-world composition `self * other`.
    ///
    /// The quaternion is renormalized after the product to bound drift over
    /// long composition chains.
    pub fn compose(&self, other: &Pose) -> Pose {
        let q =
            UnitQuaternion::new_normalize(self.rotation.into_inner() * other.rotation.into_inner());
        Pose {
            rotation: q,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.rotation.inverse();
        Pose {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// World-to-camera mapping of a world point.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Rotation angle in [0, pi].
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }

    /// Angular distance between the rotations of two poses.
    pub fn rotation_distance(&self, other: &Pose) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    /// Checks orthonormality of the rotation (unit quaternion within `tol`).
    pub fn is_valid(&self, tol: f64) -> bool {
        let n = self.rotation.into_inner().norm();
        (n - 1.0).abs() < tol && self.translation.iter().all(|v| v.is_finite())
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

// On-disk form: {"q": [w, x, y, z], "t": [x, y, z]}.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    q: [f64; 4],
    t: [f64; 3],
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let q = self.rotation.into_inner();
        PoseRepr {
            q: [q.w, q.i, q.j, q.k],
            t: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        let [w, x, y, z] = repr.q;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if norm < 1e-12 {
            return Err(serde::de::Error::custom("pose quaternion has zero norm"));
        }
        // Stored quaternions are unit-norm already; renormalizing them would
        // perturb bits and break exact round-trips.
        let rotation = if (norm - 1.0).abs() < 1e-9 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Pose {
            rotation,
            translation: Vector3::new(repr.t[0], repr.t[1], repr.t[2]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn compose_identity() {
        let p = Pose::new(
            UnitQuaternion::from_euler_angles(0.1, -0.4, 2.0),
            Vector3::new(1.0, -2.0, 0.5),
        );
        let id = Pose::identity();
        let left = id.compose(&p);
        assert_relative_eq!(left.translation, p.translation, epsilon = 1e-15);
        assert!(left.rotation_distance(&p) < 1e-15);
    }

    #[test]
    fn compose_inverse_is_identity() {
        let p = Pose::new(
            UnitQuaternion::from_euler_angles(0.7, 0.2, -1.1),
            Vector3::new(3.0, 4.0, -5.0),
        );
        let e = p.compose(&p.inverse());
        assert!(e.rotation_angle() < 1e-9);
        assert!(e.translation.norm() < 1e-9);
    }

    #[test]
    fn compose_pure_translations() {
        let a = Pose::from_translation(1.0, 0.0, 0.0);
        let b = Pose::from_translation(0.0, 2.0, 0.0);
        let c = a.compose(&b);
        assert_relative_eq!(c.translation, Vector3::new(1.0, 2.0, 0.0), epsilon = 1e-15);
        assert!(c.rotation_angle() < 1e-15);
    }

    #[test]
    fn inverse_transform_round_trip() {
        let p = Pose::new(
            UnitQuaternion::from_euler_angles(0.3, 1.0, -0.2),
            Vector3::new(0.5, 0.5, 2.0),
        );
        let x = Vector3::new(-1.0, 2.0, 3.0);
        let back = p.inverse_transform_point(&p.transform_point(&x));
        assert_relative_eq!(back, x, epsilon = 1e-12);
    }

    #[test]
    fn serde_round_trip_exact() {
        let p = Pose::new(
            UnitQuaternion::from_euler_angles(0.1234567890123, -0.9, FRAC_PI_2),
            Vector3::new(1.0 / 3.0, -2.0 / 7.0, 1e-17),
        );
        let json = serde_json::to_string(&p).unwrap();
        let q: Pose = serde_json::from_str(&json).unwrap();
        assert_eq!(p.translation, q.translation);
        assert_eq!(p.rotation.into_inner(), q.rotation.into_inner());
    }
}
