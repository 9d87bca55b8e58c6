use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose, Result};

/// Length in meters of the unit-axis points added by [`horn_so3_augmented`].
/// Kept as a named default so callers can verify the two-step alignment is
/// insensitive to it.
pub const DEFAULT_AXIS_POINT_LENGTH: f64 = 1.0;

/// Similarity transform `p -> scale * R * p + t`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_pose(pose: &Pose) -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: pose.rotation,
            translation: pose.translation,
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    /// Maps a camera-to-world pose: center moves like a point, the rotation
    /// picks up the similarity's rotation, scale does not touch orientation.
    pub fn apply_pose(&self, pose: &Pose) -> Pose {
        Pose::new(
            UnitQuaternion::new_normalize(
                self.rotation.into_inner() * pose.rotation.into_inner(),
            ),
            self.apply_point(&pose.translation),
        )
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let inv_rot = self.rotation.inverse();
        let inv_scale = 1.0 / self.scale;
        SimilarityTransform {
            scale: inv_scale,
            rotation: inv_rot,
            translation: -inv_scale * (inv_rot * self.translation),
        }
    }

    /// Composition `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: UnitQuaternion::new_normalize(
                self.rotation.into_inner() * other.rotation.into_inner(),
            ),
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Optimal rotation aligning centered `src` to centered `dst` via SVD of the
/// cross-covariance, with the determinant correction for reflections.
fn best_rotation(src_centered: &[Vector3<f64>], dst_centered: &[Vector3<f64>]) -> Matrix3<f64> {
    let mut cov = Matrix3::zeros();
    for (s, d) in src_centered.iter().zip(dst_centered) {
        cov += d * s.transpose();
    }
    let svd = cov.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let det = (u * v_t).determinant();
    let sign = if det < 0.0 { -1.0 } else { 1.0 };
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, sign)) * v_t
}

/// Checks the cross-covariance has rank >= 2, which is what pins the rotation
/// down uniquely (given the determinant constraint).
fn rank_check(src_centered: &[Vector3<f64>], dst_centered: &[Vector3<f64>]) -> Result<()> {
    let mut cov = Matrix3::zeros();
    for (s, d) in src_centered.iter().zip(dst_centered) {
        cov += d * s.transpose();
    }
    let sv = cov.svd(false, false).singular_values;
    if sv[0] < 1e-15 || sv[1] < 1e-9 * sv[0] {
        return Err(GeometryError::Degenerate(
            "point sets are collinear or coincident".into(),
        ));
    }
    Ok(())
}

/// Closed-form least-squares similarity minimizing
/// `sum_i || dst_i - s * R * src_i - t ||^2` (Horn's absolute-orientation
/// problem with scale, solved via the cross-covariance decomposition).
pub fn horn_sim3(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<SimilarityTransform> {
    sim3_impl(src, dst, true)
}

/// Like [`horn_sim3`] but accepts collinear configurations, where the
/// rotation about the common line is undetermined; the returned similarity
/// still aligns the point sets optimally. Scale and translation remain
/// well-defined. Callers must resolve the rotational ambiguity themselves.
pub fn horn_sim3_lenient(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
) -> Result<SimilarityTransform> {
    sim3_impl(src, dst, false)
}

fn sim3_impl(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    check_rank: bool,
) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(GeometryError::MismatchedLengths {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(GeometryError::InsufficientPoints {
            needed: 3,
            got: src.len(),
        });
    }

    let src_c = centroid(src);
    let dst_c = centroid(dst);
    let src_centered: Vec<_> = src.iter().map(|p| p - src_c).collect();
    let dst_centered: Vec<_> = dst.iter().map(|p| p - dst_c).collect();

    if check_rank {
        rank_check(&src_centered, &dst_centered)?;
    }

    let src_var: f64 = src_centered.iter().map(|p| p.norm_squared()).sum();
    if src_var < 1e-18 {
        return Err(GeometryError::Degenerate(
            "source points are coincident, scale is undefined".into(),
        ));
    }

    let r = best_rotation(&src_centered, &dst_centered);
    // s = sum <dst_i, R src_i> / sum ||src_i||^2  over centered points.
    let num: f64 = src_centered
        .iter()
        .zip(&dst_centered)
        .map(|(s, d)| d.dot(&(r * s)))
        .sum();
    let scale = num / src_var;
    if scale <= 0.0 {
        return Err(GeometryError::Degenerate(format!(
            "estimated scale {scale} is not positive"
        )));
    }

    let rotation = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r));
    let translation = dst_c - scale * (rotation * src_c);
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// Optimal SO(3) rotation aligning two pose sets, using the camera centers
/// augmented with points offset by `axis_length` along each camera-frame axis.
///
/// The augmentation removes the rotational ambiguity that center-only
/// alignment has for (near-)collinear camera centers. Pass `axis_length = 0`
/// to recover plain center-only behavior. The returned pose has zero
/// translation.
pub fn horn_so3_augmented(src: &[Pose], dst: &[Pose], axis_length: f64) -> Result<Pose> {
    if src.len() != dst.len() {
        return Err(GeometryError::MismatchedLengths {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.is_empty() {
        return Err(GeometryError::InsufficientPoints {
            needed: 1,
            got: 0,
        });
    }

    let augment = |poses: &[Pose]| -> Vec<Vector3<f64>> {
        let mut pts = Vec::with_capacity(poses.len() * 4);
        for p in poses {
            let r = p.rotation_matrix();
            pts.push(p.translation);
            for k in 0..3 {
                pts.push(p.translation + axis_length * r.column(k));
            }
        }
        pts
    };

    let src_pts = augment(src);
    let dst_pts = augment(dst);
    let src_c = centroid(&src_pts);
    let dst_c = centroid(&dst_pts);
    let src_centered: Vec<_> = src_pts.iter().map(|p| p - src_c).collect();
    let dst_centered: Vec<_> = dst_pts.iter().map(|p| p - dst_c).collect();

    let r = best_rotation(&src_centered, &dst_centered);
    Ok(Pose::new(UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r)), Vector3::zeros()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                    rng.random_range(-5.0..5.0),
                )
            })
            .collect()
    }

    fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
        UnitQuaternion::from_euler_angles(
            rng.random_range(-3.0..3.0),
            rng.random_range(-1.5..1.5),
            rng.random_range(-3.0..3.0),
        )
    }

    #[test]
    fn identical_sets_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 8);
        let t = horn_sim3(&pts, &pts).unwrap();
        assert_relative_eq!(t.scale, 1.0, epsilon = 1e-12);
        assert!(t.rotation.angle() < 1e-9);
        assert!(t.translation.norm() < 1e-9);
    }

    #[test]
    fn pure_scaling_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = random_points(&mut rng, 6);
        let dst: Vec<_> = pts.iter().map(|p| 2.0 * p).collect();
        let t = horn_sim3(&pts, &dst).unwrap();
        assert_relative_eq!(t.scale, 2.0, epsilon = 1e-12);
        assert!(t.rotation.angle() < 1e-10);
        assert!(t.translation.norm() < 1e-10);
    }

    #[test]
    fn known_similarity_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 5);
        let truth = SimilarityTransform {
            scale: 1.7,
            rotation: random_rotation(&mut rng),
            translation: Vector3::new(1.0, 2.0, 3.0),
        };
        let dst: Vec<_> = pts.iter().map(|p| truth.apply_point(p)).collect();
        let t = horn_sim3(&pts, &dst).unwrap();
        assert!((t.scale - truth.scale).abs() < 1e-8);
        assert!(t.rotation.angle_to(&truth.rotation) < 1e-8);
        assert!((t.translation - truth.translation).norm() < 1e-8);
    }

    #[test]
    fn too_few_points_rejected() {
        let pts = vec![Vector3::zeros(), Vector3::x()];
        match horn_sim3(&pts, &pts) {
            Err(GeometryError::InsufficientPoints { .. }) => {}
            other => panic!("expected insufficient-points error, got {other:?}"),
        }
    }

    #[test]
    fn collinear_points_rejected() {
        let pts: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        match horn_sim3(&pts, &pts) {
            Err(GeometryError::Degenerate(_)) => {}
            other => panic!("expected degeneracy error, got {other:?}"),
        }
    }

    #[test]
    fn composed_rigid_motion_recovered() {
        // Recovering G∘F from (src, (G∘F)(src)) for a similarity F and a
        // rigid G must reproduce the composition.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let pts = random_points(&mut rng, 7);
            let f = SimilarityTransform {
                scale: rng.random_range(0.2..5.0),
                rotation: random_rotation(&mut rng),
                translation: Vector3::new(
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                ),
            };
            let g = SimilarityTransform {
                scale: 1.0,
                rotation: random_rotation(&mut rng),
                translation: Vector3::new(
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                ),
            };
            let gf = g.compose(&f);
            let dst: Vec<_> = pts.iter().map(|p| gf.apply_point(p)).collect();
            let t = horn_sim3(&pts, &dst).unwrap();
            assert!((t.scale - gf.scale).abs() < 1e-8);
            assert!(t.rotation.angle_to(&gf.rotation) < 1e-8);
            assert!((t.translation - gf.translation).norm() < 1e-8);
        }
    }

    #[test]
    fn inverse_round_trips_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = SimilarityTransform {
            scale: 0.37,
            rotation: random_rotation(&mut rng),
            translation: Vector3::new(4.0, -1.0, 9.0),
        };
        let inv = t.inverse();
        for p in random_points(&mut rng, 20) {
            let back = inv.apply_point(&t.apply_point(&p));
            assert!((back - p).norm() < 1e-9);
        }
    }

    #[test]
    fn augmented_identity_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let poses: Vec<_> = (0..4)
            .map(|i| {
                Pose::new(
                    random_rotation(&mut rng),
                    Vector3::new(i as f64, 0.5 * i as f64, 0.0),
                )
            })
            .collect();
        let r = horn_so3_augmented(&poses, &poses, DEFAULT_AXIS_POINT_LENGTH).unwrap();
        assert!(r.rotation_angle() < 1e-10);
        assert!(r.translation.norm() == 0.0);
    }

    #[test]
    fn augmented_recovers_rotation_about_centroid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let poses: Vec<_> = (0..5)
            .map(|_| {
                Pose::new(
                    random_rotation(&mut rng),
                    Vector3::new(
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                    ),
                )
            })
            .collect();
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 30f64.to_radians());
        let pivot = centroid(&poses.iter().map(|p| p.translation).collect::<Vec<_>>());
        let dst: Vec<_> = poses
            .iter()
            .map(|p| {
                Pose::new(
                    UnitQuaternion::new_normalize(rot.into_inner() * p.rotation.into_inner()),
                    rot * (p.translation - pivot) + pivot,
                )
            })
            .collect();
        let r = horn_so3_augmented(&poses, &dst, DEFAULT_AXIS_POINT_LENGTH).unwrap();
        assert!(r.rotation.angle_to(&rot) < 1e-8);
    }

    #[test]
    fn augmentation_resolves_collinear_ambiguity() {
        // Camera centers on a straight line along y; destination poses are the
        // sources rotated 20 degrees about the path axis. Center-only
        // alignment (axis_length = 0) cannot see that rotation; the augmented
        // form recovers it.
        let down = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
        let src: Vec<_> = (0..6)
            .map(|i| Pose::new(down, Vector3::new(0.0, i as f64, 1.5)))
            .collect();
        let roll = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), 20f64.to_radians());
        let pivot = Vector3::new(0.0, 2.5, 1.5);
        let dst: Vec<_> = src
            .iter()
            .map(|p| {
                Pose::new(
                    UnitQuaternion::new_normalize(roll.into_inner() * p.rotation.into_inner()),
                    roll * (p.translation - pivot) + pivot,
                )
            })
            .collect();

        let centers_only = horn_so3_augmented(&src, &dst, 0.0).unwrap();
        let residual_center_only = centers_only.rotation.angle_to(&roll);
        assert!(
            residual_center_only > 1e-3,
            "center-only alignment unexpectedly resolved the roll: {residual_center_only}"
        );

        let augmented = horn_so3_augmented(&src, &dst, DEFAULT_AXIS_POINT_LENGTH).unwrap();
        assert!(augmented.rotation.angle_to(&roll) < 1e-8);
    }

    #[test]
    fn augmented_empty_input_rejected() {
        match horn_so3_augmented(&[], &[], 1.0) {
            Err(GeometryError::InsufficientPoints { .. }) => {}
            other => panic!("expected insufficient-points error, got {other:?}"),
        }
    }
}
