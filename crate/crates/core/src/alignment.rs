//! Scale bootstrap, full-distance rescale, and two-step alignment of
//! fragmentary maps against the localization trajectory, plus the
//! constant-velocity sub-map registration used when tracking drops briefly.
//!
//! Keyframe time priors (not the refined estimates) drive every implied pose
//! here: truth is unknown at this stage and the optimizer refines times later.

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::AlignmentConfig;
use crate::geometry::{
    horn_sim3, horn_sim3_lenient, horn_so3_augmented, se3_exp, se3_log, ExtrinsicTransform,
    GeometryError, Pose,
};
use crate::scene::{FragmentMap, ScaleState, Trajectory};

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("initialization window [{t0}, {t1}] is empty or reversed")]
    EmptyWindow { t0: f64, t1: f64 },
    #[error("degenerate baseline: motion of {length} m is below {min} m")]
    DegenerateBaseline { length: f64, min: f64 },
    #[error("fragment {fragment} is in scale state {state:?}, expected {expected:?}")]
    WrongScaleState {
        fragment: u64,
        state: ScaleState,
        expected: ScaleState,
    },
    #[error("fragment {fragment} has {keyframes} keyframes, alignment needs at least 3")]
    InsufficientSupport { fragment: u64, keyframes: usize },
    #[error("cannot estimate velocity from {samples} trajectory tail sample(s)")]
    CannotEstimateVelocity { samples: usize },
}

/// Documentation-camera pose implied by the localization trajectory at time
/// `t` through the rig extrinsic.
pub fn implied_doc_pose(
    traj: &Trajectory,
    t: f64,
    extrinsic: &ExtrinsicTransform,
) -> Result<Pose, GeometryError> {
    Ok(traj.pose_at(t)?.compose(extrinsic))
}

/// Relative motion of the documentation camera between `t0` and `t1`, derived
/// from the localization trajectory. The two cameras experience different
/// motions whenever the documentation camera sits off the rotation axis, so
/// this cannot be read off the localization poses directly.
pub fn initialization_motion(
    traj: &Trajectory,
    t0: f64,
    t1: f64,
    extrinsic: &ExtrinsicTransform,
) -> Result<Pose, AlignmentError> {
    if t0 >= t1 {
        return Err(AlignmentError::EmptyWindow { t0, t1 });
    }
    let a = implied_doc_pose(traj, t0, extrinsic)?;
    let b = implied_doc_pose(traj, t1, extrinsic)?;
    Ok(a.inverse().compose(&b))
}

/// Scales an arbitrary-scale fragment so its initialization motion matches
/// the trajectory-implied documentation motion. Returns the scale applied.
pub fn bootstrap_scale(
    frag: &mut FragmentMap,
    traj: &Trajectory,
    extrinsic: &ExtrinsicTransform,
    cfg: &AlignmentConfig,
) -> Result<f64, AlignmentError> {
    if frag.scale_state != ScaleState::Arbitrary {
        return Err(AlignmentError::WrongScaleState {
            fragment: frag.id,
            state: frag.scale_state,
            expected: ScaleState::Arbitrary,
        });
    }
    if frag.keyframes.len() < 2 {
        return Err(AlignmentError::InsufficientSupport {
            fragment: frag.id,
            keyframes: frag.keyframes.len(),
        });
    }
    // Initialization window: the first two keyframes of the fragment.
    let k0 = &frag.keyframes[0];
    let k1 = &frag.keyframes[1];
    let implied = initialization_motion(traj, k0.time_prior, k1.time_prior, extrinsic)?;
    let implied_len = implied.translation.norm();
    let internal_len = (k1.pose.translation - k0.pose.translation).norm();
    if internal_len < cfg.min_motion_m {
        return Err(AlignmentError::DegenerateBaseline {
            length: internal_len,
            min: cfg.min_motion_m,
        });
    }
    if implied_len < cfg.min_motion_m {
        return Err(AlignmentError::DegenerateBaseline {
            length: implied_len,
            min: cfg.min_motion_m,
        });
    }
    let scale = implied_len / internal_len;
    apply_scale(frag, scale);
    frag.scale_state = ScaleState::BootstrapScaled;
    Ok(scale)
}

/// Rescales a bootstrap-scaled fragment so its internal keyframe path length
/// matches the implied documentation path over the same (prior) time stamps,
/// giving all fragments a consistent absolute scale. Returns the scale
/// applied; running it twice changes the scale by < 1e-9.
pub fn rescale_full_distance(
    frag: &mut FragmentMap,
    traj: &Trajectory,
    extrinsic: &ExtrinsicTransform,
    cfg: &AlignmentConfig,
) -> Result<f64, AlignmentError> {
    if frag.scale_state != ScaleState::BootstrapScaled
        && frag.scale_state != ScaleState::FullDistanceScaled
    {
        return Err(AlignmentError::WrongScaleState {
            fragment: frag.id,
            state: frag.scale_state,
            expected: ScaleState::BootstrapScaled,
        });
    }
    if frag.keyframes.len() < 2 {
        return Err(AlignmentError::InsufficientSupport {
            fragment: frag.id,
            keyframes: frag.keyframes.len(),
        });
    }
    let implied: Vec<Pose> = frag
        .keyframes
        .iter()
        .map(|kf| implied_doc_pose(traj, kf.time_prior, extrinsic))
        .collect::<Result<_, _>>()?;
    let implied_len: f64 = implied
        .windows(2)
        .map(|w| (w[1].translation - w[0].translation).norm())
        .sum();
    let internal_len = frag.internal_path_length();
    if internal_len < cfg.min_motion_m {
        return Err(AlignmentError::DegenerateBaseline {
            length: internal_len,
            min: cfg.min_motion_m,
        });
    }
    let scale = implied_len / internal_len;
    apply_scale(frag, scale);
    frag.scale_state = ScaleState::FullDistanceScaled;
    Ok(scale)
}

fn apply_scale(frag: &mut FragmentMap, scale: f64) {
    for kf in frag.keyframes.iter_mut() {
        kf.pose.translation *= scale;
    }
    for lm in frag.landmarks.iter_mut() {
        lm.position *= scale;
    }
}

/// Per-fragment alignment outcome, reported by the `align` stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FragmentAlignment {
    /// Similarity scale estimated in the center-alignment step.
    pub sim3_scale: f64,
    /// Rotation angle applied by the orientation step, radians.
    pub so3_correction_rad: f64,
    /// RMS distance between keyframe centers and their implied positions
    /// after both steps, meters.
    pub center_rmse_m: f64,
    /// RMS angle between keyframe orientations and implied orientations
    /// after both steps, radians.
    pub orientation_rmse_rad: f64,
}

/// Two-step alignment of a full-distance-scaled fragment into the world
/// frame: a similarity from keyframe centers to trajectory-implied centers,
/// then an augmented-rotation fix applied about the centroid of camera
/// centers so the rotational ambiguity of near-linear paths is resolved
/// without disturbing the center alignment.
pub fn align_fragment(
    frag: &mut FragmentMap,
    traj: &Trajectory,
    extrinsic: &ExtrinsicTransform,
    cfg: &AlignmentConfig,
) -> Result<FragmentAlignment, AlignmentError> {
    if frag.scale_state != ScaleState::FullDistanceScaled {
        return Err(AlignmentError::WrongScaleState {
            fragment: frag.id,
            state: frag.scale_state,
            expected: ScaleState::FullDistanceScaled,
        });
    }
    if frag.keyframes.len() < 3 {
        return Err(AlignmentError::InsufficientSupport {
            fragment: frag.id,
            keyframes: frag.keyframes.len(),
        });
    }

    let implied: Vec<Pose> = frag
        .keyframes
        .iter()
        .map(|kf| implied_doc_pose(traj, kf.time_prior, extrinsic))
        .collect::<Result<_, _>>()?;
    let implied_centers: Vec<_> = implied.iter().map(|p| p.translation).collect();
    let centers = frag.keyframe_centers();

    // Step 1: similarity from centers. Straight-row fragments are collinear
    // and leave the roll about the path axis undetermined; the lenient form
    // still aligns the centers and step 2 resolves the roll.
    let sim = match horn_sim3(&centers, &implied_centers) {
        Ok(sim) => sim,
        Err(GeometryError::Degenerate(_)) => horn_sim3_lenient(&centers, &implied_centers)?,
        Err(e) => return Err(e.into()),
    };
    for kf in frag.keyframes.iter_mut() {
        kf.pose = sim.apply_pose(&kf.pose);
    }
    for lm in frag.landmarks.iter_mut() {
        lm.position = sim.apply_point(&lm.position);
    }

    // Step 2: orientation fix from pose sets augmented with axis points,
    // applied about the centroid of camera centers.
    let step1_poses: Vec<_> = frag.keyframes.iter().map(|kf| kf.pose).collect();
    let fix = horn_so3_augmented(&step1_poses, &implied, cfg.axis_point_length_m)?;
    let q = fix.rotation;
    let centroid = frag
        .keyframes
        .iter()
        .map(|kf| kf.pose.translation)
        .sum::<nalgebra::Vector3<f64>>()
        / frag.keyframes.len() as f64;
    for kf in frag.keyframes.iter_mut() {
        kf.pose = Pose::new(
            UnitQuaternion::new_normalize(q.into_inner() * kf.pose.rotation.into_inner()),
            centroid + q * (kf.pose.translation - centroid),
        );
    }
    for lm in frag.landmarks.iter_mut() {
        lm.position = centroid + q * (lm.position - centroid);
    }
    frag.aligned = true;

    let n = frag.keyframes.len() as f64;
    let center_rmse_m = (frag
        .keyframes
        .iter()
        .zip(&implied)
        .map(|(kf, imp)| (kf.pose.translation - imp.translation).norm_squared())
        .sum::<f64>()
        / n)
        .sqrt();
    let orientation_rmse_rad = (frag
        .keyframes
        .iter()
        .zip(&implied)
        .map(|(kf, imp)| kf.pose.rotation_distance(imp).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();

    Ok(FragmentAlignment {
        sim3_scale: sim.scale,
        so3_correction_rad: q.angle(),
        center_rmse_m,
        orientation_rmse_rad,
    })
}

/// Outcome of constant-velocity sub-map registration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubmapRegistration {
    /// The gap was short enough; the new sub-map is registered with this
    /// seed pose.
    Registered(Pose),
    /// Initialization took too long; the sub-map stays private.
    Unregistered,
}

/// Predicts the pose of a newly initialized sub-map by extrapolating the last
/// inter-frame motion of the parent trajectory across the tracking gap,
/// assuming constant velocity. Gaps longer than `max_frames` worth of frame
/// intervals leave the sub-map unregistered.
pub fn register_submap_constant_velocity(
    parent_tail: &[(f64, Pose)],
    gap: f64,
    max_frames: u32,
) -> Result<SubmapRegistration, AlignmentError> {
    if parent_tail.len() < 2 {
        return Err(AlignmentError::CannotEstimateVelocity {
            samples: parent_tail.len(),
        });
    }
    let (t0, p0) = &parent_tail[parent_tail.len() - 2];
    let (t1, p1) = &parent_tail[parent_tail.len() - 1];
    let dt = t1 - t0;
    if dt <= 0.0 {
        return Err(AlignmentError::CannotEstimateVelocity {
            samples: parent_tail.len(),
        });
    }
    if gap > max_frames as f64 * dt {
        return Ok(SubmapRegistration::Unregistered);
    }
    let step = se3_log(&p0.inverse().compose(p1))?;
    let seed = p1.compose(&se3_exp(&(step * (gap / dt))));
    Ok(SubmapRegistration::Registered(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::TrajectorySample;
    use nalgebra::Vector3;
    use std::f64::consts::FRAC_PI_2;

    fn straight_traj() -> Trajectory {
        // 1 m/s along +x, identity orientation, 10 Hz samples.
        Trajectory {
            samples: (0..101)
                .map(|i| TrajectorySample {
                    time: i as f64 * 0.1,
                    pose: Pose::from_translation(i as f64 * 0.1, 0.0, 0.0),
                })
                .collect(),
        }
    }

    #[test]
    fn implied_pose_identity_extrinsic() {
        let traj = straight_traj();
        let p = implied_doc_pose(&traj, 1.0, &Pose::identity()).unwrap();
        assert_eq!(p.translation, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn implied_pose_pure_translation_offset() {
        let traj = Trajectory {
            samples: vec![
                TrajectorySample {
                    time: 0.0,
                    pose: Pose::identity(),
                },
                TrajectorySample {
                    time: 1.0,
                    pose: Pose::identity(),
                },
            ],
        };
        let t_dl = Pose::from_translation(0.0, 0.0, -1.0);
        let p = implied_doc_pose(&traj, 0.5, &t_dl).unwrap();
        assert_eq!(p.translation, Vector3::new(0.0, 0.0, -1.0));
        assert!(p.rotation_angle() < 1e-15);
    }

    #[test]
    fn implied_pose_rotated_offset() {
        // Localization camera yawed 90 degrees at the origin; a 1 m x-offset
        // in its frame lands the documentation camera at (0, 1, 0).
        let yaw = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2);
        let traj = Trajectory {
            samples: vec![
                TrajectorySample {
                    time: 0.0,
                    pose: Pose::new(yaw, Vector3::zeros()),
                },
                TrajectorySample {
                    time: 1.0,
                    pose: Pose::new(yaw, Vector3::zeros()),
                },
            ],
        };
        let t_dl = Pose::from_translation(1.0, 0.0, 0.0);
        let p = implied_doc_pose(&traj, 0.5, &t_dl).unwrap();
        assert!((p.translation - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn initialization_motion_stationary_is_identity() {
        let traj = Trajectory {
            samples: vec![
                TrajectorySample {
                    time: 0.0,
                    pose: Pose::from_translation(3.0, 2.0, 1.0),
                },
                TrajectorySample {
                    time: 1.0,
                    pose: Pose::from_translation(3.0, 2.0, 1.0),
                },
            ],
        };
        let m = initialization_motion(&traj, 0.1, 0.9, &Pose::from_translation(0.5, 0.0, 0.0))
            .unwrap();
        assert!(m.translation.norm() < 1e-12);
        assert!(m.rotation_angle() < 1e-12);
    }

    #[test]
    fn pure_translation_preserves_motion_length_under_any_rigid_extrinsic() {
        let traj = straight_traj();
        let t_dl = Pose::new(
            UnitQuaternion::from_euler_angles(0.4, -0.2, 1.0),
            Vector3::new(0.3, -0.1, 0.8),
        );
        let m = initialization_motion(&traj, 0.0, 2.0, &t_dl).unwrap();
        assert!((m.translation.norm() - 2.0).abs() < 1e-12);
        assert!(m.rotation_angle() < 1e-12);
    }

    #[test]
    fn pure_yaw_with_offset_gives_chord_translation() {
        // Localization camera yaws 90 degrees in place; documentation camera
        // offset 1 m from the rotation axis moves along a chord of length
        // 2 sin(45 deg) = sqrt(2).
        let traj = Trajectory {
            samples: vec![
                TrajectorySample {
                    time: 0.0,
                    pose: Pose::identity(),
                },
                TrajectorySample {
                    time: 1.0,
                    pose: Pose::new(
                        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2),
                        Vector3::zeros(),
                    ),
                },
            ],
        };
        let t_dl = Pose::from_translation(1.0, 0.0, 0.0);
        let m = initialization_motion(&traj, 0.0, 1.0, &t_dl).unwrap();
        assert!((m.translation.norm() - 2f64.sqrt()).abs() < 1e-12);
        assert!((m.rotation_angle() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn constant_velocity_zero_motion_returns_last_pose() {
        let p = Pose::from_translation(1.0, 2.0, 3.0);
        let tail = vec![(0.0, p), (0.1, p)];
        match register_submap_constant_velocity(&tail, 0.05, 30).unwrap() {
            SubmapRegistration::Registered(seed) => {
                assert!((seed.translation - p.translation).norm() < 1e-12);
            }
            other => panic!("expected registration, got {other:?}"),
        }
    }

    #[test]
    fn constant_velocity_gap_exceeding_budget_unregisters() {
        let tail = vec![
            (0.0, Pose::identity()),
            (0.1, Pose::from_translation(0.1, 0.0, 0.0)),
        ];
        let r = register_submap_constant_velocity(&tail, 3.01 + 1e-9, 30).unwrap();
        assert_eq!(r, SubmapRegistration::Unregistered);
    }

    #[test]
    fn constant_velocity_too_few_samples_errors() {
        let tail = vec![(0.0, Pose::identity())];
        assert!(matches!(
            register_submap_constant_velocity(&tail, 0.1, 30),
            Err(AlignmentError::CannotEstimateVelocity { samples: 1 })
        ));
    }

    #[test]
    fn constant_velocity_prediction_exact_on_screw_motion() {
        // Screw motion: constant twist integrated over time.
        let xi = crate::geometry::twist(
            Vector3::new(0.0, 0.0, 0.3),
            Vector3::new(1.0, 0.0, 0.0),
        );
        let pose_at = |t: f64| se3_exp(&(xi * t));
        let tail = vec![(0.8, pose_at(0.8)), (0.9, pose_at(0.9))];
        match register_submap_constant_velocity(&tail, 0.1, 30).unwrap() {
            SubmapRegistration::Registered(seed) => {
                let truth = pose_at(1.0);
                assert!((seed.translation - truth.translation).norm() < 1e-9);
                assert!(seed.rotation_distance(&truth) < 1e-9);
            }
            other => panic!("expected registration, got {other:?}"),
        }
    }
}
