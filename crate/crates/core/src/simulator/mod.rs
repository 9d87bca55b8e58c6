//! Synthetic survey generator: ground-truth boustrophedon surveys, noisy
//! dual-camera measurements, tracking-loss fragmentation, and marker
//! observations. Pure function of config + seed.

mod path;

pub use path::SurveyPath;

use nalgebra::{Matrix3, UnitQuaternion, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, UnitSphere};
use thiserror::Error;

use crate::config::{ConfigError, SurveyConfig};
use crate::geometry::{se3_exp, twist, Pose, SimilarityTransform};
use crate::scene::{
    CameraIntrinsics, Descriptor, FragmentCorruption, FragmentMap, GroundTruth, Keyframe,
    KeyframeTruth, Landmark, LandmarkSource, MarkerDetection, MarkerSet, MarkerTruth, Observation,
    ScaleState, Scene, Trajectory, TrajectorySample,
};

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("documentation window is empty; survey too short for the keyframe rate")]
    EmptyDocWindow,
    #[error("trajectory interpolation failed during generation: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// A true scene point available for observation.
#[derive(Debug, Clone)]
pub struct GroundPoint {
    pub id: u64,
    pub position: Vector3<f64>,
    pub descriptor: Descriptor,
}

/// One (possibly noise-corrupted) feature measurement against a source point.
#[derive(Debug, Clone)]
pub struct TrueObservation {
    pub source: u64,
    pub pixel: Vector2<f64>,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone)]
pub struct TrueKeyframe {
    pub id: u64,
    pub time: f64,
    pub pose: Pose,
    pub observations: Vec<TrueObservation>,
}

/// Everything the simulator knows: true trajectories, landmarks, markers, and
/// the noise-corrupted measurement set, before fragmentation.
#[derive(Debug, Clone)]
pub struct GroundTruthSurvey {
    pub trajectory: Trajectory,
    pub extrinsic: Pose,
    pub intrinsics: CameraIntrinsics,
    pub ground_points: Vec<GroundPoint>,
    pub keyframes: Vec<TrueKeyframe>,
    pub marker_truths: Vec<MarkerTruth>,
    pub marker_detections: Vec<MarkerDetection>,
    /// Times at which the rig crosses a turn apex.
    pub turn_times: Vec<f64>,
    /// Time span in which documentation keyframes exist.
    pub doc_window: (f64, f64),
}

/// Smooth low-amplitude ground height so the scene is non-degenerate for
/// plane fits and backprojection. Deterministic in (x, y).
pub fn ground_height(x: f64, y: f64, amplitude: f64) -> f64 {
    amplitude
        * (0.5 * (0.9 * x + 0.7 * y + 0.3).sin()
            + 0.3 * (1.7 * x - 0.4).sin()
            + 0.2 * (1.3 * y + 1.1).cos())
}

/// Camera-to-world rotations for the two cameras given the travel heading:
/// the localization camera faces the heading pitched down by `pitch_rad`, the
/// documentation camera looks straight down with its image x axis across
/// track.
fn rig_rotations(heading: Vector2<f64>, pitch_rad: f64) -> (UnitQuaternion<f64>, UnitQuaternion<f64>) {
    let d = Vector3::new(heading.x, heading.y, 0.0);
    let right = Vector3::new(heading.y, -heading.x, 0.0);
    let up = Vector3::z();

    let loc_z = pitch_rad.cos() * d - pitch_rad.sin() * up;
    let loc_x = right;
    let loc_y = loc_z.cross(&loc_x);
    let loc = Matrix3::from_columns(&[loc_x, loc_y, loc_z]);

    let doc_z = -up;
    let doc_x = right;
    let doc_y = doc_z.cross(&doc_x);
    let doc = Matrix3::from_columns(&[doc_x, doc_y, doc_z]);

    (
        UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(loc)),
        UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(doc)),
    )
}

/// The true rig extrinsic implied by the survey configuration (or the
/// explicit `mount` override).
pub fn true_extrinsic(cfg: &SurveyConfig) -> Pose {
    if let Some(mount) = cfg.mount {
        return mount;
    }
    let pitch = cfg.loc_pitch_deg.to_radians();
    let (loc, doc) = rig_rotations(Vector2::new(0.0, 1.0), pitch);
    let offset = Vector3::new(cfg.doc_offset_m[0], cfg.doc_offset_m[1], cfg.doc_offset_m[2]);
    Pose::new(loc.inverse() * doc, offset)
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let v: [f64; 3] = UnitSphere.sample(rng);
    Vector3::new(v[0], v[1], v[2])
}

fn random_descriptor(rng: &mut ChaCha8Rng) -> Descriptor {
    let mut bytes = [0u8; 32];
    rng.fill(&mut bytes);
    Descriptor(bytes)
}

fn flip_bits(desc: &Descriptor, prob: f64, rng: &mut ChaCha8Rng) -> Descriptor {
    if prob <= 0.0 {
        return *desc;
    }
    let mut out = desc.0;
    for byte in out.iter_mut() {
        for bit in 0..8 {
            if rng.random::<f64>() < prob {
                *byte ^= 1 << bit;
            }
        }
    }
    Descriptor(out)
}

/// Generates the ground-truth survey and its noise-corrupted measurements.
/// Deterministic for a given config and RNG state.
pub fn generate_survey(
    cfg: &SurveyConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GroundTruthSurvey, SimulatorError> {
    cfg.check()?;
    let intrinsics = cfg.camera.intrinsics();
    let survey_path = SurveyPath::new(cfg.patch_size, cfg.row_spacing);
    let motion_time = survey_path.total_length() / cfg.speed;
    let total_time = motion_time + 2.0 * cfg.margin_s;
    let pitch = cfg.loc_pitch_deg.to_radians();
    let extrinsic = true_extrinsic(cfg);

    // Localization trajectory: the rig holds the path start during the
    // lead-in margin and the path end during the lead-out.
    let loc_pose_at = |t: f64| -> Pose {
        let s = cfg.speed * (t - cfg.margin_s).clamp(0.0, motion_time);
        let (p2, heading) = survey_path.at(s);
        let (loc_rot, _) = rig_rotations(heading, pitch);
        Pose::new(loc_rot, Vector3::new(p2.x, p2.y, cfg.rig_height_m))
    };
    let n_samples = (total_time * cfg.loc_rate_hz).floor() as usize + 1;
    let samples: Vec<TrajectorySample> = (0..n_samples)
        .map(|j| {
            let t = j as f64 / cfg.loc_rate_hz;
            TrajectorySample {
                time: t,
                pose: loc_pose_at(t),
            }
        })
        .collect();
    let trajectory = Trajectory { samples };

    // Ground points cover the path footprint plus the camera swath.
    let turn_radius = cfg.row_spacing / 2.0;
    let hw_x = cfg.rig_height_m * (intrinsics.width as f64 / 2.0) / intrinsics.fx;
    let hw_y = cfg.rig_height_m * (intrinsics.height as f64 / 2.0) / intrinsics.fy;
    let swath = hw_x.max(hw_y);
    let x_range = (-swath, *survey_path.rows().last().unwrap() + swath);
    let y_range = (-turn_radius - swath, cfg.patch_size[1] + turn_radius + swath);
    let area = (x_range.1 - x_range.0) * (y_range.1 - y_range.0);

    // Markers first: four patch corners, a nested square at quarter
    // positions, one at the center. Marker source ids coincide with marker
    // ids.
    let (w, h) = (cfg.patch_size[0], cfg.patch_size[1]);
    let marker_xy = [
        (0.0, 0.0),
        (w, 0.0),
        (w, h),
        (0.0, h),
        (0.25 * w, 0.25 * h),
        (0.75 * w, 0.25 * h),
        (0.75 * w, 0.75 * h),
        (0.25 * w, 0.75 * h),
        (0.5 * w, 0.5 * h),
    ];
    let mut ground_points = Vec::new();
    let mut marker_truths = Vec::new();
    for (i, (mx, my)) in marker_xy.iter().enumerate() {
        let position = Vector3::new(*mx, *my, ground_height(*mx, *my, cfg.height_amplitude_m));
        marker_truths.push(MarkerTruth {
            id: i as u32,
            position,
        });
        ground_points.push(GroundPoint {
            id: i as u64,
            position,
            descriptor: random_descriptor(rng),
        });
    }
    let n_random = (cfg.landmark_density * area).round() as usize;
    for k in 0..n_random {
        let x = rng.random_range(x_range.0..x_range.1);
        let y = rng.random_range(y_range.0..y_range.1);
        ground_points.push(GroundPoint {
            id: (marker_xy.len() + k) as u64,
            position: Vector3::new(x, y, ground_height(x, y, cfg.height_amplitude_m)),
            descriptor: random_descriptor(rng),
        });
    }

    // Documentation keyframes: true pose comes from the sampled trajectory
    // through the rig extrinsic, so the trajectory-implied pose is exact.
    let mut kf_times = Vec::new();
    let mut k = 0u64;
    loop {
        let t = cfg.margin_s + cfg.doc_phase_s + k as f64 / cfg.doc_keyframe_hz;
        if t > cfg.margin_s + motion_time {
            break;
        }
        kf_times.push(t);
        k += 1;
    }
    if kf_times.len() < 2 {
        return Err(SimulatorError::EmptyDocWindow);
    }
    let doc_window = (kf_times[0], *kf_times.last().unwrap());

    let pixel_noise = if cfg.pixel_noise_px > 0.0 {
        Some(Normal::new(0.0, cfg.pixel_noise_px).expect("valid sigma"))
    } else {
        None
    };

    let mut keyframes = Vec::with_capacity(kf_times.len());
    for (i, &t) in kf_times.iter().enumerate() {
        let pose = trajectory.pose_at(t)?.compose(&extrinsic);
        let mut observations = Vec::new();
        for gp in &ground_points {
            let cam_point = pose.inverse_transform_point(&gp.position);
            let Some(px) = intrinsics.project(&cam_point) else {
                continue;
            };
            if !intrinsics.contains(&px) {
                continue;
            }
            let noisy = match &pixel_noise {
                Some(n) => Vector2::new(px.x + n.sample(rng), px.y + n.sample(rng)),
                None => px,
            };
            observations.push(TrueObservation {
                source: gp.id,
                pixel: noisy,
                descriptor: flip_bits(&gp.descriptor, cfg.descriptor_flip_prob, rng),
            });
        }
        keyframes.push(TrueKeyframe {
            id: i as u64,
            time: t,
            pose,
            observations,
        });
    }

    let mut marker_detections = Vec::new();
    for kf in &keyframes {
        for m in &marker_truths {
            let cam_point = kf.pose.inverse_transform_point(&m.position);
            let Some(px) = intrinsics.project(&cam_point) else {
                continue;
            };
            if !intrinsics.contains(&px) {
                continue;
            }
            let noisy = match &pixel_noise {
                Some(n) => Vector2::new(px.x + n.sample(rng), px.y + n.sample(rng)),
                None => px,
            };
            marker_detections.push(MarkerDetection {
                marker: m.id,
                keyframe: kf.id,
                pixel: noisy,
            });
        }
    }

    let turn_times: Vec<f64> = survey_path
        .turn_apexes()
        .iter()
        .map(|s| cfg.margin_s + s / cfg.speed)
        .collect();

    Ok(GroundTruthSurvey {
        trajectory,
        extrinsic,
        intrinsics,
        ground_points,
        keyframes,
        marker_truths,
        marker_detections,
        turn_times,
        doc_window,
    })
}

/// Splits the documentation keyframe stream at tracking-loss events and
/// re-expresses every fragment in its own arbitrary frame through a random
/// similarity, mimicking monocular SLAM output of arbitrary scale.
///
/// Returns the fragments plus the ground-truth bookkeeping that ties fragment
/// landmarks back to their source points.
pub fn fragment_documentation_track(
    survey: &GroundTruthSurvey,
    cfg: &SurveyConfig,
    rng: &mut ChaCha8Rng,
) -> (Vec<FragmentMap>, GroundTruth) {
    let loss = &cfg.tracking_loss;
    let corruption = &cfg.fragment_corruption;

    // Tracking-loss event times.
    let mut events: Vec<f64> = Vec::new();
    if loss.split_at_turns {
        events.extend(
            survey
                .turn_times
                .iter()
                .copied()
                .filter(|t| *t > survey.doc_window.0 && *t < survey.doc_window.1),
        );
    }
    if loss.mid_row_losses_mean > 0.0 {
        let poisson = Poisson::new(loss.mid_row_losses_mean).expect("valid mean");
        let count = poisson.sample(rng) as usize;
        for _ in 0..count {
            events.push(rng.random_range(survey.doc_window.0..survey.doc_window.1));
        }
    }

    // Event times -> split indices, keeping fragments at a minimum size.
    let mut split_indices: Vec<usize> = events
        .iter()
        .map(|t| survey.keyframes.partition_point(|kf| kf.time <= *t))
        .filter(|&i| i > 0 && i < survey.keyframes.len())
        .collect();
    split_indices.sort_unstable();
    split_indices.dedup();
    let mut boundaries = vec![0usize];
    for idx in split_indices {
        if idx - boundaries.last().unwrap() >= loss.min_fragment_keyframes
            && survey.keyframes.len() - idx >= loss.min_fragment_keyframes
        {
            boundaries.push(idx);
        }
    }
    boundaries.push(survey.keyframes.len());

    let mut fragments = Vec::new();
    let mut truth = GroundTruth {
        extrinsic: Some(survey.extrinsic),
        keyframes: survey
            .keyframes
            .iter()
            .map(|kf| KeyframeTruth {
                id: kf.id,
                time: kf.time,
                pose: kf.pose,
            })
            .collect(),
        landmark_sources: Vec::new(),
        fragment_corruptions: Vec::new(),
    };

    let mut next_landmark_id = 0u64;
    for (frag_idx, range) in boundaries.windows(2).enumerate() {
        let kf_range = &survey.keyframes[range[0]..range[1]];

        // Sources tracked in at least two keyframes of this fragment become
        // fragment-local landmark instances.
        let mut obs_count: std::collections::BTreeMap<u64, usize> = std::collections::BTreeMap::new();
        for kf in kf_range {
            for obs in &kf.observations {
                *obs_count.entry(obs.source).or_default() += 1;
            }
        }
        let mut instance_of: std::collections::HashMap<u64, u64> = std::collections::HashMap::new();
        let mut landmarks = Vec::new();
        for (&source, &count) in &obs_count {
            if count < 2 {
                continue;
            }
            let gp = &survey.ground_points[source as usize];
            let id = next_landmark_id;
            next_landmark_id += 1;
            instance_of.insert(source, id);
            landmarks.push(Landmark {
                id,
                position: gp.position,
                descriptor: gp.descriptor,
                observers: Vec::new(),
            });
            truth.landmark_sources.push(LandmarkSource {
                landmark: id,
                source,
                position: gp.position,
            });
        }
        let landmark_index: std::collections::HashMap<u64, usize> = landmarks
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id, i))
            .collect();

        let mut keyframes = Vec::with_capacity(kf_range.len());
        for kf in kf_range {
            let mut observations = Vec::new();
            for obs in &kf.observations {
                if let Some(&lm_id) = instance_of.get(&obs.source) {
                    observations.push(Observation {
                        landmark: lm_id,
                        pixel: obs.pixel,
                        descriptor: obs.descriptor,
                    });
                    landmarks[landmark_index[&lm_id]].observers.push(kf.id);
                }
            }
            keyframes.push(Keyframe {
                id: kf.id,
                time: kf.time,
                time_prior: kf.time,
                pose: kf.pose,
                camera: 0,
                observations,
            });
        }

        // Random similarity so the fragment arrives unscaled and misaligned.
        let scale = rng.random_range(corruption.scale_range[0]..corruption.scale_range[1]);
        let angle = rng.random_range(0.0..corruption.max_rotation_deg.max(1e-12).to_radians());
        let axis = random_unit_vector(rng);
        let rotation =
            UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let b = corruption.max_translation_m;
        let translation = Vector3::new(
            rng.random_range(-b..b.max(1e-12)),
            rng.random_range(-b..b.max(1e-12)),
            rng.random_range(-b..b.max(1e-12)),
        );
        let sim = SimilarityTransform {
            scale,
            rotation,
            translation,
        };
        for kf in keyframes.iter_mut() {
            kf.pose = sim.apply_pose(&kf.pose);
        }
        for lm in landmarks.iter_mut() {
            lm.position = sim.apply_point(&lm.position);
        }
        let q = sim.rotation.into_inner();
        truth.fragment_corruptions.push(FragmentCorruption {
            fragment: frag_idx as u64,
            scale: sim.scale,
            rotation: [q.w, q.i, q.j, q.k],
            translation: [sim.translation.x, sim.translation.y, sim.translation.z],
        });

        fragments.push(FragmentMap {
            id: frag_idx as u64,
            parent: if frag_idx == 0 { None } else { Some(frag_idx as u64 - 1) },
            scale_state: ScaleState::Arbitrary,
            aligned: false,
            keyframes,
            landmarks,
        });
    }

    (fragments, truth)
}

/// Applies measurement-prior corruption: uniform time jitter on every
/// keyframe's time prior and an exact-magnitude random-direction perturbation
/// of the extrinsic prior.
pub fn corrupt_priors(scene: &mut Scene, cfg: &SurveyConfig, rng: &mut ChaCha8Rng) {
    let truth: std::collections::HashMap<u64, f64> = scene
        .ground_truth
        .as_ref()
        .map(|gt| gt.keyframes.iter().map(|k| (k.id, k.time)).collect())
        .unwrap_or_default();

    if cfg.time_jitter_s > 0.0 {
        for frag in scene.fragments.iter_mut() {
            for kf in frag.keyframes.iter_mut() {
                let base = truth.get(&kf.id).copied().unwrap_or(kf.time);
                let jitter = rng.random_range(-cfg.time_jitter_s..cfg.time_jitter_s);
                kf.time_prior = base + jitter;
                kf.time = kf.time_prior;
            }
        }
    }

    let rot_mag = cfg.extrinsic_noise_rot_deg.to_radians();
    let trans_mag = cfg.extrinsic_noise_trans_m;
    if rot_mag > 0.0 || trans_mag > 0.0 {
        let true_extr = scene
            .ground_truth
            .as_ref()
            .and_then(|gt| gt.extrinsic)
            .unwrap_or(scene.extrinsic_prior);
        let perturb = se3_exp(&twist(
            rot_mag * random_unit_vector(rng),
            trans_mag * random_unit_vector(rng),
        ));
        let corrupted = true_extr.compose(&perturb);
        scene.extrinsic_prior = corrupted;
        scene.extrinsic_estimate = corrupted;
    }
}

/// Full simulation: survey generation, fragmentation, prior corruption.
/// Byte-identical output for identical config and seed.
pub fn simulate(cfg: &SurveyConfig, seed: u64) -> Result<Scene, SimulatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let survey = generate_survey(cfg, &mut rng)?;
    let (fragments, ground_truth) = fragment_documentation_track(&survey, cfg, &mut rng);
    let mut scene = Scene {
        version: Scene::FORMAT_VERSION,
        cameras: vec![survey.intrinsics],
        trajectory: survey.trajectory,
        extrinsic_estimate: survey.extrinsic,
        extrinsic_prior: survey.extrinsic,
        fragments,
        markers: MarkerSet {
            truths: survey.marker_truths,
            detections: survey.marker_detections,
        },
        ground_truth: Some(ground_truth),
    };
    corrupt_priors(&mut scene, cfg, &mut rng);
    debug_assert!(scene.check_structure().is_ok());
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::horn_sim3;
    use crate::scene::scene_to_json;

    fn noiseless() -> SurveyConfig {
        SurveyConfig::default().noiseless()
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let cfg = SurveyConfig::default();
        let a = simulate(&cfg, 7).unwrap();
        let b = simulate(&cfg, 7).unwrap();
        assert_eq!(scene_to_json(&a).unwrap(), scene_to_json(&b).unwrap());
    }

    #[test]
    fn different_seeds_differ() {
        let cfg = SurveyConfig::default();
        let a = simulate(&cfg, 7).unwrap();
        let b = simulate(&cfg, 8).unwrap();
        assert_ne!(scene_to_json(&a).unwrap(), scene_to_json(&b).unwrap());
    }

    #[test]
    fn nine_markers_in_expected_layout() {
        let scene = simulate(&noiseless(), 3).unwrap();
        assert_eq!(scene.markers.truths.len(), 9);
        let m = &scene.markers.truths;
        // corners
        assert_eq!((m[0].position.x, m[0].position.y), (0.0, 0.0));
        assert_eq!((m[2].position.x, m[2].position.y), (10.0, 10.0));
        // nested square
        assert_eq!((m[4].position.x, m[4].position.y), (2.5, 2.5));
        assert_eq!((m[7].position.x, m[7].position.y), (2.5, 7.5));
        // center
        assert_eq!((m[8].position.x, m[8].position.y), (5.0, 5.0));
        // 36 distinct unordered pairs
        assert_eq!(m.len() * (m.len() - 1) / 2, 36);
    }

    #[test]
    fn no_loss_events_yield_single_fragment() {
        let mut cfg = noiseless();
        cfg.tracking_loss.split_at_turns = false;
        cfg.tracking_loss.mid_row_losses_mean = 0.0;
        let scene = simulate(&cfg, 1).unwrap();
        assert_eq!(scene.fragments.len(), 1);
    }

    #[test]
    fn turn_only_losses_yield_one_fragment_per_row() {
        let mut cfg = noiseless();
        cfg.tracking_loss.split_at_turns = true;
        cfg.tracking_loss.mid_row_losses_mean = 0.0;
        let scene = simulate(&cfg, 1).unwrap();
        assert_eq!(scene.fragments.len(), 6);
    }

    #[test]
    fn fragment_internal_geometry_is_truth_up_to_one_similarity() {
        let scene = simulate(&noiseless(), 5).unwrap();
        let gt = scene.ground_truth.as_ref().unwrap();
        let truth_pose: std::collections::HashMap<u64, Pose> =
            gt.keyframes.iter().map(|k| (k.id, k.pose)).collect();
        for frag in &scene.fragments {
            let src: Vec<_> = frag
                .keyframes
                .iter()
                .map(|kf| truth_pose[&kf.id].translation)
                .collect();
            let dst: Vec<_> = frag.keyframes.iter().map(|kf| kf.pose.translation).collect();
            let sim = horn_sim3(&src, &dst).unwrap();
            for (s, d) in src.iter().zip(&dst) {
                assert!((sim.apply_point(s) - d).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn every_fragment_landmark_observed_at_least_twice() {
        let scene = simulate(&SurveyConfig::default(), 11).unwrap();
        for frag in &scene.fragments {
            let violations = crate::scene::validate_map(frag);
            assert!(violations.is_empty(), "{violations:?}");
        }
    }

    #[test]
    fn jitter_respects_bound_and_zero_jitter_is_exact() {
        let mut cfg = SurveyConfig::default();
        cfg.time_jitter_s = 0.2;
        let scene = simulate(&cfg, 13).unwrap();
        let gt = scene.ground_truth.as_ref().unwrap();
        let truth: std::collections::HashMap<u64, f64> =
            gt.keyframes.iter().map(|k| (k.id, k.time)).collect();
        for frag in &scene.fragments {
            for kf in &frag.keyframes {
                assert!((kf.time_prior - truth[&kf.id]).abs() <= 0.2);
            }
        }

        let scene = simulate(&noiseless(), 13).unwrap();
        let gt = scene.ground_truth.as_ref().unwrap();
        let truth: std::collections::HashMap<u64, f64> =
            gt.keyframes.iter().map(|k| (k.id, k.time)).collect();
        for frag in &scene.fragments {
            for kf in &frag.keyframes {
                assert_eq!(kf.time_prior, truth[&kf.id]);
            }
        }
        assert_eq!(
            scene.extrinsic_prior.translation,
            gt.extrinsic.unwrap().translation
        );
    }

    #[test]
    fn extrinsic_perturbation_magnitudes_match_config() {
        let mut cfg = SurveyConfig::default();
        cfg.extrinsic_noise_rot_deg = 2.0;
        cfg.extrinsic_noise_trans_m = 0.02;
        let scene = simulate(&cfg, 17).unwrap();
        let truth = scene.ground_truth.as_ref().unwrap().extrinsic.unwrap();
        let rel = truth.inverse().compose(&scene.extrinsic_prior);
        let xi = crate::geometry::se3_log(&rel).unwrap();
        let rot = Vector3::new(xi[0], xi[1], xi[2]).norm();
        let trans = Vector3::new(xi[3], xi[4], xi[5]).norm();
        assert!((rot - 2f64.to_radians()).abs() < 1e-12);
        assert!((trans - 0.02).abs() < 1e-12);
    }

    #[test]
    fn marker_detections_reproject_within_noise_bound() {
        let mut cfg = SurveyConfig::default();
        cfg.pixel_noise_px = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let survey = generate_survey(&cfg, &mut rng).unwrap();
        let kf_pose: std::collections::HashMap<u64, Pose> =
            survey.keyframes.iter().map(|k| (k.id, k.pose)).collect();
        for det in &survey.marker_detections {
            let m = &survey.marker_truths[det.marker as usize];
            let cam = kf_pose[&det.keyframe].inverse_transform_point(&m.position);
            let px = survey.intrinsics.project(&cam).unwrap();
            let err = (px - det.pixel).norm();
            assert!(err < 6.0, "marker reprojection error {err} px");
        }
    }

    #[test]
    fn zero_noise_observations_reproject_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let survey = generate_survey(&noiseless(), &mut rng).unwrap();
        for kf in survey.keyframes.iter().take(20) {
            for obs in &kf.observations {
                let gp = &survey.ground_points[obs.source as usize];
                let cam = kf.pose.inverse_transform_point(&gp.position);
                let px = survey.intrinsics.project(&cam).unwrap();
                assert!((px - obs.pixel).norm() < 1e-12);
            }
        }
    }
}
