//! Inter-fragment landmark linking: find landmarks viewed in multiple
//! aligned fragments and merge the duplicates, creating the correspondences
//! that tie fragments together during global optimization.

use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::config::LinkingConfig;
use crate::scene::Scene;

/// A landmark from another fragment that projects into one of this
/// fragment's keyframes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Keyframe (in the fragment being linked) the landmark projects into.
    pub keyframe: u64,
    /// The foreign landmark id.
    pub landmark: u64,
    /// Predicted pixel position of the foreign landmark in that keyframe.
    pub projected: Vector2<f64>,
}

/// One accepted merge: `kept` absorbed `removed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeRecord {
    pub kept: u64,
    pub removed: u64,
    /// Number of keyframes whose keypoints agreed on the match.
    pub correspondences: usize,
}

/// Landmarks from other aligned fragments potentially visible in `frag`'s
/// keyframes: inside the image bounds, at positive depth no greater than
/// `max_depth_m`, within `radius` of the keyframe center. Results are ordered
/// by keyframe, then by landmark id.
pub fn candidate_landmarks(
    scene: &Scene,
    frag_idx: usize,
    radius: f64,
    cfg: &LinkingConfig,
) -> Vec<Candidate> {
    let frag = &scene.fragments[frag_idx];
    let mut candidates = Vec::new();
    if !frag.aligned {
        return candidates;
    }
    for kf in &frag.keyframes {
        let cam = &scene.cameras[kf.camera];
        let center = kf.pose.translation;
        for (oi, other) in scene.fragments.iter().enumerate() {
            if oi == frag_idx || !other.aligned {
                continue;
            }
            for lm in &other.landmarks {
                if (lm.position - center).norm() > radius {
                    continue;
                }
                let cam_point = kf.pose.inverse_transform_point(&lm.position);
                if cam_point.z <= 0.0 || cam_point.z > cfg.max_depth_m {
                    continue;
                }
                let Some(px) = cam.project(&cam_point) else {
                    continue;
                };
                if !cam.contains(&px) {
                    continue;
                }
                candidates.push(Candidate {
                    keyframe: kf.id,
                    landmark: lm.id,
                    projected: px,
                });
            }
        }
    }
    candidates
}

/// Matches candidates to this fragment's keypoints and merges landmark pairs
/// with enough agreeing keyframes.
///
/// A candidate matches a keypoint when the reprojection distance is below the
/// pixel threshold and the descriptor Hamming distance is below the
/// descriptor threshold; the nearest qualifying keypoint wins. A pair merges
/// once `min_correspondences` keyframes agree. The surviving landmark keeps
/// the lower id, unions the observation sets, and moves to the
/// observation-count-weighted average position; every reference is rewritten.
///
/// Merging never fails: candidates that miss the gates simply stay separate.
pub fn merge_landmarks(
    scene: &mut Scene,
    frag_idx: usize,
    candidates: &[Candidate],
    cfg: &LinkingConfig,
) -> Vec<MergeRecord> {
    // Count agreeing keyframes per (local landmark, foreign landmark) pair.
    let mut votes: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    {
        let frag = &scene.fragments[frag_idx];
        let kf_by_id: HashMap<u64, usize> = frag
            .keyframes
            .iter()
            .enumerate()
            .map(|(i, kf)| (kf.id, i))
            .collect();
        let lm_table = scene.landmark_table();

        for cand in candidates {
            let kf = &frag.keyframes[kf_by_id[&cand.keyframe]];
            let (ofi, oli) = lm_table[&cand.landmark];
            let foreign = &scene.fragments[ofi].landmarks[oli];

            // Nearest keypoint passing both gates.
            let mut best: Option<(f64, u64)> = None;
            for obs in &kf.observations {
                let dist = (obs.pixel - cand.projected).norm();
                if dist >= cfg.pixel_threshold_px {
                    continue;
                }
                if obs.descriptor.hamming(&foreign.descriptor) >= cfg.descriptor_threshold_bits {
                    continue;
                }
                if best.map_or(true, |(d, _)| dist < d) {
                    best = Some((dist, obs.landmark));
                }
            }
            if let Some((_, local_lm)) = best {
                if local_lm != cand.landmark {
                    *votes.entry((local_lm, cand.landmark)).or_default() += 1;
                }
            }
        }
    }

    let mut records = Vec::new();
    for ((local, foreign), count) in votes {
        if count < cfg.min_correspondences {
            continue;
        }
        // Either side may already have been merged away this pass.
        let table = scene.landmark_table();
        let (Some(&a_loc), Some(&b_loc)) = (table.get(&local), table.get(&foreign)) else {
            continue;
        };
        if a_loc == b_loc {
            continue;
        }
        let keep_local = local < foreign;
        let (kept_loc, removed_loc) = if keep_local { (a_loc, b_loc) } else { (b_loc, a_loc) };
        let (kept_id, removed_id) = if keep_local {
            (local, foreign)
        } else {
            (foreign, local)
        };

        let removed = scene.fragments[removed_loc.0].landmarks[removed_loc.1].clone();
        {
            let kept = &mut scene.fragments[kept_loc.0].landmarks[kept_loc.1];
            let w_kept = kept.observers.len() as f64;
            let w_removed = removed.observers.len() as f64;
            kept.position =
                (kept.position * w_kept + removed.position * w_removed) / (w_kept + w_removed);
            kept.observers.extend(removed.observers.iter().copied());
            kept.observers.sort_unstable();
            kept.observers.dedup();
        }
        scene.fragments[removed_loc.0].landmarks.remove(removed_loc.1);
        for frag in scene.fragments.iter_mut() {
            for kf in frag.keyframes.iter_mut() {
                for obs in kf.observations.iter_mut() {
                    if obs.landmark == removed_id {
                        obs.landmark = kept_id;
                    }
                }
            }
        }
        records.push(MergeRecord {
            kept: kept_id,
            removed: removed_id,
            correspondences: count,
        });
    }
    records
}

/// Links every aligned fragment against the others, in fragment-id order.
pub fn link_scene(scene: &mut Scene, cfg: &LinkingConfig) -> Vec<MergeRecord> {
    let mut records = Vec::new();
    let order: Vec<usize> = (0..scene.fragments.len()).collect();
    for frag_idx in order {
        if !scene.fragments[frag_idx].aligned {
            continue;
        }
        let candidates = candidate_landmarks(scene, frag_idx, cfg.search_radius_m, cfg);
        records.extend(merge_landmarks(scene, frag_idx, &candidates, cfg));
    }
    records
}
