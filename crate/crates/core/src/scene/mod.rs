//! Data model for trajectories, fragmentary maps, cameras, and markers.
//!
//! A [`Scene`] is the single artifact every pipeline stage consumes and
//! produces. It serializes to one human-readable JSON document; see
//! `docs/scene_format.md` for the field-by-field description.

mod io;
mod validate;

pub use io::{load_scene, save_scene, scene_from_json, scene_to_json};
pub use validate::{validate_map, Violation};

use std::collections::HashMap;
use std::fmt;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{geodesic_interpolate, GeometryError, Pose};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scene document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate keyframe id {id} (fragments {first} and {second})")]
    DuplicateKeyframeId { id: u64, first: u64, second: u64 },
    #[error("duplicate landmark id {id} (fragments {first} and {second})")]
    DuplicateLandmarkId { id: u64, first: u64, second: u64 },
    #[error("trajectory timestamps not strictly increasing at sample {index} (time {time})")]
    NonMonotoneTrajectory { index: usize, time: f64 },
    #[error("keyframe {keyframe} in fragment {fragment} breaks strict id ordering")]
    KeyframeIdOrder { fragment: u64, keyframe: u64 },
    #[error("keyframe {keyframe} observes unknown landmark {landmark}")]
    UnknownLandmark { keyframe: u64, landmark: u64 },
    #[error("keyframe {keyframe} observes landmark {landmark} more than once")]
    DuplicateObservation { keyframe: u64, landmark: u64 },
    #[error("keyframe {keyframe} references camera index {camera} but only {count} cameras exist")]
    BadCameraIndex {
        keyframe: u64,
        camera: usize,
        count: usize,
    },
    #[error("camera {index} has invalid intrinsics: {reason}")]
    BadIntrinsics { index: usize, reason: String },
    #[error("marker {id} appears twice in the truth table")]
    DuplicateMarkerTruth { id: u32 },
    #[error("markers {a} and {b} share the same true position")]
    CoincidentMarkers { a: u32, b: u32 },
    #[error("marker detection references unknown marker {marker}")]
    UnknownMarker { marker: u32 },
}

/// Pinhole camera intrinsics in pixels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    /// Projects a camera-frame point; `None` when the depth is not positive.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p.z <= 0.0 {
            return None;
        }
        Some(Vector2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= 0.0 && px.x < self.width as f64 && px.y >= 0.0 && px.y < self.height as f64
    }

    /// Unit ray direction in the camera frame through pixel `px`.
    pub fn unproject(&self, px: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy, 1.0).normalize()
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(format!("focal lengths must be positive ({}, {})", self.fx, self.fy));
        }
        if !(0.0 <= self.cx && self.cx < self.width as f64) {
            return Err(format!("cx {} outside [0, {})", self.cx, self.width));
        }
        if !(0.0 <= self.cy && self.cy < self.height as f64) {
            return Err(format!("cy {} outside [0, {})", self.cy, self.height));
        }
        Ok(())
    }
}

/// 32-byte binary feature descriptor compared under Hamming distance.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Descriptor(pub [u8; 32]);

impl Descriptor {
    pub const BITS: u32 = 256;

    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

impl fmt::Debug for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl Serialize for Descriptor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{self:?}"))
    }
}

impl<'de> Deserialize<'de> for Descriptor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        if text.len() != 64 {
            return Err(serde::de::Error::custom(format!(
                "descriptor must be 64 hex chars, got {}",
                text.len()
            )));
        }
        let mut bytes = [0u8; 32];
        for (i, chunk) in text.as_bytes().chunks(2).enumerate() {
            let hi = (chunk[0] as char).to_digit(16);
            let lo = (chunk[1] as char).to_digit(16);
            match (hi, lo) {
                (Some(h), Some(l)) => bytes[i] = (h * 16 + l) as u8,
                _ => return Err(serde::de::Error::custom("descriptor is not valid hex")),
            }
        }
        Ok(Descriptor(bytes))
    }
}

/// A single feature detection: which landmark, where in the image, and the
/// descriptor extracted at that keypoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Observation {
    pub landmark: u64,
    pub pixel: Vector2<f64>,
    pub descriptor: Descriptor,
}

/// A retained camera frame with its pose estimate, acquisition-time estimate
/// `time` and the fixed time prior it is constrained by.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Keyframe {
    pub id: u64,
    pub time: f64,
    pub time_prior: f64,
    pub pose: Pose,
    pub camera: usize,
    pub observations: Vec<Observation>,
}

/// A triangulated scene point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Landmark {
    pub id: u64,
    pub position: Vector3<f64>,
    pub descriptor: Descriptor,
    /// Sorted ids of keyframes observing this landmark.
    pub observers: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleState {
    Arbitrary,
    BootstrapScaled,
    FullDistanceScaled,
}

/// A self-consistent sub-map produced between tracking losses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FragmentMap {
    pub id: u64,
    pub parent: Option<u64>,
    pub scale_state: ScaleState,
    /// Set once the fragment has been placed in the world frame; fragments
    /// that fail alignment stay `false` and are excluded downstream.
    pub aligned: bool,
    pub keyframes: Vec<Keyframe>,
    pub landmarks: Vec<Landmark>,
}

impl FragmentMap {
    pub fn landmark_index(&self) -> HashMap<u64, usize> {
        self.landmarks
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id, i))
            .collect()
    }

    pub fn keyframe_centers(&self) -> Vec<Vector3<f64>> {
        self.keyframes.iter().map(|k| k.pose.translation).collect()
    }

    /// Chord length of the keyframe center polyline.
    pub fn internal_path_length(&self) -> f64 {
        self.keyframes
            .windows(2)
            .map(|w| (w[1].pose.translation - w[0].pose.translation).norm())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub pose: Pose,
}

/// Time-indexed localization-camera trajectory with strictly increasing
/// timestamps, supporting geodesic interpolation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => Some((a.time, b.time)),
            _ => None,
        }
    }

    pub fn contains_time(&self, t: f64) -> bool {
        self.span().is_some_and(|(a, b)| t >= a && t <= b)
    }

    /// Piecewise-geodesic pose interpolation, exact at sample timestamps.
    /// No extrapolation: out-of-span times are an error.
    pub fn pose_at(&self, t: f64) -> Result<Pose, GeometryError> {
        let (start, end) = self.span().ok_or(GeometryError::OutOfRange {
            t,
            start: f64::NAN,
            end: f64::NAN,
        })?;
        if t < start || t > end {
            return Err(GeometryError::OutOfRange { t, start, end });
        }
        let idx = self.samples.partition_point(|s| s.time <= t);
        let j = idx - 1; // idx >= 1 because t >= start
        if self.samples[j].time == t {
            return Ok(self.samples[j].pose);
        }
        let a = &self.samples[j];
        let b = &self.samples[j + 1];
        let alpha = (t - a.time) / (b.time - a.time);
        Ok(geodesic_interpolate(&a.pose, &b.pose, alpha))
    }

    /// Index `j` of the interpolation interval `[t_j, t_{j+1})` containing
    /// `t`; a tie at a knot takes the right interval, the trailing knot takes
    /// the left one. Used for knot-aware time derivatives.
    pub fn interval_index(&self, t: f64) -> Option<usize> {
        if self.samples.len() < 2 || !self.contains_time(t) {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.time <= t);
        Some((idx - 1).min(self.samples.len() - 2))
    }
}

/// Independently surveyed true marker position (RTK analogue in simulation).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarkerTruth {
    pub id: u32,
    pub position: Vector3<f64>,
}

/// A pixel detection of one marker in one keyframe.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarkerDetection {
    pub marker: u32,
    pub keyframe: u64,
    pub pixel: Vector2<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MarkerSet {
    pub truths: Vec<MarkerTruth>,
    pub detections: Vec<MarkerDetection>,
}

/// True keyframe state retained by the simulator for evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KeyframeTruth {
    pub id: u64,
    pub time: f64,
    pub pose: Pose,
}

/// Maps a fragment-local landmark instance back to the ground point it was
/// triangulated from; instances of the same source in different fragments are
/// true duplicates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LandmarkSource {
    pub landmark: u64,
    pub source: u64,
    pub position: Vector3<f64>,
}

/// The random similarity the simulator applied to a fragment when
/// re-expressing it in its own arbitrary frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FragmentCorruption {
    pub fragment: u64,
    pub scale: f64,
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub extrinsic: Option<Pose>,
    pub keyframes: Vec<KeyframeTruth>,
    pub landmark_sources: Vec<LandmarkSource>,
    pub fragment_corruptions: Vec<FragmentCorruption>,
}

/// One survey: localization trajectory, documentation fragments, markers,
/// cameras, the extrinsic estimate/prior, and (for simulated scenes) ground
/// truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scene {
    pub version: u32,
    pub cameras: Vec<CameraIntrinsics>,
    #[serde(default)]
    pub trajectory: Trajectory,
    pub extrinsic_estimate: Pose,
    pub extrinsic_prior: Pose,
    pub fragments: Vec<FragmentMap>,
    #[serde(default)]
    pub markers: MarkerSet,
    #[serde(default)]
    pub ground_truth: Option<GroundTruth>,
}

impl Scene {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn keyframe_count(&self) -> usize {
        self.fragments.iter().map(|f| f.keyframes.len()).sum()
    }

    pub fn landmark_count(&self) -> usize {
        self.fragments.iter().map(|f| f.landmarks.len()).sum()
    }

    pub fn observation_count(&self) -> usize {
        self.fragments
            .iter()
            .flat_map(|f| f.keyframes.iter())
            .map(|k| k.observations.len())
            .sum()
    }

    /// Global landmark lookup: id -> (fragment index, landmark index).
    pub fn landmark_table(&self) -> HashMap<u64, (usize, usize)> {
        let mut table = HashMap::new();
        for (fi, frag) in self.fragments.iter().enumerate() {
            for (li, lm) in frag.landmarks.iter().enumerate() {
                table.insert(lm.id, (fi, li));
            }
        }
        table
    }

    /// Global keyframe lookup: id -> (fragment index, keyframe index).
    pub fn keyframe_table(&self) -> HashMap<u64, (usize, usize)> {
        let mut table = HashMap::new();
        for (fi, frag) in self.fragments.iter().enumerate() {
            for (ki, kf) in frag.keyframes.iter().enumerate() {
                table.insert(kf.id, (fi, ki));
            }
        }
        table
    }

    /// Structural invariants enforced on every load: unique ids, monotone
    /// timestamps, resolvable references, valid intrinsics.
    pub fn check_structure(&self) -> Result<(), SceneError> {
        for (i, cam) in self.cameras.iter().enumerate() {
            cam.check()
                .map_err(|reason| SceneError::BadIntrinsics { index: i, reason })?;
        }

        for (i, w) in self.trajectory.samples.windows(2).enumerate() {
            if w[1].time <= w[0].time {
                return Err(SceneError::NonMonotoneTrajectory {
                    index: i + 1,
                    time: w[1].time,
                });
            }
        }

        let mut kf_owner: HashMap<u64, u64> = HashMap::new();
        let mut lm_owner: HashMap<u64, u64> = HashMap::new();
        for frag in &self.fragments {
            for kf in &frag.keyframes {
                if let Some(first) = kf_owner.insert(kf.id, frag.id) {
                    return Err(SceneError::DuplicateKeyframeId {
                        id: kf.id,
                        first,
                        second: frag.id,
                    });
                }
                if kf.camera >= self.cameras.len() {
                    return Err(SceneError::BadCameraIndex {
                        keyframe: kf.id,
                        camera: kf.camera,
                        count: self.cameras.len(),
                    });
                }
            }
            // Ids encode acquisition order. Time estimates and priors are
            // noisy under sync jitter and may locally reorder, so they are
            // deliberately not checked here.
            for w in frag.keyframes.windows(2) {
                if w[1].id <= w[0].id {
                    return Err(SceneError::KeyframeIdOrder {
                        fragment: frag.id,
                        keyframe: w[1].id,
                    });
                }
            }
            for lm in &frag.landmarks {
                if let Some(first) = lm_owner.insert(lm.id, frag.id) {
                    return Err(SceneError::DuplicateLandmarkId {
                        id: lm.id,
                        first,
                        second: frag.id,
                    });
                }
            }
        }

        // Observations may reference landmarks in other fragments once maps
        // are linked, so resolve against the global table.
        let global: HashMap<u64, (usize, usize)> = self.landmark_table();
        for frag in &self.fragments {
            for kf in &frag.keyframes {
                let mut seen = std::collections::HashSet::new();
                for obs in &kf.observations {
                    if !global.contains_key(&obs.landmark) {
                        return Err(SceneError::UnknownLandmark {
                            keyframe: kf.id,
                            landmark: obs.landmark,
                        });
                    }
                    if !seen.insert(obs.landmark) {
                        return Err(SceneError::DuplicateObservation {
                            keyframe: kf.id,
                            landmark: obs.landmark,
                        });
                    }
                }
            }
        }

        let mut marker_ids = std::collections::HashSet::new();
        for m in &self.markers.truths {
            if !marker_ids.insert(m.id) {
                return Err(SceneError::DuplicateMarkerTruth { id: m.id });
            }
        }
        for (i, a) in self.markers.truths.iter().enumerate() {
            for b in &self.markers.truths[i + 1..] {
                if (a.position - b.position).norm() == 0.0 {
                    return Err(SceneError::CoincidentMarkers { a: a.id, b: b.id });
                }
            }
        }
        for d in &self.markers.detections {
            if !marker_ids.contains(&d.marker) {
                return Err(SceneError::UnknownMarker { marker: d.marker });
            }
        }
        Ok(())
    }
}
