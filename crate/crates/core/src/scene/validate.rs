use std::collections::{HashMap, HashSet};
use std::fmt;

use super::FragmentMap;

/// A single invariant violation found in a fragment map. `validate_map`
/// returns every violation rather than stopping at the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// A finalized landmark must be observed by at least two keyframes.
    LandmarkUnderObserved { landmark: u64, observers: usize },
    /// An observation references a landmark id not present in this fragment.
    UnknownLandmarkRef { keyframe: u64, landmark: u64 },
    /// A landmark id appears more than once in the fragment's landmark list.
    DuplicateLandmark { landmark: u64 },
    /// Keyframe ids must strictly increase within a fragment (ids encode
    /// acquisition order; jittered time priors may locally reorder).
    KeyframeIdOrder { keyframe: u64 },
    /// The same landmark is observed twice by one keyframe.
    DuplicateObservation { keyframe: u64, landmark: u64 },
    /// A landmark's recorded observer set disagrees with the observations.
    ObserverSetMismatch { landmark: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LandmarkUnderObserved { landmark, observers } => write!(
                f,
                "landmark {landmark} has {observers} observation(s), needs at least 2"
            ),
            Violation::UnknownLandmarkRef { keyframe, landmark } => {
                write!(f, "keyframe {keyframe} references unknown landmark {landmark}")
            }
            Violation::DuplicateLandmark { landmark } => {
                write!(f, "landmark id {landmark} appears twice")
            }
            Violation::KeyframeIdOrder { keyframe } => {
                write!(f, "keyframe {keyframe} breaks strict id ordering")
            }
            Violation::DuplicateObservation { keyframe, landmark } => {
                write!(f, "keyframe {keyframe} observes landmark {landmark} twice")
            }
            Violation::ObserverSetMismatch { landmark } => {
                write!(f, "landmark {landmark} observer set disagrees with observations")
            }
        }
    }
}

/// Checks every fragment-local invariant and returns the full violation list
/// (empty = valid). Never mutates. Pre-linking semantics: observations must
/// resolve within this fragment.
pub fn validate_map(map: &FragmentMap) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut local_ids = HashSet::new();
    for lm in &map.landmarks {
        if !local_ids.insert(lm.id) {
            violations.push(Violation::DuplicateLandmark { landmark: lm.id });
        }
    }

    for w in map.keyframes.windows(2) {
        if w[1].id <= w[0].id {
            violations.push(Violation::KeyframeIdOrder { keyframe: w[1].id });
        }
    }

    // Observation counts per landmark, while also catching dangling and
    // duplicated references.
    let mut obs_by_landmark: HashMap<u64, Vec<u64>> = HashMap::new();
    for kf in &map.keyframes {
        let mut seen = HashSet::new();
        for obs in &kf.observations {
            if !local_ids.contains(&obs.landmark) {
                violations.push(Violation::UnknownLandmarkRef {
                    keyframe: kf.id,
                    landmark: obs.landmark,
                });
                continue;
            }
            if !seen.insert(obs.landmark) {
                violations.push(Violation::DuplicateObservation {
                    keyframe: kf.id,
                    landmark: obs.landmark,
                });
                continue;
            }
            obs_by_landmark.entry(obs.landmark).or_default().push(kf.id);
        }
    }

    for lm in &map.landmarks {
        let observers = obs_by_landmark.get(&lm.id).map_or(0, |v| v.len());
        if observers < 2 {
            violations.push(Violation::LandmarkUnderObserved {
                landmark: lm.id,
                observers,
            });
        }
        let mut recorded = lm.observers.clone();
        recorded.sort_unstable();
        let mut actual = obs_by_landmark.get(&lm.id).cloned().unwrap_or_default();
        actual.sort_unstable();
        if recorded != actual {
            violations.push(Violation::ObserverSetMismatch { landmark: lm.id });
        }
    }

    violations
}
