use std::fs;
use std::path::Path;

use super::{Scene, SceneError};

/// Serializes a scene to its canonical JSON document. Field order is fixed by
/// the type definitions and reals keep full precision, so equal scenes
/// produce byte-identical documents.
pub fn scene_to_json(scene: &Scene) -> Result<String, SceneError> {
    let mut text = serde_json::to_string_pretty(scene)?;
    text.push('\n');
    Ok(text)
}

/// Parses and structurally validates a scene document.
pub fn scene_from_json(text: &str) -> Result<Scene, SceneError> {
    let scene: Scene = serde_json::from_str(text)?;
    scene.check_structure()?;
    Ok(scene)
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<(), SceneError> {
    let text = scene_to_json(scene)?;
    fs::write(path, text).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneError> {
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    scene_from_json(&text)
}
