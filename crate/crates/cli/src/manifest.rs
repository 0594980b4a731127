//! `manifest.json` listing the panoramas a run produced. Paths are relative to the
//! manifest's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use panowarp_core::io::DepthFormat;
use panowarp_core::{CameraPose, Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Intermediate,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub pose: [f64; 3],
    pub image: String,
    pub depth: String,
    pub role: Role,
    /// Index of the pose branch the view belongs to, when several were run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

impl ViewEntry {
    pub fn camera_pose(&self) -> Result<CameraPose> {
        CameraPose::new(self.pose[0], self.pose[1], self.pose[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewManifest {
    pub depth_format: String,
    /// Files are stored flipped vertically relative to the engine's convention.
    #[serde(default)]
    pub flip_v: bool,
    pub views: Vec<ViewEntry>,
    /// Set when the run that wrote the manifest stopped early.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incomplete: Option<String>,
}

impl ViewManifest {
    pub fn new(depth_format: DepthFormat) -> Self {
        ViewManifest {
            depth_format: depth_format.name().into(),
            flip_v: false,
            views: Vec::new(),
            incomplete: None,
        }
    }

    pub fn depth_format(&self) -> Result<DepthFormat> {
        self.depth_format.parse()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Absolute paths of a view's image and depth.
    pub fn resolve(base: &Path, entry: &ViewEntry) -> (PathBuf, PathBuf) {
        (base.join(&entry.image), base.join(&entry.depth))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = ViewManifest::new(DepthFormat::Png16Mm);
        m.views.push(ViewEntry {
            pose: [0.33, 0.0, -0.1],
            image: "a.png".into(),
            depth: "a.png16".into(),
            role: Role::Target,
            branch: Some(2),
            step: Some(17),
        });
        let path = dir.path().join(MANIFEST_NAME);
        m.write(&path).unwrap();
        assert_eq!(ViewManifest::read(&path).unwrap(), m);
        assert_eq!(m.depth_format().unwrap(), DepthFormat::Png16Mm);
    }

    #[test]
    fn malformed_manifest_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MANIFEST_NAME);
        std::fs::write(&path, "{\"views\": 3}").unwrap();
        assert_eq!(ViewManifest::read(&path).unwrap_err().exit_code(), 2);
    }
}
