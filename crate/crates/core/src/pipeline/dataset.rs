//! On-disk layout of a dataset directory and the small I/O helpers around it.
//!
//! ```text
//! config.json  template.json  gt_poses.json  manifest.json
//! view_<id>/frame_000000.ply            scans
//! view_<id>/labels/frame_000000.csv     label sets
//! fit/j2a.json  fit/anchors.json
//! <results>/sparkles/frame_000000.json  <results>/solves/frame_000000.json
//! <results>/report.json  <results>/report.csv  <results>/missing.json
//! fused/view_<id>/frame_000000.json     per-view Sparkles before fusion
//! <ablation>/ratio_0.30/...             occluded copies and their results
//! scene/frame_000000.ply  scene/gt_tracks.csv  scene/pred_tracks.csv  scene/mot.json
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::body::BodyTemplate;
use crate::cloud::frame_file_name;
use crate::error::{Error, Result};
use crate::geom3::Vec3;

pub const CONFIG_FILE: &str = "config.json";
pub const TEMPLATE_FILE: &str = "template.json";
pub const GT_FILE: &str = "gt_poses.json";
pub const J2A_FILE: &str = "fit/j2a.json";
pub const ANCHORS_FILE: &str = "fit/anchors.json";
pub const FUSED_DIR: &str = "fused";
pub const SCENE_DIR: &str = "scene";
pub const EVAL_DIR: &str = "eval";

pub fn view_dir(root: &Path, view: u32) -> PathBuf {
    root.join(format!("view_{view}"))
}

pub fn cloud_path(root: &Path, view: u32, frame: usize) -> PathBuf {
    view_dir(root, view).join(frame_file_name(frame as u64, "ply"))
}

pub fn labels_path(root: &Path, view: u32, frame: usize) -> PathBuf {
    view_dir(root, view).join("labels").join(frame_file_name(frame as u64, "csv"))
}

pub fn frame_json(dir: &Path, frame: usize) -> PathBuf {
    dir.join(frame_file_name(frame as u64, "json"))
}

/// Directory name of one occlusion ratio, e.g. `ratio_0.30`.
pub fn ratio_dir_name(ratio: f64) -> String {
    format!("ratio_{ratio:.2}")
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &'static str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        what,
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_template(root: &Path) -> Result<BodyTemplate> {
    BodyTemplate::load(&root.join(TEMPLATE_FILE))
}

/// The anchor set written by `fit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub anchor_vertex: Vec<usize>,
    pub anchor_joint: Vec<usize>,
    pub a_tem: Vec<Vec3>,
}

impl AnchorSet {
    pub fn of(t: &BodyTemplate) -> Self {
        AnchorSet {
            anchor_vertex: t.anchor_vertex.clone(),
            anchor_joint: t.anchor_joint.clone(),
            a_tem: t.a_tem.clone(),
        }
    }
}
