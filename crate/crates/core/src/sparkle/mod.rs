//! Joints-plus-anchors representation, its geometric estimators, temporal
//! smoothing and training-style losses.

mod estimate;
mod j2a;
mod loss;
mod select;
mod register;
mod smooth;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::body::{BodyState, NUM_ANCHORS, NUM_JOINTS};
use crate::error::{Error, Result};
use crate::geom3::{Rotation, Vec3};

pub use register::{icosahedral_rotations, icp, register_region, register_regions, IcpParams, RegionFit, RegionModel};
pub use estimate::{
    anchor_confidence, estimate_anchors, estimate_joints_geometric, estimate_sparkle,
    place_registered, refine_joints_offsets, registered_regions, trimmed_mean, Calibration, EstimatorConfig,
    JointEstimate,
};
pub use j2a::{apply_j2a, fit_j2a, J2AMapping};
pub use loss::{loss_pst, loss_sae, loss_sss, LossWeights};
pub use select::{select_anchors_pca, select_anchors_with_quotas, AnchorQuota};
pub use smooth::{project_bone_lengths, smoothing_objective, temporal_smooth, SmoothConfig};

/// 24 joints and 32 anchors with per-keypoint confidences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sparkle {
    pub joints: Vec<Vec3>,
    pub anchors: Vec<Vec3>,
    pub trans: Vec3,
    pub global_rot: Rotation,
    pub joint_conf: Vec<f64>,
    pub anchor_conf: Vec<f64>,
}

impl Sparkle {
    /// Exact keypoints of a posed body, fully confident. `trans` is the root
    /// joint.
    pub fn from_body_state(b: &BodyState) -> Self {
        Sparkle {
            joints: b.joints.clone(),
            anchors: b.anchors.clone(),
            trans: b.joints[0],
            global_rot: b.global_rot,
            joint_conf: vec![1.0; NUM_JOINTS],
            anchor_conf: vec![1.0; NUM_ANCHORS],
        }
    }

    /// Joints then anchors.
    pub fn keypoints(&self) -> impl Iterator<Item = (&Vec3, f64)> {
        self.joints
            .iter()
            .zip(self.joint_conf.iter().copied())
            .chain(self.anchors.iter().zip(self.anchor_conf.iter().copied()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.len() != NUM_JOINTS
            || self.anchors.len() != NUM_ANCHORS
            || self.joint_conf.len() != NUM_JOINTS
            || self.anchor_conf.len() != NUM_ANCHORS
        {
            return Err(Error::validation("sparkle needs 24 joints and 32 anchors with confidences"));
        }
        let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
        if !self.joints.iter().chain(&self.anchors).all(finite) || !finite(&self.trans) {
            return Err(Error::validation("sparkle positions must be finite"));
        }
        if self
            .joint_conf
            .iter()
            .chain(&self.anchor_conf)
            .any(|c| !(0.0..=1.0).contains(c))
        {
            return Err(Error::validation("sparkle confidences must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Sparkle = serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "sparkle",
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        s.validate()?;
        Ok(s)
    }
}
