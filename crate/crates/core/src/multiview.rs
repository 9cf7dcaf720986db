//! Fusion of per-view Sparkles expressed in a shared world frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom3::{chordal_mean, Rotation, Vec3};
use crate::sparkle::Sparkle;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewPrediction {
    pub sparkle: Sparkle,
    pub view_id: u32,
    pub view_weight_scale: f64,
}

impl ViewPrediction {
    pub fn new(sparkle: Sparkle, view_id: u32) -> Self {
        ViewPrediction {
            sparkle,
            view_id,
            view_weight_scale: 1.0,
        }
    }

    fn mean_confidence(&self) -> f64 {
        let s = &self.sparkle;
        let n = (s.joint_conf.len() + s.anchor_conf.len()).max(1) as f64;
        (s.joint_conf.iter().sum::<f64>() + s.anchor_conf.iter().sum::<f64>()) / n
    }
}

/// Views sorted by id so every reduction runs in a canonical order.
fn canonical(preds: &[ViewPrediction]) -> Result<Vec<&ViewPrediction>> {
    if preds.is_empty() {
        return Err(Error::validation("at least one view is required"));
    }
    for p in preds {
        if !(p.view_weight_scale >= 0.0) || !p.view_weight_scale.is_finite() {
            return Err(Error::validation("view weight scale must be finite and >= 0"));
        }
        p.sparkle.validate()?;
    }
    let mut v: Vec<&ViewPrediction> = preds.iter().collect();
    v.sort_by_key(|p| p.view_id);
    Ok(v)
}

/// Weighted chordal mean of the views' global rotations; weights are the
/// view scale times the view's mean keypoint confidence.
pub fn calibrate_rotation(preds: &[ViewPrediction]) -> Result<Rotation> {
    let views = canonical(preds)?;
    let rots: Vec<Rotation> = views.iter().map(|p| p.sparkle.global_rot).collect();
    let w: Vec<f64> = views
        .iter()
        .map(|p| p.view_weight_scale * p.mean_confidence())
        .collect();
    chordal_mean(&rots, &w)
}

/// Confidence-weighted average of one keypoint across views. Returns the
/// position and the fused confidence (max over views, 0 when no view has
/// weight). Views with a zero weight scale take no part at all.
fn fuse_point(items: &[(Vec3, f64, f64)]) -> (Vec3, f64) {
    let active: Vec<&(Vec3, f64, f64)> = items.iter().filter(|(_, _, s)| *s > 0.0).collect();
    let active = if active.is_empty() { items.iter().collect() } else { active };
    let total: f64 = active.iter().map(|(_, c, s)| c * s).sum();
    if total > 0.0 {
        let pos = active
            .iter()
            .fold(Vec3::zeros(), |acc, (x, c, s)| acc + x * (c * s / total));
        let conf = active.iter().map(|(_, c, _)| *c).fold(0.0, f64::max);
        (pos, conf)
    } else {
        let pos = active.iter().fold(Vec3::zeros(), |acc, (x, _, _)| acc + x) / active.len() as f64;
        (pos, 0.0)
    }
}

/// Per-keypoint fusion with weights `view_weight_scale · confidence`.
pub fn fuse_sparkle(preds: &[ViewPrediction]) -> Result<Sparkle> {
    let views = canonical(preds)?;
    let first = &views[0].sparkle;
    let mut out = first.clone();
    for j in 0..first.joints.len() {
        let items: Vec<(Vec3, f64, f64)> = views
            .iter()
            .map(|p| (p.sparkle.joints[j], p.sparkle.joint_conf[j], p.view_weight_scale))
            .collect();
        (out.joints[j], out.joint_conf[j]) = fuse_point(&items);
    }
    for a in 0..first.anchors.len() {
        let items: Vec<(Vec3, f64, f64)> = views
            .iter()
            .map(|p| (p.sparkle.anchors[a], p.sparkle.anchor_conf[a], p.view_weight_scale))
            .collect();
        (out.anchors[a], out.anchor_conf[a]) = fuse_point(&items);
    }
    let trans_items: Vec<(Vec3, f64, f64)> = views
        .iter()
        .map(|p| {
            let s = &p.sparkle;
            let mean = s.joint_conf.iter().sum::<f64>() / s.joint_conf.len() as f64;
            (s.trans, mean, p.view_weight_scale)
        })
        .collect();
    out.trans = fuse_point(&trans_items).0;
    out.global_rot = calibrate_rotation(preds).unwrap_or(first.global_rot);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{forward_kinematics, make_default_template, Pose};
    use crate::geom3::rodrigues;

    fn base() -> Sparkle {
        let t = make_default_template(300, 1).unwrap();
        Sparkle::from_body_state(&forward_kinematics(&t, &Pose::zero()))
    }

    #[test]
    fn identical_views_fixed_point() {
        let s = base();
        let views = vec![ViewPrediction::new(s.clone(), 0), ViewPrediction::new(s.clone(), 1)];
        let f = fuse_sparkle(&views).unwrap();
        for (a, b) in f.joints.iter().zip(&s.joints) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_confidence_view_ignored() {
        let s1 = base();
        let mut s2 = base();
        for j in s2.joints.iter_mut() {
            *j += Vec3::new(1.0, 0.0, 0.0);
        }
        s2.joint_conf[3] = 0.0;
        let f = fuse_sparkle(&[ViewPrediction::new(s1.clone(), 0), ViewPrediction::new(s2, 1)]).unwrap();
        assert_eq!(f.joints[3], s1.joints[3]);
    }

    #[test]
    fn rotation_midpoint() {
        let mut s1 = base();
        let mut s2 = base();
        s1.global_rot = rodrigues(&Vec3::z(), 0.0).unwrap();
        s2.global_rot = rodrigues(&Vec3::z(), 0.8).unwrap();
        let r = calibrate_rotation(&[ViewPrediction::new(s1, 0), ViewPrediction::new(s2, 1)]).unwrap();
        let want = rodrigues(&Vec3::z(), 0.4).unwrap();
        assert!((r.matrix() - want.matrix()).abs().max() < 1e-9);
    }
}
