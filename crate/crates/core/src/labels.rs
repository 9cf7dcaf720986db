//! Hierarchical labeling: vertex→joint, point→joint, anchor→joint and
//! joint-localised point→anchor.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::body::{BodyState, BodyTemplate, NUM_ANCHORS, NUM_JOINTS, SMPL_TREE};
use crate::cloud::{knn_one, PointCloud};
use crate::error::{Error, Result};
use crate::geom3::Vec3;

/// Joint label of background points.
pub const BG_JOINT: usize = NUM_JOINTS;
/// Anchor label of background points.
pub const BG_ANCHOR: usize = NUM_ANCHORS;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_BG_DIST: f64 = 0.25;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub joint_label: Vec<usize>,
    pub anchor_label: Vec<usize>,
}

impl LabelSet {
    pub fn len(&self) -> usize {
        self.joint_label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint_label.is_empty()
    }

    /// Checks ranges, lengths and the background rule. The same-joint rule
    /// for anchors is checked only when `anchor_joint` is given.
    pub fn validate(&self, n_points: usize, anchor_joint: Option<&[usize]>) -> Result<()> {
        if self.joint_label.len() != n_points || self.anchor_label.len() != n_points {
            return Err(Error::validation(format!(
                "label set covers {} points, cloud has {n_points}",
                self.joint_label.len()
            )));
        }
        for (&j, &a) in self.joint_label.iter().zip(&self.anchor_label) {
            if j > BG_JOINT || a > BG_ANCHOR {
                return Err(Error::validation("label out of range"));
            }
            if j == BG_JOINT && a != BG_ANCHOR {
                return Err(Error::validation("background point carries an anchor label"));
            }
        }
        if let Some(aj) = anchor_joint {
            let owned: Vec<bool> = (0..NUM_JOINTS).map(|j| aj.contains(&j)).collect();
            for (&j, &a) in self.joint_label.iter().zip(&self.anchor_label) {
                if j < BG_JOINT && a < BG_ANCHOR && owned[j] && aj[a] != j {
                    return Err(Error::validation(format!(
                        "anchor {a} is not bound to joint {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("joint_label,anchor_label\n");
        for (j, a) in self.joint_label.iter().zip(&self.anchor_label) {
            let _ = writeln!(s, "{j},{a}");
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |message: String| Error::Format {
            what: "label CSV",
            path: path.to_path_buf(),
            message,
        };
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("joint_label,anchor_label") {
            return Err(bad("expected header joint_label,anchor_label".into()));
        }
        let mut out = LabelSet::default();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (j, a) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("bad row {line:?}")))?;
            out.joint_label
                .push(j.trim().parse().map_err(|e| bad(format!("{e}")))?);
            out.anchor_label
                .push(a.trim().parse().map_err(|e| bad(format!("{e}")))?);
        }
        Ok(out)
    }
}

fn nearest(query: &Vec3, candidates: impl Iterator<Item = (usize, Vec3)>) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in candidates {
        let d = (p - query).norm_squared();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.map(|(_, i)| i)
}

/// Closest joint per vertex, ties to the lowest joint index.
pub fn vertex_joint_match(surface: &[Vec3], joints: &[Vec3]) -> Vec<usize> {
    surface
        .iter()
        .map(|v| nearest(v, joints.iter().copied().enumerate()).unwrap_or(0))
        .collect()
}

/// Majority vote over the `k` nearest surface vertices; background when the
/// nearest vertex is farther than `bg_dist`.
pub fn point_joint_labels(
    cloud: &PointCloud,
    surface: &[Vec3],
    surface_joint: &[usize],
    k: usize,
    bg_dist: f64,
) -> Result<Vec<usize>> {
    if k == 0 || k > surface.len() {
        return Err(Error::validation(format!(
            "label vote needs 1 <= k <= {}, got {k}",
            surface.len()
        )));
    }
    if surface_joint.len() != surface.len() {
        return Err(Error::validation("one joint label per surface vertex required"));
    }
    Ok(cloud
        .points
        .iter()
        .map(|p| {
            let nn = knn_one(p, surface, k);
            if (surface[nn[0]] - p).norm() > bg_dist {
                return BG_JOINT;
            }
            let mut votes = [0usize; NUM_JOINTS];
            for &i in &nn {
                votes[surface_joint[i]] += 1;
            }
            // max_by_key returns the last maximum; scan manually for the lowest.
            let mut best = 0;
            for j in 1..NUM_JOINTS {
                if votes[j] > votes[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Joint of the surface vertex each anchor sits on.
pub fn anchor_joint_assign(anchor_vertex: &[usize], surface_joint: &[usize]) -> Result<Vec<usize>> {
    anchor_vertex
        .iter()
        .map(|&v| {
            surface_joint.get(v).copied().ok_or_else(|| {
                Error::validation(format!(
                    "anchor vertex {v} out of range for {} surface points",
                    surface_joint.len()
                ))
            })
        })
        .collect()
}

/// Joints whose anchors are candidates for points labeled `joint`: the
/// joint itself, else the nearest ring of kinematic neighbours that owns any.
pub fn candidate_joints(joint: usize, anchor_joint: &[usize]) -> Vec<usize> {
    let owns = |j: usize| anchor_joint.contains(&j);
    if owns(joint) {
        return vec![joint];
    }
    let mut seen = vec![false; NUM_JOINTS];
    seen[joint] = true;
    let mut ring = vec![joint];
    loop {
        let mut next = Vec::new();
        for &j in &ring {
            for n in SMPL_TREE.neighbors(j) {
                if !seen[n] {
                    seen[n] = true;
                    next.push(n);
                }
            }
        }
        if next.is_empty() {
            return Vec::new();
        }
        next.sort_unstable();
        let owning: Vec<usize> = next.iter().copied().filter(|&j| owns(j)).collect();
        if !owning.is_empty() {
            return owning;
        }
        ring = next;
    }
}

/// Nearest anchor among those bound to the point's joint. Joints without
/// anchors fall back to their parent/child joints' anchors (widening ring by
/// ring if needed). Background stays background.
pub fn point_anchor_labels(
    cloud: &PointCloud,
    joint_label: &[usize],
    anchors: &[Vec3],
    anchor_joint: &[usize],
) -> Result<Vec<usize>> {
    if joint_label.len() != cloud.len() {
        return Err(Error::validation("joint labels do not match the cloud"));
    }
    if anchors.len() != anchor_joint.len() {
        return Err(Error::validation("one joint per anchor required"));
    }
    let candidates: Vec<Vec<usize>> = (0..NUM_JOINTS)
        .map(|j| {
            let joints = candidate_joints(j, anchor_joint);
            (0..anchors.len())
                .filter(|&a| joints.contains(&anchor_joint[a]))
                .collect()
        })
        .collect();
    cloud
        .points
        .iter()
        .zip(joint_label)
        .map(|(p, &j)| {
            if j >= BG_JOINT {
                return Ok(BG_ANCHOR);
            }
            Ok(nearest(p, candidates[j].iter().map(|&a| (a, anchors[a]))).unwrap_or(BG_ANCHOR))
        })
        .collect()
}

/// Ground-truth labels from the posed body the cloud was scanned from.
pub fn oracle_labels(
    template: &BodyTemplate,
    body: &BodyState,
    cloud: &PointCloud,
    k: usize,
    bg_dist: f64,
) -> Result<LabelSet> {
    let joint_label = point_joint_labels(cloud, &body.surface, &template.surface_joint, k, bg_dist)?;
    let anchor_label = point_anchor_labels(cloud, &joint_label, &body.anchors, &template.anchor_joint)?;
    Ok(LabelSet {
        joint_label,
        anchor_label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_match_examples() {
        let joints: Vec<Vec3> = (0..NUM_JOINTS).map(|j| Vec3::new(j as f64, 0.0, 0.0)).collect();
        assert_eq!(vertex_joint_match(&[joints[5]], &joints), vec![5]);
        let mut joints2 = joints.clone();
        joints2[2] = Vec3::new(0.0, 1.0, 0.0);
        joints2[7] = Vec3::new(0.0, -1.0, 0.0);
        for (i, j) in joints2.iter_mut().enumerate() {
            if i != 2 && i != 7 {
                *j = Vec3::new(100.0, 0.0, 0.0);
            }
        }
        assert_eq!(vertex_joint_match(&[Vec3::zeros()], &joints2), vec![2]);
    }

    #[test]
    fn majority_vote() {
        let surface = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.01, 0.0, 0.0),
            Vec3::new(0.02, 0.0, 0.0),
            Vec3::new(5.0, 0.0, 0.0),
        ];
        let sj = vec![4, 4, 9, 1];
        let c = PointCloud::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
        assert_eq!(point_joint_labels(&c, &surface, &sj, 3, 0.25).unwrap(), vec![4, BG_JOINT]);
        assert_eq!(point_joint_labels(&c, &surface, &sj, 1, 10.0).unwrap(), vec![4, 9]);
        assert!(point_joint_labels(&c, &surface, &sj, 5, 0.25).is_err());
    }

    #[test]
    fn anchor_assign_checks_range() {
        assert_eq!(anchor_joint_assign(&[1, 0], &[7, 3]).unwrap(), vec![3, 7]);
        assert!(anchor_joint_assign(&[2], &[7, 3]).is_err());
    }

    #[test]
    fn wrist_point_stays_on_arm() {
        // anchor 0 on the left leg is globally closer, anchor 1 on the wrist is not
        let anchors = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0)];
        let anchor_joint = vec![4, 20];
        let c = PointCloud::new(vec![Vec3::new(0.1, 0.0, 0.0)]);
        assert_eq!(point_anchor_labels(&c, &[20], &anchors, &anchor_joint).unwrap(), vec![1]);
        assert_eq!(point_anchor_labels(&c, &[4], &anchors, &anchor_joint).unwrap(), vec![0]);
        assert_eq!(
            point_anchor_labels(&c, &[BG_JOINT], &anchors, &anchor_joint).unwrap(),
            vec![BG_ANCHOR]
        );
    }

    #[test]
    fn anchorless_joint_uses_neighbours() {
        // joint 18 (left elbow) has none; its neighbours 16 and 20 do.
        let anchors = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.2, 0.0, 0.0),
        ];
        let anchor_joint = vec![16, 20, 3];
        assert_eq!(candidate_joints(18, &anchor_joint), vec![16, 20]);
        let c = PointCloud::new(vec![Vec3::new(0.3, 0.0, 0.0)]);
        assert_eq!(point_anchor_labels(&c, &[18], &anchors, &anchor_joint).unwrap(), vec![0]);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let l = LabelSet {
            joint_label: vec![0, 24, 5],
            anchor_label: vec![3, 32, 31],
        };
        let p = dir.path().join("labels.csv");
        l.write_csv(&p).unwrap();
        assert_eq!(LabelSet::read_csv(&p).unwrap(), l);
        l.validate(3, None).unwrap();
        assert!(l.validate(4, None).is_err());
    }
}
