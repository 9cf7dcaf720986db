use serde::{Deserialize, Serialize};

use super::register::{register_regions, IcpParams, RegionFit, RegionModel};
use super::{apply_j2a, J2AMapping, Sparkle};
use crate::body::{BodyTemplate, NUM_ANCHORS, NUM_JOINTS, SMPL_TREE};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geom3::{procrustes, Rotation, Vec3};
use crate::labels::{point_anchor_labels, LabelSet, BG_JOINT};

/// Tunables of the geometric joint/anchor estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Fraction of the offset correction applied by the refinement step.
    pub gain: f64,
    /// Fraction of points discarded (farthest from the median) by the trimmed mean.
    pub trim: f64,
    /// Fewer supporting points than this triggers the neighbour fallback.
    pub min_support: usize,
    /// Anchor support at which the observed cell fully replaces the prior.
    pub anchor_full_support: f64,
    /// Support count giving full anchor confidence.
    pub conf_n_ref: f64,
    /// Distance scale of the anchor confidence decay (metres).
    pub conf_scale: f64,
    /// Support count giving full joint confidence.
    pub joint_conf_ref: f64,
    /// Place joints and anchors by rigidly registering each labeled region
    /// against the template instead of from centroids alone.
    pub register: bool,
    pub icp_iterations: usize,
    /// Fraction of correspondences dropped by the trimmed ICP.
    pub icp_trim: f64,
    /// Registrations with a larger residual (metres) are rejected.
    pub icp_max_rms: f64,
    /// Regions with fewer labeled points are not registered.
    pub icp_min_points: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            gain: 0.5,
            trim: 0.2,
            min_support: 3,
            anchor_full_support: 20.0,
            conf_n_ref: 10.0,
            conf_scale: 0.1,
            joint_conf_ref: 10.0,
            register: true,
            icp_iterations: 20,
            icp_trim: 0.1,
            icp_max_rms: 0.05,
            icp_min_points: 12,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.anchor_full_support > 0.0
            && self.conf_n_ref > 0.0
            && self.conf_scale > 0.0
            && self.joint_conf_ref > 0.0
            && self.icp_max_rms > 0.0
            && self.icp_iterations > 0;
        if !(0.0..=1.0).contains(&self.gain)
            || !(0.0..1.0).contains(&self.trim)
            || !(0.0..1.0).contains(&self.icp_trim)
            || !positive
        {
            return Err(Error::validation("estimator configuration out of range"));
        }
        Ok(())
    }
}

/// Rest-frame offsets measured once on the template surface.
///
/// A region bound to joint `j` moves rigidly with that joint, so its centroid
/// sits at `J_j + R_j·joint_offset[j]` in any pose.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// Mean of region points minus the joint.
    pub joint_offset: Vec<Vec3>,
    /// Trimmed mean of region points minus the joint.
    pub joint_offset_trimmed: Vec<Vec3>,
    /// Trimmed mean of the region and its kinematic neighbours minus the joint.
    pub neighbourhood_offset: Vec<Vec3>,
    /// Anchor minus the mean of its cell (surface points labeled with it).
    pub anchor_offset: Vec<Vec3>,
    pub rest_bone: Vec<Vec3>,
    /// Rest surface of every region; empty disables registration.
    pub regions: Vec<RegionModel>,
}

impl Calibration {
    pub fn from_template(t: &BodyTemplate, trim: f64) -> Result<Self> {
        let rest = PointCloud::new(t.surface.clone());
        let anchor_label = point_anchor_labels(&rest, &t.surface_joint, &t.a_tem, &t.anchor_joint)?;
        let mut joint_offset = vec![Vec3::zeros(); NUM_JOINTS];
        let mut joint_offset_trimmed = vec![Vec3::zeros(); NUM_JOINTS];
        let mut neighbourhood_offset = vec![Vec3::zeros(); NUM_JOINTS];
        for j in 0..NUM_JOINTS {
            let region: Vec<Vec3> = gather(&t.surface, &t.surface_joint, &[j]);
            if !region.is_empty() {
                joint_offset[j] = mean(&region) - t.j_tem[j];
                joint_offset_trimmed[j] = trimmed_mean(&region, trim) - t.j_tem[j];
            }
            let mut set = SMPL_TREE.neighbors(j);
            set.push(j);
            let hood = gather(&t.surface, &t.surface_joint, &set);
            if !hood.is_empty() {
                neighbourhood_offset[j] = trimmed_mean(&hood, trim) - t.j_tem[j];
            }
        }
        let anchor_offset = (0..NUM_ANCHORS)
            .map(|a| {
                let cell: Vec<Vec3> = t
                    .surface
                    .iter()
                    .zip(&anchor_label)
                    .filter(|(_, &l)| l == a)
                    .map(|(p, _)| *p)
                    .collect();
                if cell.is_empty() {
                    Vec3::zeros()
                } else {
                    t.a_tem[a] - mean(&cell)
                }
            })
            .collect();
        Ok(Calibration {
            joint_offset,
            joint_offset_trimmed,
            neighbourhood_offset,
            anchor_offset,
            rest_bone: (0..NUM_JOINTS).map(|j| t.bone_vector(j)).collect(),
            regions: RegionModel::from_template(t)?,
        })
    }

    /// All offsets zero: estimators reduce to plain label centroids.
    pub fn centroids_only(t: &BodyTemplate) -> Self {
        Calibration {
            joint_offset: vec![Vec3::zeros(); NUM_JOINTS],
            joint_offset_trimmed: vec![Vec3::zeros(); NUM_JOINTS],
            neighbourhood_offset: vec![Vec3::zeros(); NUM_JOINTS],
            anchor_offset: vec![Vec3::zeros(); NUM_ANCHORS],
            rest_bone: (0..NUM_JOINTS).map(|j| t.bone_vector(j)).collect(),
            regions: Vec::new(),
        }
    }
}

fn gather(points: &[Vec3], labels: &[usize], set: &[usize]) -> Vec<Vec3> {
    points
        .iter()
        .zip(labels)
        .filter(|(_, l)| set.contains(l))
        .map(|(p, _)| *p)
        .collect()
}

fn mean(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len() as f64
}

/// Mean after discarding the `trim` fraction of points farthest from the
/// coordinate-wise median. Sets of one or two points are averaged whole.
pub fn trimmed_mean(points: &[Vec3], trim: f64) -> Vec3 {
    if points.len() <= 2 {
        return mean(points);
    }
    let median = Vec3::from_fn(|c, _| {
        let mut v: Vec<f64> = points.iter().map(|p| p[c]).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    });
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| ((p - median).norm_squared(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keep = ((points.len() as f64) * (1.0 - trim)).round().max(1.0) as usize;
    let kept: Vec<Vec3> = order[..keep].iter().map(|&(_, i)| points[i]).collect();
    mean(&kept)
}

/// World rotation of each joint's region, identity when unknown.
fn region_rotation(frames: Option<&[Rotation]>, j: usize) -> Rotation {
    frames.map(|f| f[j]).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointEstimate {
    pub joints: Vec<Vec3>,
    pub trans: Vec3,
    pub support: Vec<usize>,
}

fn check_labels(c: &PointCloud, labels: &LabelSet) -> Result<()> {
    if labels.len() != c.len() || labels.anchor_label.len() != c.len() {
        return Err(Error::validation(format!(
            "label set covers {} points, cloud has {}",
            labels.len(),
            c.len()
        )));
    }
    Ok(())
}

/// Centroid initialisation: each joint is the mean of its labeled points
/// pulled back by the calibrated region offset (rotated by `frames` when a
/// previous pose estimate is available). Joints without support hang off
/// their parent by the rest bone.
pub fn estimate_joints_geometric(
    c: &PointCloud,
    labels: &LabelSet,
    calib: &Calibration,
    frames: Option<&[Rotation]>,
) -> Result<JointEstimate> {
    check_labels(c, labels)?;
    let mut sums = vec![Vec3::zeros(); NUM_JOINTS];
    let mut support = vec![0usize; NUM_JOINTS];
    let mut total = Vec3::zeros();
    let mut fg = 0usize;
    for (p, &j) in c.points.iter().zip(&labels.joint_label) {
        if j < BG_JOINT {
            sums[j] += p;
            support[j] += 1;
            total += p;
            fg += 1;
        }
    }
    if fg == 0 {
        return Err(Error::validation("every point is background; nothing to estimate"));
    }
    let trans = total / fg as f64;
    let mut joints = vec![Vec3::zeros(); NUM_JOINTS];
    for j in 0..NUM_JOINTS {
        let r = region_rotation(frames, j);
        joints[j] = if support[j] > 0 {
            sums[j] / support[j] as f64 - r * calib.joint_offset[j]
        } else {
            match SMPL_TREE.parent(j) {
                Some(p) => joints[p] + region_rotation(frames, p) * calib.rest_bone[j],
                None => trans,
            }
        };
    }
    Ok(JointEstimate {
        joints,
        trans,
        support,
    })
}

/// Residual-offset refinement: `J_op = J_init + ΔJ`, `T_op = T_init + ΔJ₀`,
/// with `ΔJ_j = gain·(trimmed_mean(P_j − J_init,j) − offset_j)`. Sparse joints
/// borrow their kinematic neighbours' points.
pub fn refine_joints_offsets(
    c: &PointCloud,
    labels: &LabelSet,
    j_init: &[Vec3],
    t_init: &Vec3,
    calib: &Calibration,
    cfg: &EstimatorConfig,
    frames: Option<&[Rotation]>,
) -> Result<(Vec<Vec3>, Vec3)> {
    check_labels(c, labels)?;
    if j_init.len() != NUM_JOINTS {
        return Err(Error::validation("refinement needs 24 initial joints"));
    }
    let mut by_joint: Vec<Vec<Vec3>> = vec![Vec::new(); NUM_JOINTS];
    for (p, &j) in c.points.iter().zip(&labels.joint_label) {
        if j < BG_JOINT {
            by_joint[j].push(*p);
        }
    }
    let mut j_op = j_init.to_vec();
    let mut delta_root = Vec3::zeros();
    for j in 0..NUM_JOINTS {
        let r = region_rotation(frames, j);
        let (set, offset) = if by_joint[j].len() >= cfg.min_support {
            (by_joint[j].clone(), calib.joint_offset_trimmed[j])
        } else {
            let mut set = by_joint[j].clone();
            for n in SMPL_TREE.neighbors(j) {
                set.extend_from_slice(&by_joint[n]);
            }
            (set, calib.neighbourhood_offset[j])
        };
        if set.is_empty() {
            continue;
        }
        let local: Vec<Vec3> = set.iter().map(|p| p - j_init[j]).collect();
        let delta = (trimmed_mean(&local, cfg.trim) - r * offset) * cfg.gain;
        j_op[j] = j_init[j] + delta;
        if j == 0 {
            delta_root = delta;
        }
    }
    Ok((j_op, t_init + delta_root))
}

/// Anchors from the joint-to-anchor prior blended towards the observed cell
/// centre, `μ = min(1, n_a / anchor_full_support)` once a cell has enough
/// support. The observed centre is the cell mean pushed out by the calibrated
/// anchor offset when region rotations are known.
#[allow(clippy::too_many_arguments)]
pub fn estimate_anchors(
    j_op: &[Vec3],
    m: &J2AMapping,
    c: &PointCloud,
    labels: &LabelSet,
    calib: &Calibration,
    anchor_joint: &[usize],
    cfg: &EstimatorConfig,
    frames: Option<&[Rotation]>,
) -> Result<Vec<Vec3>> {
    check_labels(c, labels)?;
    let a_init = apply_j2a(m, j_op);
    let mut sums = vec![Vec3::zeros(); NUM_ANCHORS];
    let mut count = vec![0usize; NUM_ANCHORS];
    for (p, &a) in c.points.iter().zip(&labels.anchor_label) {
        if a < NUM_ANCHORS {
            sums[a] += p;
            count[a] += 1;
        }
    }
    Ok((0..NUM_ANCHORS)
        .map(|a| {
            if count[a] < cfg.min_support {
                return a_init[a];
            }
            let mu = (count[a] as f64 / cfg.anchor_full_support).min(1.0);
            let centre = sums[a] / count[a] as f64;
            let observed = match frames {
                Some(f) => centre + f[anchor_joint[a]] * calib.anchor_offset[a],
                None => centre,
            };
            a_init[a] * (1.0 - mu) + observed * mu
        })
        .collect())
}

/// `min(1, n_a/n_ref)·exp(−d̄_a/s)`, zero without support.
pub fn anchor_confidence(
    c: &PointCloud,
    labels: &LabelSet,
    a_op: &[Vec3],
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    check_labels(c, labels)?;
    let mut dist = vec![0.0; NUM_ANCHORS];
    let mut count = vec![0usize; NUM_ANCHORS];
    for (p, &a) in c.points.iter().zip(&labels.anchor_label) {
        if a < NUM_ANCHORS {
            dist[a] += (p - a_op[a]).norm();
            count[a] += 1;
        }
    }
    Ok((0..NUM_ANCHORS)
        .map(|a| {
            if count[a] == 0 {
                return 0.0;
            }
            let n = count[a] as f64;
            (n / cfg.conf_n_ref).min(1.0) * (-(dist[a] / n) / cfg.conf_scale).exp()
        })
        .collect())
}

/// The whole per-frame estimation chain: joints, refinement, anchors and
/// confidences.
pub fn estimate_sparkle(
    c: &PointCloud,
    labels: &LabelSet,
    m: &J2AMapping,
    template: &BodyTemplate,
    calib: &Calibration,
    cfg: &EstimatorConfig,
    frames: Option<&[Rotation]>,
) -> Result<Sparkle> {
    let init = estimate_joints_geometric(c, labels, calib, frames)?;
    let (mut joints, trans) =
        refine_joints_offsets(c, labels, &init.joints, &init.trans, calib, cfg, frames)?;
    let mut anchors = estimate_anchors(&joints, m, c, labels, calib, &template.anchor_joint, cfg, frames)?;
    let mut root_fit = None;
    if cfg.register && calib.regions.len() == NUM_JOINTS {
        let fits = registered_regions(c, labels, calib, cfg, frames);
        place_registered(template, &fits, &mut joints, &mut anchors);
        root_fit = fits[0].map(|f| f.rot);
    }
    let anchor_conf = anchor_confidence(c, labels, &anchors, cfg)?;
    let joint_conf: Vec<f64> = init
        .support
        .iter()
        .map(|&n| (n as f64 / cfg.joint_conf_ref).min(1.0))
        .collect();
    let global_rot = match (root_fit, frames) {
        (Some(r), _) => r,
        (None, Some(f)) => f[0],
        (None, None) => root_orientation(template, &joints, &joint_conf),
    };
    Ok(Sparkle {
        joints,
        anchors,
        trans,
        global_rot,
        joint_conf,
        anchor_conf,
    })
}

/// Accepted rigid fits of every region (`None` where registration failed).
pub fn registered_regions(
    c: &PointCloud,
    labels: &LabelSet,
    calib: &Calibration,
    cfg: &EstimatorConfig,
    frames: Option<&[Rotation]>,
) -> Vec<Option<RegionFit>> {
    let priors: Vec<Vec<Rotation>> = (0..NUM_JOINTS)
        .map(|j| frames.map(|f| vec![f[j]]).unwrap_or_default())
        .collect();
    let params = IcpParams {
        iterations: cfg.icp_iterations,
        trim: cfg.icp_trim,
    };
    register_regions(c, labels, &calib.regions, &priors, params, cfg.icp_min_points)
        .into_iter()
        .map(|f| f.filter(|f| f.rms <= cfg.icp_max_rms))
        .collect()
}

/// Overrides joints and anchors with the positions implied by the region
/// fits. A joint is pinned by its own region and by its parent's; the two
/// predictions are averaged with inverse squared residual weights.
pub fn place_registered(template: &BodyTemplate, fits: &[Option<RegionFit>], joints: &mut [Vec3], anchors: &mut [Vec3]) {
    const RMS_FLOOR: f64 = 1e-3;
    for j in 0..NUM_JOINTS {
        let parent = SMPL_TREE.parent(j).and_then(|p| fits[p]);
        let mut sum = Vec3::zeros();
        let mut weight = 0.0;
        for f in [fits[j], parent].into_iter().flatten() {
            let w = 1.0 / (f.rms * f.rms + RMS_FLOOR * RMS_FLOOR);
            sum += f.apply(&template.j_tem[j]) * w;
            weight += w;
        }
        if weight > 0.0 {
            joints[j] = sum / weight;
        }
    }
    for (a, &j) in template.anchor_joint.iter().enumerate() {
        if let Some(f) = fits[j] {
            anchors[a] = f.apply(&template.a_tem[a]);
        }
    }
}

/// Procrustes over the bones leaving the root.
fn root_orientation(template: &BodyTemplate, joints: &[Vec3], conf: &[f64]) -> Rotation {
    let kids = SMPL_TREE.children(0);
    let src: Vec<Vec3> = kids.iter().map(|&c| template.bone_vector(c)).collect();
    let dst: Vec<Vec3> = kids.iter().map(|&c| joints[c] - joints[0]).collect();
    let w: Vec<f64> = kids.iter().map(|&c| conf[c].min(conf[0]).max(1e-6)).collect();
    procrustes(&src, &dst, &w).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeled_blob(center: Vec3, joint: usize, n: usize) -> (Vec<Vec3>, Vec<usize>) {
        let pts: Vec<Vec3> = (0..n)
            .map(|i| {
                let a = i as f64 * 0.7;
                center + Vec3::new(a.cos(), a.sin(), (i % 3) as f64 - 1.0) * 0.02
            })
            .collect();
        (pts, vec![joint; n])
    }

    #[test]
    fn trimmed_mean_ignores_outlier() {
        let mut pts = vec![Vec3::new(0.0, 0.0, 0.0); 9];
        pts.push(Vec3::new(100.0, 0.0, 0.0));
        assert!(trimmed_mean(&pts, 0.2).norm() < 1e-12);
        assert_eq!(trimmed_mean(&pts[..2], 0.2), Vec3::zeros());
    }

    #[test]
    fn confidence_formula() {
        let cfg = EstimatorConfig::default();
        let a = vec![Vec3::zeros(); NUM_ANCHORS];
        // five points at distance 0.1 from anchor 0
        let pts: Vec<Vec3> = (0..5).map(|_| Vec3::new(0.1, 0.0, 0.0)).collect();
        let labels = LabelSet {
            joint_label: vec![0; 5],
            anchor_label: vec![0; 5],
        };
        let conf = anchor_confidence(&PointCloud::new(pts), &labels, &a, &cfg).unwrap();
        assert!((conf[0] - 0.5 * (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(conf[1], 0.0);
        let pts = vec![Vec3::zeros(); 12];
        let labels = LabelSet {
            joint_label: vec![0; 12],
            anchor_label: vec![0; 12],
        };
        let conf = anchor_confidence(&PointCloud::new(pts), &labels, &a, &cfg).unwrap();
        assert_eq!(conf[0], 1.0);
    }

    #[test]
    fn all_background_is_an_error() {
        let labels = LabelSet {
            joint_label: vec![BG_JOINT; 3],
            anchor_label: vec![NUM_ANCHORS; 3],
        };
        let t = crate::body::make_default_template(300, 1).unwrap();
        let calib = Calibration::centroids_only(&t);
        let c = PointCloud::new(vec![Vec3::zeros(); 3]);
        assert!(estimate_joints_geometric(&c, &labels, &calib, None).is_err());
    }

    #[test]
    fn refinement_fixed_point_and_bias() {
        let t = crate::body::make_default_template(300, 1).unwrap();
        let calib = Calibration::centroids_only(&t);
        let cfg = EstimatorConfig::default();
        let mut pts = Vec::new();
        let mut jl = Vec::new();
        for j in 0..NUM_JOINTS {
            let (p, l) = labeled_blob(t.j_tem[j], j, 30);
            pts.extend(p);
            jl.extend(l);
        }
        let labels = LabelSet {
            anchor_label: vec![NUM_ANCHORS; jl.len()],
            joint_label: jl,
        };
        let c = PointCloud::new(pts);
        let centres: Vec<Vec3> = (0..NUM_JOINTS)
            .map(|j| {
                let s: Vec<Vec3> = c
                    .points
                    .iter()
                    .zip(&labels.joint_label)
                    .filter(|(_, &l)| l == j)
                    .map(|(p, _)| *p)
                    .collect();
                trimmed_mean(&s, cfg.trim)
            })
            .collect();
        let (j_op, _) =
            refine_joints_offsets(&c, &labels, &centres, &Vec3::zeros(), &calib, &cfg, None).unwrap();
        for (a, b) in j_op.iter().zip(&centres) {
            assert!((a - b).norm() < 1e-9);
        }
        let mut biased = centres.clone();
        biased[5] += Vec3::new(0.05, 0.0, 0.0);
        let (j_op, _) =
            refine_joints_offsets(&c, &labels, &biased, &Vec3::zeros(), &calib, &cfg, None).unwrap();
        let before = (biased[5] - centres[5]).norm();
        let after = (j_op[5] - centres[5]).norm();
        assert!(after <= 0.6 * before, "{after} vs {before}");
    }
}
