//! Rigid registration of each labeled body region against its template
//! region (trimmed, label-constrained ICP).
//!
//! Region centroids fix where a body part is but not how it is rolled about
//! its bone. The region's full point set does, because the template's limb
//! cross-sections are not rotationally symmetric.

use std::sync::LazyLock;

use kiddo::{KdTree, SquaredEuclidean};

use crate::body::{BodyTemplate, NUM_ANCHORS, NUM_JOINTS};
use crate::cloud::PointCloud;
use crate::error::Result;
use crate::geom3::{procrustes, rodrigues, Rotation, Vec3};
use crate::labels::{point_anchor_labels, LabelSet, BG_JOINT};

/// Rest-pose surface of one joint region, split by anchor cell.
#[derive(Clone, Debug)]
pub struct RegionModel {
    pub points: Vec<Vec3>,
    /// Point indices per anchor label (index `NUM_ANCHORS` unused).
    pub cells: Vec<Vec<usize>>,
    pub centroid: Vec3,
    whole: KdTree<f64, 3>,
    cell_trees: Vec<Option<KdTree<f64, 3>>>,
}

impl PartialEq for RegionModel {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.cells == other.cells
    }
}

fn tree_of(points: &[Vec3], indices: impl Iterator<Item = usize>) -> KdTree<f64, 3> {
    let mut tree = KdTree::new();
    for i in indices {
        let p = points[i];
        tree.add(&[p.x, p.y, p.z], i as u64);
    }
    tree
}

impl RegionModel {
    /// One model per joint, from the template's rest surface.
    pub fn from_template(t: &BodyTemplate) -> Result<Vec<RegionModel>> {
        let rest = PointCloud::new(t.surface.clone());
        let anchor_label = point_anchor_labels(&rest, &t.surface_joint, &t.a_tem, &t.anchor_joint)?;
        Ok((0..NUM_JOINTS)
            .map(|j| {
                let mut points = Vec::new();
                let mut cells = vec![Vec::new(); NUM_ANCHORS + 1];
                for (i, p) in t.surface.iter().enumerate() {
                    if t.surface_joint[i] == j {
                        cells[anchor_label[i]].push(points.len());
                        points.push(*p);
                    }
                }
                let centroid = if points.is_empty() {
                    t.j_tem[j]
                } else {
                    points.iter().sum::<Vec3>() / points.len() as f64
                };
                RegionModel::new(points, cells, centroid)
            })
            .collect())
    }

    fn new(points: Vec<Vec3>, cells: Vec<Vec<usize>>, centroid: Vec3) -> Self {
        let whole = tree_of(&points, 0..points.len());
        let cell_trees = cells
            .iter()
            .map(|c| (!c.is_empty()).then(|| tree_of(&points, c.iter().copied())))
            .collect();
        RegionModel {
            points,
            cells,
            centroid,
            whole,
            cell_trees,
        }
    }

    /// Nearest model point (index, squared distance), restricted to the
    /// given anchor cell when the model has points in it.
    fn nearest(&self, q: &Vec3, cell: usize) -> (usize, f64) {
        let tree = self
            .cell_trees
            .get(cell)
            .and_then(Option::as_ref)
            .unwrap_or(&self.whole);
        let n = tree.nearest_one::<SquaredEuclidean>(&[q.x, q.y, q.z]);
        (n.item as usize, n.distance)
    }
}

/// Rigid transform `world = rot·rest + trans` of one region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionFit {
    pub rot: Rotation,
    pub trans: Vec3,
    /// Root mean square distance of the kept correspondences.
    pub rms: f64,
}

impl RegionFit {
    pub fn apply(&self, rest: &Vec3) -> Vec3 {
        self.rot * *rest + self.trans
    }
}

/// Tunables of the region registration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcpParams {
    pub iterations: usize,
    /// Fraction of correspondences (largest distances) discarded each step.
    pub trim: f64,
}

/// Trimmed ICP from a starting transform; scan points carry anchor labels
/// that restrict their correspondences to the same template cell.
pub fn icp(scan: &[Vec3], scan_cell: &[usize], model: &RegionModel, init: RegionFit, params: IcpParams) -> RegionFit {
    let mut fit = init;
    let keep = ((scan.len() as f64) * (1.0 - params.trim)).ceil().max(3.0) as usize;
    let keep = keep.min(scan.len());
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(scan.len());
    let mut last_rms = f64::INFINITY;
    for _ in 0..params.iterations.max(1) {
        let rt = fit.rot.transpose();
        pairs.clear();
        for (k, p) in scan.iter().enumerate() {
            let (i, d) = model.nearest(&(rt * (p - fit.trans)), scan_cell[k]);
            pairs.push((d, k, i));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let kept = &pairs[..keep];
        let rms = (kept.iter().map(|x| x.0).sum::<f64>() / keep as f64).sqrt();
        fit.rms = rms;
        if last_rms - rms <= 1e-12 * (1.0 + rms) && rms <= last_rms {
            break;
        }
        last_rms = rms;
        let cs = kept.iter().map(|x| scan[x.1]).sum::<Vec3>() / keep as f64;
        let cm = kept.iter().map(|x| model.points[x.2]).sum::<Vec3>() / keep as f64;
        let src: Vec<Vec3> = kept.iter().map(|x| model.points[x.2] - cm).collect();
        let dst: Vec<Vec3> = kept.iter().map(|x| scan[x.1] - cs).collect();
        let Ok(rot) = procrustes(&src, &dst, &vec![1.0; keep]) else {
            break;
        };
        fit = RegionFit {
            rot,
            trans: cs - rot * cm,
            rms,
        };
    }
    fit
}

/// The 60 rotations of the icosahedral group, used as starting orientations
/// when nothing better is known.
static ICOSAHEDRAL: LazyLock<Vec<Rotation>> = LazyLock::new(|| {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let g1 = rodrigues(&Vec3::new(0.0, 1.0, phi).normalize(), std::f64::consts::TAU / 5.0).expect("unit axis");
    let g2 = rodrigues(&Vec3::new(0.0, -1.0, phi).normalize(), std::f64::consts::TAU / 5.0).expect("unit axis");
    let mut group = vec![Rotation::identity()];
    let mut i = 0;
    while i < group.len() {
        for g in [g1, g2] {
            let candidate = g * group[i];
            if group.iter().all(|r| (r.matrix() - candidate.matrix()).norm() > 1e-6) {
                group.push(candidate);
            }
        }
        i += 1;
    }
    debug_assert_eq!(group.len(), 60);
    group
});

pub fn icosahedral_rotations() -> &'static [Rotation] {
    &ICOSAHEDRAL
}

/// Every `stride`-th point of a labeled scan region.
fn subsample(scan: &[Vec3], cell: &[usize], count: usize) -> (Vec<Vec3>, Vec<usize>) {
    let stride = scan.len().div_ceil(count).max(1);
    (
        scan.iter().step_by(stride).copied().collect(),
        cell.iter().step_by(stride).copied().collect(),
    )
}

/// Registers one region by successive halving: short ICP runs from every
/// starting orientation on a small subsample, the better part continued on a
/// larger one, and the best few refined on all points.
pub fn register_region(
    scan: &[Vec3],
    scan_cell: &[usize],
    model: &RegionModel,
    priors: &[Rotation],
    params: IcpParams,
) -> Option<RegionFit> {
    if scan.len() < 3 || model.points.len() < 3 {
        return None;
    }
    let centroid = scan.iter().sum::<Vec3>() / scan.len() as f64;
    let mut fits: Vec<RegionFit> = priors
        .iter()
        .chain(icosahedral_rotations())
        .map(|rot| RegionFit {
            rot: *rot,
            trans: centroid - *rot * model.centroid,
            rms: f64::INFINITY,
        })
        .collect();
    for (points, iterations, keep) in [(32, 3, 20), (96, 5, 6)] {
        let (sub, sub_cell) = subsample(scan, scan_cell, points);
        let step = IcpParams {
            iterations,
            trim: params.trim,
        };
        fits = fits.iter().map(|f| icp(&sub, &sub_cell, model, *f, step)).collect();
        fits.sort_by(|a, b| a.rms.total_cmp(&b.rms));
        fits.truncate(keep);
    }
    fits.iter()
        .map(|f| icp(scan, scan_cell, model, *f, params))
        .min_by(|a, b| a.rms.total_cmp(&b.rms))
}

/// Registers every region with enough labeled points. `priors[j]` holds
/// extra starting orientations for region `j` (e.g. a previous estimate).
pub fn register_regions(
    c: &PointCloud,
    labels: &LabelSet,
    models: &[RegionModel],
    priors: &[Vec<Rotation>],
    params: IcpParams,
    min_points: usize,
) -> Vec<Option<RegionFit>> {
    let mut scan: Vec<Vec<Vec3>> = vec![Vec::new(); NUM_JOINTS];
    let mut cell: Vec<Vec<usize>> = vec![Vec::new(); NUM_JOINTS];
    for ((p, &j), &a) in c.points.iter().zip(&labels.joint_label).zip(&labels.anchor_label) {
        if j < BG_JOINT {
            scan[j].push(*p);
            cell[j].push(a);
        }
    }
    (0..NUM_JOINTS)
        .map(|j| {
            if scan[j].len() < min_points.max(3) {
                return None;
            }
            register_region(&scan[j], &cell[j], &models[j], &priors[j], params)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{forward_kinematics, joint_frames, make_default_template, random_pose};
    use crate::geom3::geodesic_angle_deg;
    use rand::SeedableRng;

    #[test]
    fn group_has_sixty_distinct_rotations() {
        let g = icosahedral_rotations();
        assert_eq!(g.len(), 60);
        for r in g {
            assert!(r.orthonormality_error() < 1e-9);
        }
    }

    #[test]
    fn exact_region_is_recovered() {
        let t = make_default_template(2048, 3).unwrap();
        let models = RegionModel::from_template(&t).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let pose = random_pose(&mut rng, 1.0);
        let body = forward_kinematics(&t, &pose);
        let frames = joint_frames(&t, &pose);
        let c = PointCloud::new(body.surface.clone());
        let labels = crate::labels::oracle_labels(&t, &body, &c, 1, 0.25).unwrap();
        let fits = register_regions(
            &c,
            &labels,
            &models,
            &vec![Vec::new(); NUM_JOINTS],
            IcpParams { iterations: 30, trim: 0.1 },
            10,
        );
        let mut good = 0;
        for j in 0..NUM_JOINTS {
            let f = fits[j].expect("every region is populated");
            if geodesic_angle_deg(&f.rot, &frames.rot[j]) < 0.5 {
                good += 1;
            }
        }
        assert!(good >= 22, "only {good} regions registered");
    }
}
