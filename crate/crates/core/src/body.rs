//! 24-joint articulated body: topology, synthetic template, shape and
//! forward kinematics.
//!
//! Skinning is rigid: every surface point and every anchor is bound to one
//! joint and follows that joint's world transform exactly.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom3::{deterministic_perpendicular, Rotation, Vec3};
use crate::labels::{anchor_joint_assign, vertex_joint_match};
use crate::sparkle::{select_anchors_with_quotas, AnchorQuota};

pub const NUM_JOINTS: usize = 24;
pub const NUM_ANCHORS: usize = 32;
pub const NUM_BONES: usize = 23;
pub const NUM_BETAS: usize = 10;
pub const TEMPLATE_VERSION: u32 = 1;

const PARENTS: [i32; NUM_JOINTS] = [
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
];

pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

/// Rest positions (metres, pelvis at origin, y up, x to the body's left).
const REST_JOINTS: [[f64; 3]; NUM_JOINTS] = [
    [0.0, 0.0, 0.0],
    [0.070, -0.085, -0.010],
    [-0.070, -0.085, -0.010],
    [0.0, 0.110, -0.020],
    [0.095, -0.460, 0.000],
    [-0.095, -0.460, 0.000],
    [0.0, 0.245, 0.000],
    [0.085, -0.860, -0.040],
    [-0.085, -0.860, -0.040],
    [0.0, 0.300, 0.020],
    [0.110, -0.920, 0.080],
    [-0.110, -0.920, 0.080],
    [0.0, 0.510, -0.010],
    [0.075, 0.420, 0.000],
    [-0.075, 0.420, 0.000],
    [0.0, 0.580, 0.035],
    [0.170, 0.455, -0.015],
    [-0.170, 0.455, -0.015],
    [0.420, 0.440, -0.035],
    [-0.420, 0.440, -0.035],
    [0.670, 0.450, -0.040],
    [-0.670, 0.450, -0.040],
    [0.755, 0.440, -0.050],
    [-0.755, 0.440, -0.050],
];

/// Tube radius of the bone ending at each joint (index 0 unused).
const BONE_RADIUS: [f64; NUM_JOINTS] = [
    0.0, 0.075, 0.075, 0.11, 0.065, 0.065, 0.11, 0.048, 0.048, 0.11, 0.04, 0.04, 0.055, 0.05,
    0.05, 0.05, 0.05, 0.05, 0.045, 0.045, 0.035, 0.035, 0.03, 0.03,
];

/// Spheres centred on joints: pelvis and the end effectors.
const BLOBS: [(usize, f64); 6] = [(0, 0.11), (10, 0.05), (11, 0.05), (15, 0.095), (22, 0.045), (23, 0.045)];

/// Shape group of the bone ending at each joint (index 0 unused).
///
/// 0 torso, 1 neck+head, 2/3 L/R upper arm, 4/5 L/R forearm+hand,
/// 6/7 L/R thigh, 8/9 L/R shin+foot.
const SHAPE_GROUP: [usize; NUM_JOINTS] = [
    0, 0, 0, 0, 6, 7, 0, 8, 9, 0, 8, 9, 1, 0, 0, 1, 0, 0, 2, 3, 4, 5, 4, 5,
];

/// Parent/child structure of the 24-joint skeleton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KinematicTree {
    parent: [Option<usize>; NUM_JOINTS],
    children: Vec<Vec<usize>>,
}

pub static SMPL_TREE: LazyLock<KinematicTree> = LazyLock::new(KinematicTree::smpl);

impl KinematicTree {
    fn smpl() -> Self {
        let mut parent = [None; NUM_JOINTS];
        let mut children = vec![Vec::new(); NUM_JOINTS];
        for (j, &p) in PARENTS.iter().enumerate() {
            if p >= 0 {
                parent[j] = Some(p as usize);
                children[p as usize].push(j);
            }
        }
        KinematicTree { parent, children }
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parent[joint]
    }

    pub fn children(&self, joint: usize) -> &[usize] {
        &self.children[joint]
    }

    pub fn is_leaf(&self, joint: usize) -> bool {
        self.children[joint].is_empty()
    }

    /// Bone index of the bone ending at `joint` (none for the root).
    pub fn bone_of_joint(&self, joint: usize) -> Option<usize> {
        self.parent[joint].map(|_| joint - 1)
    }

    /// Child joint of bone `bone`.
    pub fn joint_of_bone(&self, bone: usize) -> usize {
        bone + 1
    }

    /// Parent plus children.
    pub fn neighbors(&self, joint: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.parent[joint].into_iter().collect();
        out.extend_from_slice(&self.children[joint]);
        out
    }

    /// Whether `joint` lies in the subtree rooted at `root`.
    pub fn in_subtree(&self, joint: usize, root: usize) -> bool {
        let mut j = Some(joint);
        while let Some(cur) = j {
            if cur == root {
                return true;
            }
            j = self.parent[cur];
        }
        false
    }

    pub fn names(&self) -> &'static [&'static str; NUM_JOINTS] {
        &JOINT_NAMES
    }
}

/// Shape group driving the length of the bone ending at `joint`.
pub fn shape_group(joint: usize) -> usize {
    SHAPE_GROUP[joint]
}

/// Rest-pose joints, anchors and surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyTemplate {
    pub version: u32,
    pub j_tem: Vec<Vec3>,
    pub a_tem: Vec<Vec3>,
    pub surface: Vec<Vec3>,
    pub surface_joint: Vec<usize>,
    pub anchor_joint: Vec<usize>,
    pub anchor_vertex: Vec<usize>,
}

/// Axis-angle pose, shape coefficients and root translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub theta: Vec<Vec3>,
    pub beta: Vec<f64>,
    pub trans: Vec3,
}

/// A posed body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub joints: Vec<Vec3>,
    pub anchors: Vec<Vec3>,
    pub surface: Vec<Vec3>,
    pub global_rot: Rotation,
}

impl Pose {
    pub fn zero() -> Self {
        Pose {
            theta: vec![Vec3::zeros(); NUM_JOINTS],
            beta: vec![0.0; NUM_BETAS],
            trans: Vec3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != NUM_JOINTS || self.beta.len() != NUM_BETAS {
            return Err(Error::validation(format!(
                "pose needs {NUM_JOINTS} rotations and {NUM_BETAS} betas, got {} and {}",
                self.theta.len(),
                self.beta.len()
            )));
        }
        if self.theta.iter().any(|t| !(t.norm() < PI + 1e-6)) {
            return Err(Error::validation("axis-angle magnitude must be below π"));
        }
        validate_beta(&self.beta)?;
        if !self.trans.iter().all(|x| x.is_finite()) {
            return Err(Error::validation("translation must be finite"));
        }
        Ok(())
    }

    /// Local rotation of each joint.
    pub fn rotations(&self) -> Vec<Rotation> {
        self.theta.iter().map(Rotation::exp).collect()
    }
}

fn validate_beta(beta: &[f64]) -> Result<()> {
    if beta.len() != NUM_BETAS {
        return Err(Error::validation(format!("expected {NUM_BETAS} shape coefficients")));
    }
    if beta.iter().any(|b| !(-3.0..=3.0).contains(b)) {
        return Err(Error::validation("shape coefficients must lie in [-3, 3]"));
    }
    Ok(())
}

/// Same rotation expressed with magnitude at most π.
pub fn wrap_rotation_vector(v: &Vec3) -> Vec3 {
    let n = v.norm();
    if n <= PI {
        return *v;
    }
    let wrapped = n % (2.0 * PI);
    let dir = v / n;
    if wrapped <= PI {
        dir * wrapped
    } else {
        dir * (wrapped - 2.0 * PI)
    }
}

impl BodyTemplate {
    pub fn tree(&self) -> &'static KinematicTree {
        &SMPL_TREE
    }

    /// Rest bone vector of the bone ending at `joint`.
    pub fn bone_vector(&self, joint: usize) -> Vec3 {
        match SMPL_TREE.parent(joint) {
            Some(p) => self.j_tem[joint] - self.j_tem[p],
            None => Vec3::zeros(),
        }
    }

    /// Lengths of the 23 bones, indexed by bone.
    pub fn bone_lengths(&self) -> Vec<f64> {
        (1..NUM_JOINTS).map(|j| self.bone_vector(j).norm()).collect()
    }

    /// Anchors bound to `joint`.
    pub fn anchors_of(&self, joint: usize) -> impl Iterator<Item = usize> + '_ {
        self.anchor_joint
            .iter()
            .enumerate()
            .filter(move |(_, &j)| j == joint)
            .map(|(a, _)| a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != TEMPLATE_VERSION {
            return Err(Error::validation(format!(
                "unsupported template version {}",
                self.version
            )));
        }
        if self.j_tem.len() != NUM_JOINTS || self.a_tem.len() != NUM_ANCHORS {
            return Err(Error::validation("template needs 24 joints and 32 anchors"));
        }
        if self.anchor_joint.len() != NUM_ANCHORS || self.anchor_vertex.len() != NUM_ANCHORS {
            return Err(Error::validation("template anchor bindings must have 32 entries"));
        }
        if self.surface_joint.len() != self.surface.len() {
            return Err(Error::validation("one joint label per surface point required"));
        }
        if self.j_tem[0].norm() > 1e-12 {
            return Err(Error::validation("template root must sit at the origin"));
        }
        if (1..NUM_JOINTS).any(|j| !(self.bone_vector(j).norm() > 0.0)) {
            return Err(Error::validation("template bones must have positive length"));
        }
        if self.surface_joint.iter().any(|&j| j >= NUM_JOINTS)
            || self.anchor_joint.iter().any(|&j| j >= NUM_JOINTS)
            || self.anchor_vertex.iter().any(|&v| v >= self.surface.len())
        {
            return Err(Error::validation("template binding index out of range"));
        }
        for a in 0..NUM_ANCHORS {
            if (self.a_tem[a] - self.j_tem[self.anchor_joint[a]]).norm() >= 0.5 {
                return Err(Error::validation(format!(
                    "anchor {a} lies 0.5 m or more from its joint"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: BodyTemplate = serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "template",
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        t.validate()?;
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Builds the synthetic humanoid: elliptic, slightly off-axis tubes around
/// every bone plus ellipsoids at the pelvis and end effectors, sampled by area. Anchors come from
/// PCA/max-volume selection over a seeded set of random poses, with a quota
/// that gives every articulated joint at least one off-axis anchor and every
/// end effector two.
pub fn make_default_template(surface_count: usize, seed: u64) -> Result<BodyTemplate> {
    if surface_count < 256 {
        return Err(Error::validation(format!(
            "surface_count must be at least 256, got {surface_count}"
        )));
    }
    let j_tem: Vec<Vec3> = REST_JOINTS.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
    let surface = sample_surface(&j_tem, surface_count, seed);
    let surface_joint = vertex_joint_match(&surface, &j_tem);

    let mut bare = BodyTemplate {
        version: TEMPLATE_VERSION,
        j_tem,
        a_tem: Vec::new(),
        surface,
        surface_joint,
        anchor_joint: Vec::new(),
        anchor_vertex: Vec::new(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a_0001);
    let samples: Vec<BodyState> = (0..64)
        .map(|_| forward_kinematics(&bare, &random_pose(&mut rng, 0.8)))
        .collect();

    let anchor_vertex = {
        let quotas = anchor_quotas(&bare);
        select_anchors_with_quotas(&samples, NUM_ANCHORS, seed, &quotas)?
    };
    let anchor_joint = anchor_joint_assign(&anchor_vertex, &bare.surface_joint)?;
    bare.a_tem = anchor_vertex.iter().map(|&v| bare.surface[v]).collect();
    bare.anchor_joint = anchor_joint;
    bare.anchor_vertex = anchor_vertex;
    bare.validate()?;
    Ok(bare)
}

fn anchor_quotas(t: &BodyTemplate) -> Vec<AnchorQuota<'_>> {
    let tree = &*SMPL_TREE;
    let mut quotas = Vec::new();
    for joint in 1..NUM_JOINTS {
        let children = tree.children(joint);
        let count = match children.len() {
            0 => 2,
            1 => 1,
            _ => continue,
        };
        let members: Vec<usize> = (0..t.surface.len())
            .filter(|&s| t.surface_joint[s] == joint)
            .collect();
        let origin = t.j_tem[joint];
        let axis = children.first().map(|&c| (t.j_tem[c] - origin).normalize());
        let surface = &t.surface;
        quotas.push(AnchorQuota {
            members,
            count,
            admissible: Box::new(move |cand: usize, chosen: &[usize]| {
                let d = surface[cand] - origin;
                let n = d.norm();
                if n < 1e-6 {
                    return false;
                }
                let dir = d / n;
                if let Some(axis) = axis {
                    if dir.cross(&axis).norm() < 0.3 {
                        return false;
                    }
                }
                chosen.iter().all(|&o| {
                    let od = (surface[o] - origin).normalize();
                    od.cross(&dir).norm() > 0.3
                })
            }),
        });
    }
    quotas
}

/// Cross-section of a limb: an ellipse (minor/major ratio) whose centre sits
/// off the bone axis by a fraction of the radius. The asymmetry makes each
/// body region's roll about its bone visible in its shape.
const ELLIPSE_RATIO: f64 = 0.7;
const AXIS_OFFSET: f64 = 0.25;
/// Semi-axes of the pelvis and end-effector blobs relative to their radius.
const BLOB_AXES: [f64; 3] = [1.0, 0.85, 0.7];

fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt())
}

fn ellipsoid_area(a: f64, b: f64, c: f64) -> f64 {
    let p = 1.6075;
    4.0 * PI * (((a * b).powf(p) + (a * c).powf(p) + (b * c).powf(p)) / 3.0).powf(1.0 / p)
}

fn sample_surface(j_tem: &[Vec3], count: usize, seed: u64) -> Vec<Vec3> {
    enum Piece {
        Limb { a: Vec3, b: Vec3, r: f64 },
        Blob { c: Vec3, r: f64 },
    }
    let mut pieces = Vec::new();
    for j in 1..NUM_JOINTS {
        let p = SMPL_TREE.parent(j).unwrap();
        pieces.push(Piece::Limb {
            a: j_tem[p],
            b: j_tem[j],
            r: BONE_RADIUS[j],
        });
    }
    for &(j, r) in &BLOBS {
        pieces.push(Piece::Blob { c: j_tem[j], r });
    }
    let areas: Vec<f64> = pieces
        .iter()
        .map(|p| match p {
            Piece::Limb { a, b, r } => ellipse_perimeter(*r, r * ELLIPSE_RATIO) * (b - a).norm(),
            Piece::Blob { r, .. } => ellipsoid_area(r * BLOB_AXES[0], r * BLOB_AXES[1], r * BLOB_AXES[2]),
        })
        .collect();
    let counts = largest_remainder(&areas, count);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for (piece, n) in pieces.iter().zip(counts) {
        for _ in 0..n {
            let point = match piece {
                Piece::Limb { a, b, r } => {
                    let d = (b - a).normalize();
                    let u = deterministic_perpendicular(&d);
                    let w = d.cross(&u);
                    let t: f64 = rng.random();
                    let phi: f64 = rng.random::<f64>() * 2.0 * PI;
                    let centre = a + (b - a) * t + u * (AXIS_OFFSET * r);
                    centre + (u * phi.cos() + w * (ELLIPSE_RATIO * phi.sin())) * *r
                }
                Piece::Blob { c, r } => {
                    let z: f64 = rng.random::<f64>() * 2.0 - 1.0;
                    let phi: f64 = rng.random::<f64>() * 2.0 * PI;
                    let s = (1.0 - z * z).sqrt();
                    let unit = Vec3::new(s * phi.cos(), s * phi.sin(), z);
                    c + Vec3::new(unit.x * BLOB_AXES[0], unit.y * BLOB_AXES[1], unit.z * BLOB_AXES[2]) * *r
                }
            };
            out.push(point);
        }
    }
    out
}

fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Scales bone groups by `exp(0.1·β_g)`. Points bound to a joint translate
/// with it.
pub fn apply_shape(t: &BodyTemplate, beta: &[f64]) -> Result<BodyTemplate> {
    validate_beta(beta)?;
    let joints = shaped_joints(t, beta);
    let shift: Vec<Vec3> = joints.iter().zip(&t.j_tem).map(|(n, o)| n - o).collect();
    let mut out = t.clone();
    for (s, &j) in out.surface.iter_mut().zip(&t.surface_joint) {
        *s += shift[j];
    }
    for (a, &j) in out.a_tem.iter_mut().zip(&t.anchor_joint) {
        *a += shift[j];
    }
    out.j_tem = joints;
    Ok(out)
}

pub(crate) fn shaped_joints(t: &BodyTemplate, beta: &[f64]) -> Vec<Vec3> {
    // accumulate displacements so an unit scale reproduces the rest joints bit for bit
    let mut shift = vec![Vec3::zeros(); NUM_JOINTS];
    for j in 1..NUM_JOINTS {
        let p = SMPL_TREE.parent(j).unwrap();
        let scale = (0.1 * beta[SHAPE_GROUP[j]]).exp();
        shift[j] = shift[p] + (t.j_tem[j] - t.j_tem[p]) * (scale - 1.0);
    }
    t.j_tem.iter().zip(&shift).map(|(j, s)| j + s).collect()
}

/// World rotation and position of every joint.
#[derive(Clone, Debug)]
pub struct JointFrames {
    pub rot: Vec<Rotation>,
    pub pos: Vec<Vec3>,
    /// Shaped rest joints the frames were built from.
    pub rest: Vec<Vec3>,
    /// `pos − rot·rest`, the translation part of each joint's rigid transform.
    pub offset: Vec<Vec3>,
}

impl JointFrames {
    /// Moves a rest-pose point bound to `joint` into the world.
    pub fn place(&self, joint: usize, rest_point: &Vec3, rest_shift: &Vec3) -> Vec3 {
        self.rot[joint] * (rest_point + rest_shift) + self.offset[joint]
    }
}

/// Joint world frames for a pose.
pub fn joint_frames(t: &BodyTemplate, p: &Pose) -> JointFrames {
    let rest = shaped_joints(t, &p.beta);
    let local = p.rotations();
    let mut rot = vec![Rotation::identity(); NUM_JOINTS];
    let mut pos = vec![Vec3::zeros(); NUM_JOINTS];
    let mut offset = vec![Vec3::zeros(); NUM_JOINTS];
    rot[0] = local[0];
    pos[0] = rest[0] + p.trans;
    offset[0] = pos[0] - rot[0] * rest[0];
    for j in 1..NUM_JOINTS {
        let parent = SMPL_TREE.parent(j).unwrap();
        rot[j] = rot[parent] * local[j];
        pos[j] = rot[parent] * rest[j] + offset[parent];
        offset[j] = pos[j] - rot[j] * rest[j];
    }
    JointFrames { rot, pos, rest, offset }
}

/// Posed joints and anchors only (no surface).
pub fn posed_keypoints(t: &BodyTemplate, p: &Pose) -> (Vec<Vec3>, Vec<Vec3>) {
    let f = joint_frames(t, p);
    let anchors = t
        .a_tem
        .iter()
        .zip(&t.anchor_joint)
        .map(|(a, &j)| f.place(j, a, &(f.rest[j] - t.j_tem[j])))
        .collect();
    (f.pos, anchors)
}

/// Rigid-chain forward kinematics with shape applied from `p.beta`.
pub fn forward_kinematics(t: &BodyTemplate, p: &Pose) -> BodyState {
    let f = joint_frames(t, p);
    let shift: Vec<Vec3> = f.rest.iter().zip(&t.j_tem).map(|(n, o)| n - o).collect();
    let surface = t
        .surface
        .iter()
        .zip(&t.surface_joint)
        .map(|(s, &j)| f.place(j, s, &shift[j]))
        .collect();
    let anchors = t
        .a_tem
        .iter()
        .zip(&t.anchor_joint)
        .map(|(a, &j)| f.place(j, a, &shift[j]))
        .collect();
    BodyState {
        global_rot: f.rot[0],
        joints: f.pos,
        anchors,
        surface,
    }
}

/// Uniformly random unit vector.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.random::<f64>() * 2.0 - 1.0;
    let phi: f64 = rng.random::<f64>() * 2.0 * PI;
    let s = (1.0 - z * z).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Every joint rotated about a random axis by up to `max_angle` radians;
/// zero shape and translation.
pub fn random_pose<R: Rng + ?Sized>(rng: &mut R, max_angle: f64) -> Pose {
    let mut p = Pose::zero();
    for th in p.theta.iter_mut() {
        let axis = random_unit(rng);
        *th = axis * (rng.random::<f64>() * max_angle);
    }
    p
}
