//! Pose from a Sparkle: closed-form per-joint swing/twist initialisation,
//! then Levenberg-damped Gauss–Newton over (θ, β, T).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::body::{
    posed_keypoints, wrap_rotation_vector, BodyTemplate, Pose, NUM_ANCHORS, NUM_BETAS, NUM_BONES,
    NUM_JOINTS, SMPL_TREE,
};
use crate::error::{Error, Result};
use crate::geom3::{
    procrustes, procrustes_rank, solve_weighted_bone_rotation, swing_twist_decompose, Rotation, SwingTwist, Vec3,
};
use crate::sparkle::Sparkle;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub damping_init: f64,
    pub tol_cost: f64,
    pub fd_step: f64,
    pub joint_weight: f64,
    pub anchor_weight: f64,
    /// Never optimise β.
    pub beta_frozen: bool,
    /// β is also frozen when the mean anchor confidence is below this.
    pub beta_freeze_conf: f64,
    /// Colinearity threshold of the swing/twist solvers.
    pub colinear_eps: f64,
    /// Bones this close (sine of the angle) to ±template direction are flagged.
    pub singular_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 50,
            damping_init: 1e-3,
            tol_cost: 1e-10,
            fd_step: 1e-5,
            joint_weight: 1.0,
            anchor_weight: 0.5,
            beta_frozen: false,
            beta_freeze_conf: 0.2,
            colinear_eps: 1e-8,
            singular_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.damping_init,
            self.tol_cost,
            self.fd_step,
            self.colinear_eps,
            self.singular_tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0))
            || !(self.joint_weight >= 0.0)
            || !(self.anchor_weight >= 0.0)
            || !(self.beta_freeze_conf >= 0.0)
        {
            return Err(Error::validation("solver configuration out of range"));
        }
        Ok(())
    }
}

/// Output of the closed-form initialisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitResult {
    pub pose: Pose,
    /// Bone `b` ends at joint `b + 1`; the record describes the local
    /// rotation of that bone's parent joint.
    pub per_bone: Vec<SwingTwist>,
    pub degenerate_bones: Vec<usize>,
    /// Joints whose local rotation could not be fully determined.
    pub degenerate_joints: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub pose: Pose,
    /// Swing/twist split of the final local rotations about each bone.
    pub per_bone: Vec<SwingTwist>,
    pub init_pose: Pose,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    /// Costs of the initial point and every accepted step.
    pub cost_history: Vec<f64>,
    pub degenerate_bones: Vec<usize>,
    pub degenerate_joints: Vec<usize>,
    pub beta_frozen: bool,
    /// Set when iteration stopped on a non-finite cost.
    pub aborted: Option<String>,
}

fn sine_between(a: &Vec3, b: &Vec3) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.cross(b).norm() / (na * nb)
}

struct JointAnchors {
    tem: Vec<Vec3>,
    obs: Vec<Vec3>,
    weight: Vec<f64>,
}

/// Template and observed anchors of `joint`, relative to that joint, with the
/// observed ones expressed in `frame`.
fn joint_anchors(t: &BodyTemplate, s: &Sparkle, joint: usize, frame: &Rotation) -> JointAnchors {
    let mut out = JointAnchors {
        tem: Vec::new(),
        obs: Vec::new(),
        weight: Vec::new(),
    };
    let ft = frame.transpose();
    for a in t.anchors_of(joint) {
        out.tem.push(t.a_tem[a] - t.j_tem[joint]);
        out.obs.push(ft * (s.anchors[a] - s.joints[joint]));
        out.weight.push(s.anchor_conf[a].max(0.0));
    }
    out
}

/// Closed-form pose from a Sparkle.
///
/// Joints are visited root to leaf. Observed bone and anchor vectors are
/// un-rotated by the accumulated parent rotation, then:
/// * joints with several children (pelvis, upper spine) take the Procrustes
///   rotation of their child bones and own anchors;
/// * joints with one child take swing from the child bone and twist from
///   their anchors;
/// * end effectors use their most confident anchor as a pseudo-bone and the
///   others for twist.
pub fn init_pose_swing_twist(t: &BodyTemplate, s: &Sparkle, cfg: &SolverConfig) -> Result<InitResult> {
    s.validate()?;
    let eps = cfg.colinear_eps;
    let mut local = vec![Rotation::identity(); NUM_JOINTS];
    let mut world = vec![Rotation::identity(); NUM_JOINTS];
    let mut degenerate_joints = Vec::new();

    for j in 0..NUM_JOINTS {
        let parent_world = SMPL_TREE.parent(j).map(|p| world[p]).unwrap_or_default();
        let pt = parent_world.transpose();
        let anchors = joint_anchors(t, s, j, &parent_world);
        let children = SMPL_TREE.children(j);
        let rot = match children.len() {
            0 => leaf_rotation(&anchors, eps).map(|(r, twist_ok)| {
                if !twist_ok {
                    degenerate_joints.push(j);
                }
                r
            }),
            1 => {
                let c = children[0];
                let v_tem = t.bone_vector(c);
                let v_obs = pt * (s.joints[c] - s.joints[j]);
                if v_obs.norm() <= eps {
                    None
                } else {
                    let st = solve_weighted_bone_rotation(
                        &v_tem,
                        &v_obs,
                        &anchors.tem,
                        &anchors.obs,
                        &anchors.weight,
                        eps,
                    )?;
                    if st.twist_degenerate {
                        degenerate_joints.push(j);
                    }
                    Some(st.rotation())
                }
            }
            _ => {
                let mut src = Vec::new();
                let mut dst = Vec::new();
                let mut w = Vec::new();
                for &c in children {
                    src.push(t.bone_vector(c));
                    dst.push(pt * (s.joints[c] - s.joints[j]));
                    w.push(s.joint_conf[c].min(s.joint_conf[j]).max(1e-6));
                }
                src.extend_from_slice(&anchors.tem);
                dst.extend_from_slice(&anchors.obs);
                w.extend_from_slice(&anchors.weight);
                if procrustes_rank(&src, &dst, &w, 1e-9) >= 2 {
                    procrustes(&src, &dst, &w).ok()
                } else {
                    None
                }
            }
        };
        local[j] = match rot {
            Some(r) => r,
            None => {
                if !degenerate_joints.contains(&j) {
                    degenerate_joints.push(j);
                }
                Rotation::identity()
            }
        };
        world[j] = parent_world * local[j];
    }

    let mut pose = Pose::zero();
    pose.theta = local.iter().map(Rotation::log).collect();
    pose.trans = s.joints[0] - t.j_tem[0];

    let (per_bone, mut degenerate_bones) = bone_records(t, &pose, s, cfg)?;
    for b in 0..NUM_BONES {
        let p = SMPL_TREE.parent(b + 1).expect("bone child has a parent");
        if degenerate_joints.contains(&p) && !degenerate_bones.contains(&b) {
            degenerate_bones.push(b);
        }
    }
    degenerate_bones.sort_unstable();
    degenerate_joints.sort_unstable();
    Ok(InitResult {
        pose,
        per_bone,
        degenerate_bones,
        degenerate_joints,
    })
}

/// Rotation of an end effector and whether its twist was observable; a
/// degenerate twist leaves the swing-only rotation.
fn leaf_rotation(anchors: &JointAnchors, eps: f64) -> Option<(Rotation, bool)> {
    let mut order: Vec<usize> = (0..anchors.tem.len())
        .filter(|&i| anchors.weight[i] > 0.0 && anchors.tem[i].norm() > eps && anchors.obs[i].norm() > eps)
        .collect();
    order.sort_by(|&a, &b| anchors.weight[b].total_cmp(&anchors.weight[a]).then(a.cmp(&b)));
    let (&first, rest) = order.split_first()?;
    let tem: Vec<Vec3> = rest.iter().map(|&i| anchors.tem[i]).collect();
    let obs: Vec<Vec3> = rest.iter().map(|&i| anchors.obs[i]).collect();
    let w: Vec<f64> = rest.iter().map(|&i| anchors.weight[i]).collect();
    let st = solve_weighted_bone_rotation(&anchors.tem[first], &anchors.obs[first], &tem, &obs, &w, eps).ok()?;
    Some((st.rotation(), !st.twist_degenerate))
}

/// Per-bone swing/twist split of a pose's local rotations, plus bones whose
/// observed direction is (anti-)aligned with the template within
/// `singular_tol` or has vanished.
fn bone_records(
    t: &BodyTemplate,
    pose: &Pose,
    s: &Sparkle,
    cfg: &SolverConfig,
) -> Result<(Vec<SwingTwist>, Vec<usize>)> {
    let rots = pose.rotations();
    let mut world = vec![Rotation::identity(); NUM_JOINTS];
    let mut records = Vec::with_capacity(NUM_BONES);
    let mut flagged = Vec::new();
    for j in 0..NUM_JOINTS {
        let parent_world = SMPL_TREE.parent(j).map(|p| world[p]).unwrap_or_default();
        world[j] = parent_world * rots[j];
    }
    for b in 0..NUM_BONES {
        let c = b + 1;
        let p = SMPL_TREE.parent(c).expect("bone child has a parent");
        let v_tem = t.bone_vector(c);
        let parent_world = SMPL_TREE.parent(p).map(|g| world[g]).unwrap_or_default();
        let v_obs = parent_world.transpose() * (s.joints[c] - s.joints[p]);
        let mut rec = swing_twist_decompose(&rots[p], &v_tem, cfg.colinear_eps)?;
        let singular = v_obs.norm() <= cfg.colinear_eps || sine_between(&v_tem, &v_obs) <= cfg.singular_tol;
        if singular {
            rec.swing_degenerate = true;
            flagged.push(b);
        }
        records.push(rec);
    }
    Ok((records, flagged))
}

fn num_params(beta_free: bool) -> usize {
    3 * NUM_JOINTS + if beta_free { NUM_BETAS } else { 0 } + 3
}

fn pack(p: &Pose, beta_free: bool) -> DVector<f64> {
    let mut x = DVector::zeros(num_params(beta_free));
    for (j, th) in p.theta.iter().enumerate() {
        x.fixed_rows_mut::<3>(3 * j).copy_from(th);
    }
    let mut k = 3 * NUM_JOINTS;
    if beta_free {
        for b in &p.beta {
            x[k] = *b;
            k += 1;
        }
    }
    x.fixed_rows_mut::<3>(k).copy_from(&p.trans);
    x
}

fn unpack(x: &DVector<f64>, base: &Pose, beta_free: bool) -> Pose {
    let mut p = base.clone();
    for j in 0..NUM_JOINTS {
        p.theta[j] = wrap_rotation_vector(&Vec3::new(x[3 * j], x[3 * j + 1], x[3 * j + 2]));
    }
    let mut k = 3 * NUM_JOINTS;
    if beta_free {
        for b in p.beta.iter_mut() {
            *b = x[k].clamp(-3.0, 3.0);
            k += 1;
        }
    }
    p.trans = Vec3::new(x[k], x[k + 1], x[k + 2]);
    p
}

/// Confidence-weighted residual vector; its squared norm is [`cost`].
pub fn residuals(pose: &Pose, t: &BodyTemplate, s: &Sparkle, cfg: &SolverConfig) -> DVector<f64> {
    let (joints, anchors) = posed_keypoints(t, pose);
    let mut r = DVector::zeros(3 * (NUM_JOINTS + NUM_ANCHORS));
    for j in 0..NUM_JOINTS {
        let w = (cfg.joint_weight * s.joint_conf[j]).sqrt();
        r.fixed_rows_mut::<3>(3 * j).copy_from(&((joints[j] - s.joints[j]) * w));
    }
    for a in 0..NUM_ANCHORS {
        let w = (cfg.anchor_weight * s.anchor_conf[a]).sqrt();
        r.fixed_rows_mut::<3>(3 * (NUM_JOINTS + a))
            .copy_from(&((anchors[a] - s.anchors[a]) * w));
    }
    r
}

/// `Σ w_J·c_j‖J_j − Ĵ_j‖² + Σ w_A·c_a‖A_a − Â_a‖²` for the posed body.
pub fn cost(pose: &Pose, t: &BodyTemplate, s: &Sparkle, cfg: &SolverConfig) -> f64 {
    residuals(pose, t, s, cfg).norm_squared()
}

/// Central-difference Jacobian of [`residuals`] with respect to the packed
/// parameters (θ, then β when free, then T).
pub fn jacobian(pose: &Pose, t: &BodyTemplate, s: &Sparkle, cfg: &SolverConfig, beta_free: bool) -> DMatrix<f64> {
    let x = pack(pose, beta_free);
    let n = x.len();
    let m = 3 * (NUM_JOINTS + NUM_ANCHORS);
    let h = cfg.fd_step;
    let mut jac = DMatrix::zeros(m, n);
    for k in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let rp = residuals(&unpack(&xp, pose, beta_free), t, s, cfg);
        let rm = residuals(&unpack(&xm, pose, beta_free), t, s, cfg);
        jac.set_column(k, &((rp - rm) / (2.0 * h)));
    }
    jac
}

/// Whether β is optimised for this Sparkle.
pub fn beta_is_free(s: &Sparkle, cfg: &SolverConfig) -> bool {
    let mean_conf = s.anchor_conf.iter().sum::<f64>() / s.anchor_conf.len().max(1) as f64;
    !cfg.beta_frozen && mean_conf >= cfg.beta_freeze_conf
}

/// Levenberg-damped Gauss–Newton from `theta_init`. Each iteration tries one
/// damped step; rejected steps raise the damping tenfold, accepted steps
/// lower it tenfold. The returned cost never exceeds the initial cost.
pub fn refine_pose(theta_init: &Pose, t: &BodyTemplate, s: &Sparkle, cfg: &SolverConfig) -> Result<SolveResult> {
    theta_init.validate()?;
    s.validate()?;
    let beta_free = beta_is_free(s, cfg);
    let mut pose = theta_init.clone();
    let mut r = residuals(&pose, t, s, cfg);
    let initial_cost = r.norm_squared();
    if !initial_cost.is_finite() {
        return Err(Error::numerical("initial pose has a non-finite cost"));
    }
    let mut current = initial_cost;
    let mut history = vec![initial_cost];
    let mut lambda = cfg.damping_init;
    let mut iterations = 0;
    let mut aborted = None;
    let mut normal: Option<(DMatrix<f64>, DVector<f64>)> = None;

    while iterations < cfg.max_iter && current >= cfg.tol_cost {
        iterations += 1;
        let (h, g) = normal.get_or_insert_with(|| {
            let jac = jacobian(&pose, t, s, cfg, beta_free);
            (jac.transpose() * &jac, jac.transpose() * &r)
        });
        let mut a = h.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += lambda;
        }
        let Some(step) = a.cholesky().map(|c| c.solve(&(-&*g))) else {
            lambda *= 10.0;
            continue;
        };
        let candidate = unpack(&(pack(&pose, beta_free) + step), &pose, beta_free);
        let r_new = residuals(&candidate, t, s, cfg);
        let c_new = r_new.norm_squared();
        if !c_new.is_finite() {
            aborted = Some(format!("non-finite cost at iteration {iterations}"));
            break;
        }
        if c_new < current {
            let drop = current - c_new;
            pose = candidate;
            r = r_new;
            current = c_new;
            history.push(c_new);
            lambda = (lambda / 10.0).max(1e-15);
            normal = None;
            if drop < cfg.tol_cost {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
    }

    let (per_bone, degenerate_bones) = bone_records(t, &pose, s, cfg)?;
    Ok(SolveResult {
        pose,
        per_bone,
        init_pose: theta_init.clone(),
        initial_cost,
        final_cost: current,
        iterations,
        cost_history: history,
        degenerate_bones,
        degenerate_joints: Vec::new(),
        beta_frozen: !beta_free,
        aborted,
    })
}

/// Initialisation followed by refinement (skipped when `refine` is false).
pub fn solve(t: &BodyTemplate, s: &Sparkle, cfg: &SolverConfig, refine: bool) -> Result<SolveResult> {
    let init = init_pose_swing_twist(t, s, cfg)?;
    let mut run_cfg = cfg.clone();
    if !refine {
        run_cfg.max_iter = 0;
    }
    let mut out = refine_pose(&init.pose, t, s, &run_cfg)?;
    for b in init.degenerate_bones {
        if !out.degenerate_bones.contains(&b) {
            out.degenerate_bones.push(b);
        }
    }
    out.degenerate_bones.sort_unstable();
    out.degenerate_joints = init.degenerate_joints;
    Ok(out)
}
