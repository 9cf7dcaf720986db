//! Property tests for the invariants of every module.

use std::sync::LazyLock;

use mocap_core::body::*;
use mocap_core::cloud::*;
use mocap_core::geom3::*;
use mocap_core::labels::*;
use mocap_core::metrics::{mpjpe, Alignment};
use mocap_core::multiview::{fuse_sparkle, ViewPrediction};
use mocap_core::solver::{init_pose_swing_twist, refine_pose, solve, SolverConfig};
use mocap_core::sparkle::*;
use mocap_core::track::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

static TEMPLATE: LazyLock<BodyTemplate> = LazyLock::new(|| make_default_template(1024, 1).unwrap());
static CALIB: LazyLock<Calibration> = LazyLock::new(|| Calibration::from_template(&TEMPLATE, EstimatorConfig::default().trim).unwrap());

fn unit() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(z, phi)| {
        let s = (1.0 - z * z).sqrt();
        Vec3::new(s * phi.cos(), s * phi.sin(), z)
    })
}

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = Rotation> {
    (unit(), 0.0..std::f64::consts::PI).prop_map(|(n, a)| rodrigues(&n, a).unwrap())
}

fn max_abs(m: &Mat3) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn pose_from_seed(seed: u64, max_angle: f64) -> Pose {
    random_pose(&mut ChaCha8Rng::seed_from_u64(seed), max_angle)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rodrigues_is_orthonormal_and_inverts(n in unit(), a in 0.0..std::f64::consts::TAU) {
        let r = rodrigues(&n, a).unwrap();
        prop_assert!(r.orthonormality_error() < 1e-9);
        prop_assert!((r.matrix().determinant() - 1.0).abs() < 1e-9);
        let back = r * rodrigues(&n, -a).unwrap();
        prop_assert!(max_abs(&(back.matrix() - Mat3::identity())) < 1e-9);
    }

    #[test]
    fn axis_angle_round_trip(n in unit(), a in 1e-6..std::f64::consts::PI - 1e-6) {
        let aa = to_axis_angle(&rodrigues(&n, a).unwrap());
        prop_assert!((aa.axis.norm() - 1.0).abs() < 1e-12);
        prop_assert!((aa.angle - a).abs() < 1e-9, "angle {} vs {}", aa.angle, a);
        prop_assert!((aa.axis - n).norm() < 1e-9 || a > std::f64::consts::PI - 1e-3);
        // near π the axis loses precision, but the rotation it encodes does not
        let r = rodrigues(&aa.axis, aa.angle).unwrap();
        prop_assert!(max_abs(&(r.matrix() - rodrigues(&n, a).unwrap().matrix())) < 1e-9);
    }

    #[test]
    fn swing_aligns_directions(v_tem in vec3(2.0), v_obs in vec3(2.0)) {
        prop_assume!(v_tem.norm() > 1e-3 && v_obs.norm() > 1e-3);
        let s = swing_from_vectors(&v_tem, &v_obs, DEFAULT_EPS).unwrap();
        prop_assert!(s.rotation.orthonormality_error() < 1e-9);
        let moved = s.rotation * v_tem.normalize();
        prop_assert!((moved - v_obs.normalize()).norm() < 1e-9);
    }

    #[test]
    fn twist_fixes_its_axis(n in unit(), a_tem in prop::collection::vec(vec3(1.0), 1..5), angle in -3.0..3.0f64) {
        let r = rodrigues(&n, angle).unwrap();
        let a_obs: Vec<Vec3> = a_tem.iter().map(|a| r * *a).collect();
        let Ok(t) = twist_from_anchors(&n, &a_tem, &a_obs, DEFAULT_EPS) else { return Ok(()); };
        prop_assert!((t.rotation * n - n).norm() < 1e-12);
    }

    #[test]
    fn bone_rotation_round_trip(
        v_tem in vec3(1.0),
        swing in rotation(),
        twist in -std::f64::consts::PI + 0.1..std::f64::consts::PI - 0.1,
        anchors in prop::collection::vec(vec3(1.0), 1..4),
    ) {
        prop_assume!(v_tem.norm() > 0.05);
        let n = v_tem.normalize();
        // keep anchors more than 0.1 rad away from the bone axis
        prop_assume!(anchors.iter().all(|a| a.norm() > 1e-3 && a.normalize().cross(&n).norm() > 0.1f64.sin()));
        let truth = swing * rodrigues(&n, twist).unwrap();
        let v_obs = truth * v_tem;
        let a_obs: Vec<Vec3> = anchors.iter().map(|a| truth * *a).collect();
        let st = solve_bone_rotation(&v_tem, &v_obs, &anchors, &a_obs, DEFAULT_EPS).unwrap();
        prop_assert!((st.rotation().matrix() - truth.matrix()).norm() < 1e-8);
        prop_assert!((st.twist * n - n).norm() < 1e-9);
    }

    #[test]
    fn chordal_mean_ignores_weight_scale(rots in prop::collection::vec(rotation(), 1..6), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = rots.iter().map(|_| rand::Rng::random_range(&mut rng, 0.1..2.0)).collect();
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        let (Ok(a), Ok(b)) = (chordal_mean(&rots, &w), chordal_mean(&rots, &w2)) else { return Ok(()); };
        prop_assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fk_preserves_bone_lengths(seed in 0u64..10_000, beta in prop::collection::vec(-3.0..3.0f64, NUM_BETAS)) {
        let mut pose = pose_from_seed(seed, 3.0);
        pose.beta = beta;
        let shaped = apply_shape(&TEMPLATE, &pose.beta).unwrap();
        let body = forward_kinematics(&TEMPLATE, &pose);
        for j in 1..NUM_JOINTS {
            let p = SMPL_TREE.parent(j).unwrap();
            let len = (body.joints[j] - body.joints[p]).norm();
            prop_assert!((len - shaped.bone_vector(j).norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn fk_is_equivariant_under_root_rotation(seed in 0u64..10_000, q in rotation(), trans in vec3(2.0)) {
        let mut pose = pose_from_seed(seed, 2.0);
        pose.trans = trans;
        let body = forward_kinematics(&TEMPLATE, &pose);
        let mut turned = pose.clone();
        turned.theta[0] = (q * Rotation::exp(&pose.theta[0])).log();
        let moved = forward_kinematics(&TEMPLATE, &turned);
        let root = body.joints[0];
        for (a, b) in body.joints.iter().chain(&body.surface).zip(moved.joints.iter().chain(&moved.surface)) {
            prop_assert!((q * (a - root) + root - b).norm() < 1e-9);
        }
    }

    #[test]
    fn anchors_ride_on_their_vertices(seed in 0u64..10_000) {
        let body = forward_kinematics(&TEMPLATE, &pose_from_seed(seed, 3.0));
        for (a, &v) in body.anchors.iter().zip(&TEMPLATE.anchor_vertex) {
            prop_assert!((a - body.surface[v]).norm() < 1e-12);
        }
    }
}

/// Greedy farthest point trace recomputed from scratch each step.
fn fps_oracle(points: &[Vec3], k: usize, start: usize) -> Vec<usize> {
    let mut chosen = vec![start];
    while chosen.len() < k {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, p) in points.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let d = chosen.iter().map(|&c| (points[c] - p).norm_squared()).fold(f64::INFINITY, f64::min);
            if d > best.0 {
                best = (d, i);
            }
        }
        chosen.push(best.1);
    }
    chosen
}

fn cluster_oracle(points: &[Vec3], radius: f64, min_pts: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; points.len()];
    let mut out = Vec::new();
    for s in 0..points.len() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut i = 0;
        while i < comp.len() {
            let c = comp[i];
            for (j, q) in points.iter().enumerate() {
                if !seen[j] && (q - points[c]).norm() <= radius {
                    seen[j] = true;
                    comp.push(j);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        if comp.len() >= min_pts {
            out.push(comp);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fps_matches_greedy_oracle(points in prop::collection::vec(vec3(1.0), 1..60), k in 1usize..60, start in 0usize..60) {
        let k = k.min(points.len());
        let start = start % points.len();
        prop_assert_eq!(farthest_point_indices(&points, k, start).unwrap(), fps_oracle(&points, k, start));
    }

    #[test]
    fn knn_is_sorted_and_exact(query in vec3(1.0), reference in prop::collection::vec(vec3(1.0), 1..50), k in 1usize..50) {
        let k = k.min(reference.len());
        let got = knn_one(&query, &reference, k);
        let d: Vec<f64> = got.iter().map(|&i| (reference[i] - query).norm_squared()).collect();
        prop_assert!(d.windows(2).all(|w| w[0] <= w[1]));
        let mut all: Vec<(f64, usize)> = reference.iter().enumerate().map(|(i, r)| ((r - query).norm_squared(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        prop_assert_eq!(got, all[..k].iter().map(|x| x.1).collect::<Vec<_>>());
    }

    #[test]
    fn clusters_partition_the_kept_points(points in prop::collection::vec(vec3(2.0), 0..80), radius in 0.1..0.8f64, min_pts in 1usize..5) {
        let got = euclidean_cluster_indices(&points, radius, min_pts).unwrap();
        prop_assert_eq!(got, cluster_oracle(&points, radius, min_pts));
    }

    #[test]
    fn occlusion_is_deterministic(n in 0usize..500, ratio in 0.0..=1.0f64, seed in any::<u64>()) {
        let a = occlusion_keep_indices(n, ratio, seed).unwrap();
        prop_assert_eq!(&a, &occlusion_keep_indices(n, ratio, seed).unwrap());
        prop_assert_eq!(a.len(), n - (ratio * n as f64).round() as usize);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn labels_are_hierarchically_consistent(seed in 0u64..10_000, noise in 0.0..0.05f64, k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = forward_kinematics(&TEMPLATE, &random_pose(&mut rng, 1.0));
        let jitter = rand_distr::Normal::new(0.0, noise.max(1e-12)).unwrap();
        let points: Vec<Vec3> = body
            .surface
            .iter()
            .step_by(3)
            .map(|p| p + Vec3::from_fn(|_, _| rand_distr::Distribution::sample(&jitter, &mut rng)))
            .collect();
        let labels = oracle_labels(&TEMPLATE, &body, &PointCloud::new(points), k, DEFAULT_BG_DIST).unwrap();
        for (&j, &a) in labels.joint_label.iter().zip(&labels.anchor_label) {
            if j == BG_JOINT {
                prop_assert_eq!(a, BG_ANCHOR);
            } else if TEMPLATE.anchor_joint.contains(&j) {
                prop_assert_eq!(TEMPLATE.anchor_joint[a], j);
            } else {
                prop_assert!(candidate_joints(j, &TEMPLATE.anchor_joint).contains(&TEMPLATE.anchor_joint[a]));
            }
        }
    }

    #[test]
    fn joint_estimators_are_translation_equivariant(seed in 0u64..10_000, shift in vec3(3.0)) {
        let body = forward_kinematics(&TEMPLATE, &pose_from_seed(seed, 1.0));
        let c = PointCloud::new(body.surface.clone());
        let labels = oracle_labels(&TEMPLATE, &body, &c, 1, DEFAULT_BG_DIST).unwrap();
        let moved = PointCloud::new(c.points.iter().map(|p| p + shift).collect());
        let a = estimate_joints_geometric(&c, &labels, &CALIB, None).unwrap();
        let b = estimate_joints_geometric(&moved, &labels, &CALIB, None).unwrap();
        for (x, y) in a.joints.iter().zip(&b.joints) {
            prop_assert!((x + shift - y).norm() < 1e-9);
        }
        let cfg = EstimatorConfig::default();
        let (ja, ta) = refine_joints_offsets(&c, &labels, &a.joints, &a.trans, &CALIB, &cfg, None).unwrap();
        let (jb, tb) = refine_joints_offsets(&moved, &labels, &b.joints, &b.trans, &CALIB, &cfg, None).unwrap();
        prop_assert!((ta + shift - tb).norm() < 1e-9);
        for (x, y) in ja.iter().zip(&jb) {
            prop_assert!((x + shift - y).norm() < 1e-9);
        }
    }

    #[test]
    fn j2a_fit_zeroes_the_gradient(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (joints, anchors): (Vec<_>, Vec<_>) = (0..40)
            .map(|_| posed_keypoints(&TEMPLATE, &random_pose(&mut rng, 1.0)))
            .map(|(j, a)| (j, a.iter().map(|p| p + Vec3::new(0.003, -0.002, 0.001)).collect::<Vec<_>>()))
            .unzip();
        let m = fit_j2a(&joints, &anchors).unwrap();
        // ∂/∂W Σ‖A − W·J‖² = −2 Σ (A − W·J)·Jᵀ, plus the tiny ridge term
        let mut grad = nalgebra::DMatrix::<f64>::zeros(NUM_ANCHORS, NUM_JOINTS);
        for (jf, af) in joints.iter().zip(&anchors) {
            let pred = apply_j2a(&m, jf);
            for a in 0..NUM_ANCHORS {
                for j in 0..NUM_JOINTS {
                    grad[(a, j)] += (af[a] - pred[a]).dot(&jf[j]);
                }
            }
        }
        prop_assert!((grad - &m.w * 1e-8).norm() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn init_round_trips_through_fk(seed in 0u64..10_000, trans in vec3(2.0)) {
        let mut pose = pose_from_seed(seed, 2.0);
        pose.trans = trans;
        let body = forward_kinematics(&TEMPLATE, &pose);
        let s = Sparkle::from_body_state(&body);
        let init = init_pose_swing_twist(&TEMPLATE, &s, &SolverConfig::default()).unwrap();
        let (j, a) = posed_keypoints(&TEMPLATE, &init.pose);
        for (x, y) in j.iter().chain(&a).zip(body.joints.iter().chain(&body.anchors)) {
            prop_assert!((x - y).norm() < 1e-5);
        }
    }

    #[test]
    fn refinement_costs_never_increase(seed in 0u64..10_000, sigma in 0.0..0.03f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = forward_kinematics(&TEMPLATE, &random_pose(&mut rng, 1.0));
        let mut s = Sparkle::from_body_state(&body);
        let noise = rand_distr::Normal::new(0.0, sigma.max(1e-12)).unwrap();
        for p in s.joints.iter_mut().chain(s.anchors.iter_mut()) {
            *p += Vec3::from_fn(|_, _| rand_distr::Distribution::sample(&noise, &mut rng));
        }
        let cfg = SolverConfig { max_iter: 8, ..SolverConfig::default() };
        let r = solve(&TEMPLATE, &s, &cfg, true).unwrap();
        prop_assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(r.final_cost <= r.initial_cost);
        prop_assert!(r.iterations <= cfg.max_iter);
    }

    #[test]
    fn singular_bones_stay_finite(bone in 1usize..NUM_JOINTS, flip in any::<bool>()) {
        // put the child joint exactly on (or through) the template bone direction
        let mut s = Sparkle::from_body_state(&forward_kinematics(&TEMPLATE, &Pose::zero()));
        let p = SMPL_TREE.parent(bone).unwrap();
        let v = TEMPLATE.j_tem[bone] - TEMPLATE.j_tem[p];
        s.joints[bone] = s.joints[p] + if flip { -v } else { v };
        let r = solve(&TEMPLATE, &s, &SolverConfig { max_iter: 3, ..SolverConfig::default() }, true).unwrap();
        prop_assert!(r.pose.theta.iter().all(|t| t.iter().all(|x| x.is_finite())));
        if flip {
            prop_assert!(!r.degenerate_bones.is_empty() || !r.degenerate_joints.is_empty());
        }
    }
}

fn noisy_sparkle(rng: &mut ChaCha8Rng) -> Sparkle {
    let body = forward_kinematics(&TEMPLATE, &random_pose(rng, 1.0));
    let mut s = Sparkle::from_body_state(&body);
    for (p, c) in s.joints.iter_mut().zip(s.joint_conf.iter_mut()) {
        *p += Vec3::from_fn(|_, _| rand::Rng::random_range(rng, -0.02..0.02));
        *c = rand::Rng::random_range(rng, 0.0..1.0);
    }
    for (p, c) in s.anchors.iter_mut().zip(s.anchor_conf.iter_mut()) {
        *p += Vec3::from_fn(|_, _| rand::Rng::random_range(rng, -0.02..0.02));
        *c = rand::Rng::random_range(rng, 0.0..1.0);
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fused_keypoints_lie_in_the_view_hull(seed in 0u64..10_000, views in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let preds: Vec<ViewPrediction> = (0..views).map(|v| ViewPrediction::new(noisy_sparkle(&mut rng), v as u32)).collect();
        let fused = fuse_sparkle(&preds).unwrap();
        for k in 0..NUM_JOINTS {
            for axis in 0..3 {
                let vals: Vec<f64> = preds.iter().map(|p| p.sparkle.joints[k][axis]).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(fused.joints[k][axis] >= lo - 1e-12 && fused.joints[k][axis] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn fusion_ignores_view_order_and_zero_weight_views(seed in 0u64..10_000, views in 2usize..5, rot in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let preds: Vec<ViewPrediction> = (0..views).map(|v| ViewPrediction::new(noisy_sparkle(&mut rng), v as u32)).collect();
        let base = fuse_sparkle(&preds).unwrap();
        let mut shuffled = preds.clone();
        shuffled.rotate_left(rot % views);
        prop_assert_eq!(&fuse_sparkle(&shuffled).unwrap(), &base);
        let mut extra = preds.clone();
        let mut silent = ViewPrediction::new(noisy_sparkle(&mut rng), 99);
        silent.view_weight_scale = 0.0;
        extra.push(silent);
        prop_assert_eq!(&fuse_sparkle(&extra).unwrap(), &base);
    }
}

fn objects() -> impl Strategy<Value = Vec<FrameObjects>> {
    prop::collection::vec(
        prop::collection::vec((0u64..4, vec3(3.0)), 0..5).prop_map(|objs| {
            // one object per id and frame
            let mut seen = std::collections::BTreeSet::new();
            objs.into_iter().filter(|(id, _)| seen.insert(*id)).collect()
        }),
        1..8,
    )
}

/// Per-frame matching by exhaustive search: most pairs, then least distance.
fn best_matching(g: &FrameObjects, p: &FrameObjects, max: f64) -> (usize, f64) {
    fn go(i: usize, g: &FrameObjects, p: &FrameObjects, used: &mut Vec<bool>, max: f64) -> (usize, f64) {
        if i == g.len() {
            return (0, 0.0);
        }
        let mut best = go(i + 1, g, p, used, max);
        for j in 0..p.len() {
            let d = (g[i].1 - p[j].1).norm();
            if !used[j] && d <= max {
                used[j] = true;
                let (n, c) = go(i + 1, g, p, used, max);
                used[j] = false;
                if n + 1 > best.0 || (n + 1 == best.0 && c + d < best.1 - 1e-12) {
                    best = (n + 1, c + d);
                }
            }
        }
        best
    }
    go(0, g, p, &mut vec![false; p.len()], max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn mot_counts_match_exhaustive_matching(gt in objects(), pred in objects()) {
        let n = gt.len().min(pred.len());
        let (gt, pred) = (&gt[..n], &pred[..n]);
        let r = compute_mot(gt, pred, 1.0).unwrap();
        let matches: usize = gt.iter().zip(pred).map(|(g, p)| best_matching(g, p, 1.0).0).sum();
        prop_assert_eq!(r.matches, matches);
        prop_assert_eq!(r.fn_, r.gt_total - matches);
        prop_assert_eq!(r.mota, r.mota_from_counts());
        prop_assert!((0.0..=1.0).contains(&r.idf1));
    }

    #[test]
    fn assignment_is_optimal(cost in prop::collection::vec(prop::collection::vec(0.0..5.0f64, 1..5), 1..5), max in 0.5..5.0f64) {
        let cols = cost[0].len();
        let cost: Vec<Vec<f64>> = cost.into_iter().map(|mut r| { r.resize(cols, 4.0); r }).collect();
        let pairs = assign(&cost, max);
        // brute force over injective maps rows → cols ∪ {none}
        fn go(i: usize, cost: &[Vec<f64>], used: &mut Vec<bool>, max: f64) -> (usize, f64) {
            if i == cost.len() {
                return (0, 0.0);
            }
            let mut best = go(i + 1, cost, used, max);
            for j in 0..used.len() {
                if !used[j] && cost[i][j] <= max {
                    used[j] = true;
                    let (n, c) = go(i + 1, cost, used, max);
                    used[j] = false;
                    if n + 1 > best.0 || (n + 1 == best.0 && c + cost[i][j] < best.1) {
                        best = (n + 1, c + cost[i][j]);
                    }
                }
            }
            best
        }
        let (n, c) = go(0, &cost, &mut vec![false; cols], max);
        prop_assert_eq!(pairs.len(), n);
        let total: f64 = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
        prop_assert!((total - c).abs() < 1e-9);
    }

    #[test]
    fn association_ignores_detection_order(frames in prop::collection::vec(prop::collection::vec(vec3(5.0), 0..5), 1..6), rot in 0usize..5) {
        let mut a = Tracker::default();
        let mut b = Tracker::default();
        for dets in &frames {
            let ids_a = associate(&mut a, dets, 1.0, 2).unwrap();
            let k = if dets.is_empty() { 0 } else { rot % dets.len() };
            let mut shuffled = dets.clone();
            shuffled.rotate_left(k);
            let ids_b = associate(&mut b, &shuffled, 1.0, 2).unwrap();
            let mut unrotated = ids_b.clone();
            unrotated.rotate_right(k);
            prop_assert_eq!(ids_a, unrotated);
        }
    }

    #[test]
    fn mpjpe_is_a_distance(a in prop::collection::vec(vec3(1.0), 2..30), shift in vec3(1.0), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<Vec3> = a.iter().map(|p| p + Vec3::from_fn(|_, _| rand::Rng::random_range(&mut rng, -0.1..0.1))).collect();
        for mode in [Alignment::Local, Alignment::Global] {
            prop_assert!(mpjpe(&a, &b, mode).unwrap() >= 0.0);
            prop_assert_eq!(mpjpe(&a, &a, mode).unwrap(), 0.0);
        }
        let a2: Vec<Vec3> = a.iter().map(|p| p + shift).collect();
        let b2: Vec<Vec3> = b.iter().map(|p| p + shift).collect();
        let l1 = mpjpe(&a, &b, Alignment::Local).unwrap();
        prop_assert!((l1 - mpjpe(&a2, &b2, Alignment::Local).unwrap()).abs() < 1e-9);
        // local alignment also forgives a shift applied to one side only
        prop_assert!((l1 - mpjpe(&a2, &b, Alignment::Local).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn refine_from_truth_stays_put() {
    let body = forward_kinematics(&TEMPLATE, &pose_from_seed(4, 1.0));
    let s = Sparkle::from_body_state(&body);
    let init = init_pose_swing_twist(&TEMPLATE, &s, &SolverConfig::default()).unwrap();
    let r = refine_pose(&init.pose, &TEMPLATE, &s, &SolverConfig::default()).unwrap();
    assert!(r.final_cost < 1e-9);
}

#[test]
fn j2a_fit_beats_perturbed_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (joints, anchors): (Vec<_>, Vec<_>) = (0..48)
        .map(|_| posed_keypoints(&TEMPLATE, &random_pose(&mut rng, 1.2)))
        .unzip();
    let m = fit_j2a(&joints, &anchors).unwrap();
    let residual = |w: &nalgebra::DMatrix<f64>| -> f64 {
        let probe = J2AMapping { w: w.clone(), ..m.clone() };
        joints
            .iter()
            .zip(&anchors)
            .map(|(jf, af)| apply_j2a(&probe, jf).iter().zip(af).map(|(p, a)| (p - a).norm_squared()).sum::<f64>())
            .sum()
    };
    let base = residual(&m.w);
    for _ in 0..100 {
        let delta = nalgebra::DMatrix::from_fn(NUM_ANCHORS, NUM_JOINTS, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let delta = &delta * (1e-3 / delta.norm());
        assert!(base <= residual(&(&m.w + delta)));
    }
}
