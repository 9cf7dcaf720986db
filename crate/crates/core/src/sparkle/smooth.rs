use serde::{Deserialize, Serialize};

use super::Sparkle;
use crate::body::{BodyTemplate, NUM_JOINTS, SMPL_TREE};
use crate::geom3::Vec3;

const CONF_FLOOR: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothConfig {
    /// Weight of the squared second differences.
    pub lambda_s: f64,
    /// Run the bone-length projection after the smoothing solve.
    pub project_bones: bool,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        SmoothConfig {
            lambda_s: 0.1,
            project_bones: true,
        }
    }
}

/// Solves `(C + λ·DᵀD)·x = C·y` for one scalar trajectory, where `D` is the
/// second-difference operator. The system is symmetric positive definite
/// with half-bandwidth 2, factored by banded Cholesky.
fn smooth_series(y: &[f64], c: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    if n < 3 || lambda == 0.0 {
        return y.to_vec();
    }
    // band[i][k] holds A[i][i-k] for k = 0..=2
    let mut band = vec![[0.0f64; 3]; n];
    for i in 0..n {
        band[i][0] = c[i];
    }
    for r in 0..n - 2 {
        let coeff = [1.0, -2.0, 1.0];
        for a in 0..3 {
            for b in 0..=a {
                band[r + a][a - b] += lambda * coeff[a] * coeff[b];
            }
        }
    }
    // in-place Cholesky: band becomes L
    for i in 0..n {
        for k in (1..=2).rev() {
            if k > i {
                continue;
            }
            let j = i - k;
            let mut s = band[i][k];
            for m in 1..=2 {
                if k + m <= 2 && m <= j {
                    s -= band[i][k + m] * band[j][m];
                }
            }
            band[i][k] = s / band[j][0];
        }
        let mut d = band[i][0];
        for k in 1..=2.min(i) {
            d -= band[i][k] * band[i][k];
        }
        band[i][0] = d.max(f64::MIN_POSITIVE).sqrt();
    }
    let rhs: Vec<f64> = y.iter().zip(c).map(|(y, c)| y * c).collect();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 1..=2.min(i) {
            s -= band[i][k] * z[i - k];
        }
        z[i] = s / band[i][0];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in 1..=2 {
            if i + k < n {
                s -= band[i + k][k] * x[i + k];
            }
        }
        x[i] = s / band[i][0];
    }
    x
}

/// Data-plus-smoothness objective of one keypoint trajectory.
pub fn smoothing_objective(x: &[Vec3], y: &[Vec3], c: &[f64], lambda: f64) -> f64 {
    let data: f64 = (0..x.len())
        .map(|t| c[t].max(CONF_FLOOR) * (x[t] - y[t]).norm_squared())
        .sum();
    let accel: f64 = (1..x.len().saturating_sub(1))
        .map(|t| (x[t + 1] - x[t] * 2.0 + x[t - 1]).norm_squared())
        .sum();
    data + lambda * accel
}

fn smooth_track(y: &[Vec3], conf: &[f64], lambda: f64) -> Vec<Vec3> {
    let c: Vec<f64> = conf.iter().map(|c| c.max(CONF_FLOOR)).collect();
    let cols: Vec<Vec<f64>> = (0..3)
        .map(|k| smooth_series(&y.iter().map(|p| p[k]).collect::<Vec<_>>(), &c, lambda))
        .collect();
    (0..y.len())
        .map(|t| Vec3::new(cols[0][t], cols[1][t], cols[2][t]))
        .collect()
}

/// Confidence-weighted second-difference smoothing of every keypoint
/// trajectory, then (optionally) a root-to-leaf pass restoring template bone
/// lengths. Anchors follow the displacement their joint received from the
/// bone projection.
pub fn temporal_smooth(seq: &[Sparkle], cfg: &SmoothConfig, template: &BodyTemplate) -> Vec<Sparkle> {
    if seq.len() <= 1 {
        return seq.to_vec();
    }
    let mut out = seq.to_vec();
    let lambda = cfg.lambda_s.max(0.0);
    for j in 0..NUM_JOINTS {
        let y: Vec<Vec3> = seq.iter().map(|s| s.joints[j]).collect();
        let c: Vec<f64> = seq.iter().map(|s| s.joint_conf[j]).collect();
        for (s, x) in out.iter_mut().zip(smooth_track(&y, &c, lambda)) {
            s.joints[j] = x;
        }
    }
    for a in 0..seq[0].anchors.len() {
        let y: Vec<Vec3> = seq.iter().map(|s| s.anchors[a]).collect();
        let c: Vec<f64> = seq.iter().map(|s| s.anchor_conf[a]).collect();
        for (s, x) in out.iter_mut().zip(smooth_track(&y, &c, lambda)) {
            s.anchors[a] = x;
        }
    }
    let y: Vec<Vec3> = seq.iter().map(|s| s.trans).collect();
    let c: Vec<f64> = seq.iter().map(|s| s.joint_conf[0]).collect();
    for (s, x) in out.iter_mut().zip(smooth_track(&y, &c, lambda)) {
        s.trans = x;
    }
    if cfg.project_bones {
        for s in &mut out {
            project_bone_lengths(s, template);
        }
    }
    out
}

/// Moves each child joint along its bone direction to the template length,
/// root to leaf. Anchors bound to a moved joint shift with it.
pub fn project_bone_lengths(s: &mut Sparkle, template: &BodyTemplate) {
    let mut shift = vec![Vec3::zeros(); NUM_JOINTS];
    let original = s.joints.clone();
    for j in 1..NUM_JOINTS {
        let p = SMPL_TREE.parent(j).expect("non-root joint");
        let len = template.bone_vector(j).norm();
        let dir = original[j] - original[p];
        let n = dir.norm();
        let target = if n > 1e-12 {
            s.joints[p] + dir * (len / n)
        } else {
            s.joints[p] + template.bone_vector(j)
        };
        shift[j] = target - original[j];
        s.joints[j] = target;
    }
    for (a, &j) in s.anchors.iter_mut().zip(&template.anchor_joint) {
        *a += shift[j];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense normal-equation oracle.
    fn dense(y: &[f64], c: &[f64], lambda: f64) -> Vec<f64> {
        let n = y.len();
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = c[i];
        }
        for r in 0..n - 2 {
            let co = [1.0, -2.0, 1.0];
            for p in 0..3 {
                for q in 0..3 {
                    a[(r + p, r + q)] += lambda * co[p] * co[q];
                }
            }
        }
        let b = nalgebra::DVector::from_iterator(n, y.iter().zip(c).map(|(y, c)| y * c));
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    #[test]
    fn banded_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [3, 4, 7, 40] {
            let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
            let got = smooth_series(&y, &c, 3.7);
            let want = dense(&y, &c, 3.7);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9, "n={n}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn smoothed_track_minimises_objective(
            seed in 0u64..1000,
            n in 3usize..30,
            lambda in 0.01f64..20.0,
            k in 0usize..30,
            delta in -0.05f64..0.05,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<Vec3> = (0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let x = smooth_track(&y, &c, lambda);
            let best = smoothing_objective(&x, &y, &c, lambda);
            let mut moved = x.clone();
            moved[k % n] += Vec3::new(delta, -delta, 0.5 * delta);
            proptest::prop_assert!(best <= smoothing_objective(&moved, &y, &c, lambda) + 1e-12);
        }
    }

    #[test]
    fn zero_lambda_is_identity() {
        let y = vec![1.0, 5.0, -2.0, 0.3];
        assert_eq!(smooth_series(&y, &[1.0; 4], 0.0), y);
    }
}
