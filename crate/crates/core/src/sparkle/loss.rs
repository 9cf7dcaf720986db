use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom3::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l5: f64,
    pub l6: f64,
    pub l7: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            l1: 1.0,
            l2: 0.5,
            l3: 1.0,
            l4: 1.0,
            l5: 0.5,
            l6: 1.0,
            l7: 0.5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.l1, self.l2, self.l3, self.l4, self.l5, self.l6, self.l7];
        if all.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::validation("loss weights must be finite and >= 0"));
        }
        Ok(())
    }
}

fn mse_points(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::validation("loss inputs must be non-empty and aligned"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>() / (3 * a.len()) as f64)
}

fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::validation("loss inputs must be non-empty and aligned"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// Mean negative log of the normalised true-class score.
fn cross_entropy(scores: &[Vec<f64>], truth: &[usize]) -> Result<f64> {
    if scores.len() != truth.len() {
        return Err(Error::validation("one score row per label required"));
    }
    if scores.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (row, &t) in scores.iter().zip(truth) {
        let total: f64 = row.iter().sum();
        let p = row.get(t).copied().ok_or_else(|| Error::validation("true class out of range"))?;
        if !(total > 0.0) || row.iter().any(|s| *s < 0.0) {
            return Err(Error::validation("class scores must be non-negative with positive sum"));
        }
        sum -= (p / total).ln();
    }
    Ok(sum / scores.len() as f64)
}

/// `l1·MSE(J) + l2·CE(joint labels) + l3·MSE(T)`.
pub fn loss_pst(
    j_op: &[Vec3],
    j_gt: &[Vec3],
    scores: &[Vec<f64>],
    labels_gt: &[usize],
    t_op: &Vec3,
    t_gt: &Vec3,
    w: &LossWeights,
) -> Result<f64> {
    Ok(w.l1 * mse_points(j_op, j_gt)?
        + w.l2 * cross_entropy(scores, labels_gt)?
        + w.l3 * mse_points(&[*t_op], &[*t_gt])?)
}

/// `l4·MSE(A) + l5·CE(anchor labels)`.
pub fn loss_sae(
    a_op: &[Vec3],
    a_gt: &[Vec3],
    scores: &[Vec<f64>],
    labels_gt: &[usize],
    w: &LossWeights,
) -> Result<f64> {
    Ok(w.l4 * mse_points(a_op, a_gt)? + w.l5 * cross_entropy(scores, labels_gt)?)
}

/// `l6·MSE(θ) + l7·MSE(β)` over axis-angle and shape components.
pub fn loss_sss(
    theta_op: &[Vec3],
    theta_gt: &[Vec3],
    beta: &[f64],
    beta_gt: &[f64],
    w: &LossWeights,
) -> Result<f64> {
    Ok(w.l6 * mse_points(theta_op, theta_gt)? + w.l7 * mse(beta, beta_gt)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(n: usize, k: usize) -> Vec<f64> {
        (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn pst_examples() {
        let w = LossWeights::default();
        let j: Vec<Vec3> = (0..24).map(|i| Vec3::new(i as f64, 0.0, 1.0)).collect();
        let labels = vec![3, 7, 24];
        let scores: Vec<Vec<f64>> = labels.iter().map(|&l| one_hot(25, l)).collect();
        let t = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(loss_pst(&j, &j, &scores, &labels, &t, &t, &w).unwrap(), 0.0);
        let off: Vec<Vec3> = j.iter().map(|p| p + Vec3::repeat(1.0)).collect();
        assert!((loss_pst(&off, &j, &scores, &labels, &t, &t, &w).unwrap() - 1.0).abs() < 1e-12);
        let uniform = vec![vec![1.0; 25]; 3];
        let ce = loss_pst(&j, &j, &uniform, &labels, &t, &t, &w).unwrap();
        assert!((ce - 0.5 * 25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sss_examples() {
        let w = LossWeights::default();
        let th = vec![Vec3::zeros(); 24];
        let b = vec![0.0; 10];
        assert_eq!(loss_sss(&th, &th, &b, &b, &w).unwrap(), 0.0);
        let b2 = vec![0.5; 10];
        assert!((loss_sss(&th, &th, &b2, &b, &w).unwrap() - 0.5 * 0.25).abs() < 1e-12);
        let mut th2 = th.clone();
        th2[4] = Vec3::new(0.3, 0.0, 0.0);
        assert!((loss_sss(&th2, &th, &b, &b, &w).unwrap() - 0.09 / 72.0).abs() < 1e-15);
    }

    #[test]
    fn sae_exact_is_zero() {
        let a = vec![Vec3::new(0.1, 0.2, 0.3); 32];
        let labels = vec![0, 31, 32];
        let scores: Vec<Vec<f64>> = labels.iter().map(|&l| one_hot(33, l)).collect();
        assert_eq!(loss_sae(&a, &a, &scores, &labels, &LossWeights::default()).unwrap(), 0.0);
    }
}
