use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::body::{NUM_ANCHORS, NUM_JOINTS};
use crate::error::{Error, Result};
use crate::geom3::Vec3;

const RIDGE: f64 = 1e-8;
const MAX_CONDITION: f64 = 1e12;

/// Linear joint→anchor map `A ≈ W·J` with `W` of shape 32×24.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct J2AMapping {
    #[serde(serialize_with = "ser_rows", deserialize_with = "de_rows")]
    pub w: DMatrix<f64>,
    /// Root-mean-square anchor residual over the fitting frames (metres).
    pub residual_rms: f64,
    pub frames: usize,
}

fn ser_rows<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

fn de_rows<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
    let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
    if rows.len() != NUM_ANCHORS || rows.iter().any(|r| r.len() != NUM_JOINTS) {
        return Err(serde::de::Error::custom("joint-to-anchor matrix must be 32x24"));
    }
    Ok(DMatrix::from_fn(NUM_ANCHORS, NUM_JOINTS, |i, j| rows[i][j]))
}

fn as_matrix(points: &[Vec3]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), 3, |i, c| points[i][c])
}

/// Least-squares fit of `W` over aligned frames, via ridge-regularised
/// normal equations.
pub fn fit_j2a(joint_frames: &[Vec<Vec3>], anchor_frames: &[Vec<Vec3>]) -> Result<J2AMapping> {
    if joint_frames.len() != anchor_frames.len() {
        return Err(Error::validation("joint and anchor frame counts differ"));
    }
    if joint_frames.len() < NUM_JOINTS {
        return Err(Error::validation(format!(
            "fitting the joint-to-anchor map needs at least {NUM_JOINTS} frames, got {}",
            joint_frames.len()
        )));
    }
    let mut gram = DMatrix::<f64>::zeros(NUM_JOINTS, NUM_JOINTS);
    let mut cross = DMatrix::<f64>::zeros(NUM_ANCHORS, NUM_JOINTS);
    for (jf, af) in joint_frames.iter().zip(anchor_frames) {
        if jf.len() != NUM_JOINTS || af.len() != NUM_ANCHORS {
            return Err(Error::validation("each frame needs 24 joints and 32 anchors"));
        }
        let j = as_matrix(jf);
        let a = as_matrix(af);
        gram += &j * j.transpose();
        cross += &a * j.transpose();
    }
    for i in 0..NUM_JOINTS {
        gram[(i, i)] += RIDGE;
    }
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::numerical(format!(
            "joint Gram matrix is too ill-conditioned to invert (condition number {condition:.3e})"
        )));
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::numerical("joint Gram matrix is not positive definite"))?;
    // W·G = C  ⇔  G·Wᵀ = Cᵀ
    let w = chol.solve(&cross.transpose()).transpose();
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("joint-to-anchor fit produced non-finite entries"));
    }
    let mut sq = 0.0;
    for (jf, af) in joint_frames.iter().zip(anchor_frames) {
        let pred = apply_matrix(&w, jf);
        sq += pred.iter().zip(af).map(|(p, a)| (p - a).norm_squared()).sum::<f64>();
    }
    let residual_rms = (sq / (joint_frames.len() * NUM_ANCHORS) as f64).sqrt();
    Ok(J2AMapping {
        w,
        residual_rms,
        frames: joint_frames.len(),
    })
}

fn apply_matrix(w: &DMatrix<f64>, joints: &[Vec3]) -> Vec<Vec3> {
    (0..w.nrows())
        .map(|a| {
            joints
                .iter()
                .enumerate()
                .fold(Vec3::zeros(), |acc, (j, p)| acc + p * w[(a, j)])
        })
        .collect()
}

/// `A_init = W·J`.
pub fn apply_j2a(m: &J2AMapping, joints: &[Vec3]) -> Vec<Vec3> {
    apply_matrix(&m.w, joints)
}

impl J2AMapping {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "joint-to-anchor map",
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
