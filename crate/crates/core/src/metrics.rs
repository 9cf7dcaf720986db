//! Joint, vertex and angle errors.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::body::{forward_kinematics, BodyTemplate, Pose};
use crate::error::{Error, Result};
use crate::geom3::{geodesic_angle_deg, Rotation, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    /// Both sets translated so that index 0 sits at the origin.
    Local,
    /// World frame.
    Global,
}

/// Mean per-point Euclidean error in millimetres.
pub fn mpjpe(pred: &[Vec3], gt: &[Vec3], mode: Alignment) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::validation(format!(
            "mpjpe needs equally sized non-empty sets, got {} and {}",
            pred.len(),
            gt.len()
        )));
    }
    let (op, og) = match mode {
        Alignment::Local => (pred[0], gt[0]),
        Alignment::Global => (Vec3::zeros(), Vec3::zeros()),
    };
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| ((p - op) - (g - og)).norm())
        .sum();
    Ok(sum / pred.len() as f64 * 1000.0)
}

/// Mean over joints of the geodesic distance between local rotations, degrees.
pub fn angle_error(theta_pred: &[Vec3], theta_gt: &[Vec3]) -> Result<f64> {
    if theta_pred.len() != theta_gt.len() || theta_pred.is_empty() {
        return Err(Error::validation("angle error needs aligned, non-empty poses"));
    }
    let sum: f64 = theta_pred
        .iter()
        .zip(theta_gt)
        .map(|(a, b)| geodesic_angle_deg(&Rotation::exp(a), &Rotation::exp(b)))
        .sum();
    Ok(sum / theta_pred.len() as f64)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameErrors {
    pub j_err_l: f64,
    pub v_err_l: f64,
    pub j_err_g: f64,
    pub v_err_g: f64,
    pub ang_err: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub j_err_l: f64,
    pub v_err_l: f64,
    pub j_err_g: f64,
    pub v_err_g: f64,
    pub ang_err: f64,
    pub frames: Vec<FrameErrors>,
}

impl EvalReport {
    /// Aggregates per-frame rows into means.
    pub fn from_frames(frames: Vec<FrameErrors>) -> Self {
        let n = frames.len().max(1) as f64;
        let avg = |f: fn(&FrameErrors) -> f64| frames.iter().map(f).sum::<f64>() / n;
        EvalReport {
            j_err_l: avg(|f| f.j_err_l),
            v_err_l: avg(|f| f.v_err_l),
            j_err_g: avg(|f| f.j_err_g),
            v_err_g: avg(|f| f.v_err_g),
            ang_err: avg(|f| f.ang_err),
            frames,
        }
    }

    /// One row per frame plus a `mean` summary row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,j_err_l,v_err_l,j_err_g,v_err_g,ang_err\n");
        for (i, f) in self.frames.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{:.6},{:.6},{:.6},{:.6},{:.6}",
                f.j_err_l, f.v_err_l, f.j_err_g, f.v_err_g, f.ang_err
            );
        }
        let _ = writeln!(
            s,
            "mean,{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.j_err_l, self.v_err_l, self.j_err_g, self.v_err_g, self.ang_err
        );
        s
    }

    pub fn write(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(json_path, json).map_err(|e| Error::io(json_path, e))?;
        std::fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))
    }
}

/// Errors of one predicted pose against ground truth.
pub fn evaluate_frame(pred: &Pose, gt: &Pose, template: &BodyTemplate) -> Result<FrameErrors> {
    let bp = forward_kinematics(template, pred);
    let bg = forward_kinematics(template, gt);
    // vertex errors are root-aligned with the pelvis joint, like the joints
    let root_p = bp.joints[0];
    let root_g = bg.joints[0];
    let vp: Vec<Vec3> = bp.surface.iter().map(|v| v - root_p).collect();
    let vg: Vec<Vec3> = bg.surface.iter().map(|v| v - root_g).collect();
    Ok(FrameErrors {
        j_err_l: mpjpe(&bp.joints, &bg.joints, Alignment::Local)?,
        v_err_l: mpjpe(&vp, &vg, Alignment::Global)?,
        j_err_g: mpjpe(&bp.joints, &bg.joints, Alignment::Global)?,
        v_err_g: mpjpe(&bp.surface, &bg.surface, Alignment::Global)?,
        ang_err: angle_error(&pred.theta, &gt.theta)?,
    })
}

/// Runs forward kinematics on both sequences and averages the frame errors.
pub fn evaluate_sequence(preds: &[Pose], gts: &[Pose], template: &BodyTemplate) -> Result<EvalReport> {
    if preds.len() != gts.len() {
        return Err(Error::validation(format!(
            "sequence lengths differ: {} predicted, {} ground truth",
            preds.len(),
            gts.len()
        )));
    }
    let frames = preds
        .iter()
        .zip(gts)
        .map(|(p, g)| evaluate_frame(p, g, template))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_frames(frames))
}
