//! Sequence reconstruction: per-frame estimation, optional multi-view
//! fusion, temporal smoothing and pose solving.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::BodyTemplate;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::labels::LabelSet;
use crate::multiview::{fuse_sparkle, ViewPrediction};
use crate::solver::{solve, SolveResult, SolverConfig};
use crate::sparkle::{estimate_sparkle, temporal_smooth, Calibration, EstimatorConfig, J2AMapping, SmoothConfig, Sparkle};

/// One labeled scan.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameInput {
    pub cloud: PointCloud,
    pub labels: LabelSet,
}

/// Frames of one sensor; `None` marks a frame whose inputs are missing.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewInput {
    pub view_id: u32,
    pub frames: Vec<Option<FrameInput>>,
}

/// Fixed model pieces shared by every frame.
#[derive(Clone, Copy, Debug)]
pub struct Model<'a> {
    pub template: &'a BodyTemplate,
    pub calib: &'a Calibration,
    pub j2a: &'a J2AMapping,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructOptions {
    pub estimator: EstimatorConfig,
    pub smoothing: SmoothConfig,
    pub solver: SolverConfig,
    pub refine: bool,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            estimator: EstimatorConfig::default(),
            smoothing: SmoothConfig::default(),
            solver: SolverConfig::default(),
            refine: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingInput {
    pub frame: usize,
    pub view: Option<u32>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    /// Indices of the reconstructed frames, ascending.
    pub frames: Vec<usize>,
    /// Smoothed Sparkles of the final pass.
    pub sparkles: Vec<Sparkle>,
    pub solves: Vec<SolveResult>,
    pub missing: Vec<MissingInput>,
}

/// Per-view Sparkles of one frame (views lacking inputs or failing
/// estimation are skipped and reported).
fn estimate_frame(model: &Model, views: &[ViewInput], frame: usize, cfg: &EstimatorConfig) -> FrameEstimates {
    let mut preds = Vec::new();
    let mut missing = Vec::new();
    for v in views {
        match &v.frames[frame] {
            None => missing.push(MissingInput {
                frame,
                view: Some(v.view_id),
                reason: "missing scan or labels".into(),
            }),
            Some(input) => {
                match estimate_sparkle(&input.cloud, &input.labels, model.j2a, model.template, model.calib, cfg, None) {
                    Ok(s) => preds.push(ViewPrediction::new(s, v.view_id)),
                    Err(e) => missing.push(MissingInput {
                        frame,
                        view: Some(v.view_id),
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }
    FrameEstimates { frame, preds, missing }
}

/// Estimates of every view for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameEstimates {
    pub frame: usize,
    pub preds: Vec<ViewPrediction>,
    pub missing: Vec<MissingInput>,
}

fn check_views(views: &[ViewInput]) -> Result<usize> {
    if views.is_empty() {
        return Err(Error::validation("reconstruction needs at least one view"));
    }
    let n = views[0].frames.len();
    if views.iter().any(|v| v.frames.len() != n) {
        return Err(Error::validation("all views must cover the same frames"));
    }
    Ok(n)
}

/// Per-frame, per-view Sparkle estimation. Frames run in parallel and come
/// back in frame order.
pub fn estimate_views(model: &Model, views: &[ViewInput], cfg: &EstimatorConfig) -> Result<Vec<FrameEstimates>> {
    let n = check_views(views)?;
    cfg.validate()?;
    Ok((0..n)
        .into_par_iter()
        .map(|f| estimate_frame(model, views, f, cfg))
        .collect())
}

/// One Sparkle per frame: a single view is taken as is, several are fused.
pub fn combine(preds: &[ViewPrediction]) -> Result<Sparkle> {
    match preds {
        [single] => Ok(single.sparkle.clone()),
        _ => fuse_sparkle(preds),
    }
}

/// Fuses, smooths and solves. Frames without any usable view are reported
/// as missing and left out.
pub fn finish(model: &Model, estimates: Vec<FrameEstimates>, opts: &ReconstructOptions) -> Result<Reconstruction> {
    opts.solver.validate()?;
    let mut frames = Vec::new();
    let mut fused = Vec::new();
    let mut missing = Vec::new();
    for e in estimates {
        missing.extend(e.missing);
        if e.preds.is_empty() {
            missing.push(MissingInput {
                frame: e.frame,
                view: None,
                reason: "no usable view".into(),
            });
            continue;
        }
        frames.push(e.frame);
        fused.push(combine(&e.preds)?);
    }
    if frames.is_empty() {
        return Err(Error::validation("no frame has usable inputs"));
    }
    let sparkles = temporal_smooth(&fused, &opts.smoothing, model.template);
    let solves: Vec<SolveResult> = sparkles
        .par_iter()
        .map(|s| solve(model.template, s, &opts.solver, opts.refine))
        .collect::<Result<_>>()?;
    Ok(Reconstruction {
        frames,
        sparkles,
        solves,
        missing,
    })
}

/// Runs the whole chain on every frame that has at least one usable view.
///
/// All reductions follow frame and view order, so the output does not
/// depend on the number of worker threads.
pub fn reconstruct(model: &Model, views: &[ViewInput], opts: &ReconstructOptions) -> Result<Reconstruction> {
    let estimates = estimate_views(model, views, &opts.estimator)?;
    finish(model, estimates, opts)
}
