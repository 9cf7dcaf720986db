//! The command implementations behind the `mocap` binary. Each command reads
//! and writes a dataset directory and returns a short summary for stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ring_views, RunConfig};
use super::dataset::*;
use super::manifest::SequenceManifest;
use super::motion::synthesize_motion;
use super::reconstruct::{
    estimate_views, finish, FrameEstimates, FrameInput, MissingInput, Model, ReconstructOptions, Reconstruction,
    ViewInput,
};
use super::simulate::{fit_template_j2a, frame_seed, mix_seed, scan_view};
use crate::body::{forward_kinematics, make_default_template, posed_keypoints, random_pose, BodyTemplate, Pose};
use crate::cloud::{occlusion_keep_indices, read_ply, write_ply, PointCloud};
use crate::error::{Error, Result};
use crate::geom3::Vec3;
use crate::labels::{oracle_labels, LabelSet};
use crate::metrics::{evaluate_sequence, EvalReport};
use crate::multiview::ViewPrediction;
use crate::sparkle::{fit_j2a, Calibration, J2AMapping, Sparkle};
use crate::track::{associate, compute_mot, read_tracks_csv, segment_persons, write_tracks_csv, FrameObjects, Tracker};

const OCCLUSION_SALT: u64 = 0x6f63_636c;
const SCENE_SALT: u64 = 0x7363_656e;
const FIT_SALT: u64 = 0x6669_74;

/// Flags shared by every command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub views: Option<usize>,
    pub oracle_labels: bool,
    pub skip_refine: bool,
}

impl CommandOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        CommandOptions {
            out: out.into(),
            ..Default::default()
        }
    }

    fn overrides_config(&self) -> bool {
        self.config.is_some() || self.seed.is_some() || self.views.is_some()
    }

    /// The configuration named by the flags, starting from `base`.
    fn effective_config(&self, base: RunConfig) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => base,
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.views {
            if n == 0 {
                return Err(Error::validation("--views must be at least 1"));
            }
            cfg.views = ring_views(n);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// An existing dataset opened for a processing command.
struct Dataset {
    root: PathBuf,
    cfg: RunConfig,
    manifest: SequenceManifest,
    template: BodyTemplate,
    gt: Vec<Pose>,
}

impl Dataset {
    fn open(opts: &CommandOptions) -> Result<Self> {
        let root = opts.out.clone();
        let manifest = SequenceManifest::load(&root)?;
        let stored = RunConfig::load(&root.join(CONFIG_FILE))?;
        if stored.hash()? != manifest.config_hash {
            return Err(Error::validation("config.json does not match the manifest's config hash"));
        }
        if opts.overrides_config() {
            let requested = opts.effective_config(stored.clone())?;
            if requested.hash()? != manifest.config_hash {
                return Err(Error::validation(
                    "configuration differs from the one this dataset was simulated with (config hash mismatch)",
                ));
            }
        }
        let template = load_template(&root)?;
        let gt: Vec<Pose> = read_json(&root.join(GT_FILE), "ground-truth poses")?;
        if gt.len() != manifest.frames {
            return Err(Error::validation("ground-truth pose count differs from the manifest"));
        }
        Ok(Dataset {
            root,
            cfg: stored,
            manifest,
            template,
            gt,
        })
    }

    fn frames(&self) -> usize {
        self.manifest.frames
    }

    fn save_manifest(&self) -> Result<()> {
        self.manifest.save(&self.root)
    }

    fn register(&mut self, paths: &[PathBuf]) -> Result<()> {
        let mut sorted = paths.to_vec();
        sorted.sort();
        self.manifest.register_all(&self.root, &sorted)
    }

    /// Ground-truth labels of one scan.
    fn oracle(&self, frame: usize, cloud: &PointCloud) -> Result<LabelSet> {
        let body = forward_kinematics(&self.template, &self.gt[frame]);
        oracle_labels(&self.template, &body, cloud, self.cfg.labels.k, self.cfg.labels.bg_dist)
    }

    /// The fitted mapping when `fit` has run, otherwise one trained on
    /// seeded random poses of the template.
    fn j2a(&self) -> Result<J2AMapping> {
        if self.manifest.files.contains_key(J2A_FILE) {
            read_json(&self.root.join(J2A_FILE), "joint-to-anchor mapping")
        } else {
            fit_template_j2a(&self.template, self.cfg.fit.poses, self.cfg.sequence.max_angle, self.cfg.seed)
        }
    }

    /// Scan and labels of one view; `None` when either is unavailable.
    fn frame_input(&self, data_root: &Path, view: u32, frame: usize, oracle: bool) -> Result<Option<FrameInput>> {
        let cloud_file = cloud_path(data_root, view, frame);
        if !cloud_file.is_file() {
            return Ok(None);
        }
        let cloud = read_ply(&cloud_file)?;
        let label_file = labels_path(data_root, view, frame);
        let labels = if oracle {
            self.oracle(frame, &cloud)?
        } else if label_file.is_file() {
            let l = LabelSet::read_csv(&label_file)?;
            l.validate(cloud.len(), Some(&self.template.anchor_joint))?;
            l
        } else {
            return Ok(None);
        };
        Ok(Some(FrameInput { cloud, labels }))
    }

    fn view_inputs(&self, data_root: &Path, views: &[u32], oracle: bool) -> Result<Vec<ViewInput>> {
        views
            .iter()
            .map(|&v| {
                let frames = (0..self.frames())
                    .into_par_iter()
                    .map(|f| self.frame_input(data_root, v, f, oracle))
                    .collect::<Result<Vec<_>>>()?;
                Ok(ViewInput { view_id: v, frames })
            })
            .collect()
    }

    fn options(&self, skip_refine: bool) -> ReconstructOptions {
        ReconstructOptions {
            estimator: self.cfg.estimator.clone(),
            smoothing: self.cfg.smoothing.clone(),
            solver: self.cfg.solver.clone(),
            refine: !skip_refine,
        }
    }
}

/// Summary written next to the per-frame results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames: Vec<usize>,
    pub missing: Vec<MissingInput>,
    pub refined: bool,
    pub mean_initial_cost: f64,
    pub mean_final_cost: f64,
}

/// Writes Sparkles, solve results, the evaluation report and the missing
/// list under `dir`; returns the written paths and the report.
fn write_results(ds: &Dataset, dir: &Path, r: &Reconstruction, refined: bool) -> Result<(Vec<PathBuf>, EvalReport)> {
    let sparkle_dir = dir.join("sparkles");
    let solve_dir = dir.join("solves");
    create_dir(&sparkle_dir)?;
    create_dir(&solve_dir)?;
    let mut written: Vec<PathBuf> = r
        .frames
        .par_iter()
        .zip(&r.sparkles)
        .zip(&r.solves)
        .map(|((&f, s), sol)| {
            let a = frame_json(&sparkle_dir, f);
            let b = frame_json(&solve_dir, f);
            write_json(&a, s)?;
            write_json(&b, sol)?;
            Ok(vec![a, b])
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let preds: Vec<Pose> = r.solves.iter().map(|s| s.pose.clone()).collect();
    let gts: Vec<Pose> = r.frames.iter().map(|&f| ds.gt[f].clone()).collect();
    let report = evaluate_sequence(&preds, &gts, &ds.template)?;
    let (json, csv) = (dir.join("report.json"), dir.join("report.csv"));
    write_json(&json, &report)?;
    write_text(&csv, &report.to_csv())?;
    let n = r.solves.len() as f64;
    let summary = RunSummary {
        frames: r.frames.clone(),
        missing: r.missing.clone(),
        refined,
        mean_initial_cost: r.solves.iter().map(|s| s.initial_cost).sum::<f64>() / n,
        mean_final_cost: r.solves.iter().map(|s| s.final_cost).sum::<f64>() / n,
    };
    let summary_path = dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    written.extend([json, csv, summary_path]);
    Ok((written, report))
}

fn report_line(name: &str, r: &EvalReport, frames: usize, missing: usize) -> String {
    format!(
        "{name}: {frames} frames, {missing} missing inputs; J Err(L/G) {:.2}/{:.2} mm, V Err(L/G) {:.2}/{:.2} mm, Ang Err {:.3} deg",
        r.j_err_l, r.j_err_g, r.v_err_l, r.v_err_g, r.ang_err
    )
}

/// `simulate`: template, smooth random motion, per-view scans, the
/// multi-person tracking scene and the manifest.
pub fn cmd_simulate(opts: &CommandOptions) -> Result<String> {
    let cfg = opts.effective_config(RunConfig::default())?;
    let root = opts.out.clone();
    create_dir(&root)?;
    let template = make_default_template(cfg.template.surface_count, cfg.seed)?;
    let poses = synthesize_motion(&cfg.sequence, cfg.seed);
    let view_ids: Vec<u32> = (0..cfg.views.len() as u32).collect();

    write_text(&root.join(CONFIG_FILE), &cfg.to_json()?)?;
    template.save(&root.join(TEMPLATE_FILE))?;
    write_json(&root.join(GT_FILE), &poses)?;
    for &v in &view_ids {
        create_dir(&view_dir(&root, v))?;
    }
    let mut written = vec![root.join(CONFIG_FILE), root.join(TEMPLATE_FILE), root.join(GT_FILE)];
    let scans: Vec<PathBuf> = poses
        .par_iter()
        .enumerate()
        .map(|(f, pose)| {
            let body = forward_kinematics(&template, pose);
            view_ids
                .iter()
                .map(|&v| {
                    let cloud = scan_view(
                        &body,
                        &template.surface_joint,
                        &cfg.views[v as usize],
                        &cfg.sensor,
                        frame_seed(cfg.seed, v, f),
                    )?;
                    let path = cloud_path(&root, v, f);
                    write_ply(&path, &cloud)?;
                    Ok(path)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    written.extend(scans);
    written.extend(simulate_scene(&root, &cfg)?);

    let mut manifest = SequenceManifest::new(cfg.hash()?, poses.len(), view_ids.clone());
    written.sort();
    manifest.register_all(&root, &written)?;
    manifest.save(&root)?;
    Ok(format!(
        "simulate: {} frames x {} view(s), {} points per scan, scene of {} persons x {} frames -> {}",
        poses.len(),
        view_ids.len(),
        cfg.sensor.points,
        cfg.scene.persons,
        cfg.scene.frames,
        root.display()
    ))
}

/// Walkers on parallel lanes (they never cross), scanned together from the
/// first view direction. Ground truth is each walker's surface centroid.
fn simulate_scene(root: &Path, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sc = &cfg.scene;
    let dir = root.join(SCENE_DIR);
    create_dir(&dir)?;
    let template = make_default_template(sc.surface_count, mix_seed(cfg.seed ^ SCENE_SALT))?;
    let sensor = crate::pipeline::config::SensorConfig {
        points: sc.points_per_person,
        ..cfg.sensor.clone()
    };
    let half = (sc.persons as f64 - 1.0) / 2.0;
    let frames: Vec<(PointCloud, FrameObjects)> = (0..sc.frames)
        .into_par_iter()
        .map(|f| {
            let mut points = Vec::new();
            let mut objects = Vec::new();
            for p in 0..sc.persons {
                let seed = frame_seed(cfg.seed ^ SCENE_SALT, p as u32, f);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut pose = random_pose(&mut rng, 0.3);
                let dir_sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                let start = -dir_sign * sc.step * sc.frames as f64 / 2.0;
                pose.trans = Vec3::new((p as f64 - half) * sc.lane_spacing, 0.0, start + dir_sign * sc.step * f as f64);
                let body = forward_kinematics(&template, &pose);
                let centroid = body.surface.iter().sum::<Vec3>() / body.surface.len() as f64;
                let scan = scan_view(&body, &template.surface_joint, &cfg.views[0], &sensor, seed)?;
                points.extend(scan.points);
                objects.push((p as u64, centroid));
            }
            let mut cloud = PointCloud::new(points);
            cloud.frame = f as u64;
            Ok((cloud, objects))
        })
        .collect::<Result<_>>()?;
    let mut written = Vec::new();
    for (f, (cloud, _)) in frames.iter().enumerate() {
        let path = dir.join(crate::cloud::frame_file_name(f as u64, "ply"));
        write_ply(&path, cloud)?;
        written.push(path);
    }
    let gt: Vec<FrameObjects> = frames.into_iter().map(|(_, o)| o).collect();
    let gt_path = dir.join("gt_tracks.csv");
    write_tracks_csv(&gt_path, &gt)?;
    written.push(gt_path);
    Ok(written)
}

/// `label`: label sets for every scan, from the ground-truth bodies.
pub fn cmd_label(opts: &CommandOptions) -> Result<String> {
    let mut ds = Dataset::open(opts)?;
    let mut written = Vec::new();
    for &v in &ds.manifest.views.clone() {
        create_dir(&view_dir(&ds.root, v).join("labels"))?;
        let paths: Vec<PathBuf> = (0..ds.frames())
            .into_par_iter()
            .map(|f| {
                let cloud = read_ply(&cloud_path(&ds.root, v, f))?;
                let labels = ds.oracle(f, &cloud)?;
                let path = labels_path(&ds.root, v, f);
                labels.write_csv(&path)?;
                Ok(path)
            })
            .collect::<Result<_>>()?;
        written.extend(paths);
    }
    ds.register(&written)?;
    ds.save_manifest()?;
    Ok(format!("label: wrote {} label sets", written.len()))
}

/// `fit`: joint-to-anchor regression over the sequence's ground-truth
/// frames, plus the template's anchor set. Short sequences are topped up
/// with seeded random poses to `fit.poses` frames.
pub fn cmd_fit(opts: &CommandOptions) -> Result<String> {
    let mut ds = Dataset::open(opts)?;
    let mut poses = ds.gt.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(ds.cfg.seed ^ FIT_SALT));
    while poses.len() < ds.cfg.fit.poses {
        poses.push(random_pose(&mut rng, ds.cfg.sequence.max_angle));
    }
    let (joints, anchors): (Vec<_>, Vec<_>) = poses.iter().map(|p| posed_keypoints(&ds.template, p)).unzip();
    let m = fit_j2a(&joints, &anchors)?;
    let (j2a_path, anchors_path) = (ds.root.join(J2A_FILE), ds.root.join(ANCHORS_FILE));
    write_json(&j2a_path, &m)?;
    write_json(&anchors_path, &AnchorSet::of(&ds.template))?;
    ds.register(&[j2a_path, anchors_path])?;
    ds.save_manifest()?;
    Ok(format!(
        "fit: joint-to-anchor mapping over {} frames, residual rms {:.3} mm",
        m.frames,
        m.residual_rms * 1000.0
    ))
}

fn run_single_view(ds: &Dataset, data_root: &Path, oracle: bool, skip_refine: bool) -> Result<Reconstruction> {
    let j2a = ds.j2a()?;
    let calib = Calibration::from_template(&ds.template, ds.cfg.estimator.trim)?;
    let model = Model {
        template: &ds.template,
        calib: &calib,
        j2a: &j2a,
    };
    let views = ds.view_inputs(data_root, &[0], oracle)?;
    let opts = ds.options(skip_refine);
    let estimates = estimate_views(&model, &views, &opts.estimator)?;
    finish(&model, estimates, &opts)
}

/// `solve`: single-view reconstruction of view 0.
pub fn cmd_solve(opts: &CommandOptions) -> Result<String> {
    let mut ds = Dataset::open(opts)?;
    let r = run_single_view(&ds, &ds.root, opts.oracle_labels, opts.skip_refine)?;
    let dir = ds.root.join(&ds.cfg.paths.results);
    ds.manifest.forget_prefix(&ds.cfg.paths.results);
    let (written, report) = write_results(&ds, &dir, &r, !opts.skip_refine)?;
    ds.register(&written)?;
    ds.save_manifest()?;
    Ok(report_line("solve", &report, r.frames.len(), r.missing.len()))
}

/// `fuse`: per-view Sparkles written under `fused/view_<id>/`, read back,
/// fused per frame, smoothed and solved.
pub fn cmd_fuse(opts: &CommandOptions) -> Result<String> {
    let mut ds = Dataset::open(opts)?;
    if ds.manifest.views.len() < 2 {
        return Err(Error::validation("fuse needs a dataset with at least two views"));
    }
    let j2a = ds.j2a()?;
    let calib = Calibration::from_template(&ds.template, ds.cfg.estimator.trim)?;
    let model = Model {
        template: &ds.template,
        calib: &calib,
        j2a: &j2a,
    };
    let view_ids = ds.manifest.views.clone();
    let views = ds.view_inputs(&ds.root, &view_ids, opts.oracle_labels)?;
    let ropts = ds.options(opts.skip_refine);
    let estimates = estimate_views(&model, &views, &ropts.estimator)?;

    let fused_root = ds.root.join(FUSED_DIR);
    ds.manifest.forget_prefix(FUSED_DIR);
    let mut written = Vec::new();
    for e in &estimates {
        for p in &e.preds {
            let path = frame_json(&fused_root.join(format!("view_{}", p.view_id)), e.frame);
            write_json(&path, &p.sparkle)?;
            written.push(path);
        }
    }
    let reloaded: Vec<FrameEstimates> = estimates
        .into_iter()
        .map(|e| {
            let preds = e
                .preds
                .iter()
                .map(|p| {
                    let path = frame_json(&fused_root.join(format!("view_{}", p.view_id)), e.frame);
                    Ok(ViewPrediction::new(Sparkle::load(&path)?, p.view_id))
                })
                .collect::<Result<_>>()?;
            Ok(FrameEstimates { preds, ..e })
        })
        .collect::<Result<_>>()?;
    let r = finish(&model, reloaded, &ropts)?;
    let (more, report) = write_results(&ds, &fused_root, &r, !opts.skip_refine)?;
    written.extend(more);
    ds.register(&written)?;
    ds.save_manifest()?;
    Ok(report_line("fuse", &report, r.frames.len(), r.missing.len()))
}

/// One row of the occlusion sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcclusionRow {
    pub ratio: f64,
    pub report: EvalReport,
}

pub fn occlusion_csv(rows: &[OcclusionRow]) -> String {
    let mut s = String::from("ratio,j_err_l,v_err_l,j_err_g,v_err_g,ang_err\n");
    for r in rows {
        let e = &r.report;
        let _ = writeln!(
            s,
            "{:.2},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.ratio, e.j_err_l, e.v_err_l, e.j_err_g, e.v_err_g, e.ang_err
        );
    }
    s
}

/// `ablate-occlusion`: for every configured ratio, an occluded copy of view
/// 0 (same random removal order at every ratio, so the kept sets are
/// nested) is written and solved; one CSV row per ratio, ascending.
pub fn cmd_ablate_occlusion(opts: &CommandOptions) -> Result<String> {
    let mut ds = Dataset::open(opts)?;
    let mut ratios = ds.cfg.occlusion_ratios.clone();
    ratios.sort_by(f64::total_cmp);
    ratios.dedup();
    if ratios.is_empty() {
        return Err(Error::validation("no occlusion ratios configured"));
    }
    let ablation = ds.cfg.paths.ablation.clone();
    ds.manifest.forget_prefix(&ablation);
    let mut written = Vec::new();
    let mut rows = Vec::new();
    for &ratio in &ratios {
        let sub = ds.root.join(&ablation).join(ratio_dir_name(ratio));
        create_dir(&view_dir(&sub, 0).join("labels"))?;
        let copies: Vec<Vec<PathBuf>> = (0..ds.frames())
            .into_par_iter()
            .map(|f| {
                let Some(input) = ds.frame_input(&ds.root, 0, f, opts.oracle_labels)? else {
                    return Ok(Vec::new());
                };
                let keep = occlusion_keep_indices(input.cloud.len(), ratio, frame_seed(ds.cfg.seed ^ OCCLUSION_SALT, 0, f))?;
                let cloud = input.cloud.select(&keep);
                let labels = LabelSet {
                    joint_label: keep.iter().map(|&i| input.labels.joint_label[i]).collect(),
                    anchor_label: keep.iter().map(|&i| input.labels.anchor_label[i]).collect(),
                };
                let (c, l) = (cloud_path(&sub, 0, f), labels_path(&sub, 0, f));
                write_ply(&c, &cloud)?;
                labels.write_csv(&l)?;
                Ok(vec![c, l])
            })
            .collect::<Result<_>>()?;
        written.extend(copies.into_iter().flatten());
        let r = run_single_view(&ds, &sub, false, opts.skip_refine)?;
        let (more, report) = write_results(&ds, &sub.join("results"), &r, !opts.skip_refine)?;
        written.extend(more);
        rows.push(OcclusionRow { ratio, report });
    }
    let csv_path = ds.root.join(&ablation).join("occlusion.csv");
    write_text(&csv_path, &occlusion_csv(&rows))?;
    written.push(csv_path);
    ds.register(&written)?;
    ds.save_manifest()?;
    let mut out = String::from("ablate-occlusion:\n");
    out.push_str(&occlusion_csv(&rows));
    Ok(out.trim_end().to_string())
}

/// `track`: segmentation and association over the simulated scene, scored
/// against its ground-truth tracks.
pub fn cmd_track(opts: &CommandOptions) -> Result<String> {
    let mut ds = Dataset::open(opts)?;
    let dir = ds.root.join(SCENE_DIR);
    let n = ds.cfg.scene.frames;
    let tc = ds.cfg.tracking.clone();
    let sc = ds.cfg.scene.clone();
    let detections: Vec<Vec<Vec3>> = (0..n)
        .into_par_iter()
        .map(|f| {
            let cloud = read_ply(&dir.join(crate::cloud::frame_file_name(f as u64, "ply")))?;
            Ok(segment_persons(&cloud, &sc.zone_min, &sc.zone_max, tc.radius, tc.min_pts)?
                .into_iter()
                .map(|(_, c)| c)
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut tracker = Tracker::default();
    let mut pred: Vec<FrameObjects> = Vec::with_capacity(n);
    for dets in &detections {
        let ids = associate(&mut tracker, dets, tc.gate, tc.max_miss)?;
        pred.push(ids.into_iter().zip(dets.iter().copied()).collect());
    }
    let gt = read_tracks_csv(&dir.join("gt_tracks.csv"), n)?;
    let report = compute_mot(&gt, &pred, tc.match_dist)?;
    let (pred_path, mot_path) = (dir.join("pred_tracks.csv"), dir.join("mot.json"));
    write_tracks_csv(&pred_path, &pred)?;
    write_json(&mot_path, &report)?;
    ds.register(&[pred_path, mot_path])?;
    ds.save_manifest()?;
    Ok(format!(
        "track: {n} frames; MOTA {:.4}, IDF1 {:.4}, IDs {}, FP {}, FN {}",
        report.mota, report.idf1, report.id_switches, report.fp, report.fn_
    ))
}

/// Re-scores stored solve results against ground truth.
fn evaluate_dir(ds: &Dataset, dir: &Path) -> Result<Option<EvalReport>> {
    let summary_path = dir.join("summary.json");
    if !summary_path.is_file() {
        return Ok(None);
    }
    let summary: RunSummary = read_json(&summary_path, "run summary")?;
    let preds = summary
        .frames
        .iter()
        .map(|&f| {
            let sol: crate::solver::SolveResult = read_json(&frame_json(&dir.join("solves"), f), "solve result")?;
            Ok(sol.pose)
        })
        .collect::<Result<Vec<_>>>()?;
    let gts: Vec<Pose> = summary.frames.iter().map(|&f| ds.gt[f].clone()).collect();
    Ok(Some(evaluate_sequence(&preds, &gts, &ds.template)?))
}

/// `eval`: recomputes the reports of the single-view and fused results.
pub fn cmd_eval(opts: &CommandOptions) -> Result<String> {
    let mut ds = Dataset::open(opts)?;
    let eval_dir = ds.root.join(EVAL_DIR);
    let mut written = Vec::new();
    let mut lines = Vec::new();
    let sources = [("solve", ds.cfg.paths.results.clone()), ("fuse", FUSED_DIR.to_string())];
    for (name, sub) in sources {
        if let Some(report) = evaluate_dir(&ds, &ds.root.join(&sub))? {
            let (json, csv) = (eval_dir.join(format!("{name}.json")), eval_dir.join(format!("{name}.csv")));
            write_json(&json, &report)?;
            write_text(&csv, &report.to_csv())?;
            written.extend([json, csv]);
            lines.push(report_line(&format!("eval {name}"), &report, report.frames.len(), 0));
        }
    }
    if lines.is_empty() {
        return Err(Error::validation("no results to evaluate; run solve or fuse first"));
    }
    ds.register(&written)?;
    ds.save_manifest()?;
    Ok(lines.join("\n"))
}

/// `verify`: re-hashes every registered file.
pub fn cmd_verify(opts: &CommandOptions) -> Result<String> {
    let root = &opts.out;
    let manifest = SequenceManifest::load(root)?;
    let bad = manifest.verify(root);
    if bad.is_empty() {
        Ok(format!("verify: {} files match the manifest", manifest.files.len()))
    } else {
        Err(Error::validation(format!(
            "{} file(s) differ from the manifest: {}",
            bad.len(),
            bad.join(", ")
        )))
    }
}
