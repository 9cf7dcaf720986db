//! Run configuration. Every section has defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom3::Vec3;
use crate::sparkle::{EstimatorConfig, LossWeights, SmoothConfig};
use crate::solver::SolverConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateConfig {
    /// Surface samples of the body template.
    pub surface_count: usize,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig { surface_count: 8192 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// Points kept per scan after farthest point sampling.
    pub points: usize,
    pub noise_sigma: f64,
    pub dropout: f64,
    pub density_ref_dist: f64,
    pub backface_culling: bool,
    /// Sensor distance from the middle of the activity zone (metres).
    pub distance: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            points: 4096,
            noise_sigma: 0.0,
            dropout: 0.0,
            density_ref_dist: 10.0,
            backface_culling: false,
            distance: 6.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceConfig {
    pub frames: usize,
    /// Frames between motion keyframes.
    pub keyframe_interval: usize,
    /// Cap on every joint's axis-angle magnitude (radians).
    pub max_angle: f64,
    /// Half-width of the box the root wanders in (metres).
    pub root_range: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        SequenceConfig {
            frames: 100,
            keyframe_interval: 10,
            max_angle: 1.2,
            root_range: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub k: usize,
    pub bg_dist: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            k: crate::labels::DEFAULT_K,
            bg_dist: crate::labels::DEFAULT_BG_DIST,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Random training poses for the joint-to-anchor regression.
    pub poses: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { poses: 256 }
    }
}

/// Multi-person scene used by `track`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub persons: usize,
    pub frames: usize,
    /// Lateral spacing between walking lanes (metres).
    pub lane_spacing: f64,
    /// Walking speed in metres per frame.
    pub step: f64,
    pub points_per_person: usize,
    pub surface_count: usize,
    pub zone_min: Vec3,
    pub zone_max: Vec3,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            persons: 4,
            frames: 30,
            lane_spacing: 3.0,
            step: 0.1,
            points_per_person: 600,
            surface_count: 1024,
            zone_min: Vec3::new(-20.0, -3.0, -20.0),
            zone_max: Vec3::new(20.0, 3.0, 20.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    pub radius: f64,
    pub min_pts: usize,
    pub gate: f64,
    pub max_miss: usize,
    pub match_dist: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        TrackConfig {
            radius: crate::track::DEFAULT_RADIUS,
            min_pts: 30,
            gate: crate::track::DEFAULT_GATE,
            max_miss: crate::track::DEFAULT_MAX_MISS,
            match_dist: crate::track::DEFAULT_MATCH_DIST,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Results directory, relative to the dataset.
    pub results: String,
    /// Occlusion sweep directory, relative to the dataset.
    pub ablation: String,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            results: "results".into(),
            ablation: "ablation".into(),
        }
    }
}

/// Everything a run depends on besides the dataset bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub template: TemplateConfig,
    pub sensor: SensorConfig,
    pub sequence: SequenceConfig,
    /// Viewing direction of each sensor; sensors sit `sensor.distance`
    /// behind the zone centre along their direction.
    pub views: Vec<Vec3>,
    pub occlusion_ratios: Vec<f64>,
    pub labels: LabelConfig,
    pub fit: FitConfig,
    pub estimator: EstimatorConfig,
    pub smoothing: SmoothConfig,
    pub solver: SolverConfig,
    pub loss: LossWeights,
    pub scene: SceneConfig,
    pub tracking: TrackConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            template: TemplateConfig::default(),
            sensor: SensorConfig::default(),
            sequence: SequenceConfig::default(),
            views: ring_views(1),
            occlusion_ratios: vec![0.0, 0.3, 0.5, 0.7, 0.9],
            labels: LabelConfig::default(),
            fit: FitConfig::default(),
            estimator: EstimatorConfig::default(),
            smoothing: SmoothConfig::default(),
            solver: SolverConfig::default(),
            loss: LossWeights::default(),
            scene: SceneConfig::default(),
            tracking: TrackConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

/// `n` horizontal viewing directions evenly spaced around the vertical axis,
/// starting with +z.
pub fn ring_views(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            let (s, c) = a.sin_cos();
            // snap tiny components so ±x/±z views are exact
            let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
            Vec3::new(snap(s), 0.0, snap(c))
        })
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "run configuration",
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.template.surface_count < 256 {
            return Err(Error::validation("template.surface_count must be at least 256"));
        }
        let s = &self.sensor;
        if s.points == 0 || !(s.noise_sigma >= 0.0) || !(0.0..1.0).contains(&s.dropout) {
            return Err(Error::validation("sensor parameters out of range"));
        }
        if !(s.density_ref_dist > 0.0) || !(s.distance > 0.0) {
            return Err(Error::validation("sensor distances must be positive"));
        }
        let q = &self.sequence;
        if q.frames == 0 || q.keyframe_interval == 0 {
            return Err(Error::validation("sequence needs at least one frame and a keyframe interval"));
        }
        if !(0.0..=std::f64::consts::PI).contains(&q.max_angle) || !(q.root_range >= 0.0) {
            return Err(Error::validation("sequence motion limits out of range"));
        }
        if self.views.is_empty() {
            return Err(Error::validation("at least one view is required"));
        }
        if self.views.iter().any(|v| (v.norm() - 1.0).abs() > 1e-6) {
            return Err(Error::validation("view directions must be unit vectors"));
        }
        if self.occlusion_ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::validation("occlusion ratios must lie in [0, 1]"));
        }
        if self.labels.k == 0 || !(self.labels.bg_dist > 0.0) {
            return Err(Error::validation("label parameters out of range"));
        }
        if self.fit.poses < crate::body::NUM_JOINTS {
            return Err(Error::validation("fit.poses must be at least 24"));
        }
        self.estimator.validate()?;
        self.solver.validate()?;
        self.loss.validate()?;
        if !(self.smoothing.lambda_s >= 0.0) {
            return Err(Error::validation("smoothing.lambda_s must be >= 0"));
        }
        let sc = &self.scene;
        if (0..3).any(|k| !(sc.zone_min[k] < sc.zone_max[k])) || sc.surface_count < 256 {
            return Err(Error::validation("scene zone or template size out of range"));
        }
        let t = &self.tracking;
        if !(t.radius > 0.0) || !(t.gate > 0.0) || !(t.match_dist > 0.0) {
            return Err(Error::validation("tracking distances must be positive"));
        }
        Ok(())
    }

    /// Canonical JSON (struct field order, shortest round-trip floats).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// SHA-256 of the canonical JSON.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }
}
