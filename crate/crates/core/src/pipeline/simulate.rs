//! Synthetic scans and the deterministic pieces shared by the commands.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::SensorConfig;
use crate::body::{posed_keypoints, random_pose, BodyState, BodyTemplate};
use crate::cloud::{simulate_scan, PointCloud, SensorModel};
use crate::error::Result;
use crate::geom3::Vec3;
use crate::sparkle::{fit_j2a, J2AMapping};

/// SplitMix64 finaliser, used to derive independent per-item seeds.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one view's scan of one frame.
pub fn frame_seed(seed: u64, view: u32, frame: usize) -> u64 {
    mix_seed(mix_seed(mix_seed(seed) ^ view as u64) ^ frame as u64)
}

/// Sensor sits `distance` behind the zone centre, looking along `view_dir`.
pub fn sensor_position(view_dir: &Vec3, distance: f64) -> Vec3 {
    -view_dir * distance
}

fn shifted(body: &BodyState, by: &Vec3) -> BodyState {
    BodyState {
        joints: body.joints.iter().map(|p| p + by).collect(),
        anchors: body.anchors.iter().map(|p| p + by).collect(),
        surface: body.surface.iter().map(|p| p + by).collect(),
        global_rot: body.global_rot,
    }
}

/// Scan of a posed body from one sensor, returned in world coordinates.
pub fn scan_view(
    body: &BodyState,
    surface_joint: &[usize],
    view_dir: &Vec3,
    sensor: &SensorConfig,
    seed: u64,
) -> Result<PointCloud> {
    let origin = sensor_position(view_dir, sensor.distance);
    let model = SensorModel {
        view_dir: *view_dir,
        noise_sigma: sensor.noise_sigma,
        dropout: sensor.dropout,
        density_ref_dist: sensor.density_ref_dist,
        seed,
        backface_culling: sensor.backface_culling,
    };
    let local = simulate_scan(&shifted(body, &-origin), surface_joint, &model, sensor.points)?;
    Ok(PointCloud::new(local.points.iter().map(|p| p + origin).collect()))
}

/// Joint-to-anchor regression trained on seeded random poses of the template.
pub fn fit_template_j2a(template: &BodyTemplate, poses: usize, max_angle: f64, seed: u64) -> Result<J2AMapping> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed ^ 0x6a32_61));
    let (joints, anchors): (Vec<_>, Vec<_>) = (0..poses)
        .map(|_| posed_keypoints(template, &random_pose(&mut rng, max_angle)))
        .unzip();
    fit_j2a(&joints, &anchors)
}
