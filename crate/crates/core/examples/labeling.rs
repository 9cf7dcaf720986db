//! Ground-truth joint and anchor labels for a noisy scan.

use mocap_core::body::{forward_kinematics, make_default_template, random_pose, NUM_JOINTS};
use mocap_core::cloud::{simulate_scan, SensorModel};
use mocap_core::geom3::Vec3;
use mocap_core::labels::{oracle_labels, BG_JOINT, DEFAULT_BG_DIST, DEFAULT_K};
use rand::SeedableRng;

fn main() -> mocap_core::Result<()> {
    let template = make_default_template(8192, 0)?;
    let pose = random_pose(&mut rand_chacha::ChaCha8Rng::seed_from_u64(2), 0.6);
    let body = forward_kinematics(&template, &pose);
    let sensor = SensorModel {
        view_dir: Vec3::z(),
        noise_sigma: 0.01,
        dropout: 0.0,
        density_ref_dist: 10.0,
        seed: 1,
        backface_culling: false,
    };
    let scan = simulate_scan(&body, &template.surface_joint, &sensor, 4096)?;
    let labels = oracle_labels(&template, &body, &scan, DEFAULT_K, DEFAULT_BG_DIST)?;
    labels.validate(scan.len(), Some(&template.anchor_joint))?;

    let mut counts = [0usize; NUM_JOINTS + 1];
    for &j in &labels.joint_label {
        counts[j] += 1;
    }
    println!("points per joint: {:?}", &counts[..NUM_JOINTS]);
    println!("background points: {}", counts[BG_JOINT]);
    Ok(())
}
