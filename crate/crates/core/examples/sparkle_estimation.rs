//! Joints and anchors estimated from one labeled scan, compared with the
//! posed body they came from.

use mocap_core::body::{forward_kinematics, make_default_template, random_pose};
use mocap_core::cloud::PointCloud;
use mocap_core::labels::oracle_labels;
use mocap_core::metrics::{mpjpe, Alignment};
use mocap_core::pipeline::simulate::fit_template_j2a;
use mocap_core::sparkle::{estimate_sparkle, Calibration, EstimatorConfig};
use rand::SeedableRng;

fn main() -> mocap_core::Result<()> {
    let template = make_default_template(8192, 0)?;
    let cfg = EstimatorConfig::default();
    let calib = Calibration::from_template(&template, cfg.trim)?;
    let j2a = fit_template_j2a(&template, 256, 1.2, 0)?;
    println!("joint-to-anchor fit residual {:.2} mm", j2a.residual_rms * 1000.0);

    let pose = random_pose(&mut rand_chacha::ChaCha8Rng::seed_from_u64(5), 0.8);
    let body = forward_kinematics(&template, &pose);
    let scan = PointCloud::new(body.surface.iter().step_by(2).copied().collect());
    let labels = oracle_labels(&template, &body, &scan, 3, 0.25)?;
    let s = estimate_sparkle(&scan, &labels, &j2a, &template, &calib, &cfg, None)?;
    println!(
        "joint error {:.2} mm, anchor error {:.2} mm",
        mpjpe(&s.joints, &body.joints, Alignment::Global)?,
        mpjpe(&s.anchors, &body.anchors, Alignment::Global)?
    );
    Ok(())
}
