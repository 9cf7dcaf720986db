//! Two views that each see a different noisy copy of the keypoints, one of
//! them unsure about the left arm.

use mocap_core::body::{forward_kinematics, make_default_template, random_pose};
use mocap_core::metrics::{mpjpe, Alignment};
use mocap_core::multiview::{fuse_sparkle, ViewPrediction};
use mocap_core::sparkle::Sparkle;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> mocap_core::Result<()> {
    let template = make_default_template(2048, 0)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let body = forward_kinematics(&template, &random_pose(&mut rng, 0.8));
    let noise = Normal::new(0.0, 0.02).unwrap();
    let views: Vec<ViewPrediction> = (0..2)
        .map(|v| {
            let mut s = Sparkle::from_body_state(&body);
            for p in s.joints.iter_mut() {
                p.iter_mut().for_each(|x| *x += noise.sample(&mut rng));
            }
            if v == 1 {
                for j in [16, 18, 20, 22] {
                    s.joints[j].x += 0.2;
                    s.joint_conf[j] = 0.05;
                }
            }
            ViewPrediction::new(s, v)
        })
        .collect();
    let fused = fuse_sparkle(&views)?;
    for v in &views {
        println!("view {}: {:.1} mm", v.view_id, mpjpe(&v.sparkle.joints, &body.joints, Alignment::Global)?);
    }
    println!("fused:  {:.1} mm", mpjpe(&fused.joints, &body.joints, Alignment::Global)?);
    Ok(())
}
