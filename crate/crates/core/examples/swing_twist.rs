//! Splits a bone rotation into swing and twist, then rebuilds it from a bone
//! direction and two anchor offsets.

use mocap_core::geom3::{rodrigues, solve_bone_rotation, swing_twist_decompose, Vec3, DEFAULT_EPS};

fn main() -> mocap_core::Result<()> {
    let bone = Vec3::new(0.0, -0.4, 0.05);
    let axis = bone.normalize();
    let truth = rodrigues(&Vec3::new(1.0, 0.0, 0.3).normalize(), 0.7)? * rodrigues(&axis, -1.9)?;

    let split = swing_twist_decompose(&truth, &axis, DEFAULT_EPS)?;
    println!(
        "swing {:.4} rad about {:.3?}, twist {:.4} rad",
        split.alpha_sw,
        split.n_sw.as_slice(),
        split.alpha_tw
    );

    let anchors = [Vec3::new(0.06, -0.1, 0.0), Vec3::new(-0.02, -0.3, 0.05)];
    let observed: Vec<Vec3> = anchors.iter().map(|a| truth * *a).collect();
    let solved = solve_bone_rotation(&bone, &(truth * bone), &anchors, &observed, DEFAULT_EPS)?;
    let err = (solved.rotation().matrix() - truth.matrix()).norm();
    println!("recovered from keypoints, Frobenius error {err:.2e}");
    Ok(())
}
