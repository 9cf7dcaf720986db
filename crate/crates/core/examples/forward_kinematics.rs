//! Builds the synthetic template, poses it and checks that bones keep their
//! length.

use mocap_core::body::{apply_shape, forward_kinematics, make_default_template, random_pose, JOINT_NAMES, SMPL_TREE};
use rand::SeedableRng;

fn main() -> mocap_core::Result<()> {
    let template = make_default_template(4096, 0)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut pose = random_pose(&mut rng, 0.8);
    pose.beta[3] = 1.5;
    let shaped = apply_shape(&template, &pose.beta)?;
    let body = forward_kinematics(&template, &pose);

    let mut worst = 0.0f64;
    for j in 1..body.joints.len() {
        let p = SMPL_TREE.parent(j).unwrap();
        let len = (body.joints[j] - body.joints[p]).norm();
        worst = worst.max((len - shaped.bone_vector(j).norm()).abs());
    }
    println!("{} surface points, {} anchors", body.surface.len(), body.anchors.len());
    println!("head at {:.3?}", body.joints[JOINT_NAMES.iter().position(|n| *n == "head").unwrap()].as_slice());
    println!("largest bone length change {worst:.1e} m");
    Ok(())
}
