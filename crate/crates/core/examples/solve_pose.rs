//! Closed-form pose from noisy keypoints, then least-squares refinement.

use mocap_core::body::{forward_kinematics, make_default_template, random_pose};
use mocap_core::metrics::evaluate_frame;
use mocap_core::solver::{solve, SolverConfig};
use mocap_core::sparkle::Sparkle;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn main() -> mocap_core::Result<()> {
    let template = make_default_template(4096, 0)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let truth = random_pose(&mut rng, 1.0);
    let mut s = Sparkle::from_body_state(&forward_kinematics(&template, &truth));
    let noise = Normal::new(0.0, 0.01).unwrap();
    for p in s.joints.iter_mut().chain(s.anchors.iter_mut()) {
        p.iter_mut().for_each(|x| *x += noise.sample(&mut rng));
    }

    let r = solve(&template, &s, &SolverConfig::default(), true)?;
    let before = evaluate_frame(&r.init_pose, &truth, &template)?;
    let after = evaluate_frame(&r.pose, &truth, &template)?;
    println!("cost {:.3e} -> {:.3e} in {} iterations", r.initial_cost, r.final_cost, r.iterations);
    println!("J Err(G) {:.2} -> {:.2} mm, Ang Err {:.2} -> {:.2} deg", before.j_err_g, after.j_err_g, before.ang_err, after.ang_err);
    Ok(())
}
