//! Scans a posed body from one side, thins it and occludes it.

use mocap_core::body::{forward_kinematics, make_default_template, Pose};
use mocap_core::cloud::{euclidean_cluster, farthest_point_sample, occlude, read_ply, simulate_scan, write_ply, SensorModel};
use mocap_core::geom3::Vec3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let template = make_default_template(8192, 0)?;
    let mut pose = Pose::zero();
    pose.trans = Vec3::new(0.0, 0.0, 4.0);
    let body = forward_kinematics(&template, &pose);

    let sensor = SensorModel {
        view_dir: Vec3::z(),
        noise_sigma: 0.005,
        dropout: 0.05,
        density_ref_dist: 10.0,
        seed: 7,
        backface_culling: true,
    };
    let scan = simulate_scan(&body, &template.surface_joint, &sensor, 4096)?;
    let thin = farthest_point_sample(&scan, 1024, 0)?;
    let half = occlude(&thin, 0.5, 3)?;
    println!("front-facing scan {} points, sampled {}, occluded {}", scan.len(), thin.len(), half.len());
    println!("clusters at 10 cm: {}", euclidean_cluster(&half, 0.1, 20)?.len());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("scan.ply");
    write_ply(&path, &half)?;
    println!("PLY round trip equal: {}", read_ply(&path)?.points == half.points);
    Ok(())
}
