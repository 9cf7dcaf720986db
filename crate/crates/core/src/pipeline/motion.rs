//! Seeded smooth motion: Catmull–Rom splines through random keyframes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::SequenceConfig;
use crate::body::{random_unit, Pose, NUM_JOINTS};
use crate::geom3::Vec3;

/// Uniform Catmull–Rom segment between `p1` (t = 0) and `p2` (t = 1).
pub fn catmull_rom(p0: &Vec3, p1: &Vec3, p2: &Vec3, p3: &Vec3, t: f64) -> Vec3 {
    let t2 = t * t;
    let t3 = t2 * t;
    (p1 * 2.0 + (p2 - p0) * t + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3)
        * 0.5
}

fn sample_spline(keys: &[Vec3], interval: usize, frame: usize) -> Vec3 {
    let k = frame / interval;
    let t = (frame % interval) as f64 / interval as f64;
    let at = |i: isize| keys[i.clamp(0, keys.len() as isize - 1) as usize];
    let k = k as isize;
    catmull_rom(&at(k - 1), &at(k), &at(k + 1), &at(k + 2), t)
}

fn clamp_norm(v: Vec3, max: f64) -> Vec3 {
    let n = v.norm();
    if n > max {
        v * (max / n)
    } else {
        v
    }
}

/// One pose per frame. Every joint follows its own spline in axis-angle
/// space, capped at `max_angle`; the root translation wanders smoothly in a
/// box of half-width `root_range` (a tenth of that vertically).
pub fn synthesize_motion(cfg: &SequenceConfig, seed: u64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_7469_6f6e);
    let n_keys = cfg.frames.div_ceil(cfg.keyframe_interval) + 1;
    let joint_keys: Vec<Vec<Vec3>> = (0..NUM_JOINTS)
        .map(|_| {
            (0..n_keys)
                .map(|_| random_unit(&mut rng) * rng.random_range(0.0..=cfg.max_angle))
                .collect()
        })
        .collect();
    let r = cfg.root_range;
    let trans_keys: Vec<Vec3> = (0..n_keys)
        .map(|_| {
            if r > 0.0 {
                Vec3::new(
                    rng.random_range(-r..=r),
                    rng.random_range(-r..=r) * 0.1,
                    rng.random_range(-r..=r),
                )
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    (0..cfg.frames)
        .map(|f| {
            let mut p = Pose::zero();
            for (j, keys) in joint_keys.iter().enumerate() {
                p.theta[j] = clamp_norm(sample_spline(keys, cfg.keyframe_interval, f), cfg.max_angle);
            }
            let t = sample_spline(&trans_keys, cfg.keyframe_interval, f);
            p.trans = Vec3::new(t.x.clamp(-r, r), t.y.clamp(-r, r), t.z.clamp(-r, r));
            p
        })
        .collect()
}
