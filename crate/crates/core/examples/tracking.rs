//! Two people walking past each other on separate lanes, segmented,
//! tracked and scored.

use mocap_core::geom3::Vec3;
use mocap_core::track::{associate, compute_mot, FrameObjects, Tracker};

fn main() -> mocap_core::Result<()> {
    let mut tracker = Tracker::default();
    let (mut gt, mut pred): (Vec<FrameObjects>, Vec<FrameObjects>) = (Vec::new(), Vec::new());
    for f in 0..20 {
        let t = f as f64 * 0.2;
        let people = [Vec3::new(-2.0 + t, 0.0, 0.0), Vec3::new(2.0 - t, 0.0, 1.5)];
        // the second person is not detected in frames 8 and 9
        let detections: Vec<Vec3> = people.iter().enumerate().filter(|(i, _)| !(*i == 1 && (8..10).contains(&f))).map(|(_, p)| *p).collect();
        let ids = associate(&mut tracker, &detections, 1.0, 5)?;
        gt.push(people.iter().enumerate().map(|(i, p)| (i as u64, *p)).collect());
        pred.push(ids.into_iter().zip(detections).collect());
    }
    let r = compute_mot(&gt, &pred, 0.5)?;
    println!("MOTA {:.3}, IDF1 {:.3}, IDs {}, FN {}, FP {}", r.mota, r.idf1, r.id_switches, r.fn_, r.fp);
    Ok(())
}
