//! Multi-person stage: zone cropping and clustering, identity association
//! and MOT metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::{euclidean_cluster_indices, PointCloud};
use crate::error::{Error, Result};
use crate::geom3::Vec3;

pub const DEFAULT_RADIUS: f64 = 0.4;
pub const DEFAULT_GATE: f64 = 1.0;
pub const DEFAULT_MAX_MISS: usize = 5;
pub const DEFAULT_MATCH_DIST: f64 = 0.5;

/// Minimum-cost perfect assignment on a square matrix (Hungarian method with
/// potentials). Returns the column assigned to each row.
fn hungarian_square(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Optimal rectangular assignment: pairs `(row, col)` minimising the total
/// cost, with pairs costing more than `max_cost` forbidden. As many pairs as
/// possible are formed first; total cost is minimised among those.
pub fn assign(cost: &[Vec<f64>], max_cost: f64) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let n = rows.max(cols);
    let finite_sum: f64 = cost
        .iter()
        .flatten()
        .filter(|c| **c <= max_cost)
        .map(|c| c.abs())
        .sum();
    let big = (finite_sum + 1.0) * 2.0;
    let mut square = vec![vec![big; n]; n];
    for (i, row) in cost.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c <= max_cost {
                square[i][j] = c;
            }
        }
    }
    hungarian_square(&square)
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| i < rows && j < cols && cost[i][j] <= max_cost)
        .collect()
}

/// Crops to the axis-aligned zone and clusters; returns each cluster with its
/// centroid, ordered by lowest original point index.
pub fn segment_persons(
    c: &PointCloud,
    zone_min: &Vec3,
    zone_max: &Vec3,
    radius: f64,
    min_pts: usize,
) -> Result<Vec<(PointCloud, Vec3)>> {
    if (0..3).any(|k| !(zone_min[k] < zone_max[k])) {
        return Err(Error::validation("activity zone must satisfy min < max on every axis"));
    }
    let inside: Vec<usize> = (0..c.len())
        .filter(|&i| (0..3).all(|k| c.points[i][k] >= zone_min[k] && c.points[i][k] <= zone_max[k]))
        .collect();
    let cropped = c.select(&inside);
    Ok(euclidean_cluster_indices(&cropped.points, radius, min_pts)?
        .into_iter()
        .map(|g| {
            let cluster = cropped.select(&g);
            let centroid = cluster.centroid().expect("clusters are non-empty");
            (cluster, centroid)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    /// `(frame, centroid)` for every frame the track was matched.
    pub centroids: Vec<(u64, Vec3)>,
    pub missed: usize,
}

impl Track {
    pub fn last(&self) -> Vec3 {
        self.centroids.last().map(|c| c.1).unwrap_or_else(Vec3::zeros)
    }
}

/// Live tracks plus the id counter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tracker {
    pub tracks: Vec<Track>,
    pub finished: Vec<Track>,
    pub next_id: u64,
    pub frame: u64,
}

fn lexicographic(a: &Vec3, b: &Vec3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

/// One association step. Returns the track id given to each detection, in
/// the caller's detection order.
///
/// Detections are processed in lexicographic order of their coordinates so
/// the outcome does not depend on the order they were supplied in.
pub fn associate(tracker: &mut Tracker, detections: &[Vec3], gate: f64, max_miss: usize) -> Result<Vec<u64>> {
    if !(gate > 0.0) {
        return Err(Error::validation("association gate must be positive"));
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| lexicographic(&detections[a], &detections[b]).then(a.cmp(&b)));
    let cost: Vec<Vec<f64>> = tracker
        .tracks
        .iter()
        .map(|t| order.iter().map(|&d| (detections[d] - t.last()).norm()).collect())
        .collect();
    let pairs = assign(&cost, gate);
    let frame = tracker.frame;
    let mut ids = vec![None; detections.len()];
    let mut matched = vec![false; tracker.tracks.len()];
    for (ti, k) in pairs {
        let d = order[k];
        let track = &mut tracker.tracks[ti];
        track.centroids.push((frame, detections[d]));
        track.missed = 0;
        matched[ti] = true;
        ids[d] = Some(track.id);
    }
    for (ti, m) in matched.iter().enumerate() {
        if !m {
            tracker.tracks[ti].missed += 1;
        }
    }
    let (alive, dead): (Vec<Track>, Vec<Track>) = tracker
        .tracks
        .drain(..)
        .partition(|t| t.missed <= max_miss);
    tracker.tracks = alive;
    tracker.finished.extend(dead);
    for &d in &order {
        if ids[d].is_none() {
            let id = tracker.next_id;
            tracker.next_id += 1;
            tracker.tracks.push(Track {
                id,
                centroids: vec![(frame, detections[d])],
                missed: 0,
            });
            ids[d] = Some(id);
        }
    }
    tracker.frame += 1;
    Ok(ids.into_iter().map(|i| i.expect("every detection gets an id")).collect())
}

/// Labeled positions of one frame.
pub type FrameObjects = Vec<(u64, Vec3)>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotReport {
    pub mota: f64,
    pub idf1: f64,
    pub id_switches: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt_total: usize,
    pub matches: usize,
    pub idtp: usize,
}

impl MotReport {
    /// `1 − (FP + FN + IDs)/GT`, with an empty ground truth counted as one.
    pub fn mota_from_counts(&self) -> f64 {
        1.0 - (self.fp + self.fn_ + self.id_switches) as f64 / self.gt_total.max(1) as f64
    }
}

fn distance_matrix(a: &[(u64, Vec3)], b: &[(u64, Vec3)]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|(_, x)| b.iter().map(|(_, y)| (x - y).norm()).collect())
        .collect()
}

/// CLEAR-MOT counts with per-frame optimal matching, plus IDF1 from the
/// globally optimal identity mapping.
pub fn compute_mot(gt: &[FrameObjects], pred: &[FrameObjects], match_dist: f64) -> Result<MotReport> {
    if gt.len() != pred.len() {
        return Err(Error::validation(format!(
            "ground truth has {} frames, predictions {}",
            gt.len(),
            pred.len()
        )));
    }
    let mut r = MotReport::default();
    let mut last_match: BTreeMap<u64, u64> = BTreeMap::new();
    for (g, p) in gt.iter().zip(pred) {
        let pairs = assign(&distance_matrix(g, p), match_dist);
        r.gt_total += g.len();
        r.matches += pairs.len();
        r.fn_ += g.len() - pairs.len();
        r.fp += p.len() - pairs.len();
        for (gi, pi) in pairs {
            let (gid, pid) = (g[gi].0, p[pi].0);
            if let Some(prev) = last_match.insert(gid, pid) {
                if prev != pid {
                    r.id_switches += 1;
                }
            }
        }
    }
    r.mota = r.mota_from_counts();

    // identity-level co-occurrence counts
    let gt_ids: Vec<u64> = gt.iter().flatten().map(|o| o.0).collect::<BTreeSet<_>>().into_iter().collect();
    let pr_ids: Vec<u64> = pred.iter().flatten().map(|o| o.0).collect::<BTreeSet<_>>().into_iter().collect();
    let mut overlap = vec![vec![0usize; pr_ids.len()]; gt_ids.len()];
    for (g, p) in gt.iter().zip(pred) {
        for (gid, gx) in g {
            for (pid, px) in p {
                if (gx - px).norm() <= match_dist {
                    let gi = gt_ids.binary_search(gid).expect("collected id");
                    let pi = pr_ids.binary_search(pid).expect("collected id");
                    overlap[gi][pi] += 1;
                }
            }
        }
    }
    let max = overlap.iter().flatten().copied().max().unwrap_or(0) as f64;
    let cost: Vec<Vec<f64>> = overlap
        .iter()
        .map(|row| row.iter().map(|&c| max - c as f64).collect())
        .collect();
    r.idtp = assign(&cost, f64::INFINITY)
        .into_iter()
        .map(|(gi, pi)| overlap[gi][pi])
        .sum();
    let dets: usize = gt.iter().map(Vec::len).sum::<usize>() + pred.iter().map(Vec::len).sum::<usize>();
    r.idf1 = if dets == 0 { 1.0 } else { 2.0 * r.idtp as f64 / dets as f64 };
    Ok(r)
}

/// `frame,id,x,y,z` rows.
pub fn write_tracks_csv(path: &Path, frames: &[FrameObjects]) -> Result<()> {
    let mut s = String::from("frame,id,x,y,z\n");
    for (f, objs) in frames.iter().enumerate() {
        for (id, p) in objs {
            let _ = writeln!(s, "{f},{id},{:?},{:?},{:?}", p.x, p.y, p.z);
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads `frame,id,x,y,z` rows into `frames` per-frame lists.
pub fn read_tracks_csv(path: &Path, frames: usize) -> Result<Vec<FrameObjects>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Format {
        what: "track CSV",
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("frame,id,x,y,z") {
        return Err(bad("expected header frame,id,x,y,z".into()));
    }
    let mut out = vec![Vec::new(); frames];
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(bad(format!("expected 5 columns in {line:?}")));
        }
        let f: usize = cols[0].parse().map_err(|e| bad(format!("{e}")))?;
        let id: u64 = cols[1].parse().map_err(|e| bad(format!("{e}")))?;
        let xyz: Vec<f64> = cols[2..]
            .iter()
            .map(|v| v.parse().map_err(|e| bad(format!("{e}"))))
            .collect::<Result<_>>()?;
        if f >= frames {
            return Err(bad(format!("frame {f} beyond sequence length {frames}")));
        }
        out[f].push((id, Vec3::new(xyz[0], xyz[1], xyz[2])));
    }
    Ok(out)
}
