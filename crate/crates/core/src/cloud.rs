//! Point clouds: sampling, neighbours, clustering, scan simulation and file I/O.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::body::BodyState;
use crate::error::{Error, Result};
use crate::geom3::Vec3;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub frame: u64,
    pub view_id: Option<u32>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud {
            points,
            frame: 0,
            view_id: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vec3 = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }

    /// Same frame/view metadata with a subset of points, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            frame: self.frame,
            view_id: self.view_id,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.iter().any(|p| !p.iter().all(|x| x.is_finite())) {
            return Err(Error::validation("point cloud contains non-finite coordinates"));
        }
        Ok(())
    }
}

/// Virtual depth sensor placed at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    pub view_dir: Vec3,
    pub noise_sigma: f64,
    pub dropout: f64,
    pub density_ref_dist: f64,
    pub seed: u64,
    /// Drop points whose outward direction faces away from the sensor.
    #[serde(default = "default_true")]
    pub backface_culling: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            view_dir: Vec3::z(),
            noise_sigma: 0.0,
            dropout: 0.0,
            density_ref_dist: 10.0,
            seed: 0,
            backface_culling: true,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if (self.view_dir.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::validation("sensor view_dir must be a unit vector"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::validation("sensor dropout must lie in [0, 1)"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::validation("sensor noise_sigma must be >= 0"));
        }
        if !(self.density_ref_dist > 0.0) {
            return Err(Error::validation("sensor density_ref_dist must be > 0"));
        }
        Ok(())
    }
}

/// Indices chosen by greedy farthest point sampling, in selection order.
pub fn farthest_point_indices(points: &[Vec3], k: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::validation(format!(
            "farthest point sampling needs 1 <= k <= N, got k={k}, N={n}"
        )));
    }
    if start >= n {
        return Err(Error::validation("farthest point sampling start index out of range"));
    }
    let mut chosen = Vec::with_capacity(k);
    let mut dist = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut cur = start;
    for _ in 0..k {
        chosen.push(cur);
        taken[cur] = true;
        let p = points[cur];
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, q) in points.iter().enumerate() {
            let d = (q - p).norm_squared();
            if d < dist[i] {
                dist[i] = d;
            }
            if !taken[i] && dist[i] > best.0 {
                best = (dist[i], i);
            }
        }
        cur = best.1;
    }
    Ok(chosen)
}

pub fn farthest_point_sample(c: &PointCloud, k: usize, start: usize) -> Result<PointCloud> {
    Ok(c.select(&farthest_point_indices(&c.points, k, start)?))
}

/// Centres the cloud on its centroid. Scale is left untouched.
pub fn normalize(c: &PointCloud) -> Result<(PointCloud, Vec3)> {
    let centroid = c
        .centroid()
        .ok_or_else(|| Error::validation("cannot normalize an empty cloud"))?;
    let mut out = c.clone();
    for p in &mut out.points {
        *p -= centroid;
    }
    Ok((out, centroid))
}

/// Indices of the `k` nearest references for one query, ascending distance,
/// ties by lowest index.
pub fn knn_one(query: &Vec3, reference: &[Vec3], k: usize) -> Vec<usize> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, r) in reference.iter().enumerate() {
        let d = (r - query).norm_squared();
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, i));
        best.truncate(k);
    }
    best.into_iter().map(|(_, i)| i).collect()
}

/// Brute-force k nearest neighbours.
pub fn knn(query: &[Vec3], reference: &[Vec3], k: usize) -> Result<Vec<Vec<usize>>> {
    if k > reference.len() {
        return Err(Error::validation(format!(
            "knn asked for {k} neighbours among {} references",
            reference.len()
        )));
    }
    if k == 0 {
        return Ok(vec![Vec::new(); query.len()]);
    }
    Ok(query.iter().map(|q| knn_one(q, reference, k)).collect())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as the representative
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the radius graph as index lists, each ascending,
/// ordered by their lowest index. Components smaller than `min_pts` are dropped.
pub fn euclidean_cluster_indices(points: &[Vec3], radius: f64, min_pts: usize) -> Result<Vec<Vec<usize>>> {
    if !(radius > 0.0) {
        return Err(Error::validation("cluster radius must be positive"));
    }
    let cell = |p: &Vec3| -> (i64, i64, i64) {
        (
            (p.x / radius).floor() as i64,
            (p.y / radius).floor() as i64,
            (p.z / radius).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let r2 = radius * radius;
    let mut uf = UnionFind::new(points.len());
    for (i, p) in points.iter().enumerate() {
        let (cx, cy, cz) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &j in bucket {
                            if j > i && (points[j] - p).norm_squared() <= r2 {
                                uf.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..points.len() {
        let root = uf.find(i);
        let g = *slot.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups.retain(|g| g.len() >= min_pts);
    Ok(groups)
}

pub fn euclidean_cluster(c: &PointCloud, radius: f64, min_pts: usize) -> Result<Vec<PointCloud>> {
    Ok(euclidean_cluster_indices(&c.points, radius, min_pts)?
        .iter()
        .map(|g| c.select(g))
        .collect())
}

/// Synthesises a depth scan of a posed body.
///
/// `surface_joint` binds each surface point to a joint; the outward direction
/// used for culling is the point minus its joint.
pub fn simulate_scan(
    body: &BodyState,
    surface_joint: &[usize],
    sensor: &SensorModel,
    target_count: usize,
) -> Result<PointCloud> {
    sensor.validate()?;
    if target_count == 0 {
        return Err(Error::validation("target_count must be at least 1"));
    }
    if surface_joint.len() != body.surface.len() {
        return Err(Error::validation("surface_joint length differs from the surface"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sensor.seed);
    let facing: Vec<Vec3> = body
        .surface
        .iter()
        .zip(surface_joint)
        .filter(|(p, &j)| {
            !sensor.backface_culling || (*p - body.joints[j]).dot(&(-sensor.view_dir)) >= 0.0
        })
        .map(|(p, _)| *p)
        .collect();
    if facing.is_empty() {
        return Ok(PointCloud::default());
    }
    let centroid: Vec3 = facing.iter().sum::<Vec3>() / facing.len() as f64;
    let dist = centroid.norm();
    let keep = if dist > 0.0 {
        (sensor.density_ref_dist / dist).powi(2).min(1.0)
    } else {
        1.0
    };
    let noise = Normal::new(0.0, sensor.noise_sigma.max(0.0))
        .map_err(|e| Error::validation(format!("invalid noise model: {e}")))?;
    let mut points = Vec::with_capacity(facing.len());
    for p in facing {
        if keep < 1.0 && rng.random::<f64>() >= keep {
            continue;
        }
        let jitter = if sensor.noise_sigma > 0.0 {
            Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
        } else {
            Vec3::zeros()
        };
        if sensor.dropout > 0.0 && rng.random::<f64>() < sensor.dropout {
            continue;
        }
        points.push(p + jitter);
    }
    let cloud = PointCloud::new(points);
    if cloud.len() > target_count {
        farthest_point_sample(&cloud, target_count, 0)
    } else {
        Ok(cloud)
    }
}

/// Indices that survive removing `round(ratio·N)` uniformly chosen points,
/// ascending.
pub fn occlusion_keep_indices(n: usize, ratio: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::validation("occlusion ratio must lie in [0, 1]"));
    }
    let remove = (ratio * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep: Vec<usize> = order[remove.min(n)..].to_vec();
    keep.sort_unstable();
    Ok(keep)
}

/// Removes `round(ratio·N)` uniformly chosen points; survivors keep their order.
pub fn occlude(c: &PointCloud, ratio: f64, seed: u64) -> Result<PointCloud> {
    Ok(c.select(&occlusion_keep_indices(c.len(), ratio, seed)?))
}

/// `frame_000042.ply`-style file name.
pub fn frame_file_name(frame: u64, ext: &str) -> String {
    format!("frame_{frame:06}.{ext}")
}

/// Parses the frame index out of a `frame_%06d.*` file name.
pub fn frame_from_file_name(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    stem.strip_prefix("frame_")?.parse().ok()
}

/// `{:?}` on f64 prints the shortest string that round-trips exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_ply(path: &Path, c: &PointCloud) -> Result<()> {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", c.len());
    s.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in &c.points {
        let _ = writeln!(s, "{} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Format {
        what: "PLY",
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing 'ply' magic".into()));
    }
    let mut count = None;
    let mut props = Vec::new();
    loop {
        let line = lines.next().ok_or_else(|| bad("unterminated header".into()))?.trim();
        if line == "end_header" {
            break;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", fmt, ..] if *fmt != "ascii" => {
                return Err(bad(format!("unsupported format {fmt}")));
            }
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|e| bad(e.to_string()))?);
            }
            ["property", _, name] => props.push(name.to_string()),
            _ => {}
        }
    }
    let count = count.ok_or_else(|| bad("no vertex element".into()))?;
    let idx = |name: &str| {
        props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| bad(format!("missing property {name}")))
    };
    let (ix, iy, iz) = (idx("x")?, idx("y")?, idx("z")?);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.next().ok_or_else(|| bad("fewer vertices than declared".into()))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_>>()?;
        if vals.len() < props.len() {
            return Err(bad("short vertex row".into()));
        }
        points.push(Vec3::new(vals[ix], vals[iy], vals[iz]));
    }
    let c = PointCloud {
        points,
        frame: frame_from_file_name(path).unwrap_or(0),
        view_id: None,
    };
    c.validate()?;
    Ok(c)
}

pub fn write_csv(path: &Path, c: &PointCloud) -> Result<()> {
    let mut s = String::from("x,y,z\n");
    for p in &c.points {
        let _ = writeln!(s, "{},{},{}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Format {
        what: "point CSV",
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("x,y,z") {
        return Err(bad("expected header x,y,z".into()));
    }
    let mut points = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(bad(format!("expected 3 columns, got {}", vals.len())));
        }
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
    }
    let c = PointCloud {
        points,
        frame: frame_from_file_name(path).unwrap_or(0),
        view_id: None,
    };
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::new(xs.iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect())
    }

    #[test]
    fn fps_full_and_line() {
        let c = line(&[0.0, 1.0, 2.0, 9.0]);
        assert_eq!(farthest_point_indices(&c.points, 4, 2).unwrap().len(), 4);
        assert_eq!(farthest_point_indices(&c.points, 2, 0).unwrap(), vec![0, 3]);
        assert!(farthest_point_sample(&c, 5, 0).is_err());
    }

    #[test]
    fn fps_square_skips_centre() {
        let c = PointCloud::new(vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.5, 0.5, 0.0),
        ]);
        let idx = farthest_point_indices(&c.points, 3, 0).unwrap();
        assert_eq!(idx, vec![0, 3, 1]);
    }

    #[test]
    fn normalize_examples() {
        let (c, centroid) = normalize(&PointCloud::new(vec![Vec3::new(1.0, 2.0, 3.0)])).unwrap();
        assert_eq!(c.points[0], Vec3::zeros());
        assert_eq!(centroid, Vec3::new(1.0, 2.0, 3.0));
        assert!(normalize(&PointCloud::default()).is_err());
        let c = line(&[0.3, 1.7, -4.0]);
        let (n1, _) = normalize(&c).unwrap();
        let (n2, shift) = normalize(&n1).unwrap();
        assert!(shift.norm() < 1e-12);
        assert!(n2.centroid().unwrap().norm() < 1e-12);
    }

    #[test]
    fn knn_examples() {
        let r = line(&[0.0, 1.0, 3.0]).points;
        assert_eq!(knn(&[Vec3::new(0.9, 0.0, 0.0)], &r, 2).unwrap(), vec![vec![1, 0]]);
        assert_eq!(knn(&[r[2]], &r, 1).unwrap(), vec![vec![2]]);
        assert!(knn(&[r[0]], &r, 4).is_err());
        // tie → lowest index
        assert_eq!(knn(&[Vec3::new(0.5, 0.0, 0.0)], &r, 1).unwrap(), vec![vec![0]]);
    }

    #[test]
    fn clusters_split_and_chain() {
        let mut pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64 * 0.1, 0.0, 0.0)).collect();
        pts.extend((0..10).map(|i| Vec3::new(10.0 + i as f64 * 0.1, 0.0, 0.0)));
        let c = PointCloud::new(pts);
        assert_eq!(euclidean_cluster(&c, 0.5, 1).unwrap().len(), 2);
        let chain = line(&[0.0, 0.4, 0.8, 1.2, 1.6]);
        assert_eq!(euclidean_cluster(&chain, 0.45, 1).unwrap().len(), 1);
        assert!(euclidean_cluster(&chain, 0.0, 1).is_err());
    }

    #[test]
    fn occlude_counts() {
        let c = line(&(0..100).map(f64::from).collect::<Vec<_>>());
        assert_eq!(occlude(&c, 0.0, 1).unwrap(), c);
        let half = occlude(&c, 0.5, 1).unwrap();
        assert_eq!(half.len(), 50);
        assert!(half.points.iter().all(|p| c.points.contains(p)));
        let c = line(&(0..256).map(f64::from).collect::<Vec<_>>());
        assert_eq!(occlude(&c, 0.9, 4).unwrap().len(), 26);
        assert!(occlude(&c, 1.5, 4).is_err());
    }

    #[test]
    fn ply_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = PointCloud {
            points: vec![Vec3::new(0.1, -2.5e-7, 3.0), Vec3::new(1.0 / 3.0, 2.0, -1.0)],
            frame: 12,
            view_id: None,
        };
        let ply = dir.path().join(frame_file_name(12, "ply"));
        write_ply(&ply, &c).unwrap();
        assert_eq!(read_ply(&ply).unwrap(), c);
        let csv = dir.path().join(frame_file_name(12, "csv"));
        write_csv(&csv, &c).unwrap();
        assert_eq!(read_csv(&csv).unwrap(), c);
    }

    #[test]
    fn malformed_ply_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.ply");
        std::fs::write(&p, "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nend_header\n1\n").unwrap();
        assert!(matches!(read_ply(&p), Err(Error::Format { .. })));
    }
}
