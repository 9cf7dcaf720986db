use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::body::BodyState;
use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 50;

/// A constraint on anchor selection: pick `count` points from `members`,
/// each accepted by `admissible(candidate, already_picked_for_this_quota)`.
pub struct AnchorQuota<'a> {
    pub members: Vec<usize>,
    pub count: usize,
    pub admissible: Box<dyn Fn(usize, &[usize]) -> bool + 'a>,
}

/// Unconstrained PCA/max-volume anchor selection.
pub fn select_anchors_pca(samples: &[BodyState], k: usize, seed: u64) -> Result<Vec<usize>> {
    select_anchors_with_quotas(samples, k, seed, &[])
}

/// Picks `k` surface indices whose motion best spans the dominant
/// deformation modes across `samples`.
///
/// Per-point trajectories are centred and the top-k right singular vectors
/// over surface points are found through the small 3F×3F Gram matrix. Rows
/// are then chosen greedily by largest residual norm after projecting out
/// earlier picks (pivoted Gram–Schmidt, which maximises the determinant
/// volume one row at a time). Quotas are served first, in order.
pub fn select_anchors_with_quotas(
    samples: &[BodyState],
    k: usize,
    seed: u64,
    quotas: &[AnchorQuota<'_>],
) -> Result<Vec<usize>> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::validation(format!(
            "anchor selection needs at least {MIN_SAMPLES} pose samples, got {}",
            samples.len()
        )));
    }
    let s = samples[0].surface.len();
    if samples.iter().any(|b| b.surface.len() != s) {
        return Err(Error::validation("pose samples disagree on surface size"));
    }
    if k == 0 || k > s {
        return Err(Error::validation(format!("cannot select {k} anchors from {s} points")));
    }
    if quotas.iter().map(|q| q.count).sum::<usize>() > k {
        return Err(Error::validation("anchor quotas exceed the anchor budget"));
    }

    let rows = basis_rows(samples, k);
    let mut priority: Vec<usize> = (0..s).collect();
    priority.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rank = vec![0usize; s];
    for (r, &i) in priority.iter().enumerate() {
        rank[i] = r;
    }

    let mut greedy = Greedy {
        residual: rows,
        taken: vec![false; s],
        rank,
        picked: Vec::with_capacity(k),
    };
    for q in quotas {
        let mut mine: Vec<usize> = Vec::new();
        for _ in 0..q.count {
            let pool: Vec<usize> = q.members.iter().copied().filter(|&i| !greedy.taken[i]).collect();
            let ok: Vec<usize> = pool.iter().copied().filter(|&i| (q.admissible)(i, &mine)).collect();
            let choice = greedy.best(&ok).or_else(|| greedy.best(&pool));
            if let Some(i) = choice {
                greedy.take(i);
                mine.push(i);
            }
        }
    }
    let all: Vec<usize> = (0..s).collect();
    while greedy.picked.len() < k {
        let pool: Vec<usize> = all.iter().copied().filter(|&i| !greedy.taken[i]).collect();
        let i = greedy.best(&pool).expect("k <= surface count");
        greedy.take(i);
    }
    Ok(greedy.picked)
}

struct Greedy {
    residual: Vec<DVector<f64>>,
    taken: Vec<bool>,
    rank: Vec<usize>,
    picked: Vec<usize>,
}

impl Greedy {
    fn best(&self, pool: &[usize]) -> Option<usize> {
        pool.iter().copied().max_by(|&a, &b| {
            let (na, nb) = (self.residual[a].norm(), self.residual[b].norm());
            na.partial_cmp(&nb)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.rank[b].cmp(&self.rank[a]))
        })
    }

    fn take(&mut self, i: usize) {
        self.taken[i] = true;
        self.picked.push(i);
        let r = self.residual[i].clone();
        let n = r.norm();
        if n > 1e-12 {
            let q = r / n;
            for v in &mut self.residual {
                let c = v.dot(&q);
                v.axpy(-c, &q, 1.0);
            }
        }
    }
}

/// Rows of the top right singular vectors (one k-vector per surface point).
fn basis_rows(samples: &[BodyState], k: usize) -> Vec<DVector<f64>> {
    let f = samples.len();
    let s = samples[0].surface.len();
    let mut d = DMatrix::<f64>::zeros(3 * f, s);
    for i in 0..s {
        for c in 0..3 {
            let mean = samples.iter().map(|b| b.surface[i][c]).sum::<f64>() / f as f64;
            for (t, b) in samples.iter().enumerate() {
                d[(3 * t + c, i)] = b.surface[i][c] - mean;
            }
        }
    }
    let gram = &d * d.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let keep: Vec<usize> = order
        .into_iter()
        .take(k)
        .filter(|&i| eig.eigenvalues[i] > 1e-12 * top.max(1e-300))
        .collect();
    // v_i = Dᵀ u_i / σ_i
    let mut rows = vec![DVector::zeros(keep.len()); s];
    for (col, &e) in keep.iter().enumerate() {
        let u = eig.eigenvectors.column(e);
        let sigma = eig.eigenvalues[e].sqrt();
        let v = d.transpose() * u / sigma;
        for (i, row) in rows.iter_mut().enumerate() {
            row[col] = v[i];
        }
    }
    rows
}
