use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng as _;

use crate::rng::Rng;

pub const MAX_LLOYD_ITERATIONS: usize = 300;
/// Independent k-means++ starts; the lowest final inertia wins.
pub const N_RESTARTS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansFit {
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    /// Inertia after each Lloyd iteration (non-increasing).
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansFit {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().unwrap_or(&0.0)
    }
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the centroid closest to `point`.
pub fn nearest(centroids: ArrayView2<'_, f64>, point: ArrayView1<'_, f64>) -> (usize, f64) {
    centroids
        .outer_iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(c, point)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one centroid")
}

/// k-means++ seeding: first center uniform, the rest proportional to squared
/// distance from the nearest chosen center.
fn plus_plus_init(data: ArrayView2<'_, f64>, k: usize, rng: &mut Rng) -> Array2<f64> {
    let n = data.nrows();
    let mut centroids = Array2::zeros((k, data.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&data.row(first));
    let mut d2: Vec<f64> = data.outer_iter().map(|p| sq_dist(p, data.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&data.row(pick));
        for (i, p) in data.outer_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, data.row(pick)));
        }
    }
    centroids
}

/// Best of [`N_RESTARTS`] runs of Lloyd's algorithm, each from a k-means++
/// start. A run stops at an assignment fixpoint or after
/// [`MAX_LLOYD_ITERATIONS`]. A cluster that empties is re-seeded at the point
/// farthest from its current centroid.
pub fn kmeans_fit(data: ArrayView2<'_, f64>, k: usize, rng: &mut Rng) -> KMeansFit {
    let (n, _) = data.dim();
    assert!(k >= 1, "k must be positive");
    assert!(n >= k, "need at least k = {k} points, got {n}");
    let mut best: Option<KMeansFit> = None;
    for _ in 0..N_RESTARTS {
        let fit = lloyd(data, k, rng);
        if best.as_ref().is_none_or(|b| fit.inertia() < b.inertia()) {
            best = Some(fit);
        }
    }
    best.expect("at least one restart")
}

fn lloyd(data: ArrayView2<'_, f64>, k: usize, rng: &mut Rng) -> KMeansFit {
    let (n, d) = data.dim();
    let mut centroids = plus_plus_init(data, k, rng);
    let mut assignments = vec![usize::MAX; n];
    let mut inertia_history = Vec::new();
    let mut iterations = 0;
    for _ in 0..MAX_LLOYD_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        let mut dist = vec![0.0; n];
        for (i, p) in data.outer_iter().enumerate() {
            let (c, d2) = nearest(centroids.view(), p);
            dist[i] = d2;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, p) in data.outer_iter().enumerate() {
            let c = assignments[i];
            counts[c] += 1;
            let mut row = sums.row_mut(c);
            row += &p;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]))
                    .expect("non-empty data");
                centroids.row_mut(c).assign(&data.row(far));
                dist[far] = 0.0;
                assignments[far] = c;
                changed = true;
            } else {
                let mean = sums.row(c).mapv(|v| v / counts[c] as f64);
                centroids.row_mut(c).assign(&mean);
            }
        }
        let inertia: f64 = data
            .outer_iter()
            .zip(&assignments)
            .map(|(p, &c)| sq_dist(p, centroids.row(c)))
            .sum();
        inertia_history.push(inertia);
        if !changed {
            break;
        }
    }
    KMeansFit {
        centroids,
        assignments,
        inertia_history,
        iterations,
    }
}
