//! Lloyd's k-means with random restarts, selected by mean silhouette.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<u32>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub silhouette: f64,
    /// Mean silhouette of every restart, in restart order.
    pub restart_silhouettes: Vec<f64>,
    pub best_restart: usize,
}

/// Labels, centroids, inertia and silhouette of one restart.
type Restart = (Vec<u32>, Vec<Vec<f64>>, f64, f64);

/// RNG for one restart; restarts are independent so they can run in any order.
fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

pub fn distinct_count(points: &[Vec<f64>]) -> usize {
    distinct_indices(points).len()
}

fn distinct_indices(points: &[Vec<f64>]) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    (0..points.len())
        .filter(|&i| seen.insert(points[i].iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
        .collect()
}

/// Runs `restarts` seeded k-means fits and keeps the one with the highest mean
/// silhouette; on equal silhouettes the earliest restart wins.
pub fn fit(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<KMeansFit> {
    if points.is_empty() {
        return Err(Error::KMeans("no points to cluster".into()));
    }
    if k == 0 {
        return Err(Error::KMeans("cluster count must be positive".into()));
    }
    if restarts == 0 {
        return Err(Error::KMeans("at least one restart is required".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::KMeans("points differ in dimension".into()));
    }
    let distinct = distinct_indices(points);
    if k > distinct.len() {
        return Err(Error::KMeans(format!(
            "{k} clusters requested but only {} distinct points",
            distinct.len()
        )));
    }

    let runs: Vec<Restart> = {
        let one = |r: usize| {
            let mut rng = restart_rng(seed, r);
            let init: Vec<Vec<f64>> = sample(&mut rng, distinct.len(), k)
                .into_iter()
                .map(|i| points[distinct[i]].clone())
                .collect();
            let (labels, centroids, inertia) = lloyd(points, init);
            let s = silhouette(points, &labels, k);
            (labels, centroids, inertia, s)
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..restarts).into_par_iter().map(one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..restarts).map(one).collect()
        }
    };

    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.3 > runs[best].3 {
            best = r;
        }
    }
    let restart_silhouettes = runs.iter().map(|r| r.3).collect();
    let (labels, centroids, inertia, silhouette) = runs.into_iter().nth(best).expect("restarts >= 1");
    Ok(KMeansFit {
        labels,
        centroids,
        inertia,
        silhouette,
        restart_silhouettes,
        best_restart: best,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best.1 {
            best = (c as u32, d);
        }
    }
    best
}

/// Lloyd iterations until assignments stop changing or the iteration cap is hit.
fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> (Vec<u32>, Vec<Vec<f64>>, f64) {
    let k = centroids.len();
    let dim = points[0].len();
    let mut labels: Vec<u32> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sizes[l as usize] += 1;
            for (s, x) in sums[l as usize].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
            }
        }
        // an emptied cluster takes over the point farthest from its centroid
        for c in 0..k {
            if sizes[c] == 0 {
                let far = (0..points.len())
                    .filter(|&i| sizes[labels[i] as usize] > 1)
                    .max_by(|&i, &j| {
                        let di = sq_dist(&points[i], &centroids[labels[i] as usize]);
                        let dj = sq_dist(&points[j], &centroids[labels[j] as usize]);
                        di.total_cmp(&dj).then(j.cmp(&i))
                    });
                if let Some(i) = far {
                    sizes[labels[i] as usize] -= 1;
                    centroids[c] = points[i].clone();
                    labels[i] = c as u32;
                    sizes[c] = 1;
                }
            }
        }
        let next: Vec<u32> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centroids[l as usize]))
        .sum();
    (labels, centroids, inertia)
}

/// Mean silhouette coefficient with Euclidean distance. Points in singleton
/// clusters contribute 0, and a clustering with fewer than two non-empty
/// clusters scores 0.
pub fn silhouette(points: &[Vec<f64>], labels: &[u32], k: usize) -> f64 {
    let n = points.len();
    if n == 0 {
        return 0.0;
    }
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l as usize] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return 0.0;
    }
    let coefficient = |i: usize| -> f64 {
        let own = labels[i] as usize;
        if sizes[own] <= 1 {
            return 0.0;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j] as usize] += sq_dist(&points[i], &points[j]).sqrt();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            (b - a) / denom
        } else {
            0.0
        }
    };
    #[cfg(feature = "parallel")]
    let total: f64 = {
        use rayon::prelude::*;
        // ordered collect keeps the summation order fixed
        let parts: Vec<f64> = (0..n).into_par_iter().map(coefficient).collect();
        parts.iter().sum()
    };
    #[cfg(not(feature = "parallel"))]
    let total: f64 = (0..n).map(coefficient).sum();
    total / n as f64
}
