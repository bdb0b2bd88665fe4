//! k-means with k-means++ seeding and Lloyd iterations.
//!
//! Restarts run in parallel; restart `r` draws from ChaCha stream `r` of the
//! master seed, so the result does not depend on scheduling.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_MAX_ITERATIONS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// Sum of squared distances from each row to its centroid.
    pub objective: f64,
    pub centroids: Matrix,
    /// Index of the restart that produced this result.
    pub restart: usize,
    pub iterations: usize,
    /// Set when some cluster ended up with no members.
    pub empty_cluster: bool,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.row_iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = data.rows();
    let mut centroids = Matrix::zeros(k, data.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(data.row(first));
    let mut closest: Vec<f64> = data.row_iter().map(|r| sq_dist(r, data.row(first))).collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in closest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the running sum
            chosen.unwrap_or_else(|| closest.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(data.row(pick));
        for (i, slot) in closest.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(data.row(i), data.row(pick)));
        }
    }
    centroids
}

fn lloyd(data: &Matrix, mut centroids: Matrix, max_iterations: usize) -> (Vec<usize>, f64, Matrix, usize, bool) {
    let dim = data.cols();
    let k = centroids.rows();
    let assign = |centroids: &Matrix| -> (Vec<usize>, f64) {
        let mut objective = 0.0;
        let labels = data
            .row_iter()
            .map(|r| {
                let (c, d) = nearest(r, centroids);
                objective += d;
                c
            })
            .collect();
        (labels, objective)
    };
    let (mut labels, mut objective) = assign(&centroids);
    let mut iterations = 0;
    let mut empty = false;
    while iterations < max_iterations {
        iterations += 1;
        let mut sums = Matrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, x) in sums.row_mut(c).iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        empty = counts.contains(&0);
        for (c, &count) in counts.iter().enumerate() {
            // an empty cluster keeps its previous centroid
            if count > 0 {
                let inv = 1.0 / count as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        let (next, next_objective) = assign(&centroids);
        debug_assert!(
            next_objective <= objective * (1.0 + 1e-9) + 1e-12,
            "k-means objective increased: {objective} -> {next_objective}"
        );
        objective = next_objective;
        if next == labels {
            break;
        }
        labels = next;
    }
    (labels, objective, centroids, iterations, empty)
}

/// Runs `restarts` seeded k-means++/Lloyd runs over the rows of `data` and
/// keeps the lowest objective (ties go to the lowest restart index).
pub fn kmeans(data: &Matrix, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(data, k, restarts, seed, DEFAULT_MAX_ITERATIONS)
}

pub fn kmeans_with(
    data: &Matrix,
    k: usize,
    restarts: usize,
    seed: u64,
    max_iterations: usize,
) -> Result<KMeansResult> {
    let n = data.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k must lie in 1..={n}, got {k}")));
    }
    if restarts == 0 {
        return Err(Error::invalid("at least one k-means restart is required"));
    }
    let runs: Vec<KMeansResult> = (0..restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart as u64);
            let init = plus_plus_init(data, k, &mut rng);
            let (labels, objective, centroids, iterations, mut empty_cluster) = lloyd(data, init, max_iterations);
            let mut seen = vec![false; k];
            labels.iter().for_each(|&c| seen[c] = true);
            empty_cluster |= seen.contains(&false);
            KMeansResult {
                labels,
                objective,
                centroids,
                restart,
                iterations,
                empty_cluster,
            }
        })
        .collect();
    Ok(runs
        .into_iter()
        .reduce(|best, r| if r.objective < best.objective { r } else { best })
        .expect("at least one restart"))
}
