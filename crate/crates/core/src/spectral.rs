//! Normalised spectral clustering: `L = D^{-1/2} A D^{-1/2}`, the top-k
//! eigenvectors of `L` as an embedding, unit-length rows, then k-means.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::diag::Diag;
use faer::{Mat, Par};
use serde::{Deserialize, Serialize};

use crate::affinity::{AffinityMatrix, AffinityMethod, AffinityParams};
use crate::error::{Error, Result};
use crate::graph::DistanceMatrix;
use crate::kmeans::{kmeans, DEFAULT_RESTARTS};
use crate::matrix::Matrix;

/// Tolerated asymmetry of a matrix handed to the eigensolver.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Normalised affinity together with the rows whose degree was zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLaplacian {
    pub values: Matrix,
    /// Rows with zero total affinity; their rows and columns of `values` are 0.
    pub zero_degree: Vec<usize>,
}

pub fn normalized_laplacian(affinity: &AffinityMatrix) -> NormalizedLaplacian {
    let a = affinity.values();
    let n = a.rows();
    let inv_sqrt: Vec<f64> = a
        .row_iter()
        .map(|r| {
            let deg: f64 = r.iter().sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let zero_degree = (0..n).filter(|&i| inv_sqrt[i] == 0.0).collect();
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut v = a.get(i, j) * inv_sqrt[i] * inv_sqrt[j];
            // Subnormal entries stall the eigensolver's QR sweeps and carry no
            // usable information, so they are flushed to zero.
            if v < f64::MIN_POSITIVE {
                v = 0.0;
            }
            values.set(i, j, v);
            values.set(j, i, v);
        }
    }
    NormalizedLaplacian { values, zero_degree }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// n×k embedding with unit-length rows (flagged zero rows stay zero).
    pub rows: Matrix,
    /// The k largest eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Unit-norm eigenvectors as columns, before row normalisation.
    pub eigenvectors: Matrix,
    /// Rows that were exactly zero before normalisation.
    pub zero_rows: Vec<usize>,
}

/// Full symmetric eigendecomposition: eigenvalues ascending, eigenvectors as
/// the matching columns. Runs single-threaded so independent pipelines can be
/// parallelised by callers.
///
/// faer's solver occasionally fails to converge on nearly-empty affinities
/// with a huge dynamic range (tiny σ on unscaled data); those matrices are
/// handed to nalgebra's implicit-QR solver instead.
fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = m.rows();
    let a = Mat::<f64>::from_fn(n, n, |i, j| m.get(i, j));
    let mut u = Mat::<f64>::zeros(n, n);
    let mut s = Diag::<f64>::zeros(n);
    let par = Par::Seq;
    let scratch = evd::self_adjoint_evd_scratch::<f64>(n, ComputeEigenvectors::Yes, par, Default::default());
    let status = evd::self_adjoint_evd(
        a.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        par,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    );
    match status {
        Ok(()) => {
            let values = (0..n).map(|i| s.column_vector()[i]).collect();
            Ok((values, Matrix::from_fn(n, n, |i, j| u[(i, j)])))
        }
        Err(faer_err) => fallback_eigen(m).ok_or_else(|| Error::Eigen(format!("{faer_err:?}"))),
    }
}

fn fallback_eigen(m: &Matrix) -> Option<(Vec<f64>, Matrix)> {
    let n = m.rows();
    let dm = nalgebra::DMatrix::from_row_slice(n, n, m.as_slice());
    let eig = nalgebra::SymmetricEigen::try_new(dm, f64::EPSILON, 0)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&c| eig.eigenvalues[c]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Some((values, vectors))
}

/// The `k` eigenvectors of largest eigenvalue, each signed so that its
/// largest-magnitude entry is positive, followed by row normalisation.
pub fn top_k_eigenvectors(laplacian: &Matrix, k: usize) -> Result<SpectralEmbedding> {
    let n = laplacian.rows();
    if !laplacian.is_square() {
        return Err(Error::DimensionMismatch(format!("matrix is {:?}", laplacian.shape())));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k must lie in 1..={n}, got {k}")));
    }
    let asym = laplacian.max_asymmetry().unwrap_or(f64::INFINITY);
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::invalid(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    let (values, u) = symmetric_eigen(laplacian)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }

    let mut eigenvectors = Matrix::zeros(n, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for c in 0..k {
        let src = n - 1 - c;
        eigenvalues.push(values[src]);
        let mut pivot = 0;
        for i in 0..n {
            if u.get(i, src).abs() > u.get(pivot, src).abs() {
                pivot = i;
            }
        }
        let sign = if u.get(pivot, src) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors.set(i, c, sign * u.get(i, src));
        }
    }

    let mut rows = eigenvectors.clone();
    let mut zero_rows = Vec::new();
    for i in 0..n {
        let row = rows.row_mut(i);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        } else {
            zero_rows.push(i);
        }
    }
    Ok(SpectralEmbedding {
        rows,
        eigenvalues,
        eigenvectors,
        zero_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub labels: Vec<usize>,
    pub k: usize,
    /// k-means objective in the spectral embedding.
    pub kmeans_objective: f64,
    pub seed: u64,
    pub restarts_used: usize,
    pub method: AffinityMethod,
    pub params: AffinityParams,
    pub eigenvalues: Vec<f64>,
    /// Points with zero total affinity.
    pub degenerate: Vec<usize>,
    pub empty_cluster: bool,
}

impl ClusteringResult {
    /// Gives every degenerate point the label of its nearest
    /// non-degenerate point. No-op when every point is degenerate.
    pub fn reassign_degenerate(&mut self, distances: &DistanceMatrix) {
        if self.degenerate.is_empty() || self.degenerate.len() == self.labels.len() {
            return;
        }
        let mut is_degenerate = vec![false; self.labels.len()];
        self.degenerate.iter().for_each(|&i| is_degenerate[i] = true);
        let original = self.labels.clone();
        for &i in &self.degenerate {
            let nearest = (0..original.len())
                .filter(|&j| !is_degenerate[j])
                .min_by(|&a, &b| distances.get(i, a).total_cmp(&distances.get(i, b)))
                .expect("a non-degenerate point exists");
            self.labels[i] = original[nearest];
        }
    }
}

/// Laplacian, embedding and k-means in one call.
pub fn spectral_cluster(affinity: &AffinityMatrix, k: usize, config: SpectralConfig) -> Result<ClusteringResult> {
    let laplacian = normalized_laplacian(affinity);
    let embedding = top_k_eigenvectors(&laplacian.values, k)?;
    let km = kmeans(&embedding.rows, k, config.restarts, config.seed)?;
    Ok(ClusteringResult {
        labels: km.labels,
        k,
        kmeans_objective: km.objective,
        seed: config.seed,
        restarts_used: config.restarts,
        method: affinity.method,
        params: affinity.params,
        eigenvalues: embedding.eigenvalues,
        degenerate: laplacian.zero_degree,
        empty_cluster: km.empty_cluster,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn affinity(m: Matrix) -> AffinityMatrix {
        AffinityMatrix::precomputed(m, AffinityMethod::Composed, AffinityParams::default()).unwrap()
    }

    fn block_diagonal(sizes: &[usize]) -> Matrix {
        let n: usize = sizes.iter().sum();
        let mut block = vec![0; n];
        let mut start = 0;
        for (b, &s) in sizes.iter().enumerate() {
            block[start..start + s].iter_mut().for_each(|x| *x = b);
            start += s;
        }
        Matrix::from_fn(n, n, |i, j| if i != j && block[i] == block[j] { 1.0 } else { 0.0 })
    }

    #[test]
    fn laplacian_two_points() {
        let l = normalized_laplacian(&affinity(Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()));
        assert_eq!(l.values, Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap());
        assert!(l.zero_degree.is_empty());
    }

    #[test]
    fn laplacian_complete_graph() {
        let n = 5;
        let w = 0.3;
        let a = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w });
        let l = normalized_laplacian(&affinity(a));
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { 0.0 } else { 1.0 / (n - 1) as f64 };
                assert_abs_diff_eq!(l.values.get(i, j), expected, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn laplacian_keeps_blocks_and_flags_zero_rows() {
        let mut a = block_diagonal(&[3, 2]);
        // isolate node 4 entirely
        for j in 0..5 {
            a.set(4, j, 0.0);
            a.set(j, 4, 0.0);
        }
        let l = normalized_laplacian(&affinity(a));
        assert_eq!(l.values.get(0, 3), 0.0);
        assert_eq!(l.zero_degree, vec![3, 4]);
        assert!(l.values.row(4).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_eigenvector() {
        let e = top_k_eigenvectors(&Matrix::identity(4), 1).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], 1.0, epsilon = 1e-14);
        let col = e.eigenvectors.column(0);
        assert_abs_diff_eq!(col.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn block_rows_collapse() {
        let l = normalized_laplacian(&affinity(block_diagonal(&[3, 3])));
        let e = top_k_eigenvectors(&l.values, 2).unwrap();
        let cos = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        for block in [[0, 1, 2], [3, 4, 5]] {
            for &i in &block {
                for &j in &block {
                    assert!(cos(e.rows.row(i), e.rows.row(j)) >= 1.0 - 1e-6);
                }
            }
        }
        assert!(cos(e.rows.row(0), e.rows.row(3)).abs() < 1e-6);
        assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_bad_input() {
        let l = Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.0]]).unwrap();
        assert!(top_k_eigenvectors(&l, 1).is_err());
        assert!(top_k_eigenvectors(&Matrix::identity(2), 3).is_err());
        assert!(top_k_eigenvectors(&Matrix::identity(2), 0).is_err());
    }

    #[test]
    fn sign_convention() {
        let l = Matrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let e = top_k_eigenvectors(&l, 2).unwrap();
        assert_eq!(e.eigenvalues, vec![2.0, 1.0]);
        assert!(e.eigenvectors.get(0, 0) > 0.0 && e.eigenvectors.get(1, 1) > 0.0);
    }

    #[test]
    fn clusters_blocks() {
        let a = affinity(block_diagonal(&[3, 3, 3]));
        let r = spectral_cluster(&a, 3, SpectralConfig { restarts: 5, seed: 3 }).unwrap();
        for b in 0..3 {
            let l = r.labels[3 * b];
            assert!(r.labels[3 * b..3 * b + 3].iter().all(|&x| x == l));
        }
        let mut distinct = r.labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(distinct.len(), 3);

        let one = spectral_cluster(&a, 1, SpectralConfig::default()).unwrap();
        assert!(one.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn degenerate_points_follow_nearest_neighbour() {
        use crate::graph::pairwise_distances_of;
        let pts = Matrix::from_rows(&[[0.0], [0.1], [5.0], [5.1], [0.3]]).unwrap();
        let d = pairwise_distances_of(&pts);
        let mut a = block_diagonal(&[2, 2, 1]);
        a.set(4, 4, 0.0);
        let mut r = spectral_cluster(&affinity(a), 2, SpectralConfig { restarts: 4, seed: 1 }).unwrap();
        assert_eq!(r.degenerate, vec![4]);
        r.reassign_degenerate(&d);
        assert_eq!(r.labels[4], r.labels[0]);
        assert_ne!(r.labels[0], r.labels[2]);
    }
}
