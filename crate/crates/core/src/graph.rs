//! Pairwise distances and the ε-neighbourhood graph.
//!
//! Two points are adjacent when their distance is at most ε. The graph is
//! undirected, unweighted and has no self-loops, so a node never belongs to
//! its own neighbourhood.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Supported point metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
}

/// Symmetric, zero-diagonal matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    d: Matrix,
    pub metric: Metric,
}

impl DistanceMatrix {
    /// Wraps a precomputed matrix after checking the distance invariants.
    pub fn from_matrix(d: Matrix) -> Result<Self> {
        if !d.is_square() {
            return Err(Error::DimensionMismatch(format!("distance matrix is {:?}", d.shape())));
        }
        for i in 0..d.rows() {
            if d.get(i, i) != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at {i}")));
            }
            for j in 0..d.cols() {
                let v = d.get(i, j);
                if !v.is_finite() || v < 0.0 || v != d.get(j, i) {
                    return Err(Error::invalid(format!("invalid distance at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            d,
            metric: Metric::Euclidean,
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d.get(i, j)
    }

    pub fn len(&self) -> usize {
        self.d.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.d.rows() == 0
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.d
    }

    /// Upper-triangle entries (i < j), row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.d.row(i)[i + 1..]);
        }
        out
    }

    pub fn permute(&self, perm: &[usize]) -> Self {
        Self {
            d: self.d.permute_symmetric(perm),
            metric: self.metric,
        }
    }
}

/// Euclidean distances between all rows of the dataset. Each pair is
/// computed once and mirrored, so the result is exactly symmetric.
pub fn pairwise_distances(dataset: &LabeledDataset) -> DistanceMatrix {
    pairwise_distances_of(dataset.points())
}

pub fn pairwise_distances_of(points: &Matrix) -> DistanceMatrix {
    let n = points.rows();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = points.row(i);
            ((i + 1)..n)
                .map(|j| {
                    a.iter()
                        .zip(points.row(j))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    let mut d = Matrix::zeros(n, n);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    DistanceMatrix {
        d,
        metric: Metric::Euclidean,
    }
}

/// The `q`-quantile (linear interpolation between order statistics) of the
/// off-diagonal distances.
pub fn suggest_epsilon(distances: &DistanceMatrix, quantile: f64) -> Result<f64> {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::invalid(format!("quantile must lie in (0, 1], got {quantile}")));
    }
    if distances.len() < 2 {
        return Err(Error::invalid("need at least two points to suggest epsilon"));
    }
    let mut values = distances.upper_triangle();
    values.sort_by(f64::total_cmp);
    let pos = quantile * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(values[lo] + (values[hi] - values[lo]) * frac)
}

/// Undirected, unweighted graph over point indices, stored both as packed
/// adjacency bitsets (for intersections) and as sorted neighbour lists.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    n: usize,
    words: usize,
    bits: Vec<u64>,
    neighbors: Vec<Vec<usize>>,
    epsilon: Option<f64>,
}

impl NeighborhoodGraph {
    fn empty(n: usize, epsilon: Option<f64>) -> Self {
        let words = n.div_ceil(64).max(1);
        Self {
            n,
            words,
            bits: vec![0; n * words],
            neighbors: vec![Vec::new(); n],
            epsilon,
        }
    }

    fn insert_edge(&mut self, i: usize, j: usize) {
        if i == j || self.has_edge(i, j) {
            return;
        }
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
        self.bits[j * self.words + i / 64] |= 1 << (i % 64);
        self.neighbors[i].push(j);
        self.neighbors[j].push(i);
    }

    fn finish(mut self) -> Self {
        for list in &mut self.neighbors {
            list.sort_unstable();
        }
        self
    }

    /// Builds a graph from an explicit edge list. Self-loops are dropped and
    /// duplicate edges collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n, None);
        for &(i, j) in edges {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, len: n });
                }
            }
            g.insert_edge(i, j);
        }
        Ok(g.finish())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// The ε the graph was built with, if it came from distances.
    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub(crate) fn row_bits(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    /// Sorted neighbour list of node `i` (excludes `i`).
    pub fn neighborhood(&self, i: usize) -> Result<&[usize]> {
        self.neighbors
            .get(i)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange { index: i, len: self.n })
    }

    #[inline]
    pub(crate) fn neighbors_unchecked(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Nodes with no neighbours.
    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.neighbors[i].is_empty()).collect()
    }

    /// `|ℵ(i) ∩ ℵ(j)|`, the number of nodes adjacent to both `i` and `j`.
    pub fn common_neighbors(&self, i: usize, j: usize) -> Result<usize> {
        for idx in [i, j] {
            if idx >= self.n {
                return Err(Error::IndexOutOfRange { index: idx, len: self.n });
            }
        }
        if i == j {
            return Err(Error::invalid("common_neighbors needs two distinct nodes"));
        }
        Ok(self.common_neighbors_unchecked(i, j))
    }

    #[inline]
    pub(crate) fn common_neighbors_unchecked(&self, i: usize, j: usize) -> usize {
        self.row_bits(i)
            .iter()
            .zip(self.row_bits(j))
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| if self.has_edge(i, j) { 1.0 } else { 0.0 })
    }
}

/// Connects every pair of distinct points at distance `<= epsilon`.
pub fn build_epsilon_graph(distances: &DistanceMatrix, epsilon: f64) -> Result<NeighborhoodGraph> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::invalid(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    let n = distances.len();
    let mut g = NeighborhoodGraph::empty(n, Some(epsilon));
    for i in 0..n {
        for j in (i + 1)..n {
            if distances.get(i, j) <= epsilon {
                g.insert_edge(i, j);
            }
        }
    }
    Ok(g.finish())
}

/// Free-function form of [`NeighborhoodGraph::neighborhood`].
pub fn neighborhood(graph: &NeighborhoodGraph, i: usize) -> Result<&[usize]> {
    graph.neighborhood(i)
}

/// Free-function form of [`NeighborhoodGraph::common_neighbors`].
pub fn common_neighbors(graph: &NeighborhoodGraph, i: usize, j: usize) -> Result<usize> {
    graph.common_neighbors(i, j)
}
