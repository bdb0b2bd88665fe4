//! Topological node features: degree, clustering count and the Summation
//! Index (SI) vector, plus the structural distance between SI vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NeighborhoodGraph;

/// Number of SI iterations kept per node by default (SI₁, SI₂, SI₃).
pub const DEFAULT_SI_DEPTH: usize = 3;

/// How the per-node clustering count φ is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhiMode {
    /// Neighbours of `p` that are adjacent to at least one other neighbour of `p`.
    #[default]
    Nodes,
    /// Edges among the neighbours of `p` (triangles through `p`).
    Edges,
}

impl std::str::FromStr for PhiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nodes" => Ok(Self::Nodes),
            "edges" => Ok(Self::Edges),
            other => Err(Error::invalid(format!("unknown phi mode {other:?}"))),
        }
    }
}

/// Per-node SI values, `depth` columns: column `c` holds SI_{c+1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummationIndex {
    n: usize,
    depth: usize,
    values: Vec<u64>,
}

impl SummationIndex {
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let depth = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != depth) {
            return Err(Error::DimensionMismatch("ragged SI rows".into()));
        }
        Ok(Self {
            n: rows.len(),
            depth,
            values: rows.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.values[i * self.depth..(i + 1) * self.depth]
    }

    /// SI_{iteration}, for `1 <= iteration <= depth`.
    pub fn iteration(&self, iteration: usize) -> Vec<u64> {
        assert!((1..=self.depth).contains(&iteration));
        (0..self.n).map(|i| self.row(i)[iteration - 1]).collect()
    }
}

/// The full feature profile of every node of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TnfProfile {
    pub degree: Vec<usize>,
    pub phi: Vec<usize>,
    pub si: SummationIndex,
    pub phi_mode: PhiMode,
}

impl TnfProfile {
    pub fn compute(graph: &NeighborhoodGraph, phi_mode: PhiMode, depth: usize) -> Result<Self> {
        Ok(Self {
            degree: degrees(graph),
            phi: clustering_counts(graph, phi_mode),
            si: summation_index(graph, depth)?,
            phi_mode,
        })
    }

    pub fn len(&self) -> usize {
        self.degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degree.is_empty()
    }

    /// `|φ_i − φ_j|`.
    #[inline]
    pub fn phi_gap(&self, i: usize, j: usize) -> usize {
        self.phi[i].abs_diff(self.phi[j])
    }
}

pub fn degrees(graph: &NeighborhoodGraph) -> Vec<usize> {
    (0..graph.len()).map(|i| graph.degree(i)).collect()
}

/// Local density count φ for every node, in the requested mode.
pub fn clustering_counts(graph: &NeighborhoodGraph, mode: PhiMode) -> Vec<usize> {
    (0..graph.len())
        .map(|i| {
            let links = graph
                .neighbors_unchecked(i)
                .iter()
                .map(|&u| graph.common_neighbors_unchecked(i, u));
            match mode {
                PhiMode::Nodes => links.filter(|&c| c > 0).count(),
                // each internal edge is seen from both endpoints
                PhiMode::Edges => links.sum::<usize>() / 2,
            }
        })
        .collect()
}

/// Iterated neighbour sums seeded with the degree: SI₀ = degree and
/// SI_i(v) = Σ_{u ~ v} SI_{i−1}(u). Returns SI₁ … SI_depth.
pub fn summation_index(graph: &NeighborhoodGraph, depth: usize) -> Result<SummationIndex> {
    if depth == 0 {
        return Err(Error::invalid("summation index depth must be at least 1"));
    }
    let n = graph.len();
    let mut current: Vec<u64> = (0..n).map(|i| graph.degree(i) as u64).collect();
    let mut values = vec![0u64; n * depth];
    for iteration in 1..=depth {
        let mut next = vec![0u64; n];
        for (v, slot) in next.iter_mut().enumerate() {
            let mut acc = 0u64;
            for &u in graph.neighbors_unchecked(v) {
                acc = acc.checked_add(current[u]).ok_or(Error::Overflow { iteration })?;
            }
            *slot = acc;
        }
        for (v, &x) in next.iter().enumerate() {
            values[v * depth + iteration - 1] = x;
        }
        current = next;
    }
    Ok(SummationIndex { n, depth, values })
}

/// Euclidean distance between the SI vectors of nodes `i` and `j`.
pub fn si_distance(si: &SummationIndex, i: usize, j: usize) -> Result<f64> {
    for idx in [i, j] {
        if idx >= si.len() {
            return Err(Error::IndexOutOfRange { index: idx, len: si.len() });
        }
    }
    Ok(si_distance_unchecked(si, i, j))
}

#[inline]
pub(crate) fn si_distance_unchecked(si: &SummationIndex, i: usize, j: usize) -> f64 {
    si.row(i)
        .iter()
        .zip(si.row(j))
        .map(|(&a, &b)| {
            let diff = a.abs_diff(b) as f64;
            diff * diff
        })
        .sum::<f64>()
        .sqrt()
}
