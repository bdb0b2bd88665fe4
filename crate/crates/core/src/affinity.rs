//! Affinity matrices: the Gaussian, common-nearest-neighbour and
//! self-tuning baselines, the two topological-feature affinities (TNF1 and
//! TNF2), and elementwise composition with user kernels.
//!
//! Every builder fills the upper triangle and mirrors it, so outputs are
//! exactly symmetric, and every diagonal is zero.
//!
//! Note on TNF1: the density gap `δ_ij = |φ_i − φ_j|` multiplies the squared
//! distance inside the exponential. When two nodes have equal φ the
//! exponential is exactly 1, the distance drops out, and the affinity equals
//! the common-neighbour count `η_ij`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DistanceMatrix, NeighborhoodGraph};
use crate::matrix::Matrix;
use crate::tnf::{si_distance_unchecked, TnfProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffinityMethod {
    Gaussian,
    Cnn,
    SelfTuning,
    Tnf1,
    Tnf2,
    Composed,
}

impl AffinityMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Cnn => "cnn",
            Self::SelfTuning => "self-tuning",
            Self::Tnf1 => "tnf1",
            Self::Tnf2 => "tnf2",
            Self::Composed => "composed",
        }
    }

    /// Whether the method consumes the ε-graph.
    pub fn needs_graph(self) -> bool {
        matches!(self, Self::Cnn | Self::Tnf1 | Self::Tnf2)
    }

    /// Whether the method has a global Gaussian width to sweep.
    pub fn uses_sigma(self) -> bool {
        !matches!(self, Self::SelfTuning)
    }
}

impl std::fmt::Display for AffinityMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AffinityMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "cnn" => Ok(Self::Cnn),
            "self-tuning" | "st" => Ok(Self::SelfTuning),
            "tnf1" => Ok(Self::Tnf1),
            "tnf2" => Ok(Self::Tnf2),
            "composed" => Ok(Self::Composed),
            other => Err(Error::invalid(format!("unknown affinity method {other:?}"))),
        }
    }
}

/// Parameters an affinity was built with.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AffinityParams {
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    /// Neighbour rank used for local scales (self-tuning).
    pub neighbor_rank: Option<usize>,
}

/// Logarithm base of the structural-similarity factor in TNF2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    E,
    Ten,
    Two,
}

impl LogBase {
    #[inline]
    pub fn log(self, x: f64) -> f64 {
        match self {
            Self::E => x.ln(),
            Self::Ten => x.log10(),
            Self::Two => x.log2(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" | "ln" => Ok(Self::E),
            "10" | "ten" => Ok(Self::Ten),
            "2" | "two" => Ok(Self::Two),
            other => Err(Error::invalid(format!("unknown log base {other:?}"))),
        }
    }
}

/// Knobs of the topological-feature affinities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TnfOptions {
    /// Use `η + 1` instead of `η`, so pairs without common neighbours keep
    /// a nonzero affinity.
    pub eta_smoothing: bool,
    pub log_base: LogBase,
}

/// Symmetric, nonnegative, zero-diagonal affinity matrix with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    values: Matrix,
    pub method: AffinityMethod,
    pub params: AffinityParams,
}

impl AffinityMatrix {
    /// Wraps a user-provided matrix, checking the affinity invariants.
    pub fn precomputed(values: Matrix, method: AffinityMethod, params: AffinityParams) -> Result<Self> {
        let a = Self {
            values,
            method,
            params,
        };
        a.check_invariants()?;
        Ok(a)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Symmetric, finite, nonnegative, zero diagonal.
    pub fn check_invariants(&self) -> Result<()> {
        let a = &self.values;
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!("affinity is {:?}", a.shape())));
        }
        for i in 0..a.rows() {
            if a.get(i, i) != 0.0 {
                return Err(Error::invalid(format!("nonzero affinity diagonal at {i}")));
            }
            for j in 0..a.cols() {
                let v = a.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid(format!("affinity ({i}, {j}) = {v}")));
                }
                if v != a.get(j, i) {
                    return Err(Error::invalid(format!("affinity asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }
}

/// Fills an n×n matrix from `f(i, j)` over `i < j` and mirrors it; the
/// diagonal stays zero.
fn symmetric_from_fn(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Matrix {
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| f(i, j)).collect())
        .collect();
    let mut m = Matrix::zeros(n, n);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("sigma must be positive and finite, got {sigma}")))
    }
}

fn check_same_size(distances: &DistanceMatrix, graph: &NeighborhoodGraph) -> Result<()> {
    if distances.len() != graph.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points in distances, {} nodes in graph",
            distances.len(),
            graph.len()
        )));
    }
    Ok(())
}

/// `exp(−d² / 2σ²)` off the diagonal.
pub fn gaussian_affinity(distances: &DistanceMatrix, sigma: f64) -> Result<AffinityMatrix> {
    check_sigma(sigma)?;
    let two_sigma_sq = 2.0 * sigma * sigma;
    let values = symmetric_from_fn(distances.len(), |i, j| {
        let d = distances.get(i, j);
        (-d * d / two_sigma_sq).exp()
    });
    Ok(AffinityMatrix {
        values,
        method: AffinityMethod::Gaussian,
        params: AffinityParams {
            sigma: Some(sigma),
            ..Default::default()
        },
    })
}

/// Gaussian affinity whose width is stretched by the number of common
/// neighbours: `exp(−d² / (2σ²·(CNN + 1)))`.
pub fn cnn_affinity(distances: &DistanceMatrix, graph: &NeighborhoodGraph, sigma: f64) -> Result<AffinityMatrix> {
    check_sigma(sigma)?;
    check_same_size(distances, graph)?;
    let two_sigma_sq = 2.0 * sigma * sigma;
    let values = symmetric_from_fn(distances.len(), |i, j| {
        let d = distances.get(i, j);
        let shared = graph.common_neighbors_unchecked(i, j) as f64;
        (-d * d / (two_sigma_sq * (shared + 1.0))).exp()
    });
    Ok(AffinityMatrix {
        values,
        method: AffinityMethod::Cnn,
        params: AffinityParams {
            sigma: Some(sigma),
            epsilon: graph.epsilon(),
            ..Default::default()
        },
    })
}

/// Distance from every point to its `rank`-th nearest other point.
pub fn local_scales(distances: &DistanceMatrix, rank: usize) -> Result<Vec<f64>> {
    let n = distances.len();
    if rank == 0 || rank >= n {
        return Err(Error::invalid(format!(
            "neighbour rank must lie in 1..{n}, got {rank}"
        )));
    }
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| distances.get(i, j)).collect();
            let (_, kth, _) = row.select_nth_unstable_by(rank - 1, f64::total_cmp);
            let scale = *kth;
            if scale > 0.0 {
                Ok(scale)
            } else {
                Err(Error::ZeroLocalScale { index: i, k: rank })
            }
        })
        .collect()
}

/// Locally scaled affinity `exp(−d² / (σ_i σ_j))` where σ_i is the distance
/// from `i` to its `rank`-th nearest neighbour.
pub fn self_tuning_affinity(distances: &DistanceMatrix, rank: usize) -> Result<AffinityMatrix> {
    let scales = local_scales(distances, rank)?;
    let values = symmetric_from_fn(distances.len(), |i, j| {
        let d = distances.get(i, j);
        (-d * d / (scales[i] * scales[j])).exp()
    });
    Ok(AffinityMatrix {
        values,
        method: AffinityMethod::SelfTuning,
        params: AffinityParams {
            neighbor_rank: Some(rank),
            ..Default::default()
        },
    })
}

/// Pairwise quantities of the topological-feature affinities that do not
/// depend on σ. Building this once lets a σ sweep evaluate TNF1/TNF2 with a
/// single exponential per pair.
#[derive(Debug, Clone)]
pub struct TnfPairTerms {
    n: usize,
    /// τ²·δ per upper-triangle pair.
    scaled_sq_dist: Vec<f64>,
    /// η (or η + 1 when smoothing) per upper-triangle pair.
    eta: Vec<f64>,
    /// 1 + 1 / (1 + log(1 + ζ)) per upper-triangle pair.
    structural: Vec<f64>,
    epsilon: Option<f64>,
}

impl TnfPairTerms {
    pub fn new(
        distances: &DistanceMatrix,
        graph: &NeighborhoodGraph,
        tnf: &TnfProfile,
        options: TnfOptions,
    ) -> Result<Self> {
        check_same_size(distances, graph)?;
        let n = distances.len();
        if tnf.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {n} points",
                tnf.len()
            )));
        }
        let rows: Vec<Vec<(f64, f64, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                ((i + 1)..n)
                    .map(|j| {
                        let tau = distances.get(i, j);
                        let delta = tnf.phi_gap(i, j) as f64;
                        let mut eta = graph.common_neighbors_unchecked(i, j) as f64;
                        if options.eta_smoothing {
                            eta += 1.0;
                        }
                        let zeta = si_distance_unchecked(&tnf.si, i, j);
                        (tau * tau * delta, eta, structural_factor(zeta, options.log_base))
                    })
                    .collect()
            })
            .collect();
        let pairs = n * n.saturating_sub(1) / 2;
        let mut terms = Self {
            n,
            scaled_sq_dist: Vec::with_capacity(pairs),
            eta: Vec::with_capacity(pairs),
            structural: Vec::with_capacity(pairs),
            epsilon: graph.epsilon(),
        };
        for (a, b, c) in rows.into_iter().flatten() {
            terms.scaled_sq_dist.push(a);
            terms.eta.push(b);
            terms.structural.push(c);
        }
        Ok(terms)
    }

    fn fill(&self, sigma: f64, with_structure: bool) -> Matrix {
        let two_sigma_sq = 2.0 * sigma * sigma;
        let mut m = Matrix::zeros(self.n, self.n);
        let mut p = 0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let eta = self.eta[p];
                let mut v = if eta == 0.0 {
                    0.0
                } else {
                    (-self.scaled_sq_dist[p] / two_sigma_sq).exp() * eta
                };
                if with_structure {
                    v *= self.structural[p];
                }
                m.set(i, j, v);
                m.set(j, i, v);
                p += 1;
            }
        }
        m
    }

    fn params(&self, sigma: f64) -> AffinityParams {
        AffinityParams {
            sigma: Some(sigma),
            epsilon: self.epsilon,
            neighbor_rank: None,
        }
    }

    /// β = exp(−τ²δ / 2σ²)·η.
    pub fn tnf1(&self, sigma: f64) -> Result<AffinityMatrix> {
        check_sigma(sigma)?;
        Ok(AffinityMatrix {
            values: self.fill(sigma, false),
            method: AffinityMethod::Tnf1,
            params: self.params(sigma),
        })
    }

    /// β scaled by the structural-similarity factor.
    pub fn tnf2(&self, sigma: f64) -> Result<AffinityMatrix> {
        check_sigma(sigma)?;
        Ok(AffinityMatrix {
            values: self.fill(sigma, true),
            method: AffinityMethod::Tnf2,
            params: self.params(sigma),
        })
    }
}

/// `1 + 1 / (1 + log(1 + ζ))`, which lies in `(1, 2]` for `ζ >= 0`.
#[inline]
pub fn structural_factor(zeta: f64, base: LogBase) -> f64 {
    1.0 + 1.0 / (1.0 + base.log(1.0 + zeta))
}

/// Density- and common-neighbour-weighted affinity (TNF1):
/// `β_ij = exp(−τ_ij²·δ_ij / 2σ²)·η_ij`.
pub fn tnf1_affinity(
    distances: &DistanceMatrix,
    graph: &NeighborhoodGraph,
    tnf: &TnfProfile,
    sigma: f64,
) -> Result<AffinityMatrix> {
    tnf1_affinity_with(distances, graph, tnf, sigma, TnfOptions::default())
}

pub fn tnf1_affinity_with(
    distances: &DistanceMatrix,
    graph: &NeighborhoodGraph,
    tnf: &TnfProfile,
    sigma: f64,
    options: TnfOptions,
) -> Result<AffinityMatrix> {
    check_sigma(sigma)?;
    TnfPairTerms::new(distances, graph, tnf, options)?.tnf1(sigma)
}

/// Structure-aware affinity (TNF2): `β_ij·(1 + 1/(1 + ln(1 + ζ_ij)))`.
pub fn tnf2_affinity(beta: &AffinityMatrix, tnf: &TnfProfile) -> Result<AffinityMatrix> {
    tnf2_affinity_with(beta, tnf, LogBase::E)
}

pub fn tnf2_affinity_with(beta: &AffinityMatrix, tnf: &TnfProfile, base: LogBase) -> Result<AffinityMatrix> {
    if beta.method != AffinityMethod::Tnf1 {
        return Err(Error::invalid(format!(
            "tnf2 expects a tnf1 affinity, got {}",
            beta.method
        )));
    }
    if tnf.len() != beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for a {}-point affinity",
            tnf.len(),
            beta.len()
        )));
    }
    let values = symmetric_from_fn(beta.len(), |i, j| {
        beta.get(i, j) * structural_factor(si_distance_unchecked(&tnf.si, i, j), base)
    });
    Ok(AffinityMatrix {
        values,
        method: AffinityMethod::Tnf2,
        params: beta.params,
    })
}

/// Elementwise product of a base affinity with any number of kernels
/// (density, spatial nearness, structural similarity, ...).
pub fn compose_kernels(base: &AffinityMatrix, kernels: &[Matrix]) -> Result<AffinityMatrix> {
    let shape = base.values.shape();
    let mut values = base.values.clone();
    for (k, kernel) in kernels.iter().enumerate() {
        if kernel.shape() != shape {
            return Err(Error::DimensionMismatch(format!(
                "kernel {k} is {:?}, base is {shape:?}",
                kernel.shape()
            )));
        }
        if let Some(pos) = kernel.as_slice().iter().position(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::invalid(format!(
                "kernel {k} has invalid entry {} at ({}, {})",
                kernel.as_slice()[pos],
                pos / shape.1,
                pos % shape.1
            )));
        }
        for (a, b) in values.as_mut_slice().iter_mut().zip(kernel.as_slice()) {
            *a *= b;
        }
    }
    Ok(AffinityMatrix {
        values,
        method: AffinityMethod::Composed,
        params: base.params,
    })
}
