//! Grid search over the Gaussian width σ, scored against ground truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::AffinityMatrix;
use crate::error::{Error, Result};
use crate::graph::DistanceMatrix;
use crate::metrics::{adjusted_rand_index, clustering_error, normalized_mutual_info};
use crate::seed::derive_seed;
use crate::spectral::{spectral_cluster, ClusteringResult, SpectralConfig};

/// Inclusive arithmetic grid `start, start + step, …, <= stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SigmaGrid {
    /// 0.01 to 10 in steps of 0.01.
    pub const DEFAULT: Self = Self {
        start: 0.01,
        stop: 10.0,
        step: 0.01,
    };

    pub fn single(sigma: f64) -> Self {
        Self {
            start: sigma,
            stop: sigma,
            step: 1.0,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let valid = self.start > 0.0
            && self.stop >= self.start
            && self.step > 0.0
            && [self.start, self.stop, self.step].iter().all(|v| v.is_finite());
        if !valid {
            return Err(Error::invalid(format!("empty or invalid sigma grid {self:?}")));
        }
        // the small slack absorbs rounding in (stop - start) / step
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.start + i as f64 * self.step).collect())
    }
}

impl Default for SigmaGrid {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl std::str::FromStr for SigmaGrid {
    type Err = Error;

    /// Parses `start:stop:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(Error::invalid(format!("sigma grid must be start:stop:step, got {s:?}")));
        };
        let parse = |x: &str| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {x:?} in sigma grid")))
        };
        let grid = Self {
            start: parse(start)?,
            stop: parse(stop)?,
            step: parse(step)?,
        };
        grid.values()?;
        Ok(grid)
    }
}

/// Metric maximised by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepObjective {
    #[default]
    Ari,
    Nmi,
    /// Scored as `−CE`, so that larger is still better.
    Ce,
}

impl SweepObjective {
    pub fn score(self, pred: &[usize], truth: &[usize]) -> Result<f64> {
        match self {
            Self::Ari => adjusted_rand_index(pred, truth),
            Self::Nmi => normalized_mutual_info(pred, truth),
            Self::Ce => clustering_error(pred, truth).map(|ce| -ce),
        }
    }
}

/// Everything a sweep needs besides the affinity builder.
#[derive(Debug, Clone, Copy)]
pub struct SweepContext<'a> {
    pub k: usize,
    pub spectral: SpectralConfig,
    pub truth: &'a [usize],
    /// When given, zero-affinity points inherit the label of their nearest
    /// non-degenerate neighbour before scoring.
    pub distances: Option<&'a DistanceMatrix>,
    pub objective: SweepObjective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub best_sigma: f64,
    pub best_score: f64,
    pub best: ClusteringResult,
    /// `(σ, score)` for every grid point, in grid order.
    pub scores: Vec<(f64, f64)>,
}

/// Clusters at every σ in `sigmas` and keeps the best-scoring one (ties go
/// to the smallest σ). Grid point `i` uses seed `derive_seed(seed, [i])`.
pub fn sigma_sweep<F>(sigmas: &[f64], build: F, ctx: SweepContext<'_>) -> Result<SweepOutcome>
where
    F: Fn(f64) -> Result<AffinityMatrix> + Sync,
{
    if sigmas.is_empty() {
        return Err(Error::invalid("sigma grid is empty"));
    }
    let evaluated: Vec<(f64, f64, ClusteringResult)> = sigmas
        .par_iter()
        .enumerate()
        .map(|(idx, &sigma)| {
            let affinity = build(sigma)?;
            let spectral = SpectralConfig {
                seed: derive_seed(ctx.spectral.seed, &[idx as u64]),
                ..ctx.spectral
            };
            let mut result = spectral_cluster(&affinity, ctx.k, spectral)?;
            if let Some(d) = ctx.distances {
                result.reassign_degenerate(d);
            }
            let score = ctx.objective.score(&result.labels, ctx.truth)?;
            Ok((sigma, score, result))
        })
        .collect::<Result<_>>()?;

    let scores: Vec<(f64, f64)> = evaluated.iter().map(|(s, v, _)| (*s, *v)).collect();
    let (best_sigma, best_score, best) = evaluated
        .into_iter()
        .reduce(|best, cur| {
            let better = cur.1 > best.1 || (cur.1 == best.1 && cur.0 < best.0);
            if better {
                cur
            } else {
                best
            }
        })
        .expect("nonempty grid");
    Ok(SweepOutcome {
        best_sigma,
        best_score,
        best,
        scores,
    })
}
