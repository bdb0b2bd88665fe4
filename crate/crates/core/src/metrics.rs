//! External clustering indices: adjusted Rand index, normalised mutual
//! information and clustering error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hungarian::max_weight_matching;

/// Predicted × true label counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<usize>>,
    n: usize,
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predicted labels, {} true labels",
                pred.len(),
                truth.len()
            )));
        }
        let rows = pred.iter().max().map_or(0, |m| m + 1);
        let cols = truth.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0; cols]; rows];
        for (&p, &t) in pred.iter().zip(truth) {
            counts[p][t] += 1;
        }
        // drop label ids that never occur
        counts.retain(|r| r.iter().any(|&c| c > 0));
        let used: Vec<usize> = (0..cols)
            .filter(|&c| counts.iter().any(|r| r[c] > 0))
            .collect();
        let counts = counts
            .into_iter()
            .map(|r| used.iter().map(|&c| r[c]).collect())
            .collect();
        Ok(Self { counts, n: pred.len() })
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let cols = self.counts.first().map_or(0, Vec::len);
        (0..cols).map(|c| self.counts.iter().map(|r| r[c]).sum()).collect()
    }

    /// Both partitions coincide up to relabelling.
    pub fn is_bijective(&self) -> bool {
        let cols = self.counts.first().map_or(0, Vec::len);
        self.counts.len() == cols
            && self.counts.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1)
    }
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index. Identical partitions score 1; when the index is
/// undefined (expected = max) differing partitions score 0.
pub fn adjusted_rand_index(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n < 2 {
        return Err(Error::invalid("adjusted Rand index needs at least two points"));
    }
    let index: f64 = table.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let a: f64 = table.row_sums().into_iter().map(choose2).sum();
    let b: f64 = table.col_sums().into_iter().map(choose2).sum();
    let expected = a * b / choose2(table.n);
    let max = 0.5 * (a + b);
    if max == expected {
        return Ok(if table.is_bijective() { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// How mutual information is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmiNormalization {
    /// `I / sqrt(H(pred) H(truth))`.
    #[default]
    Geometric,
    /// `2 I / (H(pred) + H(truth))`.
    Arithmetic,
}

// Terms are summed in sorted order of their integer inputs so that the
// result is bit-for-bit independent of how clusters are numbered.
fn entropy(sums: &[usize], n: f64) -> f64 {
    let mut sums = sums.to_vec();
    sums.sort_unstable();
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn normalized_mutual_info(pred: &[usize], truth: &[usize]) -> Result<f64> {
    normalized_mutual_info_with(pred, truth, NmiNormalization::Geometric)
}

/// Normalised mutual information. Identical partitions score 1; a
/// single-cluster side against a different partition scores 0.
pub fn normalized_mutual_info_with(pred: &[usize], truth: &[usize], norm: NmiNormalization) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n == 0 {
        return Err(Error::invalid("normalized mutual information needs at least one point"));
    }
    if table.is_bijective() {
        return Ok(1.0);
    }
    let n = table.n as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let h_pred = entropy(&rows, n);
    let h_truth = entropy(&cols, n);
    if h_pred == 0.0 || h_truth == 0.0 {
        return Ok(0.0);
    }
    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for (r, row) in table.counts.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            if count > 0 {
                cells.push((count, rows[r], cols[c]));
            }
        }
    }
    cells.sort_unstable();
    let mi: f64 = cells
        .iter()
        .map(|&(count, a, b)| {
            let nij = count as f64;
            nij / n * (n * nij / (a as f64 * b as f64)).ln()
        })
        .sum();
    let denom = match norm {
        NmiNormalization::Geometric => (h_pred * h_truth).sqrt(),
        NmiNormalization::Arithmetic => 0.5 * (h_pred + h_truth),
    };
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// Fraction of points left unmatched by the best one-to-one pairing of
/// predicted and true clusters.
pub fn clustering_error(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    if table.n == 0 {
        return Err(Error::invalid("clustering error needs at least one point"));
    }
    let weights: Vec<Vec<f64>> = table
        .counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    let (matched, _) = max_weight_matching(&weights);
    Ok((1.0 - matched / table.n as f64).clamp(0.0, 1.0))
}

/// All three indices at once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub ari: f64,
    pub nmi: f64,
    pub ce: f64,
}

pub fn score_all(pred: &[usize], truth: &[usize]) -> Result<Scores> {
    Ok(Scores {
        ari: adjusted_rand_index(pred, truth)?,
        nmi: normalized_mutual_info(pred, truth)?,
        ce: clustering_error(pred, truth)?,
    })
}
