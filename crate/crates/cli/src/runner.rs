//! Runs every (dataset, method) cell of an experiment: graph construction,
//! feature extraction, σ sweep, scoring.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tnfclust::affinity::{cnn_affinity, gaussian_affinity, self_tuning_affinity};
use tnfclust::graph::{build_epsilon_graph, pairwise_distances, suggest_epsilon};
use tnfclust::metrics::score_all;
use tnfclust::seed::{derive_seed, stable_hash};
use tnfclust::spectral::spectral_cluster;
use tnfclust::sweep::{sigma_sweep, SweepContext, SweepOutcome};
use tnfclust::tnf::DEFAULT_SI_DEPTH;
use tnfclust::{
    AffinityMethod, DistanceMatrix, LabeledDataset, SpectralConfig, TnfOptions, TnfPairTerms, TnfProfile,
};
use tracing::{info, warn};

use crate::config::{EpsilonSpec, ExperimentConfig, TableFormat};
use crate::error::{Error, Result};
use crate::plot::scatter_svg;
use crate::report::emit_table;

/// Scores of one (dataset, method) cell at its selected parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub method: AffinityMethod,
    /// Selected Gaussian width (none for self-tuning).
    pub sigma: Option<f64>,
    /// ε of the graph used (graph-based methods only).
    pub epsilon: Option<f64>,
    /// Distance quantile ε was derived from, when applicable.
    pub epsilon_quantile: Option<f64>,
    pub ari: f64,
    pub nmi: f64,
    pub ce: f64,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// Points with zero total affinity at the selected parameters.
    pub degenerate_points: usize,
    pub wall_time_secs: f64,
}

impl ResultRecord {
    /// Equality on everything except timing.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self {
            wall_time_secs: 0.0,
            ..self.clone()
        } == Self {
            wall_time_secs: 0.0,
            ..other.clone()
        }
    }
}

/// A record plus the labels it was scored from.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub record: ResultRecord,
    pub predicted: Vec<usize>,
    pub truth: Vec<usize>,
    /// `(σ, score)` for every grid point at the selected ε.
    pub sweep_scores: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub cells: Vec<CellOutput>,
    pub datasets: Vec<LabeledDataset>,
}

impl RunOutput {
    pub fn records(&self) -> Vec<ResultRecord> {
        self.cells.iter().map(|c| c.record.clone()).collect()
    }
}

struct Candidate {
    outcome: SweepOutcome,
    epsilon: Option<f64>,
    epsilon_quantile: Option<f64>,
}

fn epsilon_candidates(spec: &EpsilonSpec, distances: &DistanceMatrix) -> Result<Vec<(f64, Option<f64>)>> {
    Ok(match spec {
        EpsilonSpec::Value(v) => vec![(*v, None)],
        EpsilonSpec::Quantile(q) => vec![(suggest_epsilon(distances, *q)?, Some(*q))],
        EpsilonSpec::Quantiles(qs) => qs
            .iter()
            .map(|&q| Ok((suggest_epsilon(distances, q)?, Some(q))))
            .collect::<Result<_>>()?,
    })
}

/// Runs one cell. Seeds derive from `(seed, dataset name, method)`.
pub fn run_cell(
    config: &ExperimentConfig,
    dataset: &LabeledDataset,
    distances: &DistanceMatrix,
    epsilon: &EpsilonSpec,
    k: usize,
    method: AffinityMethod,
) -> Result<CellOutput> {
    let started = Instant::now();
    let truth = dataset
        .labels()
        .ok_or_else(|| Error::Invalid(format!("dataset {} has no ground truth to score against", dataset.name)))?;
    let cell_seed = derive_seed(config.seed, &[stable_hash(&dataset.name), stable_hash(method.as_str())]);
    let spectral = SpectralConfig {
        restarts: config.restarts,
        seed: cell_seed,
    };
    let ctx = SweepContext {
        k,
        spectral,
        truth,
        distances: Some(distances),
        objective: config.objective,
    };
    let sigmas = config.sigma_grid.values()?;
    let tnf_options = TnfOptions {
        eta_smoothing: config.eta_smoothing,
        log_base: config.log_base,
    };

    let best = match method {
        AffinityMethod::Gaussian => Candidate {
            outcome: sigma_sweep(&sigmas, |s| gaussian_affinity(distances, s), ctx)?,
            epsilon: None,
            epsilon_quantile: None,
        },
        AffinityMethod::SelfTuning => {
            let affinity = self_tuning_affinity(distances, config.self_tuning_rank)?;
            let mut result = spectral_cluster(&affinity, k, spectral)?;
            result.reassign_degenerate(distances);
            let score = config.objective.score(&result.labels, truth)?;
            Candidate {
                outcome: SweepOutcome {
                    best_sigma: f64::NAN,
                    best_score: score,
                    best: result,
                    scores: Vec::new(),
                },
                epsilon: None,
                epsilon_quantile: None,
            }
        }
        AffinityMethod::Cnn | AffinityMethod::Tnf1 | AffinityMethod::Tnf2 => {
            let mut best: Option<Candidate> = None;
            for (eps, quantile) in epsilon_candidates(epsilon, distances)? {
                let graph = build_epsilon_graph(distances, eps)?;
                let isolated = graph.isolated_nodes().len();
                if isolated > 0 {
                    warn!(dataset = %dataset.name, %method, eps, isolated, "epsilon graph has isolated nodes");
                }
                let outcome = if method == AffinityMethod::Cnn {
                    sigma_sweep(&sigmas, |s| cnn_affinity(distances, &graph, s), ctx)?
                } else {
                    let profile = TnfProfile::compute(&graph, config.phi_mode, DEFAULT_SI_DEPTH)?;
                    let terms = TnfPairTerms::new(distances, &graph, &profile, tnf_options)?;
                    if method == AffinityMethod::Tnf1 {
                        sigma_sweep(&sigmas, |s| terms.tnf1(s), ctx)?
                    } else {
                        sigma_sweep(&sigmas, |s| terms.tnf2(s), ctx)?
                    }
                };
                let better = best
                    .as_ref()
                    .is_none_or(|b| outcome.best_score > b.outcome.best_score);
                if better {
                    best = Some(Candidate {
                        outcome,
                        epsilon: Some(eps),
                        epsilon_quantile: quantile,
                    });
                }
            }
            best.expect("at least one epsilon candidate")
        }
        AffinityMethod::Composed => {
            return Err(Error::Invalid("composed affinities cannot be run from a config".into()));
        }
    };

    let predicted = best.outcome.best.labels.clone();
    let scores = score_all(&predicted, truth)?;
    let sigma = method.uses_sigma().then_some(best.outcome.best_sigma);
    let record = ResultRecord {
        dataset: dataset.name.clone(),
        method,
        sigma,
        epsilon: best.epsilon,
        epsilon_quantile: best.epsilon_quantile,
        ari: scores.ari,
        nmi: scores.nmi,
        ce: scores.ce,
        n: dataset.len(),
        k,
        seed: cell_seed,
        degenerate_points: best.outcome.best.degenerate.len(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    info!(
        dataset = %record.dataset,
        method = %record.method,
        sigma = ?record.sigma,
        epsilon = ?record.epsilon,
        ari = record.ari,
        "cell finished"
    );
    Ok(CellOutput {
        record,
        predicted,
        truth: truth.to_vec(),
        sweep_scores: best.outcome.scores,
    })
}

/// Runs every (dataset, method) cell. Cells are independent and run in
/// parallel; output order follows the config (datasets, then methods).
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let datasets: Vec<LabeledDataset> = config
        .datasets
        .iter()
        .map(|spec| spec.load())
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (spec, dataset) in config.datasets.iter().zip(&datasets) {
        if dataset.labels().is_none() {
            return Err(Error::Invalid(format!("dataset {} has no labels", dataset.name)));
        }
        let distances = pairwise_distances(dataset);
        let k = spec.k.or(config.k).unwrap_or(dataset.k_true());
        if k > dataset.len() {
            return Err(Error::config("k", format!("k = {k} exceeds {} points", dataset.len())));
        }
        let epsilon = spec.epsilon.as_ref().unwrap_or(&config.epsilon);
        let outputs: Vec<CellOutput> = config
            .methods
            .par_iter()
            .map(|&method| run_cell(config, dataset, &distances, epsilon, k, method))
            .collect::<Result<_>>()?;
        cells.extend(outputs);
    }
    Ok(RunOutput { cells, datasets })
}

/// Writes `results.<ext>`, per-cell label files and (for planar data) SVG
/// scatter plots of the predicted labels under `dir`. Returns written paths.
pub fn persist(output: &RunOutput, dir: &Path, format: TableFormat) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut write = |path: PathBuf, contents: &str| -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };

    write(
        dir.join(format!("results.{}", format.extension())),
        &emit_table(&output.records(), format)?,
    )?;
    for cell in &output.cells {
        let stem = format!("{}_{}", file_safe(&cell.record.dataset), cell.record.method.as_str());
        let mut labels = String::from("index,predicted,truth\n");
        for (i, (p, t)) in cell.predicted.iter().zip(&cell.truth).enumerate() {
            let _ = writeln!(labels, "{i},{p},{t}");
        }
        write(dir.join("labels").join(format!("{stem}.csv")), &labels)?;

        let dataset = output
            .datasets
            .iter()
            .find(|d| d.name == cell.record.dataset)
            .expect("cell dataset is part of the run");
        if dataset.dim() == 2 {
            let title = format!("{} / {}", cell.record.dataset, cell.record.method);
            let svg = scatter_svg(dataset.points(), &cell.predicted, &title)?;
            write(dir.join("plots").join(format!("{stem}.svg")), &svg)?;
        }
    }
    Ok(written)
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
