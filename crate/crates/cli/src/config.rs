//! Experiment configuration (JSON) and its validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tnfclust::dataset::{self, LabeledDataset, Normalization};
use tnfclust::{AffinityMethod, LogBase, PhiMode, SigmaGrid, SweepObjective};

use crate::error::{Error, Result};

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DatasetSource {
    Shape {
        path: PathBuf,
    },
    Uci {
        path: PathBuf,
        label_column: usize,
        #[serde(default = "default_delimiter")]
        delimiter: char,
    },
    Mnist {
        images: PathBuf,
        labels: PathBuf,
        digits: Vec<u8>,
        per_digit: usize,
        #[serde(default)]
        sample_seed: Option<u64>,
    },
}

fn default_delimiter() -> char {
    ','
}

impl DatasetSource {
    pub fn family(&self) -> &'static str {
        match self {
            Self::Shape { .. } => "shape",
            Self::Uci { .. } => "uci",
            Self::Mnist { .. } => "mnist",
        }
    }

    /// Shape data is used as-is, UCI features are standardised, MNIST pixels
    /// are already scaled to [0, 1] by the loader.
    pub fn default_normalization(&self) -> Normalization {
        match self {
            Self::Uci { .. } => Normalization::ZScore,
            Self::Shape { .. } | Self::Mnist { .. } => Normalization::None,
        }
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            Self::Shape { path } | Self::Uci { path, .. } => fix(path),
            Self::Mnist { images, labels, .. } => {
                fix(images);
                fix(labels);
            }
        }
    }

    /// Files the source reads.
    pub fn files(&self) -> Vec<&Path> {
        match self {
            Self::Shape { path } | Self::Uci { path, .. } => vec![path.as_path()],
            Self::Mnist { images, labels, .. } => vec![images.as_path(), labels.as_path()],
        }
    }
}

/// How ε is chosen for the neighbourhood graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonSpec {
    /// Absolute distance.
    Value(f64),
    /// Quantile of the pairwise distances.
    Quantile(f64),
    /// Several quantiles; the one with the best sweep score is kept.
    Quantiles(Vec<f64>),
}

impl Default for EpsilonSpec {
    fn default() -> Self {
        Self::Quantile(0.05)
    }
}

impl EpsilonSpec {
    fn validate(&self, field: &str) -> Result<()> {
        let bad_q = |q: f64| !(q > 0.0 && q <= 1.0);
        match self {
            Self::Value(v) if !(*v > 0.0 && v.is_finite()) => Err(Error::config(field, format!("epsilon must be positive, got {v}"))),
            Self::Quantile(q) if bad_q(*q) => Err(Error::config(field, format!("quantile must lie in (0, 1], got {q}"))),
            Self::Quantiles(qs) if qs.is_empty() => Err(Error::config(field, "quantile list is empty")),
            Self::Quantiles(qs) => match qs.iter().find(|&&q| bad_q(q)) {
                Some(q) => Err(Error::config(field, format!("quantile must lie in (0, 1], got {q}"))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Display name; defaults to the file stem (or `mnist{…}`).
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub source: DatasetSource,
    /// Overrides the family default.
    #[serde(default)]
    pub preprocessing: Option<Normalization>,
    /// Overrides the experiment-wide ε.
    #[serde(default)]
    pub epsilon: Option<EpsilonSpec>,
    /// Overrides the number of clusters (default: number of true classes).
    #[serde(default)]
    pub k: Option<usize>,
}

impl DatasetSpec {
    pub fn normalization(&self) -> Normalization {
        self.preprocessing
            .unwrap_or_else(|| self.source.default_normalization())
    }

    /// Loads and preprocesses the dataset.
    pub fn load(&self) -> Result<LabeledDataset> {
        let raw = match &self.source {
            DatasetSource::Shape { path } => dataset::load_shape_csv(path)?,
            DatasetSource::Uci {
                path,
                label_column,
                delimiter,
            } => dataset::load_uci_csv(path, *label_column, *delimiter)?,
            DatasetSource::Mnist {
                images,
                labels,
                digits,
                per_digit,
                sample_seed,
            } => dataset::load_mnist_idx(images, labels, digits, *per_digit, *sample_seed)?,
        };
        let mut ds = dataset::normalize(&raw, self.normalization());
        if let Some(name) = &self.name {
            ds.name.clone_from(name);
        }
        Ok(ds)
    }
}

/// Output table format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
    Markdown,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Markdown => "md",
        }
    }
}

fn default_methods() -> Vec<AffinityMethod> {
    vec![AffinityMethod::Tnf1, AffinityMethod::Tnf2]
}

fn default_restarts() -> usize {
    tnfclust::kmeans::DEFAULT_RESTARTS
}

fn default_rank() -> usize {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "default_methods")]
    pub methods: Vec<AffinityMethod>,
    #[serde(default)]
    pub sigma_grid: SigmaGrid,
    #[serde(default)]
    pub epsilon: EpsilonSpec,
    /// Number of clusters for every dataset (default: number of true classes).
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub phi_mode: PhiMode,
    #[serde(default)]
    pub eta_smoothing: bool,
    #[serde(default)]
    pub log_base: LogBase,
    /// Neighbour rank for the self-tuning local scales.
    #[serde(default = "default_rank")]
    pub self_tuning_rank: usize,
    #[serde(default)]
    pub objective: SweepObjective,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub format: TableFormat,
}

impl ExperimentConfig {
    pub fn new(datasets: Vec<DatasetSpec>, methods: Vec<AffinityMethod>) -> Self {
        Self {
            datasets,
            methods,
            sigma_grid: SigmaGrid::DEFAULT,
            epsilon: EpsilonSpec::default(),
            k: None,
            seed: 0,
            restarts: default_restarts(),
            phi_mode: PhiMode::Nodes,
            eta_smoothing: false,
            log_base: LogBase::E,
            self_tuning_rank: default_rank(),
            objective: SweepObjective::Ari,
            out_dir: None,
            format: TableFormat::Csv,
        }
    }

    /// Reads a JSON config; relative dataset paths and `out_dir` are taken
    /// relative to the config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for ds in &mut cfg.datasets {
            ds.source.rebase(base);
        }
        if let Some(out) = &mut cfg.out_dir {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::config("datasets", "at least one dataset is required"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if let Some(i) = self.methods.iter().position(|&m| m == AffinityMethod::Composed) {
            return Err(Error::config(
                format!("methods[{i}]"),
                "composed affinities need user kernels and cannot be benchmarked from a config",
            ));
        }
        self.sigma_grid
            .values()
            .map_err(|e| Error::config("sigma_grid", e.to_string()))?;
        self.epsilon.validate("epsilon")?;
        if self.k == Some(0) {
            return Err(Error::config("k", "k must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts", "at least one restart is required"));
        }
        if self.self_tuning_rank == 0 {
            return Err(Error::config("self_tuning_rank", "rank must be at least 1"));
        }
        for (i, ds) in self.datasets.iter().enumerate() {
            if let Some(eps) = &ds.epsilon {
                eps.validate(&format!("datasets[{i}].epsilon"))?;
            }
            if ds.k == Some(0) {
                return Err(Error::config(format!("datasets[{i}].k"), "k must be at least 1"));
            }
            if let DatasetSource::Mnist { digits, per_digit, .. } = &ds.source {
                if digits.is_empty() {
                    return Err(Error::config(format!("datasets[{i}].digits"), "no digits given"));
                }
                if *per_digit == 0 {
                    return Err(Error::config(format!("datasets[{i}].per_digit"), "must be at least 1"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(path: &str) -> DatasetSpec {
        DatasetSpec {
            name: None,
            source: DatasetSource::Shape { path: path.into() },
            preprocessing: None,
            epsilon: None,
            k: None,
        }
    }

    #[test]
    fn parses_json_with_defaults() {
        let json = r#"{
            "datasets": [
                {"family": "shape", "path": "jain.txt"},
                {"family": "uci", "path": "iris.data", "label_column": 4, "epsilon": {"quantiles": [0.02, 0.05]}},
                {"family": "mnist", "images": "i", "labels": "l", "digits": [0, 8], "per_digit": 200}
            ],
            "methods": ["gaussian", "self-tuning", "tnf2"],
            "epsilon": {"quantile": 0.05}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.restarts, 20);
        assert_eq!(cfg.sigma_grid, SigmaGrid::DEFAULT);
        assert_eq!(cfg.datasets[1].normalization(), Normalization::ZScore);
        assert_eq!(cfg.datasets[0].normalization(), Normalization::None);
        assert_eq!(cfg.methods[1], AffinityMethod::SelfTuning);
        match &cfg.datasets[1].source {
            DatasetSource::Uci { delimiter, .. } => assert_eq!(*delimiter, ','),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_reports_field() {
        let cfg = ExperimentConfig::new(vec![shape("x")], vec![]);
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "methods"),
            other => panic!("expected config error, got {other:?}"),
        }
        let mut cfg = ExperimentConfig::new(vec![shape("x")], vec![AffinityMethod::Gaussian]);
        cfg.datasets[0].epsilon = Some(EpsilonSpec::Quantile(0.0));
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "datasets[0].epsilon"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"datasets": [], "methodz": []}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(json).is_err());
    }
}
