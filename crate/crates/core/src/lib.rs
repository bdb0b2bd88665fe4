//! Spectral clustering with affinities built from topological node features
//! of an ε-neighbourhood graph, alongside the usual Gaussian, common-neighbour
//! and self-tuning baselines.
//!
//! Pipeline: load points ([`dataset`]), compute distances and the ε-graph
//! ([`graph`]), per-node features ([`tnf`]), an affinity ([`affinity`]),
//! then normalised spectral clustering ([`spectral`]) scored with
//! [`metrics`]. [`sweep`] searches the Gaussian width against ground truth.

pub mod affinity;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod hungarian;
pub mod kmeans;
pub mod matrix;
pub mod metrics;
pub mod seed;
pub mod spectral;
pub mod sweep;
pub mod tnf;

pub use affinity::{AffinityMatrix, AffinityMethod, AffinityParams, LogBase, TnfOptions, TnfPairTerms};
pub use dataset::{LabeledDataset, Normalization};
pub use error::{Error, Result};
pub use graph::{DistanceMatrix, NeighborhoodGraph};
pub use matrix::Matrix;
pub use metrics::{NmiNormalization, Scores};
pub use spectral::{ClusteringResult, SpectralConfig, SpectralEmbedding};
pub use sweep::{SigmaGrid, SweepObjective, SweepOutcome};
pub use tnf::{PhiMode, TnfProfile};
