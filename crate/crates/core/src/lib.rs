//! Semi-supervised data representation through learned affinity graphs.
//!
//! A Mahalanobis metric is learned from the labeled prefix of a dataset
//! ([`metric`]), turned into a sparse Gaussian-weighted kNN graph
//! ([`graph`]) whose Laplacian ([`laplacian`]) regularizes two unsupervised
//! representation learners: nonnegative matrix factorization ([`fgnmf`])
//! and sparse coding ([`fgsc`]). Representations are clustered with k-means
//! and scored by clustering accuracy ([`eval`]); [`experiment`] runs the
//! repeated-trial protocol end to end.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fgnmf;
pub mod fgsc;
pub mod graph;
pub mod laplacian;
mod linalg;
pub mod metric;
pub mod synth;

pub use data::{load_dataset, save_dataset, DataFormat, DataSet};
pub use error::{GraphSslError, Result};
pub use eval::{accuracy, kmeans, AccuracyReport, ClusteringResult, KMeansConfig};
pub use experiment::{run_experiment, sample_trial, Algorithm, ExperimentConfig, ExperimentReport};
pub use fgnmf::{fit_fgnmf, fit_nmf, nmf_objective, NmfModel, NmfOptions};
pub use fgsc::{fit_fgsc, gsc_objective, update_codes, update_dictionary, GscOptions, SparseCodingModel};
pub use graph::{
    build_learned_graph, build_learned_graph_with, label_weight_graph, unsupervised_gaussian_graph,
    unsupervised_gaussian_graph_with, AffinityGraph, GraphKind, GraphOptions,
};
pub use laplacian::{build_laplacian, GraphLaplacian};
pub use linalg::{symmetric_eigen, symmetric_eigenvalues};
pub use metric::{enumerate_pairs, learn_kiss_metric, metric_distance_sq, LabeledPairs, MetricMatrix};
