//! Repeated-trial clustering experiments.
//!
//! Each trial draws `k_clusters` classes, reveals `labels_per_class` labels
//! per class (moved to the front of the sample order), builds the graph the
//! algorithm calls for, fits the representation, clusters it with k-means
//! and scores the clustering against the ground truth of every sample.
//!
//! Configuration is flat `key=value` text, one key per line, `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::DataSet;
use crate::error::{GraphSslError, Result};
use crate::eval::{accuracy, kmeans, mean_and_std, KMeansConfig};
use crate::fgnmf::{fit_fgnmf, predict_clusters_nmf, NmfOptions};
use crate::fgsc::{fit_fgsc, predict_clusters_gsc, GscOptions};
use crate::graph::{
    build_learned_graph_with, label_weight_graph, unsupervised_gaussian_graph_with, AffinityGraph,
    GraphKind, GraphOptions,
};
use crate::laplacian::build_laplacian;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "GRAPHSSL_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    KMeans,
    Gnmf,
    Lgnmf,
    Fgnmf,
    Gsc,
    Lgsc,
    Fgsc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::KMeans,
        Algorithm::Gnmf,
        Algorithm::Lgnmf,
        Algorithm::Fgnmf,
        Algorithm::Gsc,
        Algorithm::Lgsc,
        Algorithm::Fgsc,
    ];

    pub fn graph_kind(self) -> Option<GraphKind> {
        match self {
            Algorithm::KMeans => None,
            Algorithm::Gnmf | Algorithm::Gsc => Some(GraphKind::UnsupervisedGaussian),
            Algorithm::Lgnmf | Algorithm::Lgsc => Some(GraphKind::LabelWeight),
            Algorithm::Fgnmf | Algorithm::Fgsc => Some(GraphKind::Learned),
        }
    }

    pub fn uses_labels(self) -> bool {
        matches!(self.graph_kind(), Some(GraphKind::Learned | GraphKind::LabelWeight))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Gnmf => "gnmf",
            Algorithm::Lgnmf => "lgnmf",
            Algorithm::Fgnmf => "fgnmf",
            Algorithm::Gsc => "gsc",
            Algorithm::Lgsc => "lgsc",
            Algorithm::Fgsc => "fgsc",
        })
    }
}

impl FromStr for Algorithm {
    type Err = GraphSslError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| GraphSslError::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub k_clusters: usize,
    pub labels_per_class: usize,
    pub test_runs: usize,
    pub knn_k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub c: f64,
    pub kiss_regularization: f64,
    pub sigma_override: Option<f64>,
    pub master_seed: u64,
    /// Divide features by their global maximum before sampling trials.
    pub normalize: bool,
    pub nmf_max_iters: usize,
    pub nmf_tol: f64,
    pub gsc_outer_iters: usize,
    pub gsc_inner_sweeps: usize,
    pub gsc_dictionary_iters: usize,
    pub gsc_tol: f64,
    pub kmeans_restarts: usize,
    pub kmeans_max_iters: usize,
    /// Labeled prefix used by the standalone graph command; `None` means every
    /// labeled sample in the file.
    pub labeled_prefix: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::Fgnmf,
            k_clusters: 2,
            labels_per_class: 2,
            test_runs: 1,
            knn_k: crate::graph::DEFAULT_KNN,
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 0.1,
            c: 1.0,
            kiss_regularization: crate::metric::DEFAULT_KISS_REGULARIZATION,
            sigma_override: None,
            master_seed: 0,
            normalize: true,
            nmf_max_iters: 300,
            nmf_tol: 1e-5,
            gsc_outer_iters: 100,
            gsc_inner_sweeps: 3,
            gsc_dictionary_iters: 25,
            gsc_tol: 1e-5,
            kmeans_restarts: 10,
            kmeans_max_iters: 100,
            labeled_prefix: None,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| GraphSslError::Config(format!("line {line}: {key}={value}: {e}")))
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(GraphSslError::Config(format!("line {line}: {key}={value}: expected a boolean"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| GraphSslError::Config(format!("line {line}: expected key=value")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "algorithm" => cfg.algorithm = value.parse()?,
                "k_clusters" => cfg.k_clusters = parse_value(key, value, line)?,
                "labels_per_class" => cfg.labels_per_class = parse_value(key, value, line)?,
                "test_runs" => cfg.test_runs = parse_value(key, value, line)?,
                "knn_k" => cfg.knn_k = parse_value(key, value, line)?,
                "lambda1" => cfg.lambda1 = parse_value(key, value, line)?,
                "lambda2" => cfg.lambda2 = parse_value(key, value, line)?,
                "lambda3" => cfg.lambda3 = parse_value(key, value, line)?,
                "c" => cfg.c = parse_value(key, value, line)?,
                "kiss_regularization" => cfg.kiss_regularization = parse_value(key, value, line)?,
                "sigma" => {
                    cfg.sigma_override = match value {
                        "auto" | "" => None,
                        v => Some(parse_value(key, v, line)?),
                    }
                }
                "master_seed" => cfg.master_seed = parse_value(key, value, line)?,
                "normalize" => cfg.normalize = parse_bool(key, value, line)?,
                "nmf_max_iters" => cfg.nmf_max_iters = parse_value(key, value, line)?,
                "nmf_tol" => cfg.nmf_tol = parse_value(key, value, line)?,
                "gsc_outer_iters" => cfg.gsc_outer_iters = parse_value(key, value, line)?,
                "gsc_inner_sweeps" => cfg.gsc_inner_sweeps = parse_value(key, value, line)?,
                "gsc_dictionary_iters" => cfg.gsc_dictionary_iters = parse_value(key, value, line)?,
                "gsc_tol" => cfg.gsc_tol = parse_value(key, value, line)?,
                "kmeans_restarts" => cfg.kmeans_restarts = parse_value(key, value, line)?,
                "kmeans_max_iters" => cfg.kmeans_max_iters = parse_value(key, value, line)?,
                "labeled_prefix" => cfg.labeled_prefix = Some(parse_value(key, value, line)?),
                other => {
                    return Err(GraphSslError::Config(format!("line {line}: unknown key {other:?}")))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(GraphSslError::Config(msg.to_string()));
        if self.test_runs == 0 {
            return fail("test_runs must be at least 1");
        }
        if self.k_clusters == 0 {
            return fail("k_clusters must be at least 1");
        }
        if self.algorithm.uses_labels() && self.labels_per_class == 0 {
            return fail("labels_per_class must be at least 1 for semi-supervised algorithms");
        }
        if self.knn_k == 0 {
            return fail("knn_k must be at least 1");
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("kiss_regularization", self.kiss_regularization),
            ("nmf_tol", self.nmf_tol),
            ("gsc_tol", self.gsc_tol),
        ] {
            if !(v >= 0.0) {
                return Err(GraphSslError::Config(format!("{name} must be nonnegative")));
            }
        }
        if !(self.c > 0.0) {
            return fail("c must be positive");
        }
        if let Some(s) = self.sigma_override {
            if !(s > 0.0) || !s.is_finite() {
                return fail("sigma must be positive");
            }
        }
        Ok(())
    }

    pub fn graph_options(&self) -> GraphOptions {
        GraphOptions {
            k: self.knn_k,
            kiss_regularization: self.kiss_regularization,
            sigma_override: self.sigma_override,
        }
    }

    pub fn nmf_options(&self, seed: u64) -> NmfOptions {
        NmfOptions {
            k: self.k_clusters,
            lambda1: self.lambda1,
            max_iters: self.nmf_max_iters,
            tol: self.nmf_tol,
            seed,
        }
    }

    pub fn gsc_options(&self, seed: u64) -> GscOptions {
        GscOptions {
            k: self.k_clusters,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            c: self.c,
            outer_iters: self.gsc_outer_iters,
            inner_sweeps: self.gsc_inner_sweeps,
            dictionary_iters: self.gsc_dictionary_iters,
            tol: self.gsc_tol,
            seed,
        }
    }

    pub fn kmeans_config(&self, seed: u64) -> KMeansConfig {
        KMeansConfig {
            k: self.k_clusters,
            restarts: self.kmeans_restarts,
            max_iters: self.kmeans_max_iters,
            seed,
        }
    }
}

/// Draws `k_clusters` classes, keeps all of their samples and reveals
/// `labels_per_class` random labels per class. Revealed samples form the
/// prefix (class by class); the rest follow in shuffled order.
pub fn sample_trial(
    dataset: &DataSet,
    k_clusters: usize,
    labels_per_class: usize,
    seed: u64,
) -> Result<DataSet> {
    let labels = dataset
        .labels()
        .ok_or_else(|| GraphSslError::InsufficientLabels("dataset has no class labels".into()))?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if by_class.len() < k_clusters {
        return Err(GraphSslError::InsufficientLabels(format!(
            "dataset has {} classes, {} requested",
            by_class.len(),
            k_clusters
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: Vec<usize> = by_class.keys().copied().collect();
    let mut picked: Vec<usize> = sample(&mut rng, classes.len(), k_clusters)
        .into_iter()
        .map(|i| classes[i])
        .collect();
    picked.sort_unstable();

    let mut labeled = Vec::with_capacity(k_clusters * labels_per_class);
    let mut rest = Vec::new();
    for class in picked {
        let mut members = by_class[&class].clone();
        if members.len() < labels_per_class {
            return Err(GraphSslError::ClassTooSmall {
                class,
                available: members.len(),
                requested: labels_per_class,
            });
        }
        members.shuffle(&mut rng);
        labeled.extend_from_slice(&members[..labels_per_class]);
        rest.extend_from_slice(&members[labels_per_class..]);
    }
    rest.shuffle(&mut rng);
    let n_labeled = labeled.len();
    labeled.extend(rest);
    dataset.select(&labeled, n_labeled)
}

/// Graph for an algorithm on one trial (`None` for plain k-means).
pub fn trial_graph(trial: &DataSet, cfg: &ExperimentConfig) -> Result<Option<AffinityGraph>> {
    let options = cfg.graph_options();
    Ok(match cfg.algorithm.graph_kind() {
        None => None,
        Some(GraphKind::UnsupervisedGaussian) => Some(unsupervised_gaussian_graph_with(trial, &options)?),
        Some(GraphKind::LabelWeight) => Some(label_weight_graph(trial)?),
        Some(GraphKind::Learned) => Some(build_learned_graph_with(trial, &options)?),
    })
}

/// Cluster assignments for one prepared trial.
pub fn cluster_trial(trial: &DataSet, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<usize>> {
    let x = trial.features();
    let km = cfg.kmeans_config(seed);
    let graph = trial_graph(trial, cfg)?;
    let result = match (cfg.algorithm, graph) {
        (Algorithm::KMeans, _) => kmeans(x.t(), &km)?,
        (alg, Some(graph)) => {
            let lap = build_laplacian(&graph)?;
            match alg {
                Algorithm::Gnmf | Algorithm::Lgnmf | Algorithm::Fgnmf => {
                    let model = fit_fgnmf(x, &lap, &cfg.nmf_options(seed))?;
                    predict_clusters_nmf(&model, &km)?
                }
                _ => {
                    let model = fit_fgsc(x, &lap, &cfg.gsc_options(seed))?;
                    predict_clusters_gsc(&model, &km)?
                }
            }
        }
        (alg, None) => unreachable!("{alg} always has a graph"),
    };
    Ok(result.assignments)
}

/// Accuracy of one trial over all of its samples, labeled ones included.
pub fn run_trial(dataset: &DataSet, cfg: &ExperimentConfig, seed: u64) -> Result<f64> {
    let trial = sample_trial(dataset, cfg.k_clusters, cfg.labels_per_class, seed)?;
    let assignments = cluster_trial(&trial, cfg, seed)?;
    let truth = trial.labels().expect("trials carry labels");
    Ok(accuracy(&assignments, truth)?.ac)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub run: usize,
    pub seed: u64,
    pub outcome: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub k_clusters: usize,
    pub labels_per_class: usize,
    pub master_seed: u64,
    pub rows: Vec<RunRow>,
}

pub const CSV_HEADER: &str = "dataset,algorithm,k,labels_per_class,run,seed,ac,status";

impl ExperimentReport {
    pub fn successes(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok().copied()).collect()
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Mean and population standard deviation of AC over successful runs.
    pub fn mean_std(&self) -> (f64, f64) {
        mean_and_std(&self.successes())
    }

    /// One row per run, then a `summary` row whose `ac` is the mean AC and
    /// whose status carries the standard deviation and run counts.
    pub fn to_csv(&self) -> String {
        let prefix = format!(
            "{},{},{},{}",
            self.dataset, self.algorithm, self.k_clusters, self.labels_per_class
        );
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let (ac, status) = match &row.outcome {
                Ok(ac) => (ac.to_string(), "ok".to_string()),
                Err(msg) => (String::new(), format!("failed: {}", msg.replace([',', '\n'], ";"))),
            };
            out.push_str(&format!("{prefix},{},{},{ac},{status}\n", row.run, row.seed));
        }
        let (mean, std) = self.mean_std();
        out.push_str(&format!(
            "{prefix},summary,{},{mean},std={std};ok={};failed={}\n",
            self.master_seed,
            self.successes().len(),
            self.failures()
        ));
        out
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value
            .trim()
            .parse()
            .map_err(|_| GraphSslError::Config(format!("{THREADS_ENV}={value:?} is not a count")))?;
        builder = builder.num_threads(threads.max(1));
    }
    builder
        .build()
        .map_err(|e| GraphSslError::Config(format!("thread pool: {e}")))
}

/// Runs `test_runs` trials with seeds `master_seed + run`. A failing trial
/// becomes a failed row and does not abort the others.
pub fn run_experiment(dataset: &DataSet, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut prepared = dataset.clone();
    if cfg.normalize {
        prepared.normalize_by_max()?;
    }
    let pool = thread_pool()?;
    let rows = pool.install(|| {
        (0..cfg.test_runs)
            .into_par_iter()
            .map(|run| {
                let seed = cfg.master_seed.wrapping_add(run as u64);
                let outcome = run_trial(&prepared, cfg, seed).map_err(|e| e.to_string());
                RunRow { run, seed, outcome }
            })
            .collect::<Vec<_>>()
    });
    Ok(ExperimentReport {
        dataset: dataset.name.clone(),
        algorithm: cfg.algorithm,
        k_clusters: cfg.k_clusters,
        labels_per_class: cfg.labels_per_class,
        master_seed: cfg.master_seed,
        rows,
    })
}
