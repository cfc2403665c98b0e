//! Graph-regularized NMF on the learned graph: objective trace, then k-means
//! on the learned representation.

use graphssl::fgnmf::predict_clusters_nmf;
use graphssl::synth::{gaussian_blobs, BlobSpec};
use graphssl::{accuracy, build_laplacian, build_learned_graph, fit_fgnmf, sample_trial, KMeansConfig, NmfOptions};

fn main() -> graphssl::Result<()> {
    let data = gaussian_blobs(&BlobSpec::overlapping_three(), 7);
    let trial = sample_trial(&data, 3, 2, 0)?;
    let lap = build_laplacian(&build_learned_graph(&trial, 5, 1e-3)?)?;
    let truth = trial.labels().expect("fixture is labeled");

    for lambda1 in [0.0, 1.0, 10.0] {
        let opts = NmfOptions { lambda1, ..NmfOptions::new(3) };
        let model = fit_fgnmf(trial.features(), &lap, &opts)?;
        let clusters = predict_clusters_nmf(&model, &KMeansConfig::new(3, 0))?;
        let ac = accuracy(&clusters.assignments, truth)?.ac;
        let trace = &model.objective_trace;
        println!(
            "lambda1 {lambda1:>4}: objective {:.4} -> {:.4} in {} iterations, AC {ac:.3}",
            trace[0],
            trace[trace.len() - 1],
            model.iterations_run
        );
    }
    Ok(())
}
