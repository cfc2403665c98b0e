//! Graph-regularized sparse coding on the learned graph: objective terms,
//! code sparsity and clustering accuracy for several sparsity weights.

use graphssl::fgsc::predict_clusters_gsc;
use graphssl::synth::{gaussian_blobs, BlobSpec};
use graphssl::{
    accuracy, build_laplacian, build_learned_graph, fit_fgsc, gsc_objective, sample_trial, GscOptions, KMeansConfig,
};

fn main() -> graphssl::Result<()> {
    let data = gaussian_blobs(&BlobSpec::overlapping_three(), 7);
    let trial = sample_trial(&data, 3, 2, 0)?;
    let lap = build_laplacian(&build_learned_graph(&trial, 5, 1e-3)?)?;
    let truth = trial.labels().expect("fixture is labeled");

    for lambda3 in [0.01, 0.1, 1.0] {
        let opts = GscOptions { lambda3, ..GscOptions::new(3) };
        let model = fit_fgsc(trial.features(), &lap, &opts)?;
        let terms = gsc_objective(trial.features(), &model, &lap)?;
        let clusters = predict_clusters_gsc(&model, &KMeansConfig::new(3, 0))?;
        let ac = accuracy(&clusters.assignments, truth)?.ac;
        println!(
            "lambda3 {lambda3:>4}: reconstruction {:.4}, smoothness {:.4}, l1 {:.4}, zeros {:.0}%, AC {ac:.3}",
            terms.reconstruction,
            terms.laplacian,
            terms.sparsity,
            100.0 * model.zero_fraction()
        );
    }
    Ok(())
}
