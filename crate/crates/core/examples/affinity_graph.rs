//! Build the learned, unsupervised and label-weight graphs for one trial and
//! compare how many of their edges cross class boundaries.

use graphssl::synth::{gaussian_blobs, BlobSpec};
use graphssl::{
    build_learned_graph, label_weight_graph, sample_trial, unsupervised_gaussian_graph, AffinityGraph,
};

fn describe(name: &str, graph: &AffinityGraph, labels: &[usize]) {
    let sigma = graph.sigma().map_or("none".to_string(), |s| format!("{s:.4}"));
    println!(
        "{name:>13}: {:>4} directed edges, sigma {sigma:>8}, cross-class fraction {:.3}",
        graph.pattern().edge_count(),
        graph.cross_label_fraction(labels)
    );
}

fn main() -> graphssl::Result<()> {
    let data = gaussian_blobs(&BlobSpec::overlapping_three(), 7);
    let trial = sample_trial(&data, 3, 2, 0)?;
    let labels = trial.labels().expect("fixture is labeled");

    let learned = build_learned_graph(&trial, 5, 1e-3)?;
    describe("learned", &learned, labels);
    describe("unsupervised", &unsupervised_gaussian_graph(&trial, 5)?, labels);
    describe("label-weight", &label_weight_graph(&trial)?, labels);

    learned.check_invariants()?;
    let path = std::env::temp_dir().join("graphssl_learned_graph.txt");
    learned.save(&path)?;
    println!("learned graph written to {}", path.display());
    Ok(())
}
