//! The repeated-trial protocol for every algorithm on the synthetic fixture,
//! printed as a mean ± std accuracy table.

use graphssl::synth::{gaussian_blobs, BlobSpec};
use graphssl::{run_experiment, Algorithm, ExperimentConfig};

fn main() -> graphssl::Result<()> {
    let data = gaussian_blobs(&BlobSpec::overlapping_three(), 7);
    let algorithms = [
        Algorithm::KMeans,
        Algorithm::Gnmf,
        Algorithm::Lgnmf,
        Algorithm::Fgnmf,
        Algorithm::Gsc,
        Algorithm::Lgsc,
        Algorithm::Fgsc,
    ];
    println!("{:<8} {:>16}", "method", "AC (20 trials)");
    for algorithm in algorithms {
        let cfg = ExperimentConfig {
            algorithm,
            k_clusters: 3,
            labels_per_class: 2,
            test_runs: 20,
            ..Default::default()
        };
        let report = run_experiment(&data, &cfg)?;
        let (mean, std) = report.mean_std();
        println!("{:<8} {:>8.2} ± {:<5.2}", algorithm.to_string(), 100.0 * mean, 100.0 * std);
    }
    Ok(())
}
