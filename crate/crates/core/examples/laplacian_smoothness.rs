//! Graph Laplacian diagnostics and the smoothness penalty Tr(VᵀLV) for a
//! class-indicator representation versus a random one.

use graphssl::synth::{gaussian_blobs, BlobSpec};
use graphssl::{build_laplacian, build_learned_graph, sample_trial};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> graphssl::Result<()> {
    let data = gaussian_blobs(&BlobSpec::overlapping_three(), 7);
    let trial = sample_trial(&data, 3, 2, 0)?;
    let lap = build_laplacian(&build_learned_graph(&trial, 5, 1e-3)?)?;

    let check = lap.check();
    println!(
        "eigenvalues in [{:.3e}, {:.3e}], largest |row sum| {:.3e}, PSD {}, zero rows {}",
        check.min_eigenvalue,
        check.max_eigenvalue,
        check.max_abs_row_sum,
        check.is_psd(),
        check.rows_sum_to_zero()
    );

    let labels = trial.labels().expect("fixture is labeled");
    let indicator = Array2::from_shape_fn((trial.n_samples(), 3), |(i, c)| f64::from(u8::from(labels[i] == c)));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let random = Array2::from_shape_fn((trial.n_samples(), 3), |_| f64::from(u8::from(rng.random::<f64>() < 1.0 / 3.0)));
    println!("smoothness of class indicators: {:.4}", lap.smoothness(indicator.view())?);
    println!("smoothness of random indicators: {:.4}", lap.smoothness(random.view())?);
    Ok(())
}
