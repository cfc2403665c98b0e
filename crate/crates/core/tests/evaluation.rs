use graphssl::eval::{best_assignment_exhaustive, best_assignment_hungarian, inertia, mean_and_std};
use graphssl::{accuracy, kmeans, KMeansConfig, GraphLaplacian};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

proptest! {
    #[test]
    fn accuracy_ignores_cluster_names(
        pred in prop::collection::vec(0usize..5, 1..60),
        truth_seed in 0u64..1000,
        shift in 1usize..50,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(truth_seed);
        let truth: Vec<usize> = pred.iter().map(|_| rng.random_range(0..4)).collect();
        let renamed: Vec<usize> = pred.iter().map(|&p| (4 - p) * 3 + shift).collect();
        prop_assert_eq!(accuracy(&pred, &truth).unwrap().ac, accuracy(&renamed, &truth).unwrap().ac);
    }

    #[test]
    fn hungarian_agrees_with_enumeration_on_larger_tables(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = (rng.random_range(1..=9), rng.random_range(1..=9));
        let table = Array2::from_shape_fn((r, c), |_| rng.random_range(0..50usize));
        prop_assert_eq!(best_assignment_hungarian(&table).0, best_assignment_exhaustive(&table).0);
    }

    #[test]
    fn smoothness_is_shift_invariant(seed in 0u64..500, shift in -5.0..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..12);
        let mut w = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random::<f64>();
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
        let lap = GraphLaplacian::from_dense(w).unwrap();
        let v = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let base = lap.smoothness(v.view()).unwrap();
        let moved = lap.smoothness((&v + shift).view()).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((base - moved).abs() <= 1e-9 * (1.0 + base));
    }
}

#[test]
fn single_cluster_scores_majority_fraction() {
    let truth = [0, 0, 0, 1, 1, 2, 0];
    let report = accuracy(&[5; 7], &truth).unwrap();
    assert_eq!(report.matched, 4);
    assert_eq!(report.mapping.get(&5), Some(&0));
}

#[test]
fn three_blob_clustering_matches_permutation_oracle() {
    let truth = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
    let pred = [2, 2, 2, 1, 0, 0, 0, 2, 1, 1, 1, 1];
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let best = perms
        .iter()
        .map(|p| pred.iter().zip(&truth).filter(|&(&c, &t)| p[c] == t).count())
        .max()
        .unwrap();
    let report = accuracy(&pred, &truth).unwrap();
    assert_eq!(report.matched, best);
    assert_eq!(report.ac, best as f64 / 12.0);
}

#[test]
fn kmeans_inertia_history_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points = Array2::from_shape_fn((200, 3), |(i, _)| (i % 4) as f64 * 2.0 + rng.sample::<f64, _>(StandardNormal));
    let result = kmeans(points.view(), &KMeansConfig::new(4, 11)).unwrap();
    for pair in result.inertia_history.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-9 * pair[0]);
    }
    let recomputed = inertia(points.view(), result.centroids.view(), &result.assignments);
    assert!((recomputed - result.inertia).abs() <= 1e-9 * recomputed);
    let again = kmeans(points.view(), &KMeansConfig::new(4, 11)).unwrap();
    assert_eq!(again.assignments, result.assignments);
}

#[test]
fn kmeans_rejects_more_clusters_than_points() {
    assert!(kmeans(Array2::<f64>::zeros((2, 2)).view(), &KMeansConfig::new(3, 0)).is_err());
}

#[test]
fn population_statistics() {
    let (mean, std) = mean_and_std(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(mean, 2.5);
    assert!((std - 1.25f64.sqrt()).abs() < 1e-15);
}
