//! k-means clustering of learned representations and clustering accuracy
//! (AC) under the best one-to-one cluster → class mapping.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GraphSslError, Result};

/// Largest contingency size solved by enumerating permutations.
pub const EXHAUSTIVE_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            restarts: 10,
            max_iters: 100,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub assignments: Vec<usize>,
    /// k×d.
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub restarts_used: usize,
    pub seed: u64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of squared distances from each point to its assigned centroid.
pub fn inertia(points: ArrayView2<'_, f64>, centroids: ArrayView2<'_, f64>, assignments: &[usize]) -> f64 {
    assignments
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(points.row(i), centroids.row(c)))
        .sum()
}

/// Greedy D²-weighted seeding.
fn seed_centroids(points: ArrayView2<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut centroids = Array2::zeros((k, points.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(first))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            while nearest[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&points.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    centroids
}

fn assign(points: ArrayView2<'_, f64>, centroids: &Array2<f64>, assignments: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (i, slot) in assignments.iter_mut().enumerate() {
        let mut best = (f64::INFINITY, 0);
        for (c, centroid) in centroids.rows().into_iter().enumerate() {
            let d = sq_dist(points.row(i), centroid);
            if d < best.0 {
                best = (d, c);
            }
        }
        *slot = best.1;
        total += best.0;
    }
    total
}

/// Recomputes centroids as cluster means; an empty cluster takes the point
/// farthest from its current centroid.
fn update_centroids(points: ArrayView2<'_, f64>, centroids: &mut Array2<f64>, assignments: &mut [usize]) {
    let k = centroids.nrows();
    let mut sums = Array2::<f64>::zeros(centroids.dim());
    let mut counts = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        sums.row_mut(c).scaled_add(1.0, &points.row(i));
        counts[c] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            let mean = &sums.row(c) / counts[c] as f64;
            centroids.row_mut(c).assign(&mean);
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let farthest = (0..assignments.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .map(|i| (sq_dist(points.row(i), centroids.row(assignments[i])), i))
            .fold(None, |best: Option<(f64, usize)>, cand| match best {
                Some(b) if b.0 >= cand.0 => Some(b),
                _ => Some(cand),
            });
        if let Some((_, i)) = farthest {
            counts[assignments[i]] -= 1;
            assignments[i] = c;
            counts[c] = 1;
            centroids.row_mut(c).assign(&points.row(i));
        }
    }
}

struct Run {
    assignments: Vec<usize>,
    centroids: Array2<f64>,
    inertia: f64,
    history: Vec<f64>,
}

fn lloyd(points: ArrayView2<'_, f64>, k: usize, max_iters: usize, seed: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignments = vec![usize::MAX; points.nrows()];
    let mut history = Vec::new();
    let mut previous = assignments.clone();
    for iter in 0..max_iters.max(1) {
        let total = assign(points, &centroids, &mut assignments);
        history.push(total);
        if iter > 0 && assignments == previous {
            break;
        }
        update_centroids(points, &mut centroids, &mut assignments);
        previous.clone_from(&assignments);
    }
    let final_inertia = inertia(points, centroids.view(), &assignments);
    if history.last().is_some_and(|&last| final_inertia != last) {
        history.push(final_inertia);
    }
    Run {
        assignments,
        centroids,
        inertia: final_inertia,
        history,
    }
}

/// Lloyd's algorithm with D²-weighted seeding; restart `r` uses seed
/// `cfg.seed + r` and the lowest-inertia restart wins (earliest on ties).
pub fn kmeans(points: ArrayView2<'_, f64>, cfg: &KMeansConfig) -> Result<ClusteringResult> {
    let n = points.nrows();
    if cfg.k == 0 || cfg.k > n {
        return Err(GraphSslError::InvalidParameter(format!(
            "k-means needs 1 <= k <= n, got k={} n={}",
            cfg.k, n
        )));
    }
    if points.ncols() == 0 {
        return Err(GraphSslError::InvalidParameter("k-means needs d >= 1".into()));
    }
    let restarts = cfg.restarts.max(1);
    let mut best: Option<Run> = None;
    for r in 0..restarts {
        let run = lloyd(points, cfg.k, cfg.max_iters, cfg.seed.wrapping_add(r as u64));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    Ok(ClusteringResult {
        assignments: best.assignments,
        centroids: best.centroids,
        inertia: best.inertia,
        restarts_used: restarts,
        seed: cfg.seed,
        inertia_history: best.history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub ac: f64,
    pub matched: usize,
    /// Cluster id → class label for every cluster that received a class.
    pub mapping: BTreeMap<usize, usize>,
    /// Rows: clusters in ascending id order; columns: classes in ascending
    /// label order.
    pub confusion: Array2<usize>,
    pub cluster_ids: Vec<usize>,
    pub class_labels: Vec<usize>,
}

fn dense_ids(values: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut uniq: Vec<usize> = values.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let idx = values
        .iter()
        .map(|v| uniq.binary_search(v).expect("value present"))
        .collect();
    (uniq, idx)
}

/// Confusion counts between predicted clusters and true classes.
pub fn contingency(predicted: &[usize], truth: &[usize]) -> Result<(Array2<usize>, Vec<usize>, Vec<usize>)> {
    if predicted.len() != truth.len() {
        return Err(GraphSslError::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(GraphSslError::InvalidParameter("accuracy of empty labeling".into()));
    }
    let (clusters, p) = dense_ids(predicted);
    let (classes, t) = dense_ids(truth);
    let mut table = Array2::zeros((clusters.len(), classes.len()));
    for (&a, &b) in p.iter().zip(&t) {
        table[[a, b]] += 1;
    }
    Ok((table, clusters, classes))
}

fn square(table: &Array2<usize>) -> Array2<usize> {
    let s = table.nrows().max(table.ncols());
    let mut sq = Array2::zeros((s, s));
    sq.slice_mut(ndarray::s![..table.nrows(), ..table.ncols()]).assign(table);
    sq
}

/// Maximum-weight perfect matching of a square count table by trying every
/// permutation. Returns the total and the column chosen for each row.
pub fn best_assignment_exhaustive(table: &Array2<usize>) -> (usize, Vec<usize>) {
    fn recurse(
        table: &Array2<usize>,
        row: usize,
        used: &mut [bool],
        current: &mut Vec<usize>,
        acc: usize,
        best: &mut (usize, Vec<usize>),
    ) {
        let s = table.nrows();
        if row == s {
            if acc > best.0 || best.1.is_empty() {
                *best = (acc, current.clone());
            }
            return;
        }
        for col in 0..s {
            if !used[col] {
                used[col] = true;
                current.push(col);
                recurse(table, row + 1, used, current, acc + table[[row, col]], best);
                current.pop();
                used[col] = false;
            }
        }
    }
    let table = square(table);
    let mut best = (0, Vec::new());
    recurse(&table, 0, &mut vec![false; table.nrows()], &mut Vec::new(), 0, &mut best);
    best
}

/// Maximum-weight perfect matching via the Hungarian method (shortest
/// augmenting paths with potentials), O(s³).
pub fn best_assignment_hungarian(table: &Array2<usize>) -> (usize, Vec<usize>) {
    let table = square(table);
    let s = table.nrows();
    if s == 0 {
        return (0, Vec::new());
    }
    let max = table.iter().copied().max().unwrap_or(0) as i64;
    // minimize max - count; 1-based arrays with a virtual column 0
    let cost = |i: usize, j: usize| max - table[[i - 1, j - 1]] as i64;
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; s + 1];
    let mut v = vec![0i64; s + 1];
    let mut owner = vec![0usize; s + 1];
    let mut way = vec![0usize; s + 1];
    for i in 1..=s {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; s + 1];
        let mut used = vec![false; s + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=s {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=s {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut cols = vec![0; s];
    for j in 1..=s {
        cols[owner[j] - 1] = j - 1;
    }
    let total = cols.iter().enumerate().map(|(r, &c)| table[[r, c]]).sum();
    (total, cols)
}

/// Clustering accuracy: fraction of samples whose cluster maps to their
/// true class under the best one-to-one mapping.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<AccuracyReport> {
    let (confusion, cluster_ids, class_labels) = contingency(predicted, truth)?;
    let size = confusion.nrows().max(confusion.ncols());
    let (matched, cols) = if size <= EXHAUSTIVE_LIMIT {
        best_assignment_exhaustive(&confusion)
    } else {
        best_assignment_hungarian(&confusion)
    };
    let mapping = cols
        .iter()
        .enumerate()
        .filter(|&(r, &c)| r < cluster_ids.len() && c < class_labels.len())
        .map(|(r, &c)| (cluster_ids[r], class_labels[c]))
        .collect();
    Ok(AccuracyReport {
        ac: matched as f64 / predicted.len() as f64,
        matched,
        mapping,
        confusion,
        cluster_ids,
        class_labels,
    })
}

/// Population mean and standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_dimensional_two_clusters() {
        let points = array![[0.0], [1.0], [10.0], [11.0]];
        let res = kmeans(points.view(), &KMeansConfig::new(2, 3)).unwrap();
        assert_eq!(res.assignments[0], res.assignments[1]);
        assert_eq!(res.assignments[2], res.assignments[3]);
        assert_ne!(res.assignments[0], res.assignments[2]);
        assert_eq!(res.inertia, 1.0);
    }

    #[test]
    fn repeated_groups_give_zero_inertia() {
        let points = array![[1.0, 1.0], [5.0, 0.0], [1.0, 1.0], [5.0, 0.0], [-2.0, 3.0], [-2.0, 3.0]];
        let res = kmeans(points.view(), &KMeansConfig::new(3, 0)).unwrap();
        assert_eq!(res.inertia, 0.0);
        assert_eq!(accuracy(&res.assignments, &[0, 1, 0, 1, 2, 2]).unwrap().ac, 1.0);
    }

    #[test]
    fn every_point_its_own_cluster() {
        let points = array![[0.0], [2.0], [3.0], [7.5]];
        let res = kmeans(points.view(), &KMeansConfig::new(4, 1)).unwrap();
        assert_eq!(res.inertia, 0.0);
        let mut a = res.assignments.clone();
        a.sort_unstable();
        assert_eq!(a, vec![0, 1, 2, 3]);
    }

    #[test]
    fn k_larger_than_n_fails() {
        let points = array![[0.0], [1.0]];
        assert!(kmeans(points.view(), &KMeansConfig::new(3, 0)).is_err());
    }

    #[test]
    fn duplicates_with_too_many_clusters_stay_valid() {
        let points = array![[0.0], [0.0], [0.0], [1.0]];
        let res = kmeans(points.view(), &KMeansConfig::new(3, 5)).unwrap();
        assert!(res.assignments.iter().all(|&a| a < 3));
        let recomputed = inertia(points.view(), res.centroids.view(), &res.assignments);
        assert_eq!(recomputed, res.inertia);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap().ac, 0.5);
        let single = accuracy(&[0; 10], &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]).unwrap();
        assert_eq!(single.ac, 0.5);
        let renamed = accuracy(&[7, 7, 2, 2, 9], &[0, 0, 1, 1, 2]).unwrap();
        assert_eq!(renamed.ac, 1.0);
        assert_eq!(renamed.mapping[&7], 0);
        assert_eq!(renamed.mapping[&2], 1);
    }

    #[test]
    fn accuracy_length_mismatch() {
        assert!(accuracy(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn rectangular_tables_are_padded() {
        // 3 clusters, 2 classes
        let rep = accuracy(&[0, 0, 1, 1, 2, 2], &[0, 0, 1, 1, 1, 0]).unwrap();
        assert_eq!(rep.matched, 4);
        assert_eq!(rep.mapping.len(), 2);
    }

    #[test]
    fn hungarian_on_known_table() {
        let t = array![[0, 5, 1], [4, 0, 0], [0, 2, 3]];
        assert_eq!(best_assignment_hungarian(&t).0, 12);
        assert_eq!(best_assignment_exhaustive(&t).0, 12);
    }

    #[test]
    fn mean_and_std_of_constant() {
        assert_eq!(mean_and_std(&[0.5, 0.5]), (0.5, 0.0));
    }
}
