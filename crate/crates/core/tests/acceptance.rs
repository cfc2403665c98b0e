//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use graphssl::eval::{best_assignment_exhaustive, best_assignment_hungarian};
use graphssl::experiment::{sample_trial, trial_graph};
use graphssl::fgsc::scalar_code_minimizer;
use graphssl::graph::{default_bandwidth, gaussian_reweight, GraphOptions, SparsityPattern};
use graphssl::synth::{gaussian_blobs, BlobSpec};
use graphssl::{
    accuracy, build_laplacian, build_learned_graph_with, fit_fgnmf, fit_fgsc, fit_nmf, label_weight_graph,
    run_experiment, save_dataset, unsupervised_gaussian_graph_with, update_codes, AffinityGraph, Algorithm,
    DataFormat, DataSet, ExperimentConfig, GraphLaplacian, GscOptions, NmfOptions,
};
use ndarray::{array, Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

const FIXTURE_SEED: u64 = 7;
const FIXTURE_TRIALS: usize = 20;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

/// ½ Σ_i Σ_j ‖v_i − v_j‖² W_ij by explicit loops.
fn pairwise_smoothness(v: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let n = v.nrows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d: f64 = (0..v.ncols()).map(|c| (v[[i, c]] - v[[j, c]]).powi(2)).sum();
            total += d * w[[i, j]];
        }
    }
    0.5 * total
}

fn random_symmetric_weights(n: usize, density: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                let value = rng.random::<f64>() * 10.0;
                w[[i, j]] = value;
                w[[j, i]] = value;
            }
        }
    }
    w
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=50);
        let k = rng.random_range(1..=10);
        let w = random_symmetric_weights(n, rng.random_range(0.1..1.0), &mut rng);
        let v = Array2::from_shape_fn((n, k), |_| rng.sample::<f64, _>(StandardNormal));
        let lap = GraphLaplacian::from_dense(w.clone()).map_err(|e| e.to_string())?;
        let trace = lap.smoothness(v.view()).map_err(|e| e.to_string())?;
        let oracle = pairwise_smoothness(&v, &w);
        let rel = (trace - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure(rel <= 1e-10, || format!("n={n} k={k}: trace {trace} vs pairwise {oracle}"))?;
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("100 instances, worst relative error {worst:.2e}"))
}

fn check_graph(name: &str, graph: &AffinityGraph) -> Result<(), String> {
    let lap = build_laplacian(graph).map_err(|e| format!("{name}: {e}"))?;
    let check = lap.check();
    ensure(check.is_psd(), || format!("{name}: min eigenvalue {} vs max {}", check.min_eigenvalue, check.max_eigenvalue))?;
    ensure(check.rows_sum_to_zero(), || {
        format!("{name}: row sum {} vs max degree {}", check.max_abs_row_sum, check.max_degree)
    })
}

fn criterion_2() -> Outcome {
    let fixture = gaussian_blobs(&BlobSpec::overlapping_three(), FIXTURE_SEED);
    let options = GraphOptions::default();
    let mut count = 0;
    for seed in 0..FIXTURE_TRIALS as u64 {
        let trial = sample_trial(&fixture, 3, 2, seed).map_err(|e| e.to_string())?;
        for (name, graph) in [
            ("learned", build_learned_graph_with(&trial, &options)),
            ("unsupervised", unsupervised_gaussian_graph_with(&trial, &options)),
            ("label-weight", label_weight_graph(&trial)),
        ] {
            check_graph(name, &graph.map_err(|e| e.to_string())?)?;
            count += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let n = rng.random_range(2..=60);
        let x = Array2::from_shape_fn((rng.random_range(1..=8), n), |_| rng.random::<f64>());
        let ds = DataSet::new("random", x);
        let k = rng.random_range(1..n);
        let graph = unsupervised_gaussian_graph_with(&ds, &GraphOptions { k, ..Default::default() })
            .map_err(|e| e.to_string())?;
        check_graph("random", &graph)?;
        count += 1;
    }
    Ok(format!("{count} graphs PSD with zero row sums"))
}

fn random_problem(m: usize, n: usize, seed: u64) -> Result<(Array2<f64>, GraphLaplacian), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((m, n), |_| rng.random::<f64>());
    let graph = unsupervised_gaussian_graph_with(&DataSet::new("p", x.clone()), &GraphOptions::default())
        .map_err(|e| e.to_string())?;
    check_graph("problem", &graph)?;
    Ok((x, build_laplacian(&graph).map_err(|e| e.to_string())?))
}

fn non_increasing(trace: &[f64], slack: f64) -> Result<(), String> {
    for (t, pair) in trace.windows(2).enumerate() {
        ensure(pair[1] <= pair[0] + slack, || {
            format!("objective rose at step {t}: {} -> {}", pair[0], pair[1])
        })?;
    }
    Ok(())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut steps = 0;
    for problem in 0..10u64 {
        let (x, lap) = random_problem(20, 40, 100 + problem)?;
        for lambda1 in [0.0, 0.1, 1.0, 10.0] {
            let opts = NmfOptions { k: 3, lambda1, max_iters: 200, tol: 0.0, seed: problem };
            let model = fit_fgnmf(x.view(), &lap, &opts).map_err(|e| e.to_string())?;
            let trace = &model.objective_trace;
            non_increasing(trace, 1e-9 * (1.0 + trace[0]))
                .map_err(|e| format!("problem {problem}, lambda1 {lambda1}: {e}"))?;
            steps += trace.len() - 1;
        }
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!("{steps} consecutive objective pairs non-increasing"))
}

fn criterion_4() -> Outcome {
    let mut compared = 0;
    for seed in 0..5u64 {
        let (x, lap) = random_problem(20, 40, 200 + seed)?;
        let opts = NmfOptions { k: 3, lambda1: 0.0, max_iters: 100, tol: 0.0, seed };
        let graph_model = fit_fgnmf(x.view(), &lap, &opts).map_err(|e| e.to_string())?;
        let plain = fit_nmf(x.view(), &opts).map_err(|e| e.to_string())?;
        let bits = |a: &Array2<f64>| a.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        ensure(bits(&graph_model.u) == bits(&plain.u), || format!("seed {seed}: U differs"))?;
        ensure(bits(&graph_model.v) == bits(&plain.v), || format!("seed {seed}: V differs"))?;
        compared += graph_model.u.len() + graph_model.v.len();
    }
    Ok(format!("{compared} factor entries bitwise identical over 5 seeds"))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut updates = 0;
    for problem in 0..10u64 {
        let (x, lap) = random_problem(20, 40, 300 + problem)?;
        let c = [1.0, 0.5, 2.0][problem as usize % 3];
        let opts = GscOptions {
            k: 5,
            lambda2: [0.0, 0.1, 1.0, 10.0][problem as usize % 4],
            lambda3: 0.1,
            c,
            outer_iters: 40,
            tol: 0.0,
            seed: problem,
            ..GscOptions::new(5)
        };
        let model = fit_fgsc(x.view(), &lap, &opts).map_err(|e| e.to_string())?;
        let trace = &model.objective_trace;
        non_increasing(trace, 1e-8 * (1.0 + trace[0])).map_err(|e| format!("problem {problem}: {e}"))?;
        for (t, &norm) in model.column_norm_trace.iter().enumerate() {
            ensure(norm <= c + 1e-9, || format!("problem {problem}: squared column norm {norm} > {c} at update {t}"))?;
        }
        updates += model.column_norm_trace.len();
    }
    within(Duration::from_secs(60), start)?;
    Ok(format!("{updates} dictionary updates feasible, objectives non-increasing"))
}

fn random_orthonormal(m: usize, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut q = Array2::<f64>::zeros((m, k));
    for r in 0..k {
        let mut col: Array1<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for p in 0..r {
            let prev = q.column(p).to_owned();
            let proj = prev.dot(&col);
            col.scaled_add(-proj, &prev);
        }
        let norm = col.dot(&col).sqrt();
        q.column_mut(r).assign(&(col / norm));
    }
    q
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(2..=12);
        let k = rng.random_range(1..=m);
        let lambda3 = rng.random_range(0.0..2.0);
        let b = random_orthonormal(m, k, &mut rng);
        let x = Array2::from_shape_fn((m, 1), |_| rng.sample::<f64, _>(StandardNormal));
        let mut s = Array2::from_shape_fn((k, 1), |_| rng.sample::<f64, _>(StandardNormal));
        update_codes(x.view(), &b, &mut s, &GraphLaplacian::empty(1), 0.0, lambda3, 1)
            .map_err(|e| e.to_string())?;
        for r in 0..k {
            let z = b.column(r).dot(&x.column(0));
            let t = lambda3 / 2.0;
            let expected = z.signum() * (z.abs() - t).max(0.0);
            let err = (s[[r, 0]] - expected).abs();
            worst = worst.max(err);
            ensure(err <= 1e-6, || format!("code {r}: {} vs soft threshold {expected}", s[[r, 0]]))?;
        }
    }
    ensure(scalar_code_minimizer(1.0, 0.3, 1.0) == 0.0, || "threshold band not zero".into())?;
    Ok(format!("100 problems, worst deviation {worst:.2e}"))
}

/// Independent oracle: best one-to-one matching by enumerating every
/// permutation of the padded square table.
fn permutation_oracle(table: &Array2<usize>) -> usize {
    fn permute(items: &mut Vec<usize>, start: usize, visit: &mut dyn FnMut(&[usize])) {
        if start == items.len() {
            visit(items);
            return;
        }
        for i in start..items.len() {
            items.swap(start, i);
            permute(items, start + 1, visit);
            items.swap(start, i);
        }
    }
    let s = table.nrows().max(table.ncols());
    let cell = |r: usize, c: usize| if r < table.nrows() && c < table.ncols() { table[[r, c]] } else { 0 };
    let mut best = 0;
    permute(&mut (0..s).collect(), 0, &mut |perm| {
        best = best.max(perm.iter().enumerate().map(|(r, &c)| cell(r, c)).sum());
    });
    best
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for t in 0..200 {
        let rows = rng.random_range(1..=8);
        let cols = rng.random_range(1..=8);
        let table = Array2::from_shape_fn((rows, cols), |_| rng.random_range(0..20usize));
        let (hungarian, _) = best_assignment_hungarian(&table);
        let (exhaustive, _) = best_assignment_exhaustive(&table);
        let oracle = permutation_oracle(&table);
        ensure(hungarian == exhaustive && exhaustive == oracle, || {
            format!("table {t}: hungarian {hungarian}, exhaustive {exhaustive}, oracle {oracle}")
        })?;
    }
    for t in 0..50 {
        let k = rng.random_range(1..=15);
        let truth: Vec<usize> = (0..rng.random_range(k..=100)).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        let mut names: Vec<usize> = (0..k).map(|c| 1000 + 7 * c).collect();
        names.shuffle(&mut rng);
        let renamed: Vec<usize> = truth.iter().map(|&c| names[c]).collect();
        let ac = accuracy(&renamed, &truth).map_err(|e| e.to_string())?.ac;
        ensure(ac == 1.0, || format!("renamed clustering {t} scored {ac}"))?;
    }
    Ok("200 tables agree with permutation search; 50 renamed clusterings score 1.0".into())
}

fn criterion_8() -> Outcome {
    let pattern = SparsityPattern::from_neighbors(vec![vec![1, 2], vec![0], vec![0]], 1);
    let sigma = 1.5f64;
    let adjacency = array![[0.0, 0.0, 2.0 * sigma * sigma], [0.0, 0.0, 0.0], [2.0 * sigma * sigma, 0.0, 0.0]];
    let graph = gaussian_reweight(&pattern, &adjacency, sigma).map_err(|e| e.to_string())?;
    let w = graph.weights();
    ensure(w.get(0, 1) == 1.0, || format!("A=0 gave {}", w.get(0, 1)))?;
    let e_inv = (-1.0f64).exp();
    ensure((w.get(0, 2) - e_inv).abs() <= 1e-9, || format!("A=2σ² gave {}", w.get(0, 2)))?;
    ensure(w.get(1, 2) == 0.0, || "off-pattern edge has weight".into())?;
    let bandwidth = default_bandwidth(array![[0.0, 25.0], [25.0, 0.0]].view()).map_err(|e| e.to_string())?;
    ensure(bandwidth == 312.5, || format!("bandwidth {bandwidth}"))?;
    Ok(format!("w(0)=1, w(2σ²)={:.12}, σ=312.5", w.get(0, 2)))
}

fn fixture_config(algorithm: Algorithm) -> ExperimentConfig {
    ExperimentConfig {
        algorithm,
        k_clusters: 3,
        labels_per_class: 2,
        test_runs: FIXTURE_TRIALS,
        knn_k: 5,
        ..Default::default()
    }
}

fn mean_ac(fixture: &DataSet, algorithm: Algorithm) -> Result<f64, String> {
    let report = run_experiment(fixture, &fixture_config(algorithm)).map_err(|e| e.to_string())?;
    ensure(report.failures() == 0, || format!("{algorithm}: {} failed runs", report.failures()))?;
    Ok(report.mean_std().0)
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let fixture = gaussian_blobs(&BlobSpec::overlapping_three(), FIXTURE_SEED);
    let gnmf = mean_ac(&fixture, Algorithm::Gnmf)?;
    let fgnmf = mean_ac(&fixture, Algorithm::Fgnmf)?;
    let gsc = mean_ac(&fixture, Algorithm::Gsc)?;
    let fgsc = mean_ac(&fixture, Algorithm::Fgsc)?;
    let summary = format!("FGNMF {fgnmf:.4} vs GNMF {gnmf:.4}; FGSC {fgsc:.4} vs GSC {gsc:.4}");
    ensure(fgnmf >= gnmf && fgsc >= gsc, || summary.clone())?;
    within(Duration::from_secs(180), start)?;
    Ok(summary)
}

fn criterion_10() -> Outcome {
    let fixture = gaussian_blobs(&BlobSpec::overlapping_three(), FIXTURE_SEED);
    let (mut learned, mut unsupervised) = (0.0, 0.0);
    for seed in 0..FIXTURE_TRIALS as u64 {
        let trial = sample_trial(&fixture, 3, 2, seed).map_err(|e| e.to_string())?;
        let labels = trial.labels().expect("fixture is labeled");
        let fraction = |alg| -> Result<f64, String> {
            let graph = trial_graph(&trial, &fixture_config(alg))
                .map_err(|e| e.to_string())?
                .expect("graph algorithm");
            Ok(graph.cross_label_fraction(labels))
        };
        learned += fraction(Algorithm::Fgnmf)?;
        unsupervised += fraction(Algorithm::Gnmf)?;
    }
    let n = FIXTURE_TRIALS as f64;
    let summary = format!("cross-class edge fraction learned {:.4} vs unsupervised {:.4}", learned / n, unsupervised / n);
    ensure(learned <= unsupervised, || summary.clone())?;
    Ok(summary)
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("blobs.csv");
    let fixture = gaussian_blobs(&BlobSpec::overlapping_three(), FIXTURE_SEED);
    save_dataset(&fixture, &data, DataFormat::Csv).map_err(|e| e.to_string())?;
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, "algorithm=fgsc\nk_clusters=3\nlabels_per_class=2\ntest_runs=4\nmaster_seed=11\n")
        .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_graphssl"))
            .args(["run", "--data"])
            .arg(&data)
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .env("GRAPHSSL_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure(outputs[0] == outputs[1], || "run outputs differ".into())?;
    Ok(format!("two runs wrote identical {}-byte files", outputs[0].len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("trace identity", criterion_1),
        ("Laplacian PSD and zero row sums", criterion_2),
        ("FGNMF monotonicity", criterion_3),
        ("FGNMF with lambda1=0 equals plain NMF", criterion_4),
        ("FGSC monotonicity and feasibility", criterion_5),
        ("lasso oracle", criterion_6),
        ("accuracy oracle", criterion_7),
        ("Gaussian weight spot values", criterion_8),
        ("semi-supervised benefit", criterion_9),
        ("learned-graph purity", criterion_10),
        ("end-to-end determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match run() {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail} ({:.2?})", i + 1, start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
