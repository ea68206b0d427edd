//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Runs with `cargo test --test acceptance`. Criterion 9 needs real
//! leaderboard data in `MICROBENCH_MMLU_PRO_DIR` and is skipped otherwise.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use microbench::data::{ModelId, Performance, PredictionMatrix};
use microbench::harness::{self, ExperimentConfig, Metric, Split, Status};
use microbench::irt::{fit_irt, IrtConfig, Layout, Objective};
use microbench::metaeval::{self, BucketSpec};
use microbench::seed;
use microbench::selection::{
    self, pca_project, Method, MethodParams, ResolvedMicro, SelectionRequest,
};
use microbench::synthetic::{self, Structure, SyntheticSpec};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_microbench"))
}

fn iid(models: usize, examples: usize, range: [f64; 2], seed_value: u64) -> PredictionMatrix {
    synthetic::generate(&SyntheticSpec::iid(models, examples, range, seed_value))
        .unwrap()
        .0
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

fn perf_map(ids: &[ModelId], values: &[f64]) -> HashMap<ModelId, Performance> {
    ids.iter()
        .cloned()
        .zip(values.iter().map(|&v| Performance::new(v).unwrap()))
        .collect()
}

/// Kendall's tau against brute-force discordant-pair enumeration.
fn kendall_oracle() -> Outcome {
    let mut rng = seed::rng(101);
    for case in 0..1000 {
        let t = rng.random_range(2..=8);
        let draw = |rng: &mut seed::Rng| -> f64 {
            if case % 2 == 0 {
                // coarse grid: many ties on both sides
                10.0 * rng.random_range(0..5) as f64
            } else {
                100.0 * rng.random::<f64>()
            }
        };
        let full: Vec<f64> = (0..t).map(|_| draw(&mut rng)).collect();
        let micro: Vec<f64> = (0..t).map(|_| draw(&mut rng)).collect();
        let ids: Vec<ModelId> = (0..t)
            .map(|i| ModelId::new(format!("m{i}")).unwrap())
            .collect();
        let tau =
            metaeval::kendall_tau(&perf_map(&ids, &full), &perf_map(&ids, &micro), &ids).unwrap();
        let mut discordant = 0;
        for i in 0..t {
            for j in (i + 1)..t {
                let sf = (full[i] - full[j]).partial_cmp(&0.0).unwrap();
                let sm = (micro[i] - micro[j]).partial_cmp(&0.0).unwrap();
                discordant += (sf != sm) as usize;
            }
        }
        let expected = 1.0 - 2.0 * discordant as f64 / (t * (t - 1) / 2) as f64;
        if tau != expected {
            return Outcome::Fail(format!("case {case}: tau {tau} vs oracle {expected}"));
        }
    }
    Outcome::Pass("1000 maps, exact match".into())
}

/// Library agreement curve (20,000 selections) against a direct simulation
/// of the agreement probability (100,000 resamples).
fn agreement_oracle() -> Outcome {
    const LIBRARY_DRAWS: u64 = 20_000;
    const ORACLE_DRAWS: usize = 100_000;
    let matrix = iid(60, 1000, [30.0, 70.0], 2);
    let ids = matrix.models().to_vec();
    let nm = ids.len();
    let hits: Vec<i64> = (0..nm)
        .map(|m| matrix.correct_row(m).iter().map(|&b| b as i64).sum())
        .collect();
    let full: HashMap<ModelId, Performance> = (0..nm)
        .map(|m| (ids[m].clone(), matrix.full_accuracy(m)))
        .collect();
    let spec = BucketSpec::new(0.5).unwrap();
    let params = MethodParams::default();
    let mut worst = 0.0f64;
    for n in [10usize, 100] {
        let mut lib_agree: Vec<u64> = Vec::new();
        let mut lib_total: Vec<u64> = Vec::new();
        for s in 0..LIBRARY_DRAWS {
            let req = SelectionRequest {
                matrix: &matrix,
                n,
                seed: s,
                params: &params,
            };
            let micro = selection::select(Method::RandomUniform, &req, None).unwrap();
            let resolved = ResolvedMicro::new(&micro, &matrix).unwrap();
            let est: HashMap<ModelId, Performance> = (0..nm)
                .map(|m| (ids[m].clone(), resolved.estimate(&matrix, m)))
                .collect();
            let curve = metaeval::agreement_curve(
                &metaeval::pairwise_comparisons(&full, &est, &ids).unwrap(),
                &spec,
            );
            if lib_total.len() < curve.buckets.len() {
                lib_total.resize(curve.buckets.len(), 0);
                lib_agree.resize(curve.buckets.len(), 0);
            }
            for (k, b) in curve.buckets.iter().enumerate() {
                lib_agree[k] += b.agree;
                lib_total[k] += b.total;
            }
        }

        // oracle: orient pairs by integer hit counts (ties by id = index),
        // bucket by exact integer arithmetic, agree iff micro hits strictly
        // favour the better model
        let mut pairs = Vec::new();
        for i in 0..nm {
            for j in (i + 1)..nm {
                let (hi, lo) = if hits[i] >= hits[j] { (i, j) } else { (j, i) };
                let dh = hits[hi] - hits[lo];
                // delta = dh / 10 points; bucket = floor(delta / 0.5 + 0.5)
                pairs.push((hi, lo, ((2 * dh + 5) / 10) as usize));
            }
        }
        let buckets = pairs.iter().map(|p| p.2).max().unwrap() + 1;
        let mut agree = vec![0u64; buckets];
        let mut total = vec![0u64; buckets];
        let mut rng = seed::rng(777 + n as u64);
        let mut pool: Vec<usize> = (0..matrix.num_examples()).collect();
        let mut micro_hits = vec![0i64; nm];
        for _ in 0..ORACLE_DRAWS {
            for i in 0..n {
                let j = rng.random_range(i..pool.len());
                pool.swap(i, j);
            }
            for (m, h) in micro_hits.iter_mut().enumerate() {
                let row = matrix.correct_row(m);
                *h = pool[..n].iter().map(|&e| row[e] as i64).sum();
            }
            for &(hi, lo, k) in &pairs {
                total[k] += 1;
                agree[k] += (micro_hits[hi] > micro_hits[lo]) as u64;
            }
        }
        if lib_total.len() != buckets {
            return Outcome::Fail(format!(
                "n={n}: {} library buckets vs {buckets} oracle buckets",
                lib_total.len()
            ));
        }
        for k in 0..buckets {
            if (total[k] == 0) != (lib_total[k] == 0) {
                return Outcome::Fail(format!("n={n}: bucket {k} emptiness differs"));
            }
            if total[k] == 0 {
                continue;
            }
            let p_lib = lib_agree[k] as f64 / lib_total[k] as f64;
            let p_oracle = agree[k] as f64 / total[k] as f64;
            worst = worst.max((p_lib - p_oracle).abs());
            if (p_lib - p_oracle).abs() > 0.02 {
                return Outcome::Fail(format!(
                    "n={n}: bucket {k} library {p_lib:.4} vs oracle {p_oracle:.4}"
                ));
            }
        }
    }
    Outcome::Pass(format!(
        "max |diff| {worst:.4} over all buckets, n in {{10, 100}}"
    ))
}

/// Uniform random and Horvitz-Thompson stratified estimates average to the
/// full-pool accuracy.
fn unbiasedness() -> Outcome {
    const SEEDS: u64 = 10_000;
    let n = 20;
    let matrix = iid(20, 200, [30.0, 70.0], 3);
    let params = MethodParams::default();
    let mut worst = 0.0f64;
    for method in [Method::RandomUniform, Method::StratifiedConfidence] {
        let mut sums = vec![0.0; matrix.num_models()];
        for s in 0..SEEDS {
            let req = SelectionRequest {
                matrix: &matrix,
                n,
                seed: s,
                params: &params,
            };
            let micro = selection::select(method, &req, None).unwrap();
            let resolved = ResolvedMicro::new(&micro, &matrix).unwrap();
            for (m, sum) in sums.iter_mut().enumerate() {
                *sum += resolved.estimate(&matrix, m).value();
            }
        }
        for (m, sum) in sums.iter().enumerate() {
            let truth = matrix.full_accuracy(m).value();
            let p = truth / 100.0;
            let se = 100.0 * (p * (1.0 - p) / n as f64).sqrt() / (SEEDS as f64).sqrt();
            let z = (sum / SEEDS as f64 - truth).abs() / se;
            worst = worst.max(z);
            if z > 3.0 {
                return Outcome::Fail(format!("{} model {m}: |bias| = {z:.2} SE", method.tag()));
            }
        }
    }
    Outcome::Pass(format!(
        "40 model/method checks, worst |bias| {worst:.2} SE"
    ))
}

/// Planted difficulty recovery and gradient check.
fn irt_recovery() -> Outcome {
    let mut rng = seed::rng(41);
    let mut worst_rel = 0.0f64;
    for _ in 0..20 {
        let dim = rng.random_range(1..=3);
        let layout = Layout {
            models: 5,
            examples: 7,
            dim,
        };
        let bits: Vec<u8> = (0..35).map(|_| rng.random_bool(0.5) as u8).collect();
        let params: Vec<f64> = (0..layout.len())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let obj = Objective {
            layout,
            bits: &bits,
            l2: 1e-4,
        };
        let mut grad = vec![0.0; params.len()];
        obj.eval(&params, &mut grad);
        for i in 0..params.len() {
            let h = 1e-5;
            let mut p = params.clone();
            p[i] += h;
            let up = obj.value(&p);
            p[i] -= 2.0 * h;
            let down = obj.value(&p);
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - grad[i]).abs() / grad[i].abs().max(numeric.abs()).max(1e-3);
            worst_rel = worst_rel.max(rel);
        }
    }
    if worst_rel >= 1e-4 {
        return Outcome::Fail(format!("gradient relative error {worst_rel:.2e}"));
    }
    let spec = SyntheticSpec {
        num_models: 200,
        num_examples: 500,
        num_subtasks: 1,
        accuracy_range: [0.0, 100.0],
        structure: Structure::IrtPlanted { dim: 2 },
        seed: 8,
    };
    let (matrix, truth) = synthetic::generate(&spec).unwrap();
    let fit = match fit_irt(
        &matrix,
        &IrtConfig {
            dim: 2,
            ..IrtConfig::default()
        },
    ) {
        Ok(f) => f,
        Err(e) => return Outcome::Fail(format!("fit failed: {e}")),
    };
    let fitted: Vec<f64> = matrix
        .examples()
        .iter()
        .map(|e| fit.difficulty(e.as_str()).unwrap())
        .collect();
    let r = pearson(&fitted, &truth.irt.unwrap().difficulty);
    ensure(
        r >= 0.8,
        format!("difficulty r = {r:.3}; gradient rel err {worst_rel:.1e}"),
    )
}

/// Anchor Points and diversity sampling on two well-separated blocks.
fn clustering() -> Outcome {
    let spec = SyntheticSpec {
        num_models: 60,
        num_examples: 20,
        num_subtasks: 1,
        accuracy_range: [50.0, 50.0],
        structure: Structure::BlockedCorrelation {
            blocks: 2,
            correlation: 0.9,
        },
        seed: 12,
    };
    let (matrix, truth) = synthetic::generate(&spec).unwrap();
    let block = truth.blocks.unwrap().block_of;
    let ne = matrix.num_examples();
    let params = MethodParams::default();
    let req = SelectionRequest {
        matrix: &matrix,
        n: 2,
        seed: 0,
        params: &params,
    };
    let picked = |method| -> Vec<usize> {
        let micro = selection::select(method, &req, None).unwrap();
        ResolvedMicro::new(&micro, &matrix)
            .unwrap()
            .indices()
            .to_vec()
    };
    let pairs: Vec<(usize, usize)> = (0..ne)
        .flat_map(|i| ((i + 1)..ne).map(move |j| (i, j)))
        .collect();

    // k-medoids oracle: minimum total dissimilarity over all 2-subsets
    let col = |e: usize| {
        (0..matrix.num_models())
            .map(|m| matrix.confidence(m, e))
            .collect::<Vec<_>>()
    };
    let cols: Vec<Vec<f64>> = (0..ne).map(col).collect();
    let d = |i: usize, j: usize| (1.0 - pearson(&cols[i], &cols[j])).clamp(0.0, 2.0);
    let cost = |(a, b): (usize, usize)| (0..ne).map(|e| d(e, a).min(d(e, b))).sum::<f64>();
    let best_cost = pairs.iter().map(|&p| cost(p)).fold(f64::INFINITY, f64::min);
    let anchor = picked(Method::AnchorPoints);
    let anchor_cost = cost((anchor[0], anchor[1]));
    if block[anchor[0]] == block[anchor[1]] || (anchor_cost - best_cost).abs() > 1e-9 {
        return Outcome::Fail(format!(
            "anchor points picked {anchor:?} cost {anchor_cost} vs optimum {best_cost}"
        ));
    }

    // log-det oracle: maximum 2x2 Gaussian-kernel determinant in the same projection
    let dims = params.pca_dims;
    let pts = pca_project(&matrix, dims);
    let dist = |i: usize, j: usize| {
        (0..dims)
            .map(|k| (pts[i * dims + k] - pts[j * dims + k]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut all: Vec<f64> = pairs.iter().map(|&(i, j)| dist(i, j)).collect();
    all.sort_by(f64::total_cmp);
    let h = 0.5 * (all[all.len() / 2 - 1] + all[all.len() / 2]);
    let det = |(i, j): (usize, usize)| {
        let k = (-dist(i, j).powi(2) / (2.0 * h * h)).exp();
        (1.0 + 1e-9f64).powi(2) - k * k
    };
    let (best_pair, best_det) =
        pairs
            .iter()
            .map(|&p| (p, det(p)))
            .fold(((0, 0), f64::NEG_INFINITY), |acc, x| {
                if x.1 > acc.1 {
                    x
                } else {
                    acc
                }
            });
    let div = picked(Method::Diversity);
    let div_det = det((div[0], div[1]));
    // greedy fixes the lowest index first under a stationary kernel; its
    // second pick must be the exhaustive best partner of the first
    let (first, second) = (div[0].min(div[1]), div[0].max(div[1]));
    let partner_det = (0..ne)
        .filter(|&j| j != first)
        .map(|j| det((first.min(j), first.max(j))))
        .fold(f64::NEG_INFINITY, f64::max);
    let cross = block[div[0]] != block[div[1]] && block[best_pair.0] != block[best_pair.1];
    ensure(
        cross && first == 0 && (div_det - partner_det).abs() <= 1e-12,
        format!(
            "anchor {anchor:?} = optimum cost {best_cost:.4}; diversity {{{first}, {second}}} cross-block, det {div_det:.4} (global optimum {best_pair:?} {best_det:.4}, also cross-block)"
        ),
    )
}

fn pooled_mdad(table: &harness::ResultTable, n: usize) -> f64 {
    let row = table.find("random-uniform", n, 10, Metric::Mdad).unwrap();
    match row.status {
        Status::Ok => row.value.unwrap(),
        _ => f64::INFINITY,
    }
}

/// Pooled MDAD shrinks from n = 10 to n = 250.
fn size_monotonicity() -> Outcome {
    let matrix = iid(60, 1000, [30.0, 70.0], 2);
    let mut wins = 0;
    let mut medians = (Vec::new(), Vec::new());
    for rep in 0..50 {
        let config = ExperimentConfig {
            trials: 50,
            sizes: vec![10, 250],
            num_source: vec![10],
            num_target: 50,
            methods: vec![Method::RandomUniform],
            bootstrap_resamples: 1,
            master_seed: 1000 + rep,
            ..ExperimentConfig::default()
        };
        let table = harness::run_experiment(&matrix, &config).unwrap();
        let (small, large) = (pooled_mdad(&table, 10), pooled_mdad(&table, 250));
        wins += (large < small) as usize;
        medians.0.push(small);
        medians.1.push(large);
    }
    medians.0.sort_by(f64::total_cmp);
    medians.1.sort_by(f64::total_cmp);
    ensure(
        wins >= 45,
        format!(
            "{wins}/50 repetitions; median MDAD n=10 {} vs n=250 {}",
            medians.0[25], medians.1[25]
        ),
    )
}

/// Plain-mean methods with the micro-benchmark equal to the evaluation set.
fn degenerate_identity() -> Outcome {
    let mut spec = SyntheticSpec::iid(30, 120, [30.0, 70.0], 5);
    spec.num_subtasks = 3;
    let (matrix, _) = synthetic::generate(&spec).unwrap();
    let spec = BucketSpec::new(0.5).unwrap();
    let mut checked = 0;
    for scope in [harness::Scope::WholeBenchmark, harness::Scope::PerSubtask] {
        let n = if scope == harness::Scope::WholeBenchmark {
            60
        } else {
            20
        };
        let config = ExperimentConfig {
            trials: 3,
            sizes: vec![n],
            num_source: vec![10],
            num_target: 20,
            methods: vec![
                Method::RandomUniform,
                Method::RandomSubtask,
                Method::Diversity,
            ],
            evaluation_split: Split::Train,
            scope,
            bootstrap_resamples: 10,
            ..ExperimentConfig::default()
        };
        for t in 0..config.trials {
            let plan = harness::make_trial_plan(&matrix, &config, t).unwrap();
            let rec = harness::run_trial(&matrix, &plan, &config).unwrap();
            for cell in &rec.cells {
                for u in &cell.units {
                    let m = match &u.result {
                        Ok(m) => m,
                        Err(e) => {
                            return Outcome::Fail(format!("{} {}: {e}", cell.method.tag(), u.unit))
                        }
                    };
                    let curve = m.counts.curve(&spec);
                    let agree_ok = curve
                        .buckets
                        .iter()
                        .filter(|b| b.total > 0 && b.centroid > 0.0)
                        .all(|b| b.probability == Some(1.0));
                    if m.estimation_error != 0.0 || m.kendall_tau != 1.0 || !agree_ok {
                        return Outcome::Fail(format!(
                            "{} {}: error {} tau {}",
                            cell.method.tag(),
                            u.unit,
                            m.estimation_error,
                            m.kendall_tau
                        ));
                    }
                    checked += 1;
                }
            }
        }
    }
    Outcome::Pass(format!(
        "{checked} unit runs over 3 plain-mean methods and both scopes"
    ))
}

fn run_ok(cmd: &mut Command) -> Result<String, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// `undetectable` survives table, CSV and SVG via the CLI.
fn sentinel() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    write(
        &p("synth.json"),
        r#"{"num_models":60,"num_examples":20000,"accuracy_range":[50,50],"structure":{"kind":"iid-bernoulli"},"seed":21}"#,
    );
    write(
        &p("exp.json"),
        r#"{"trials":10,"sizes":[10],"num_source":[10],"num_target":50,"methods":["random-uniform"],"bootstrap_resamples":200}"#,
    );
    let steps = || -> Result<(String, String), String> {
        run_ok(
            bin()
                .args(["synth", "--spec"])
                .arg(p("synth.json"))
                .arg("--out-dir")
                .arg(p("data")),
        )?;
        run_ok(
            bin()
                .arg("run")
                .arg("--data")
                .arg(p("data"))
                .arg("--config")
                .arg(p("exp.json"))
                .arg("--out-csv")
                .arg(p("t.csv"))
                .arg("--out-json")
                .arg(p("t.json")),
        )?;
        let spec = format!(
            r#"{{"input":{:?},"charts":[{{"kind":"mdad-vs-n","output":{:?}}}]}}"#,
            p("t.json"),
            p("m.svg")
        );
        write(&p("report.json"), &spec);
        run_ok(bin().arg("report").arg("--spec").arg(p("report.json")))?;
        Ok((
            std::fs::read_to_string(p("t.csv")).unwrap(),
            std::fs::read_to_string(p("m.svg")).unwrap(),
        ))
    };
    let (csv, svg) = match steps() {
        Ok(x) => x,
        Err(e) => return Outcome::Fail(e),
    };
    let table =
        harness::ResultTable::from_json(&std::fs::read_to_string(p("t.json")).unwrap()).unwrap();
    let row = table.find("random-uniform", 10, 10, Metric::Mdad).unwrap();
    let csv_ok = csv.contains(",mdad,undetectable,undetectable,undetectable,");
    let svg_ok = svg.contains(microbench::report::BREAK_GLYPH) && !svg.contains("<circle");
    ensure(
        row.status == Status::Undetectable && csv_ok && svg_ok,
        format!(
            "table status {:?}, csv marker {csv_ok}, svg break without point {svg_ok}",
            row.status
        ),
    )
}

/// Full-scale reproduction on externally supplied MMLU-Pro predictions.
fn full_scale() -> Outcome {
    let Ok(dir) = std::env::var("MICROBENCH_MMLU_PRO_DIR") else {
        return Outcome::Skip("set MICROBENCH_MMLU_PRO_DIR to a directory with correct.csv, confidence.csv, subtasks.csv".into());
    };
    let dir = Path::new(&dir);
    let matrix = match microbench::data::load_predictions(
        &dir.join(synthetic::CORRECT_FILE),
        &dir.join(synthetic::CONFIDENCE_FILE),
        &dir.join(synthetic::SUBTASK_FILE),
    ) {
        Ok(m) => m,
        Err(e) => return Outcome::Fail(format!("cannot load data: {e}")),
    };
    let config = ExperimentConfig {
        benchmark: "mmlu-pro".into(),
        trials: 100,
        sizes: vec![100],
        num_source: vec![300],
        num_target: 50,
        methods: vec![
            Method::RandomUniform,
            Method::AnchorPoints,
            Method::TinyBenchmarks,
        ],
        ..ExperimentConfig::default()
    };
    let table = match harness::run_experiment(&matrix, &config) {
        Ok(t) => t,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut detail = Vec::new();
    let mut ok = true;
    for (method, target, half) in [
        ("random-uniform", 4.4, 0.6),
        ("anchor-points", 3.7, 0.9),
        ("tinybenchmarks", 3.7, 0.6),
    ] {
        let row = table.find(method, 100, 300, Metric::Mdad).unwrap();
        let v = row.value.unwrap_or(f64::INFINITY);
        ok &= (v - target).abs() <= half;
        detail.push(format!("{method} {v} (expected {target} +/- {half})"));
    }
    ensure(ok, detail.join("; "))
}

/// `run` output does not depend on `--threads`.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    write(
        &p("synth.json"),
        r#"{"num_models":40,"num_examples":200,"num_subtasks":4,"structure":{"kind":"irt-planted","dim":2},"seed":3}"#,
    );
    write(
        &p("exp.json"),
        r#"{"trials":4,"sizes":[10,30],"num_source":[10,20],"num_target":15,"bootstrap_resamples":500,"irt":{"dim":3,"epochs":200}}"#,
    );
    let run = |threads: &str, out: &str| -> Result<String, String> {
        run_ok(
            bin()
                .arg("run")
                .arg("--data")
                .arg(p("data"))
                .arg("--config")
                .arg(p("exp.json"))
                .args(["--threads", threads])
                .arg("--out-csv")
                .arg(p(out)),
        )?;
        Ok(std::fs::read_to_string(p(out)).unwrap())
    };
    let result = (|| {
        run_ok(
            bin()
                .args(["synth", "--spec"])
                .arg(p("synth.json"))
                .arg("--out-dir")
                .arg(p("data")),
        )?;
        Ok::<_, String>((run("1", "a.csv")?, run("4", "b.csv")?))
    })();
    match result {
        Ok((a, b)) => ensure(
            a == b,
            format!(
                "{} rows, all six methods, byte-identical: {}",
                a.lines().count() - 1,
                a == b
            ),
        ),
        Err(e) => Outcome::Fail(e),
    }
}

fn main() {
    let criteria: [(u32, &str, Check, Option<Duration>); 10] = [
        (
            1,
            "kendall tau oracle",
            kendall_oracle,
            Some(Duration::from_secs(5)),
        ),
        (
            2,
            "agreement oracle",
            agreement_oracle,
            Some(Duration::from_secs(120)),
        ),
        (
            3,
            "estimator unbiasedness",
            unbiasedness,
            Some(Duration::from_secs(120)),
        ),
        (
            4,
            "irt recovery",
            irt_recovery,
            Some(Duration::from_secs(180)),
        ),
        (
            5,
            "clustering correctness",
            clustering,
            Some(Duration::from_secs(30)),
        ),
        (
            6,
            "mdad size monotonicity",
            size_monotonicity,
            Some(Duration::from_secs(600)),
        ),
        (7, "degenerate identity", degenerate_identity, None),
        (8, "sentinel handling", sentinel, None),
        (9, "full-scale reproduction", full_scale, None),
        (10, "thread determinism", determinism, None),
    ];
    let mut failed = 0;
    for (id, name, check, limit) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (status, detail) = match outcome {
            Outcome::Pass(d) if limit.is_some_and(|l| elapsed > l) => {
                ("FAIL", format!("{d}; over time limit {limit:?}"))
            }
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        failed += (status == "FAIL") as usize;
        println!(
            "criterion {id:>2} [{status}] {name} ({:.1}s): {detail}",
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
