use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use microbench::data::{self, ModelId, ModelPredicate, Performance, PredictionMatrix};
use microbench::harness::{self, ExperimentConfig, ResultTable};
use microbench::irt::{fit_irt, IrtConfig};
use microbench::metaeval::{self, BucketSpec};
use microbench::report::{render_chart, ReportSpec};
use microbench::selection::{self, Method, MethodParams, MicroBenchmark, SelectionRequest};
use microbench::synthetic::{self, SyntheticSpec};

/// Micro-benchmark selection and meta-evaluation.
#[derive(Parser)]
#[command(name = "microbench", version)]
struct Cli {
    /// Seed override (selection seed, experiment master seed, synthetic seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for `run` (0 = one per core).
    #[arg(long, global = true, env = "MICROBENCH_THREADS", default_value_t = 0)]
    threads: usize,
    /// Experiment config JSON (`run`, and method/IRT settings for `select`/`evaluate`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a prediction matrix and check its invariants.
    Validate(DataArgs),
    /// Select a micro-benchmark with one method.
    Select(SelectArgs),
    /// Score a micro-benchmark against the full examples for a target list.
    Evaluate(EvaluateArgs),
    /// Run a full experiment and write the result table.
    Run(RunArgs),
    /// Generate a synthetic prediction matrix.
    Synth(SynthArgs),
    /// Render charts and re-export a result table.
    Report(ReportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Directory holding correct.csv, confidence.csv and subtasks.csv.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Correctness CSV (model_id,example_id,correct); overrides --data.
    #[arg(long)]
    correct: Option<PathBuf>,
    /// Confidence CSV (model_id,example_id,confidence); overrides --data.
    #[arg(long)]
    confidence: Option<PathBuf>,
    /// Subtask CSV (example_id,subtask); overrides --data.
    #[arg(long)]
    subtasks: Option<PathBuf>,
    /// Model metadata CSV, required by the model filters below.
    #[arg(long)]
    model_meta: Option<PathBuf>,
    /// Keep models with at least this many parameters (billions).
    #[arg(long)]
    min_params: Option<f64>,
    /// Keep models with at most this many parameters (billions).
    #[arg(long)]
    max_params: Option<f64>,
    /// Keep only instruction-tuned (true) or base (false) models.
    #[arg(long)]
    instruct: Option<bool>,
    /// Keep models of this family.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Selection method tag, e.g. random-uniform or anchor-points.
    #[arg(long)]
    method: Method,
    /// Micro-benchmark size.
    #[arg(long)]
    n: usize,
    /// Source models: comma-separated ids or @file with one id per line (default: all).
    #[arg(long)]
    sources: Option<String>,
    /// Selection pool: comma-separated example ids or @file (default: all).
    #[arg(long)]
    pool: Option<String>,
    /// Output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// MicroBenchmark JSON from `select`.
    #[arg(long)]
    micro: PathBuf,
    /// Target models: comma-separated ids or @file (default: all).
    #[arg(long)]
    targets: Option<String>,
    /// Examples forming the full reference (default: all).
    #[arg(long)]
    reference: Option<String>,
    /// Output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Result table CSV (default: stdout unless --out-json is given).
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Result table JSON, including agreement curves.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// SyntheticSpec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Directory for the CSVs and truth.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// ReportSpec JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Result table (JSON or CSV); overrides the spec's input.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Re-export the table as CSV.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Re-export the table as JSON.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_matrix(args: &DataArgs) -> Result<PredictionMatrix> {
    let pick = |explicit: &Option<PathBuf>, name: &str| -> Result<PathBuf> {
        match (explicit, &args.data) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(dir)) => Ok(dir.join(name)),
            (None, None) => bail!("pass --data <dir> or --{}", name.trim_end_matches(".csv")),
        }
    };
    let matrix = data::load_predictions(
        &pick(&args.correct, synthetic::CORRECT_FILE)?,
        &pick(&args.confidence, synthetic::CONFIDENCE_FILE)?,
        &pick(&args.subtasks, synthetic::SUBTASK_FILE)?,
    )?;
    let predicate = ModelPredicate {
        min_params: args.min_params,
        max_params: args.max_params,
        instruct: args.instruct,
        family: args.family.clone(),
    };
    if predicate == ModelPredicate::default() {
        return Ok(matrix);
    }
    let meta_path = args
        .model_meta
        .as_ref()
        .context("model filters need --model-meta")?;
    let meta = data::load_model_meta(meta_path)?;
    Ok(data::filter_models(&matrix, &meta, &predicate)?)
}

fn id_list(spec: &str) -> Result<Vec<String>> {
    let text = match spec.strip_prefix('@') {
        Some(path) => read(Path::new(path))?,
        None => spec.replace(',', "\n"),
    };
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect())
}

fn model_indices(matrix: &PredictionMatrix, spec: &Option<String>) -> Result<Vec<usize>> {
    match spec {
        None => Ok((0..matrix.num_models()).collect()),
        Some(s) => id_list(s)?
            .iter()
            .map(|id| {
                matrix
                    .model_index(id)
                    .with_context(|| format!("unknown model `{id}`"))
            })
            .collect(),
    }
}

fn example_indices(matrix: &PredictionMatrix, spec: &Option<String>) -> Result<Vec<usize>> {
    match spec {
        None => Ok((0..matrix.num_examples()).collect()),
        Some(s) => id_list(s)?
            .iter()
            .map(|id| {
                matrix
                    .example_index(id)
                    .with_context(|| format!("unknown example `{id}`"))
            })
            .collect(),
    }
}

fn load_config(cli: &Cli) -> Result<Option<ExperimentConfig>> {
    cli.config
        .as_ref()
        .map(|p| {
            ExperimentConfig::from_json(&read(p)?)
                .with_context(|| format!("invalid config {}", p.display()))
        })
        .transpose()
}

fn validate(args: &DataArgs) -> Result<()> {
    let m = load_matrix(args)?;
    println!(
        "ok: {} models, {} examples, {} subtasks",
        m.num_models(),
        m.num_examples(),
        m.subtask_groups().len()
    );
    Ok(())
}

fn select_cmd(cli: &Cli, args: &SelectArgs) -> Result<()> {
    let matrix = load_matrix(&args.data)?;
    let config = load_config(cli)?;
    let (params, irt_config) = config
        .map(|c| (c.method_params, c.irt))
        .unwrap_or_else(|| (MethodParams::default(), IrtConfig::default()));
    let sources = model_indices(&matrix, &args.sources)?;
    let pool = example_indices(&matrix, &args.pool)?;
    let src = matrix.restrict(&sources, &pool);
    let seed = cli.seed.unwrap_or(0);
    let irt = if args.method == Method::TinyBenchmarks {
        Some(fit_irt(&src, &IrtConfig { seed, ..irt_config })?)
    } else {
        None
    };
    let req = SelectionRequest {
        matrix: &src,
        n: args.n,
        seed,
        params: &params,
    };
    let micro = selection::select(args.method, &req, irt.as_ref())?;
    write_out(args.out.as_deref(), &(micro.to_json() + "\n"))
}

#[derive(Serialize)]
struct TargetPerformance<'a> {
    model: &'a ModelId,
    full: f64,
    micro: f64,
}

#[derive(Serialize)]
struct Evaluation<'a> {
    method_tag: &'a str,
    examples: usize,
    reference_examples: usize,
    estimation_error: f64,
    kendall_tau: Option<f64>,
    mdad: Option<metaeval::MdadResult>,
    agreement_curve: Option<metaeval::AgreementCurve>,
    targets: Vec<TargetPerformance<'a>>,
}

fn evaluate_cmd(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let matrix = load_matrix(&args.data)?;
    let config = load_config(cli)?.unwrap_or_default();
    let micro = MicroBenchmark::from_json(&read(&args.micro)?).map_err(anyhow::Error::msg)?;
    let targets = model_indices(&matrix, &args.targets)?;
    let reference = example_indices(&matrix, &args.reference)?;
    let resolved = selection::ResolvedMicro::new(&micro, &matrix)?;
    let ids: Vec<ModelId> = targets
        .iter()
        .map(|&t| matrix.models()[t].clone())
        .collect();
    let mut full: HashMap<ModelId, Performance> = HashMap::new();
    let mut est: HashMap<ModelId, Performance> = HashMap::new();
    for (&t, id) in targets.iter().zip(&ids) {
        full.insert(id.clone(), matrix.accuracy(t, &reference));
        est.insert(id.clone(), resolved.estimate(&matrix, t));
    }
    let error = metaeval::mean_estimation_error(&full, &est, &ids)?;
    let (tau, mdad, curve) = if ids.len() >= 2 {
        let spec = BucketSpec::new(config.resolution)?;
        let curve =
            metaeval::agreement_curve(&metaeval::pairwise_comparisons(&full, &est, &ids)?, &spec);
        let mdad = metaeval::mdad_with(
            &curve,
            config.threshold,
            config.resolution,
            config.strict_mdad,
        )?;
        (
            Some(metaeval::kendall_tau(&full, &est, &ids)?),
            Some(mdad),
            Some(curve),
        )
    } else {
        (None, None, None)
    };
    let report = Evaluation {
        method_tag: &micro.method_tag,
        examples: micro.len(),
        reference_examples: reference.len(),
        estimation_error: error,
        kendall_tau: tau,
        mdad,
        agreement_curve: curve,
        targets: ids
            .iter()
            .map(|id| TargetPerformance {
                model: id,
                full: full[id].value(),
                micro: est[id].value(),
            })
            .collect(),
    };
    write_out(
        args.out.as_deref(),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )
}

fn run_cmd(cli: &Cli, args: &RunArgs) -> Result<()> {
    let mut config = load_config(cli)?.context("`run` needs --config <experiment.json>")?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let matrix = load_matrix(&args.data)?;
    let table = harness::run_experiment_with_threads(&matrix, &config, cli.threads)?;
    if let Some(p) = &args.out_json {
        table.write_json(p)?;
    }
    match &args.out_csv {
        Some(p) => table.write_csv(p)?,
        None if args.out_json.is_none() => print!("{}", table.to_csv()),
        None => {}
    }
    Ok(())
}

fn synth_cmd(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let mut spec: SyntheticSpec = serde_json::from_str(&read(&args.spec)?)
        .with_context(|| format!("invalid synthetic spec {}", args.spec.display()))?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    let (matrix, truth) = synthetic::generate(&spec)?;
    synthetic::write_dataset(&matrix, &truth, &args.out_dir)?;
    Ok(())
}

fn load_table(path: &Path) -> Result<ResultTable> {
    let text = read(path)?;
    let table = if path.extension().is_some_and(|e| e == "csv") {
        ResultTable::from_csv(&text)?
    } else {
        ResultTable::from_json(&text)?
    };
    Ok(table)
}

fn report_cmd(args: &ReportArgs) -> Result<()> {
    let spec = args
        .spec
        .as_ref()
        .map(|p| {
            ReportSpec::from_json(&read(p)?)
                .with_context(|| format!("invalid report spec {}", p.display()))
        })
        .transpose()?;
    let input = args
        .input
        .clone()
        .or_else(|| spec.as_ref().map(|s| s.input.clone()))
        .context("pass --input or a --spec with an input")?;
    let table = load_table(&input)?;
    for chart in spec.iter().flat_map(|s| &s.charts) {
        let svg = render_chart(&table, chart)?;
        fs::write(&chart.output, svg)
            .with_context(|| format!("cannot write {}", chart.output.display()))?;
    }
    if let Some(p) = &args.out_csv {
        table.write_csv(p)?;
    }
    if let Some(p) = &args.out_json {
        table.write_json(p)?;
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Select(a) => select_cmd(cli, a),
        Command::Evaluate(a) => evaluate_cmd(cli, a),
        Command::Run(a) => run_cmd(cli, a),
        Command::Synth(a) => synth_cmd(cli, a),
        Command::Report(a) => report_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
