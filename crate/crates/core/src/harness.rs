//! Experiment orchestration: per-trial example splits and model partitions,
//! the method × size × source-count grid, and aggregation into a
//! [`ResultTable`].

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::PredictionMatrix;
use crate::irt::{fit_irt, IrtConfig, IrtModel};
use crate::metaeval::{
    bootstrap_ci, bootstrap_resampled, kendall_tau_slices, mdad_from_counts, mean_abs_error,
    round_half, AgreementCounts, AgreementCurve, BucketSpec, MdadValue, MetaError,
};
use crate::seed::{self, SeedBuilder};
use crate::selection::{select, Method, MethodParams, ResolvedMicro, SelectionRequest};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("need {need} models ({targets} targets + {sources} sources), matrix has {have}")]
    InsufficientModels {
        need: usize,
        targets: usize,
        sources: usize,
        have: usize,
    },
    #[error("subtask `{subtask}` has {size} examples; at least 2 are needed to split it")]
    SubtaskTooSmall { subtask: String, size: usize },
    #[error(transparent)]
    Meta(#[from] MetaError),
    #[error("cannot parse result table: {0}")]
    Parse(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    /// Evaluate on the half the micro-benchmark was selected from.
    Train,
    /// Evaluate on the unseen half.
    Heldout,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Heldout => "heldout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    WholeBenchmark,
    /// Select and evaluate within each subtask, then average the metrics.
    PerSubtask,
}

/// What "full benchmark" means when evaluating on the train split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FullReference {
    /// The evaluation split itself.
    Split,
    /// Train and held-out halves together (train split only).
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MdadAggregation {
    /// One curve from the comparisons of every trial.
    Pooled,
    /// Mean of per-trial MDADs.
    PerTrialMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    EstimationError,
    KendallTau,
    Mdad,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::EstimationError, Metric::KendallTau, Metric::Mdad];

    pub fn tag(self) -> &'static str {
        match self {
            Metric::EstimationError => "estimation_error",
            Metric::KendallTau => "kendall_tau",
            Metric::Mdad => "mdad",
        }
    }

    /// Display rounding used in tables and charts.
    pub fn display(self, v: f64) -> String {
        match self {
            Metric::EstimationError => format!("{v:.2}"),
            Metric::KendallTau => format!("{v:.3}"),
            Metric::Mdad => format!("{:.1}", round_half(v)),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Metric::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: String,
    pub trials: usize,
    pub sizes: Vec<usize>,
    pub num_source: Vec<usize>,
    pub num_target: usize,
    pub methods: Vec<Method>,
    pub threshold: f64,
    pub resolution: f64,
    pub evaluation_split: Split,
    pub scope: Scope,
    pub master_seed: u64,
    pub full_reference: FullReference,
    pub mdad_aggregation: MdadAggregation,
    /// Require every later non-empty bucket to pass as well.
    pub strict_mdad: bool,
    pub bootstrap_resamples: usize,
    pub confidence_level: f64,
    pub method_params: MethodParams,
    /// IRT settings for tinyBenchmarks; the seed is derived per trial.
    pub irt: IrtConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            benchmark: "benchmark".into(),
            trials: 50,
            sizes: vec![10, 25, 50, 100, 250, 500, 1000],
            num_source: vec![300],
            num_target: 50,
            methods: Method::ALL.to_vec(),
            threshold: 0.8,
            resolution: 0.5,
            evaluation_split: Split::Train,
            scope: Scope::WholeBenchmark,
            master_seed: 0,
            full_reference: FullReference::Split,
            mdad_aggregation: MdadAggregation::Pooled,
            strict_mdad: false,
            bootstrap_resamples: 10_000,
            confidence_level: 0.95,
            method_params: MethodParams::default(),
            irt: IrtConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("sizes must be a non-empty list of positive integers".into());
        }
        if self.num_source.is_empty() || self.num_source.contains(&0) {
            return bad("num_source must be a non-empty list of positive integers".into());
        }
        if self.num_target < 2 {
            return bad(format!(
                "num_target must be at least 2, got {}",
                self.num_target
            ));
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            ));
        }
        BucketSpec::new(self.resolution)?;
        if self.bootstrap_resamples == 0 {
            return bad("bootstrap_resamples must be positive".into());
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return bad(format!(
                "confidence_level must lie in (0, 1), got {}",
                self.confidence_level
            ));
        }
        Ok(())
    }

    fn max_source(&self) -> usize {
        self.num_source.iter().copied().max().unwrap_or(0)
    }
}

/// One subtask's example halves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubtaskSplit {
    pub subtask: String,
    pub train: Vec<usize>,
    pub heldout: Vec<usize>,
}

/// A trial's data split and model partition, as matrix indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialPlan {
    pub trial_index: usize,
    pub seed: u64,
    pub subtasks: Vec<SubtaskSplit>,
    /// Union of the per-subtask train halves, ascending.
    pub train_examples: Vec<usize>,
    pub heldout_examples: Vec<usize>,
    /// Source models for the largest configured count; a count `k` uses the
    /// first `k`, so source-count sweeps are nested.
    pub source_models: Vec<usize>,
    /// Target models ordered by id.
    pub target_models: Vec<usize>,
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub num_source: Vec<usize>,
    pub scope: Scope,
}

/// Builds the deterministic split and partition for one trial.
pub fn make_trial_plan(
    matrix: &PredictionMatrix,
    config: &ExperimentConfig,
    trial_index: usize,
) -> Result<TrialPlan> {
    let trial_seed = seed::trial_seed(config.master_seed, trial_index);
    let sources = config.max_source();
    let need = config.num_target + sources;
    if matrix.num_models() < need {
        return Err(HarnessError::InsufficientModels {
            need,
            targets: config.num_target,
            sources,
            have: matrix.num_models(),
        });
    }

    let mut rng = seed::rng(SeedBuilder::new("split").u64(trial_seed).finish());
    let mut subtasks = Vec::new();
    for (label, mut idx) in matrix.subtask_groups() {
        if idx.len() < 2 {
            return Err(HarnessError::SubtaskTooSmall {
                subtask: label.to_string(),
                size: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        let cut = idx.len().div_ceil(2);
        let (mut train, mut heldout) = (idx[..cut].to_vec(), idx[cut..].to_vec());
        train.sort_unstable();
        heldout.sort_unstable();
        subtasks.push(SubtaskSplit {
            subtask: label.to_string(),
            train,
            heldout,
        });
    }
    let mut train_examples: Vec<usize> = subtasks
        .iter()
        .flat_map(|s| s.train.iter().copied())
        .collect();
    let mut heldout_examples: Vec<usize> = subtasks
        .iter()
        .flat_map(|s| s.heldout.iter().copied())
        .collect();
    train_examples.sort_unstable();
    heldout_examples.sort_unstable();

    let mut rng = seed::rng(SeedBuilder::new("models").u64(trial_seed).finish());
    let mut perm: Vec<usize> = (0..matrix.num_models()).collect();
    perm.shuffle(&mut rng);
    let mut target_models = perm[..config.num_target].to_vec();
    target_models.sort_by(|&a, &b| matrix.models()[a].cmp(&matrix.models()[b]));
    let source_models = perm[config.num_target..need].to_vec();

    Ok(TrialPlan {
        trial_index,
        seed: trial_seed,
        subtasks,
        train_examples,
        heldout_examples,
        source_models,
        target_models,
        sizes: config.sizes.clone(),
        methods: config.methods.clone(),
        num_source: config.num_source.clone(),
        scope: config.scope,
    })
}

/// Seed for one selection call.
pub fn cell_seed(trial_seed: u64, unit: &str, method: Method, n: usize) -> u64 {
    seed::method_seed(
        SeedBuilder::new("unit").u64(trial_seed).str(unit).finish(),
        method.tag(),
        n,
    )
}

/// Unit label used for whole-benchmark scope.
pub const WHOLE_UNIT: &str = "all";

/// Metrics of one (method, n, num_source) cell within one unit of a trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitMetrics {
    pub estimation_error: f64,
    pub kendall_tau: f64,
    pub counts: AgreementCounts,
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitOutcome {
    pub unit: String,
    pub result: Result<UnitMetrics, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub method: Method,
    pub n: usize,
    pub num_source: usize,
    pub units: Vec<UnitOutcome>,
}

/// Everything one trial produced, cells in (num_source, method, n) config order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecords {
    pub trial_index: usize,
    pub cells: Vec<CellRecord>,
}

struct Unit<'a> {
    label: &'a str,
    pool: &'a [usize],
    reference: Vec<usize>,
}

/// Lazily built per-(unit, source count) selection inputs.
struct UnitContext<'a> {
    unit: &'a Unit<'a>,
    sources: &'a [usize],
    matrix: &'a PredictionMatrix,
    irt_config: IrtConfig,
    source_matrix: OnceCell<PredictionMatrix>,
    irt: OnceCell<Result<IrtModel, String>>,
}

impl UnitContext<'_> {
    fn source_matrix(&self) -> &PredictionMatrix {
        self.source_matrix
            .get_or_init(|| self.matrix.restrict(self.sources, self.unit.pool))
    }

    fn irt(&self) -> Result<&IrtModel, String> {
        self.irt
            .get_or_init(|| {
                fit_irt(self.source_matrix(), &self.irt_config)
                    .map_err(|e| format!("irt fit failed: {e}"))
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

fn units_of<'a>(plan: &'a TrialPlan, config: &ExperimentConfig) -> Vec<Unit<'a>> {
    let reference = |train: &[usize], heldout: &[usize]| -> Vec<usize> {
        match (config.evaluation_split, config.full_reference) {
            (Split::Heldout, _) => heldout.to_vec(),
            (Split::Train, FullReference::Split) => train.to_vec(),
            (Split::Train, FullReference::Union) => {
                let mut all = [train, heldout].concat();
                all.sort_unstable();
                all
            }
        }
    };
    match plan.scope {
        Scope::WholeBenchmark => vec![Unit {
            label: WHOLE_UNIT,
            pool: &plan.train_examples,
            reference: reference(&plan.train_examples, &plan.heldout_examples),
        }],
        Scope::PerSubtask => plan
            .subtasks
            .iter()
            .map(|s| Unit {
                label: &s.subtask,
                pool: &s.train,
                reference: reference(&s.train, &s.heldout),
            })
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn eval_unit(
    matrix: &PredictionMatrix,
    ctx: &UnitContext<'_>,
    full: &[f64],
    targets: &[usize],
    method: Method,
    n: usize,
    seed_value: u64,
    params: &MethodParams,
    spec: &BucketSpec,
) -> Result<UnitMetrics, String> {
    let irt = if method == Method::TinyBenchmarks {
        Some(ctx.irt()?)
    } else {
        None
    };
    let req = SelectionRequest {
        matrix: ctx.source_matrix(),
        n,
        seed: seed_value,
        params,
    };
    let micro = select(method, &req, irt).map_err(|e| e.to_string())?;
    let resolved = ResolvedMicro::new(&micro, matrix).map_err(|e| e.to_string())?;
    let selected = resolved.indices().to_vec();
    assert!(
        selected
            .iter()
            .all(|i| ctx.unit.pool.binary_search(i).is_ok()),
        "micro-benchmark left the selection pool"
    );
    let micro_perf: Vec<f64> = targets
        .iter()
        .map(|&t| resolved.estimate(matrix, t).value())
        .collect();
    Ok(UnitMetrics {
        estimation_error: mean_abs_error(full, &micro_perf),
        kendall_tau: kendall_tau_slices(full, &micro_perf),
        counts: AgreementCounts::from_performances(full, &micro_perf, spec),
        selected,
    })
}

/// Runs every (num_source, method, n) cell of one trial. Cell failures are
/// recorded in the returned records.
pub fn run_trial(
    matrix: &PredictionMatrix,
    plan: &TrialPlan,
    config: &ExperimentConfig,
) -> Result<TrialRecords> {
    let spec = BucketSpec::new(config.resolution)?;
    let units = units_of(plan, config);
    for u in &units {
        for i in u.pool {
            assert!(
                plan.heldout_examples.binary_search(i).is_err(),
                "held-out example in selection pool"
            );
        }
    }
    let full: Vec<Vec<f64>> = units
        .iter()
        .map(|u| {
            plan.target_models
                .iter()
                .map(|&t| matrix.accuracy(t, &u.reference).value())
                .collect()
        })
        .collect();
    let mut cells = Vec::new();
    for &k in &plan.num_source {
        let sources = &plan.source_models[..k];
        let contexts: Vec<UnitContext<'_>> = units
            .iter()
            .map(|unit| UnitContext {
                unit,
                sources,
                matrix,
                irt_config: IrtConfig {
                    seed: SeedBuilder::new("irt")
                        .u64(plan.seed)
                        .u64(k as u64)
                        .str(unit.label)
                        .finish(),
                    ..config.irt.clone()
                },
                source_matrix: OnceCell::new(),
                irt: OnceCell::new(),
            })
            .collect();
        for &method in &plan.methods {
            for &n in &plan.sizes {
                let outcomes = contexts
                    .iter()
                    .zip(&full)
                    .map(|(ctx, full)| UnitOutcome {
                        unit: ctx.unit.label.to_string(),
                        result: eval_unit(
                            matrix,
                            ctx,
                            full,
                            &plan.target_models,
                            method,
                            n,
                            cell_seed(plan.seed, ctx.unit.label, method, n),
                            &config.method_params,
                            &spec,
                        ),
                    })
                    .collect();
                cells.push(CellRecord {
                    method,
                    n,
                    num_source: k,
                    units: outcomes,
                });
            }
        }
    }
    Ok(TrialRecords {
        trial_index: plan.trial_index,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Undetectable,
    Failed,
}

impl Status {
    pub fn tag(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Undetectable => "undetectable",
            Status::Failed => "failed",
        }
    }
}

/// One (method, n, num_source, metric) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub benchmark: String,
    pub method: String,
    pub n: usize,
    pub num_source: usize,
    pub split: Split,
    pub metric: Metric,
    pub status: Status,
    /// Unrounded value; `None` when undetectable or failed.
    pub value: Option<f64>,
    /// Value as shown in reports.
    pub display: String,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub undetectable_fraction: Option<f64>,
    /// Trials contributing to the value.
    pub trials: usize,
    pub detail: String,
    /// Raw per-trial values (`None` = undetectable or failed trial).
    #[serde(default)]
    pub per_trial: Vec<Option<f64>>,
}

/// Agreement curve pooled over trials (and subtasks) for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub method: String,
    pub n: usize,
    pub num_source: usize,
    pub split: Split,
    pub curve: AgreementCurve,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub curves: Vec<CurveRecord>,
}

pub const CSV_HEADER: [&str; 14] = [
    "benchmark",
    "method",
    "n",
    "num_source",
    "split",
    "metric",
    "status",
    "value",
    "display",
    "ci_low",
    "ci_high",
    "undetectable_fraction",
    "trials",
    "detail",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() || s == "undetectable" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| HarnessError::Parse(format!("bad number `{s}`")))
}

#[derive(Serialize, Deserialize)]
struct MethodSection {
    rows: Vec<ResultRow>,
    curves: Vec<CurveRecord>,
}

#[derive(Serialize, Deserialize)]
struct NestedTable {
    methods: BTreeMap<String, MethodSection>,
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            let value = match r.status {
                Status::Undetectable => "undetectable".to_string(),
                _ => opt(r.value),
            };
            w.write_record([
                r.benchmark.clone(),
                r.method.clone(),
                r.n.to_string(),
                r.num_source.to_string(),
                r.split.tag().to_string(),
                r.metric.tag().to_string(),
                r.status.tag().to_string(),
                value,
                r.display.clone(),
                opt(r.ci_low),
                opt(r.ci_high),
                opt(r.undetectable_fraction),
                r.trials.to_string(),
                r.detail.clone(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Reads rows back from [`ResultTable::to_csv`] output (curves and
    /// per-trial values are not part of the CSV).
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r
            .headers()
            .map_err(|e| HarnessError::Parse(e.to_string()))?
            .clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(HarnessError::Parse(format!(
                "unexpected header `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| HarnessError::Parse(e.to_string()))?;
            let int = |i: usize| {
                rec[i]
                    .parse::<usize>()
                    .map_err(|_| HarnessError::Parse(format!("bad integer `{}`", &rec[i])))
            };
            let split = match &rec[4] {
                "train" => Split::Train,
                "heldout" => Split::Heldout,
                s => return Err(HarnessError::Parse(format!("bad split `{s}`"))),
            };
            let status = match &rec[6] {
                "ok" => Status::Ok,
                "undetectable" => Status::Undetectable,
                "failed" => Status::Failed,
                s => return Err(HarnessError::Parse(format!("bad status `{s}`"))),
            };
            rows.push(ResultRow {
                benchmark: rec[0].to_string(),
                method: rec[1].to_string(),
                n: int(2)?,
                num_source: int(3)?,
                split,
                metric: rec[5].parse().map_err(HarnessError::Parse)?,
                status,
                value: parse_opt(&rec[7])?,
                display: rec[8].to_string(),
                ci_low: parse_opt(&rec[9])?,
                ci_high: parse_opt(&rec[10])?,
                undetectable_fraction: parse_opt(&rec[11])?,
                trials: int(12)?,
                detail: rec[13].to_string(),
                per_trial: Vec::new(),
            });
        }
        Ok(Self {
            rows,
            curves: Vec::new(),
        })
    }

    /// JSON nested by method tag.
    pub fn to_json(&self) -> String {
        let mut methods: BTreeMap<String, MethodSection> = BTreeMap::new();
        for r in &self.rows {
            methods
                .entry(r.method.clone())
                .or_insert_with(|| MethodSection {
                    rows: vec![],
                    curves: vec![],
                })
                .rows
                .push(r.clone());
        }
        for c in &self.curves {
            methods
                .entry(c.method.clone())
                .or_insert_with(|| MethodSection {
                    rows: vec![],
                    curves: vec![],
                })
                .curves
                .push(c.clone());
        }
        serde_json::to_string_pretty(&NestedTable { methods }).expect("table serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let nested: NestedTable =
            serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        let mut table = Self::default();
        for section in nested.methods.into_values() {
            table.rows.extend(section.rows);
            table.curves.extend(section.curves);
        }
        Ok(table)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_json())
    }

    pub fn find(
        &self,
        method: &str,
        n: usize,
        num_source: usize,
        metric: Metric,
    ) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.method == method && r.n == n && r.num_source == num_source && r.metric == metric
        })
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean over units; undetectable if any unit is.
fn mean_mdad(values: impl Iterator<Item = MdadValue>) -> Option<MdadValue> {
    let mut sum = 0.0;
    let mut count = 0;
    for v in values {
        match v {
            MdadValue::Detectable(x) => sum += x,
            MdadValue::Undetectable => return Some(MdadValue::Undetectable),
        }
        count += 1;
    }
    (count > 0).then(|| MdadValue::Detectable(sum / count as f64))
}

struct Aggregator<'a> {
    config: &'a ExperimentConfig,
    spec: BucketSpec,
}

impl Aggregator<'_> {
    fn bootstrap_seed(&self, method: Method, n: usize, metric: Metric) -> u64 {
        SeedBuilder::new("bootstrap")
            .u64(self.config.master_seed)
            .str(method.tag())
            .u64(n as u64)
            .str(metric.tag())
            .finish()
    }

    fn row(&self, cell: &CellRecord, metric: Metric) -> ResultRow {
        ResultRow {
            benchmark: self.config.benchmark.clone(),
            method: cell.method.tag().to_string(),
            n: cell.n,
            num_source: cell.num_source,
            split: self.config.evaluation_split,
            metric,
            status: Status::Failed,
            value: None,
            display: "failed".into(),
            ci_low: None,
            ci_high: None,
            undetectable_fraction: None,
            trials: 0,
            detail: String::new(),
            per_trial: Vec::new(),
        }
    }

    fn scalar(
        &self,
        cells: &[&CellRecord],
        metric: Metric,
        pick: fn(&UnitMetrics) -> f64,
    ) -> Result<ResultRow> {
        let mut row = self.row(cells[0], metric);
        row.per_trial = cells
            .iter()
            .map(|c| {
                let ok: Vec<f64> = c
                    .units
                    .iter()
                    .filter_map(|u| u.result.as_ref().ok().map(pick))
                    .collect();
                (!ok.is_empty()).then(|| mean(&ok))
            })
            .collect();
        let defined: Vec<f64> = row.per_trial.iter().flatten().copied().collect();
        row.trials = defined.len();
        if defined.is_empty() {
            return Ok(row);
        }
        let v = mean(&defined);
        let (lo, hi) = if defined.len() >= 2 {
            let values: Vec<Option<f64>> = defined.iter().map(|&x| Some(x)).collect();
            let ci = bootstrap_ci(
                &values,
                self.config.confidence_level,
                self.config.bootstrap_resamples,
                self.bootstrap_seed(cells[0].method, cells[0].n, metric),
            )?;
            (ci.low, ci.high)
        } else {
            (Some(v), Some(v))
        };
        row.status = Status::Ok;
        row.value = Some(v);
        row.display = metric.display(v);
        row.ci_low = lo;
        row.ci_high = hi;
        Ok(row)
    }

    fn trial_mdad(&self, cell: &CellRecord) -> Option<MdadValue> {
        mean_mdad(cell.units.iter().filter_map(|u| {
            u.result.as_ref().ok().map(|m| {
                mdad_from_counts(
                    &m.counts,
                    &self.spec,
                    self.config.threshold,
                    self.config.strict_mdad,
                )
            })
        }))
    }

    /// Pooled MDAD of the given trials: per unit, merge counts and take the
    /// MDAD; then average over units.
    fn pooled_mdad(&self, cells: &[&CellRecord], chosen: &[usize]) -> Option<MdadValue> {
        let units = cells[0].units.len();
        mean_mdad((0..units).filter_map(|u| {
            let mut pooled = AgreementCounts::default();
            let mut any = false;
            for &t in chosen {
                if let Ok(m) = &cells[t].units[u].result {
                    pooled.merge(&m.counts);
                    any = true;
                }
            }
            any.then(|| {
                mdad_from_counts(
                    &pooled,
                    &self.spec,
                    self.config.threshold,
                    self.config.strict_mdad,
                )
            })
        }))
    }

    fn mdad(&self, cells: &[&CellRecord]) -> Result<ResultRow> {
        let mut row = self.row(cells[0], Metric::Mdad);
        let per_trial: Vec<Option<MdadValue>> = cells.iter().map(|c| self.trial_mdad(c)).collect();
        row.per_trial = per_trial
            .iter()
            .map(|v| v.and_then(MdadValue::value))
            .collect();
        let ran: Vec<usize> = (0..cells.len())
            .filter(|&t| per_trial[t].is_some())
            .collect();
        row.trials = ran.len();
        if ran.is_empty() {
            return Ok(row);
        }
        let seed_value = self.bootstrap_seed(cells[0].method, cells[0].n, Metric::Mdad);
        let (level, resamples) = (
            self.config.confidence_level,
            self.config.bootstrap_resamples,
        );
        let (point, ci) = match self.config.mdad_aggregation {
            MdadAggregation::Pooled => {
                let point = self.pooled_mdad(cells, &ran).expect("some trial ran");
                let ci = if ran.len() >= 2 {
                    Some(bootstrap_resampled(
                        ran.len(),
                        level,
                        resamples,
                        seed_value,
                        |chosen| {
                            let trials: Vec<usize> = chosen.iter().map(|&i| ran[i]).collect();
                            self.pooled_mdad(cells, &trials).expect("some trial ran")
                        },
                    )?)
                } else {
                    None
                };
                (point, ci)
            }
            MdadAggregation::PerTrialMean => {
                let values: Vec<Option<f64>> = ran
                    .iter()
                    .map(|&t| per_trial[t].and_then(MdadValue::value))
                    .collect();
                let point = mean_mdad(
                    values
                        .iter()
                        .map(|v| v.map_or(MdadValue::Undetectable, MdadValue::Detectable)),
                )
                .expect("some trial ran");
                let ci = if ran.len() >= 2 {
                    match bootstrap_ci(&values, level, resamples, seed_value) {
                        Ok(ci) => Some(ci),
                        Err(MetaError::AllUndetectable) => Some(crate::metaeval::BootstrapCi {
                            low: None,
                            high: None,
                            undetectable_fraction: 1.0,
                        }),
                        Err(e) => return Err(e.into()),
                    }
                } else {
                    None
                };
                (point, ci)
            }
        };
        let mut result = crate::metaeval::MdadResult::from_value(
            point,
            self.config.threshold,
            self.config.resolution,
        );
        result = match ci {
            Some(ci) => result.with_ci(&ci),
            None => {
                let v = point.value();
                result.ci_low = v;
                result.ci_high = v;
                result.undetectable_fraction = Some(if v.is_some() { 0.0 } else { 1.0 });
                result
            }
        };
        row.ci_low = result.ci_low;
        row.ci_high = result.ci_high;
        row.undetectable_fraction = result.undetectable_fraction;
        match point {
            MdadValue::Detectable(v) => {
                row.status = Status::Ok;
                row.value = Some(v);
                row.display = Metric::Mdad.display(v);
            }
            MdadValue::Undetectable => {
                row.status = Status::Undetectable;
                row.display = "undetectable".into();
            }
        }
        Ok(row)
    }

    fn failure_detail(cells: &[&CellRecord]) -> String {
        let mut failed = 0;
        let mut first = None;
        let mut total = 0;
        for c in cells {
            for u in &c.units {
                total += 1;
                if let Err(e) = &u.result {
                    failed += 1;
                    first.get_or_insert_with(|| format!("{}: {e}", u.unit));
                }
            }
        }
        match first {
            None => String::new(),
            Some(msg) => format!("{failed} of {total} unit runs failed; first: {msg}"),
        }
    }

    fn curve(&self, cells: &[&CellRecord]) -> CurveRecord {
        let mut pooled = AgreementCounts::default();
        for c in cells {
            for u in &c.units {
                if let Ok(m) = &u.result {
                    pooled.merge(&m.counts);
                }
            }
        }
        CurveRecord {
            method: cells[0].method.tag().to_string(),
            n: cells[0].n,
            num_source: cells[0].num_source,
            split: self.config.evaluation_split,
            curve: pooled.curve(&self.spec),
        }
    }
}

/// Aggregates per-trial records (in trial order) into a table.
pub fn aggregate(config: &ExperimentConfig, records: &[TrialRecords]) -> Result<ResultTable> {
    let agg = Aggregator {
        config,
        spec: BucketSpec::new(config.resolution)?,
    };
    let mut table = ResultTable::default();
    let Some(first) = records.first() else {
        return Ok(table);
    };
    for c in 0..first.cells.len() {
        let cells: Vec<&CellRecord> = records.iter().map(|r| &r.cells[c]).collect();
        let detail = Aggregator::failure_detail(&cells);
        let mut rows = vec![
            agg.scalar(&cells, Metric::EstimationError, |m| m.estimation_error)?,
            agg.scalar(&cells, Metric::KendallTau, |m| m.kendall_tau)?,
            agg.mdad(&cells)?,
        ];
        for r in &mut rows {
            r.detail = detail.clone();
        }
        table.rows.extend(rows);
        table.curves.push(agg.curve(&cells));
    }
    Ok(table)
}

/// Plans and runs every trial on the current rayon pool, then aggregates.
/// Output does not depend on the pool width.
pub fn run_experiment(matrix: &PredictionMatrix, config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let plans = (0..config.trials)
        .map(|t| make_trial_plan(matrix, config, t))
        .collect::<Result<Vec<_>>>()?;
    let records = plans
        .par_iter()
        .map(|p| run_trial(matrix, p, config))
        .collect::<Result<Vec<_>>>()?;
    aggregate(config, &records)
}

/// [`run_experiment`] on a dedicated pool of `threads` workers (0 = rayon
/// default).
pub fn run_experiment_with_threads(
    matrix: &PredictionMatrix,
    config: &ExperimentConfig,
    threads: usize,
) -> Result<ResultTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_experiment(matrix, config))
}
