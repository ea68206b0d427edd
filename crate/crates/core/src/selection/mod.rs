//! Micro-benchmark selection methods and the estimators that turn a
//! micro-benchmark into a performance estimate.

mod anchor;
mod diversity;
pub mod kmeans;
pub mod kmedoids;
mod random;
mod stratified;
mod tiny;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ExampleId, ModelId, Performance, PredictionMatrix};
use crate::irt::IrtModel;

pub use anchor::{correlation_dissimilarity, select_anchor_points};
pub use diversity::{greedy_log_det, pca_project, select_diversity};
pub use random::{select_random_subtask_stratified, select_random_uniform};
pub use stratified::{proportional_allocation, select_stratified_confidence};
pub use tiny::select_tinybenchmarks;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("micro-benchmark size must be positive")]
    ZeroSize,
    #[error("requested {n} examples but the pool has only {pool}")]
    SizeExceedsPool { n: usize, pool: usize },
    #[error("n = {n} is smaller than the number of subtasks ({subtasks})")]
    FewerThanSubtasks { n: usize, subtasks: usize },
    #[error("subtask `{subtask}` has {size} examples but {need} are required")]
    SubtaskTooSmall {
        subtask: String,
        size: usize,
        need: usize,
    },
    #[error("method needs at least {need} source models, got {have}")]
    TooFewModels { need: usize, have: usize },
    #[error("method needs at least {need} examples, got {have}")]
    TooFewExamples { need: usize, have: usize },
    #[error("n = {n} is smaller than the number of non-empty strata ({strata})")]
    FewerThanStrata { n: usize, strata: usize },
    #[error("k-means could not repair empty clusters after {repairs} attempts")]
    EmptyCluster { repairs: usize },
    #[error("k = {k} exceeds the number of distinct points ({distinct})")]
    TooFewDistinctPoints { k: usize, distinct: usize },
    #[error("method `{0}` requires a fitted IRT model")]
    MissingIrt(String),
    #[error("IRT model has no embedding for example `{0}`")]
    IrtPoolMismatch(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("estimator/weights mismatch: {0}")]
    EstimatorMismatch(String),
}

pub type Result<T, E = SelectionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RandomUniform,
    RandomSubtask,
    StratifiedConfidence,
    AnchorPoints,
    #[serde(rename = "tinybenchmarks")]
    TinyBenchmarks,
    Diversity,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::RandomUniform,
        Method::RandomSubtask,
        Method::StratifiedConfidence,
        Method::AnchorPoints,
        Method::TinyBenchmarks,
        Method::Diversity,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::RandomUniform => "random-uniform",
            Method::RandomSubtask => "random-subtask",
            Method::StratifiedConfidence => "stratified-confidence",
            Method::AnchorPoints => "anchor-points",
            Method::TinyBenchmarks => "tinybenchmarks",
            Method::Diversity => "diversity",
        }
    }

    /// Whether the method's estimator is the plain mean of correctness bits.
    pub fn is_plain_mean(self) -> bool {
        matches!(
            self,
            Method::RandomUniform | Method::RandomSubtask | Method::Diversity
        )
    }

    /// Whether selection depends on the source models at all.
    pub fn uses_source_models(self) -> bool {
        !matches!(self, Method::RandomUniform | Method::RandomSubtask)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = SelectionError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| SelectionError::UnknownMethod(s.to_string()))
    }
}

/// Per-example signal averaged by the cluster-weighted estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    /// Correctness bits.
    #[default]
    Correct,
    /// Correct-class confidence.
    Confidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    PlainMean,
    ClusterWeighted(Signal),
    HorvitzThompson,
}

impl Estimator {
    fn tag(self) -> &'static str {
        match self {
            Estimator::PlainMean => "plain-mean",
            Estimator::ClusterWeighted(_) => "cluster-weighted",
            Estimator::HorvitzThompson => "horvitz-thompson",
        }
    }
}

/// Method-specific knobs. Defaults follow the reference configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodParams {
    /// Number of confidence strata for stratified sampling.
    pub strata: usize,
    /// Signal averaged by the tinyBenchmarks estimator.
    pub tiny_signal: Signal,
    /// Projection dimension for diversity sampling.
    pub pca_dims: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            strata: 10,
            tiny_signal: Signal::Correct,
            pca_dims: 4,
        }
    }
}

/// Inputs to a selection method. `matrix` holds only the source models
/// (rows) and the selectable pool (columns).
#[derive(Debug, Clone, Copy)]
pub struct SelectionRequest<'a> {
    pub matrix: &'a PredictionMatrix,
    pub n: usize,
    pub seed: u64,
    pub params: &'a MethodParams,
}

impl SelectionRequest<'_> {
    pub(crate) fn pool_size(&self) -> usize {
        self.matrix.num_examples()
    }

    pub(crate) fn check_size(&self) -> Result<()> {
        if self.n == 0 {
            return Err(SelectionError::ZeroSize);
        }
        if self.n > self.pool_size() {
            return Err(SelectionError::SizeExceedsPool {
                n: self.n,
                pool: self.pool_size(),
            });
        }
        Ok(())
    }

    pub(crate) fn require_models(&self, need: usize) -> Result<()> {
        let have = self.matrix.num_models();
        if have < need {
            return Err(SelectionError::TooFewModels { need, have });
        }
        Ok(())
    }

    /// Builds a micro-benchmark from pool indices (sorted into pool order).
    pub(crate) fn micro(
        &self,
        method: Method,
        estimator: Estimator,
        mut picked: Vec<(usize, f64)>,
    ) -> MicroBenchmark {
        picked.sort_by_key(|&(i, _)| i);
        let examples = self.matrix.examples();
        MicroBenchmark {
            example_ids: picked.iter().map(|&(i, _)| examples[i].clone()).collect(),
            weights: picked.iter().map(|&(_, w)| w).collect(),
            estimator,
            method_tag: method.tag().to_string(),
            seed: self.seed,
        }
    }
}

/// A selected subset together with how to turn it into an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroBenchmark {
    pub example_ids: Vec<ExampleId>,
    /// One weight per selected example: 1 for plain mean, cluster size for
    /// cluster-weighted, 1/π for Horvitz–Thompson.
    pub weights: Vec<f64>,
    pub estimator: Estimator,
    pub method_tag: String,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireMicro {
    method_tag: String,
    seed: u64,
    estimator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signal: Option<Signal>,
    examples: Vec<WireExample>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireExample {
    example_id: ExampleId,
    weight: f64,
}

/// Rounds to nine significant digits.
pub(crate) fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

impl MicroBenchmark {
    pub fn len(&self) -> usize {
        self.example_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.example_ids.is_empty()
    }

    pub fn to_json(&self) -> String {
        let wire = WireMicro {
            method_tag: self.method_tag.clone(),
            seed: self.seed,
            estimator: self.estimator.tag().to_string(),
            signal: match self.estimator {
                Estimator::ClusterWeighted(s) => Some(s),
                _ => None,
            },
            examples: self
                .example_ids
                .iter()
                .zip(&self.weights)
                .map(|(id, &w)| WireExample {
                    example_id: id.clone(),
                    weight: round_sig9(w),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&wire).expect("micro-benchmark serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        let wire: WireMicro = serde_json::from_str(s).map_err(|e| e.to_string())?;
        let estimator = match (wire.estimator.as_str(), wire.signal) {
            ("plain-mean", None) => Estimator::PlainMean,
            ("horvitz-thompson", None) => Estimator::HorvitzThompson,
            ("cluster-weighted", signal) => {
                Estimator::ClusterWeighted(signal.unwrap_or(Signal::Confidence))
            }
            (other, Some(_)) => return Err(format!("estimator `{other}` takes no signal")),
            (other, None) => return Err(format!("unknown estimator `{other}`")),
        };
        let (example_ids, weights) = wire
            .examples
            .into_iter()
            .map(|e| (e.example_id, e.weight))
            .unzip();
        Ok(Self {
            example_ids,
            weights,
            estimator,
            method_tag: wire.method_tag,
            seed: wire.seed,
        })
    }
}

/// A micro-benchmark resolved against one matrix's example indices, so that
/// many models can be scored without repeated id lookups.
#[derive(Debug, Clone)]
pub struct ResolvedMicro {
    indices: Vec<usize>,
    weights: Vec<f64>,
    weight_sum: f64,
    estimator: Estimator,
}

impl ResolvedMicro {
    pub fn new(micro: &MicroBenchmark, matrix: &PredictionMatrix) -> Result<Self> {
        if micro.is_empty() {
            return Err(SelectionError::EstimatorMismatch(
                "empty micro-benchmark".into(),
            ));
        }
        if micro.weights.len() != micro.example_ids.len() {
            return Err(SelectionError::EstimatorMismatch(format!(
                "{} weights for {} examples",
                micro.weights.len(),
                micro.example_ids.len()
            )));
        }
        let indices = micro
            .example_ids
            .iter()
            .map(|id| {
                matrix
                    .example_index(id.as_str())
                    .ok_or_else(|| SelectionError::UnknownExample(id.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        for (id, &w) in micro.example_ids.iter().zip(&micro.weights) {
            let ok = match micro.estimator {
                Estimator::PlainMean => w == 1.0,
                Estimator::ClusterWeighted(_) => w.is_finite() && w > 0.0,
                // weights are serialized at 9 significant digits
                Estimator::HorvitzThompson => w.is_finite() && w >= 1.0 - 1e-9,
            };
            if !ok {
                return Err(SelectionError::EstimatorMismatch(format!(
                    "weight {w} for example `{id}` is invalid for {}",
                    micro.estimator.tag()
                )));
            }
        }
        Ok(Self {
            weight_sum: micro.weights.iter().sum(),
            indices,
            weights: micro.weights.clone(),
            estimator: micro.estimator,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Estimated accuracy (0..=100) of the model at row `model`.
    pub fn estimate(&self, matrix: &PredictionMatrix, model: usize) -> Performance {
        let bits = matrix.correct_row(model);
        let value = match self.estimator {
            Estimator::PlainMean => {
                let hits: usize = self.indices.iter().map(|&e| bits[e] as usize).sum();
                100.0 * hits as f64 / self.indices.len() as f64
            }
            Estimator::ClusterWeighted(Signal::Confidence) => {
                let conf = matrix.confidence_row(model);
                let s: f64 = self
                    .indices
                    .iter()
                    .zip(&self.weights)
                    .map(|(&e, w)| w * conf[e])
                    .sum();
                100.0 * s / self.weight_sum
            }
            // HT: the weights of a stratum sum to its population, so the
            // total weight is the pool size N.
            Estimator::ClusterWeighted(Signal::Correct) | Estimator::HorvitzThompson => {
                let s: f64 = self
                    .indices
                    .iter()
                    .zip(&self.weights)
                    .map(|(&e, w)| w * bits[e] as f64)
                    .sum();
                100.0 * s / self.weight_sum
            }
        };
        Performance::saturating(value)
    }
}

/// Estimates one model's accuracy from a micro-benchmark.
pub fn estimate_performance(
    micro: &MicroBenchmark,
    matrix: &PredictionMatrix,
    model: &ModelId,
) -> Result<Performance> {
    let m = matrix
        .model_index(model.as_str())
        .ok_or_else(|| SelectionError::UnknownModel(model.to_string()))?;
    Ok(ResolvedMicro::new(micro, matrix)?.estimate(matrix, m))
}

/// Runs `method` on the request. tinyBenchmarks needs a fitted IRT model.
pub fn select(
    method: Method,
    req: &SelectionRequest<'_>,
    irt: Option<&IrtModel>,
) -> Result<MicroBenchmark> {
    match method {
        Method::RandomUniform => select_random_uniform(req),
        Method::RandomSubtask => select_random_subtask_stratified(req),
        Method::StratifiedConfidence => select_stratified_confidence(req),
        Method::AnchorPoints => select_anchor_points(req),
        Method::TinyBenchmarks => {
            let irt = irt.ok_or_else(|| SelectionError::MissingIrt(method.tag().into()))?;
            select_tinybenchmarks(req, irt)
        }
        Method::Diversity => select_diversity(req),
    }
}
