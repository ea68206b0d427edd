//! Multidimensional two-parameter IRT model fit by full-batch gradient
//! descent on the Bernoulli negative log-likelihood of correctness bits.
//!
//! `p(model m answers example e) = sigmoid(θ_m · a_e − b_e)`. The example
//! embedding used for tinyBenchmarks-style selection is `[a_e ; b_e]`.

use std::collections::{BTreeMap, HashMap};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ExampleId, ModelId, PredictionMatrix};
use crate::seed::{self, SeedBuilder};

pub const PARAM_BOUND: f64 = 10.0;
pub const LOGIT_BOUND: f64 = 15.0;
const INIT_STD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrtError {
    #[error("IRT needs at least 2 models and 2 examples, got {models} x {examples}")]
    TooSmall { models: usize, examples: usize },
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("loss diverged (non-finite) at epoch {epoch}; lower the learning rate")]
    Diverged { epoch: usize },
    #[error("example `{0}` was not in the training pool")]
    UnknownExample(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrtConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Ridge coefficient on all parameters.
    pub l2: f64,
    pub seed: u64,
}

impl Default for IrtConfig {
    fn default() -> Self {
        Self {
            dim: 10,
            learning_rate: 0.1,
            epochs: 2000,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Flat parameter layout: abilities (models × d), discriminations
/// (examples × d), difficulties (examples).
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub models: usize,
    pub examples: usize,
    pub dim: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.models * self.dim + self.examples * (self.dim + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn disc_offset(&self) -> usize {
        self.models * self.dim
    }

    fn diff_offset(&self) -> usize {
        self.disc_offset() + self.examples * self.dim
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Penalized total negative log-likelihood over a 0/1 matrix
/// (`bits[m * examples + e]`).
pub struct Objective<'a> {
    pub layout: Layout,
    pub bits: &'a [u8],
    pub l2: f64,
}

impl Objective<'_> {
    /// Returns (penalized total NLL, mean unpenalized NLL) and writes the
    /// exact gradient of the former into `grad`. Cells whose logit lies
    /// outside the clamp contribute a constant, hence zero gradient.
    pub fn eval(&self, params: &[f64], grad: &mut [f64]) -> (f64, f64) {
        let Layout {
            models,
            examples,
            dim,
        } = self.layout;
        let (disc, diff) = (self.layout.disc_offset(), self.layout.diff_offset());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut nll = 0.0;
        for m in 0..models {
            let theta = &params[m * dim..(m + 1) * dim];
            let mut g_theta = vec![0.0; dim];
            for e in 0..examples {
                let a = &params[disc + e * dim..disc + (e + 1) * dim];
                let raw: f64 =
                    theta.iter().zip(a).map(|(t, x)| t * x).sum::<f64>() - params[diff + e];
                let z = raw.clamp(-LOGIT_BOUND, LOGIT_BOUND);
                let y = self.bits[m * examples + e] as f64;
                nll += softplus(z) - y * z;
                if raw.abs() >= LOGIT_BOUND {
                    continue;
                }
                let r = sigmoid(z) - y;
                for k in 0..dim {
                    g_theta[k] += r * a[k];
                    grad[disc + e * dim + k] += r * theta[k];
                }
                grad[diff + e] -= r;
            }
            for (g, v) in grad[m * dim..(m + 1) * dim].iter_mut().zip(g_theta) {
                *g += v;
            }
        }
        let mut penalty = 0.0;
        for (g, &p) in grad.iter_mut().zip(params) {
            penalty += p * p;
            *g += 2.0 * self.l2 * p;
        }
        (nll + self.l2 * penalty, nll / (models * examples) as f64)
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let mut scratch = vec![0.0; params.len()];
        self.eval(params, &mut scratch).0
    }
}

#[derive(Debug, Clone)]
pub struct IrtModel {
    pub dim: usize,
    models: Vec<ModelId>,
    examples: Vec<ExampleId>,
    params: Vec<f64>,
    model_index: HashMap<ModelId, usize>,
    example_index: HashMap<ExampleId, usize>,
    /// (epoch, mean NLL after that many updates), epoch 0 = initialization.
    pub training_log: Vec<(usize, f64)>,
}

fn layout_of(models: usize, examples: usize, dim: usize) -> Layout {
    Layout {
        models,
        examples,
        dim,
    }
}

/// Initial parameters: i.i.d. N(0, 0.1²), each id's vector drawn from a
/// stream keyed by (seed, role, id) so that row order does not matter.
pub fn initial_params(matrix: &PredictionMatrix, dim: usize, seed_value: u64) -> Vec<f64> {
    let layout = layout_of(matrix.num_models(), matrix.num_examples(), dim);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let draw = |role: &str, id: &str, count: usize| -> Vec<f64> {
        let s = SeedBuilder::new("irt-init")
            .u64(seed_value)
            .str(role)
            .str(id)
            .finish();
        let mut rng = seed::rng(s);
        (0..count).map(|_| normal.sample(&mut rng)).collect()
    };
    let mut params = Vec::with_capacity(layout.len());
    for m in matrix.models() {
        params.extend(draw("ability", m.as_str(), dim));
    }
    for e in matrix.examples() {
        params.extend(draw("discrimination", e.as_str(), dim));
    }
    for e in matrix.examples() {
        params.extend(draw("difficulty", e.as_str(), 1));
    }
    params
}

/// Fits the model to the matrix's correctness bits.
///
/// Each step moves every parameter against its gradient scaled by the
/// number of observations it touches (1/examples for abilities,
/// 1/models for example parameters), so the learning rate acts on
/// per-observation averages regardless of matrix size.
pub fn fit_irt(matrix: &PredictionMatrix, config: &IrtConfig) -> Result<IrtModel, IrtError> {
    let (nm, ne) = (matrix.num_models(), matrix.num_examples());
    if nm < 2 || ne < 2 {
        return Err(IrtError::TooSmall {
            models: nm,
            examples: ne,
        });
    }
    if config.dim == 0 {
        return Err(IrtError::ZeroDim);
    }
    let layout = layout_of(nm, ne, config.dim);
    let bits: Vec<u8> = (0..nm)
        .flat_map(|m| matrix.correct_row(m).iter().copied())
        .collect();
    let objective = Objective {
        layout,
        bits: &bits,
        l2: config.l2,
    };
    let mut params = initial_params(matrix, config.dim, config.seed);
    let mut grad = vec![0.0; params.len()];
    let split = layout.disc_offset();
    let (step_models, step_examples) = (
        config.learning_rate / ne as f64,
        config.learning_rate / nm as f64,
    );
    let mut log = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..=config.epochs {
        let (_, mean_nll) = objective.eval(&params, &mut grad);
        if !mean_nll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(IrtError::Diverged { epoch });
        }
        log.push((epoch, mean_nll));
        if epoch == config.epochs {
            break;
        }
        for (i, (p, g)) in params.iter_mut().zip(&grad).enumerate() {
            let step = if i < split {
                step_models
            } else {
                step_examples
            };
            *p = (*p - step * g).clamp(-PARAM_BOUND, PARAM_BOUND);
        }
    }
    Ok(IrtModel {
        dim: config.dim,
        models: matrix.models().to_vec(),
        examples: matrix.examples().to_vec(),
        model_index: matrix.models().iter().cloned().zip(0..).collect(),
        example_index: matrix.examples().iter().cloned().zip(0..).collect(),
        params,
        training_log: log,
    })
}

#[derive(Serialize)]
struct Dump<'a> {
    d: usize,
    ability: BTreeMap<&'a str, &'a [f64]>,
    discrimination: BTreeMap<&'a str, &'a [f64]>,
    difficulty: BTreeMap<&'a str, f64>,
}

impl IrtModel {
    fn layout(&self) -> Layout {
        layout_of(self.models.len(), self.examples.len(), self.dim)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn ability(&self, model: &str) -> Option<&[f64]> {
        let m = *self.model_index.get(model)?;
        Some(&self.params[m * self.dim..(m + 1) * self.dim])
    }

    fn example_slot(&self, example: &str) -> Result<usize, IrtError> {
        self.example_index
            .get(example)
            .copied()
            .ok_or_else(|| IrtError::UnknownExample(example.to_string()))
    }

    pub fn discrimination(&self, example: &str) -> Result<&[f64], IrtError> {
        let e = self.example_slot(example)?;
        let off = self.layout().disc_offset();
        Ok(&self.params[off + e * self.dim..off + (e + 1) * self.dim])
    }

    pub fn difficulty(&self, example: &str) -> Result<f64, IrtError> {
        let e = self.example_slot(example)?;
        Ok(self.params[self.layout().diff_offset() + e])
    }

    /// Predicted probability that `model` answers `example` correctly.
    pub fn probability(&self, model: &str, example: &str) -> Option<f64> {
        let theta = self.ability(model)?;
        let a = self.discrimination(example).ok()?;
        let b = self.difficulty(example).ok()?;
        let z: f64 = theta.iter().zip(a).map(|(t, x)| t * x).sum::<f64>() - b;
        Some(sigmoid(z.clamp(-LOGIT_BOUND, LOGIT_BOUND)))
    }

    pub fn final_loss(&self) -> f64 {
        self.training_log.last().map_or(f64::NAN, |&(_, l)| l)
    }

    pub fn to_json(&self) -> String {
        let dim = self.dim;
        let off = self.layout().disc_offset();
        let diff = self.layout().diff_offset();
        let dump = Dump {
            d: dim,
            ability: self
                .models
                .iter()
                .enumerate()
                .map(|(m, id)| (id.as_str(), &self.params[m * dim..(m + 1) * dim]))
                .collect(),
            discrimination: self
                .examples
                .iter()
                .enumerate()
                .map(|(e, id)| {
                    (
                        id.as_str(),
                        &self.params[off + e * dim..off + (e + 1) * dim],
                    )
                })
                .collect(),
            difficulty: self
                .examples
                .iter()
                .enumerate()
                .map(|(e, id)| (id.as_str(), self.params[diff + e]))
                .collect(),
        };
        serde_json::to_string_pretty(&dump).expect("IRT dump serializes")
    }
}

/// `[a_e ; b_e]`, of length `d + 1`.
pub fn example_embedding(model: &IrtModel, example: &ExampleId) -> Result<Vec<f64>, IrtError> {
    let mut v = model.discrimination(example.as_str())?.to_vec();
    v.push(model.difficulty(example.as_str())?);
    Ok(v)
}
