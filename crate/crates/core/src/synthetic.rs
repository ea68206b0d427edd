//! Synthetic prediction matrices with planted structure, for tests and
//! desk-scale experiments.

use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, ExampleId, ModelId, PredictionMatrix};
use crate::seed::{self, SeedBuilder};

/// Standard deviation of the Gaussian noise added to planted confidences.
pub const CONFIDENCE_NOISE: f64 = 0.05;
/// Spread of the block latent factor in blocked-correlation confidences.
const BLOCK_SPREAD: f64 = 0.15;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("need at least one model and one example")]
    Empty,
    #[error("accuracy range [{lo}, {hi}] must satisfy 0 <= lo <= hi <= 100")]
    BadRange { lo: f64, hi: f64 },
    #[error("num_subtasks must be between 1 and num_examples ({examples}), got {subtasks}")]
    BadSubtasks { subtasks: usize, examples: usize },
    #[error("blocks must be between 1 and num_examples ({examples}), got {blocks}")]
    BadBlocks { blocks: usize, examples: usize },
    #[error("block correlation must lie in [0, 1], got {0}")]
    BadCorrelation(f64),
    #[error("irt-planted dimension must be positive")]
    ZeroDim,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Structure {
    /// Each bit is Bernoulli(p_m); confidence is p_m plus clipped noise.
    IidBernoulli,
    /// Bits from a planted multidimensional 2PL model. The accuracy range is
    /// not used; abilities are standard normal.
    IrtPlanted { dim: usize },
    /// Confidences share a per-(model, block) latent factor; bits are
    /// Bernoulli(confidence).
    BlockedCorrelation {
        blocks: usize,
        #[serde(default = "default_correlation")]
        correlation: f64,
    },
}

fn default_correlation() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_models: usize,
    pub num_examples: usize,
    #[serde(default = "one")]
    pub num_subtasks: usize,
    #[serde(default = "default_range")]
    pub accuracy_range: [f64; 2],
    pub structure: Structure,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn default_range() -> [f64; 2] {
    [30.0, 70.0]
}

impl SyntheticSpec {
    pub fn iid(
        num_models: usize,
        num_examples: usize,
        accuracy_range: [f64; 2],
        seed: u64,
    ) -> Self {
        Self {
            num_models,
            num_examples,
            num_subtasks: 1,
            accuracy_range,
            structure: Structure::IidBernoulli,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        if self.num_models == 0 || self.num_examples == 0 {
            return Err(SyntheticError::Empty);
        }
        let [lo, hi] = self.accuracy_range;
        if !(0.0 <= lo && lo <= hi && hi <= 100.0) {
            return Err(SyntheticError::BadRange { lo, hi });
        }
        if self.num_subtasks == 0 || self.num_subtasks > self.num_examples {
            return Err(SyntheticError::BadSubtasks {
                subtasks: self.num_subtasks,
                examples: self.num_examples,
            });
        }
        match self.structure {
            Structure::IidBernoulli => {}
            Structure::IrtPlanted { dim: 0 } => return Err(SyntheticError::ZeroDim),
            Structure::IrtPlanted { .. } => {}
            Structure::BlockedCorrelation {
                blocks,
                correlation,
            } => {
                if blocks == 0 || blocks > self.num_examples {
                    return Err(SyntheticError::BadBlocks {
                        blocks,
                        examples: self.num_examples,
                    });
                }
                if !(0.0..=1.0).contains(&correlation) {
                    return Err(SyntheticError::BadCorrelation(correlation));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedIrt {
    pub ability: Vec<Vec<f64>>,
    pub discrimination: Vec<Vec<f64>>,
    pub difficulty: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedBlocks {
    /// Block index of each example.
    pub block_of: Vec<usize>,
    /// Latent factor per (model, block), model-major.
    pub factor: Vec<Vec<f64>>,
    pub correlation: f64,
}

/// Everything drawn while generating, in model/example order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    /// Planted accuracy p_m in percent (unused by irt-planted, reported as
    /// the expected accuracy).
    pub accuracy: Vec<f64>,
    /// Expected full-pool accuracy given the planted parameters, in percent.
    pub expected_accuracy: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irt: Option<PlantedIrt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<PlantedBlocks>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draws a matrix and its planted truth. Deterministic in `spec`.
pub fn generate(spec: &SyntheticSpec) -> Result<(PredictionMatrix, PlantedTruth), SyntheticError> {
    spec.validate()?;
    let (nm, ne) = (spec.num_models, spec.num_examples);
    let mut rng = seed::rng(SeedBuilder::new("synthetic").u64(spec.seed).finish());
    let noise = Normal::new(0.0, CONFIDENCE_NOISE).expect("valid std");
    let [lo, hi] = spec.accuracy_range;
    let accuracy: Vec<f64> = (0..nm)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect();

    let mut correct = Vec::with_capacity(nm * ne);
    let mut confidence = Vec::with_capacity(nm * ne);
    let mut expected = Vec::with_capacity(nm);
    let mut irt = None;
    let mut blocks = None;
    match spec.structure {
        Structure::IidBernoulli => {
            for &p in &accuracy {
                let p = p / 100.0;
                for _ in 0..ne {
                    correct.push(rng.random::<f64>() < p);
                    confidence.push((p + noise.sample(&mut rng)).clamp(0.0, 1.0));
                }
            }
            expected = accuracy.clone();
        }
        Structure::IrtPlanted { dim } => {
            let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
            let ability: Vec<Vec<f64>> = (0..nm)
                .map(|_| (0..dim).map(|_| gauss()).collect())
                .collect();
            // positive loadings of unit total scale keep the logit spread
            // comparable across dimensions
            let scale = 1.0 / (dim as f64).sqrt();
            let discrimination: Vec<Vec<f64>> = (0..ne)
                .map(|_| (0..dim).map(|_| scale * (0.5 + gauss().abs())).collect())
                .collect();
            let difficulty: Vec<f64> = (0..ne).map(|_| gauss()).collect();
            for theta in &ability {
                let mut sum = 0.0;
                for e in 0..ne {
                    let logit: f64 = theta
                        .iter()
                        .zip(&discrimination[e])
                        .map(|(t, a)| t * a)
                        .sum::<f64>()
                        - difficulty[e];
                    let p = sigmoid(logit);
                    sum += p;
                    correct.push(rng.random::<f64>() < p);
                    confidence.push((p + noise.sample(&mut rng)).clamp(0.0, 1.0));
                }
                expected.push(100.0 * sum / ne as f64);
            }
            irt = Some(PlantedIrt {
                ability,
                discrimination,
                difficulty,
            });
        }
        Structure::BlockedCorrelation {
            blocks: k,
            correlation,
        } => {
            let block_of: Vec<usize> = (0..ne).map(|e| e * k / ne).collect();
            let factor: Vec<Vec<f64>> = (0..nm)
                .map(|_| (0..k).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect();
            let (shared, own) = (correlation.sqrt(), (1.0 - correlation).sqrt());
            for (m, &p) in accuracy.iter().enumerate() {
                let mut sum = 0.0;
                for &b in &block_of {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    let c = (p / 100.0 + BLOCK_SPREAD * (shared * factor[m][b] + own * eps))
                        .clamp(0.0, 1.0);
                    sum += c;
                    correct.push(rng.random::<f64>() < c);
                    confidence.push(c);
                }
                expected.push(100.0 * sum / ne as f64);
            }
            blocks = Some(PlantedBlocks {
                block_of,
                factor,
                correlation,
            });
        }
    }

    let accuracy = if irt.is_some() {
        expected.clone()
    } else {
        accuracy
    };
    let models = (0..nm)
        .map(|m| ModelId::new(format!("model_{m:03}")))
        .collect::<Result<_, _>>()?;
    let examples = (0..ne)
        .map(|e| ExampleId::new(format!("ex_{e:05}")))
        .collect::<Result<_, _>>()?;
    let subtasks = (0..ne)
        .map(|e| format!("subtask_{:02}", e * spec.num_subtasks / ne))
        .collect();
    let matrix = PredictionMatrix::new(models, examples, correct, confidence, subtasks)?;
    Ok((
        matrix,
        PlantedTruth {
            accuracy,
            expected_accuracy: expected,
            irt,
            blocks,
        },
    ))
}

/// File names written by [`write_dataset`].
pub const CORRECT_FILE: &str = "correct.csv";
pub const CONFIDENCE_FILE: &str = "confidence.csv";
pub const SUBTASK_FILE: &str = "subtasks.csv";
pub const TRUTH_FILE: &str = "truth.json";

/// Writes the CSV trio plus `truth.json` into `dir` (created if missing).
pub fn write_dataset(
    matrix: &PredictionMatrix,
    truth: &PlantedTruth,
    dir: &Path,
) -> Result<(), SyntheticError> {
    let io = |source| SyntheticError::Io {
        path: dir.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    matrix.write_csv(
        &dir.join(CORRECT_FILE),
        &dir.join(CONFIDENCE_FILE),
        &dir.join(SUBTASK_FILE),
    )?;
    let json = serde_json::to_string_pretty(truth).expect("truth serializes");
    std::fs::write(dir.join(TRUTH_FILE), json + "\n").map_err(io)
}
