//! Core domain types and ingestion of prediction matrices, subtask maps and
//! model metadata.
//!
//! All files are plain comma-separated UTF-8 with a fixed header:
//!
//! | file        | header                                      |
//! |-------------|---------------------------------------------|
//! | correctness | `model_id,example_id,correct`               |
//! | confidence  | `model_id,example_id,confidence`            |
//! | subtasks    | `example_id,subtask`                        |
//! | model meta  | `model_id,param_count_b,instruct,family`    |
//!
//! Rows may come in any order. Cells are joined on `(model_id, example_id)`;
//! model and example order is the order of first appearance in the
//! correctness file.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file {path}: {source}")]
    MissingFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: malformed row: {reason}")]
    Malformed {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("empty id in {what}")]
    EmptyId { what: &'static str },
    #[error("{path}: duplicate cell for model `{model}`, example `{example}`")]
    DuplicateCell {
        path: PathBuf,
        model: String,
        example: String,
    },
    #[error("confidence out of range: {value} for model `{model}`, example `{example}`")]
    ConfidenceOutOfRange {
        model: String,
        example: String,
        value: f64,
    },
    #[error("example `{example}` present in correctness file but absent from confidence file")]
    ExampleMissingConfidence { example: String },
    #[error("example `{example}` present in confidence file but absent from correctness file")]
    ExampleMissingCorrectness { example: String },
    #[error("model `{model}` present in correctness file but absent from confidence file")]
    ModelMissingConfidence { model: String },
    #[error("model `{model}` present in confidence file but absent from correctness file")]
    ModelMissingCorrectness { model: String },
    #[error("missing {which} cell for model `{model}`, example `{example}`")]
    MissingCell {
        which: &'static str,
        model: String,
        example: String,
    },
    #[error("unlabeled example `{example}`: no subtask label")]
    UnlabeledExample { example: String },
    #[error("subtask label for unknown example `{example}`")]
    UnknownLabeledExample { example: String },
    #[error("example `{example}` has more than one subtask label")]
    DuplicateLabel { example: String },
    #[error("negative parameter count {value} for model `{model}`")]
    NegativeParamCount { model: String, value: f64 },
    #[error("duplicate model_id `{model}` in model metadata")]
    DuplicateModelMeta { model: String },
    #[error("duplicate {what} id `{id}`")]
    DuplicateId { what: &'static str, id: String },
    #[error("shape mismatch: expected {expected} cells, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("filter keeps {kept} model(s); at least 2 are required for pairwise comparisons")]
    TooFewModels { kept: usize },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("performance {0} outside [0, 100]")]
    PerformanceOutOfRange(f64),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

macro_rules! string_id {
    ($name:ident, $what:literal) => {
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Result<Self> {
                let id = id.into();
                if id.is_empty() {
                    return Err(DataError::EmptyId { what: $what });
                }
                Ok(Self(id))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = DataError;
            fn try_from(s: String) -> Result<Self> {
                Self::new(s)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }
    };
}

string_id!(ExampleId, "example");
string_id!(ModelId, "model");

/// Accuracy on the 0..=100 scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Performance(f64);

impl Performance {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=100.0).contains(&value) {
            return Err(DataError::PerformanceOutOfRange(value));
        }
        Ok(Self(value))
    }

    /// Clamps tiny floating-point excursions (e.g. HT estimates) into range.
    pub(crate) fn saturating(value: f64) -> Self {
        Self(value.clamp(0.0, 100.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_id: ModelId,
    pub param_count_billions: f64,
    pub instruct: bool,
    pub family: Option<String>,
}

/// Dense model × example table of correctness bits and correct-class
/// confidences. Immutable once built.
#[derive(Debug, Clone)]
pub struct PredictionMatrix {
    models: Vec<ModelId>,
    examples: Vec<ExampleId>,
    correct: Vec<u8>,
    confidence: Vec<f64>,
    subtask: Vec<String>,
    model_index: HashMap<ModelId, usize>,
    example_index: HashMap<ExampleId, usize>,
}

impl PartialEq for PredictionMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.models == other.models
            && self.examples == other.examples
            && self.correct == other.correct
            && self.confidence == other.confidence
            && self.subtask == other.subtask
    }
}

impl PredictionMatrix {
    /// Builds a matrix from row-major (model × example) cell vectors.
    pub fn new(
        models: Vec<ModelId>,
        examples: Vec<ExampleId>,
        correct: Vec<bool>,
        confidence: Vec<f64>,
        subtasks: Vec<String>,
    ) -> Result<Self> {
        let cells = models.len() * examples.len();
        for len in [correct.len(), confidence.len()] {
            if len != cells {
                return Err(DataError::ShapeMismatch {
                    expected: cells,
                    got: len,
                });
            }
        }
        if subtasks.len() != examples.len() {
            return Err(DataError::ShapeMismatch {
                expected: examples.len(),
                got: subtasks.len(),
            });
        }
        let model_index = index_ids(&models, "model")?;
        let example_index = index_ids(&examples, "example")?;
        let ne = examples.len();
        for (cell, &c) in confidence.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(DataError::ConfidenceOutOfRange {
                    model: models[cell / ne].to_string(),
                    example: examples[cell % ne].to_string(),
                    value: c,
                });
            }
        }
        for (e, s) in subtasks.iter().enumerate() {
            if s.is_empty() {
                return Err(DataError::UnlabeledExample {
                    example: examples[e].to_string(),
                });
            }
        }
        Ok(Self {
            models,
            examples,
            correct: correct.into_iter().map(u8::from).collect(),
            confidence,
            subtask: subtasks,
            model_index,
            example_index,
        })
    }

    pub fn models(&self) -> &[ModelId] {
        &self.models
    }

    pub fn examples(&self) -> &[ExampleId] {
        &self.examples
    }

    pub fn num_models(&self) -> usize {
        self.models.len()
    }

    pub fn num_examples(&self) -> usize {
        self.examples.len()
    }

    pub fn model_index(&self, id: &str) -> Option<usize> {
        self.model_index.get(id).copied()
    }

    pub fn example_index(&self, id: &str) -> Option<usize> {
        self.example_index.get(id).copied()
    }

    #[inline]
    pub fn correct(&self, model: usize, example: usize) -> bool {
        self.correct[model * self.examples.len() + example] != 0
    }

    #[inline]
    pub fn confidence(&self, model: usize, example: usize) -> f64 {
        self.confidence[model * self.examples.len() + example]
    }

    /// Correctness bits of one model, in example order.
    pub fn correct_row(&self, model: usize) -> &[u8] {
        let ne = self.examples.len();
        &self.correct[model * ne..(model + 1) * ne]
    }

    pub fn confidence_row(&self, model: usize) -> &[f64] {
        let ne = self.examples.len();
        &self.confidence[model * ne..(model + 1) * ne]
    }

    pub fn subtask(&self, example: usize) -> &str {
        &self.subtask[example]
    }

    pub fn subtask_of(&self, id: &str) -> Option<&str> {
        self.example_index(id).map(|e| self.subtask(e))
    }

    /// Example indices grouped by subtask label; labels in lexicographic
    /// order, indices in matrix order.
    pub fn subtask_groups(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (e, s) in self.subtask.iter().enumerate() {
            groups.entry(s.as_str()).or_default().push(e);
        }
        groups
    }

    /// Accuracy (0..=100) of a model over a set of example indices.
    pub fn accuracy(&self, model: usize, examples: &[usize]) -> Performance {
        if examples.is_empty() {
            return Performance(0.0);
        }
        let row = self.correct_row(model);
        let hits: usize = examples.iter().map(|&e| row[e] as usize).sum();
        Performance(100.0 * hits as f64 / examples.len() as f64)
    }

    /// Accuracy over every example in the matrix.
    pub fn full_accuracy(&self, model: usize) -> Performance {
        let hits: usize = self.correct_row(model).iter().map(|&b| b as usize).sum();
        Performance(100.0 * hits as f64 / self.examples.len().max(1) as f64)
    }

    /// Sub-matrix over the given model and example indices (in the given order).
    pub fn restrict(&self, models: &[usize], examples: &[usize]) -> PredictionMatrix {
        let mut correct = Vec::with_capacity(models.len() * examples.len());
        let mut confidence = Vec::with_capacity(models.len() * examples.len());
        for &m in models {
            let crow = self.correct_row(m);
            let frow = self.confidence_row(m);
            for &e in examples {
                correct.push(crow[e]);
                confidence.push(frow[e]);
            }
        }
        let models: Vec<ModelId> = models.iter().map(|&m| self.models[m].clone()).collect();
        let ex: Vec<ExampleId> = examples.iter().map(|&e| self.examples[e].clone()).collect();
        let model_index = models.iter().cloned().zip(0..).collect();
        let example_index = ex.iter().cloned().zip(0..).collect();
        PredictionMatrix {
            models,
            examples: ex,
            correct,
            confidence,
            subtask: examples.iter().map(|&e| self.subtask[e].clone()).collect(),
            model_index,
            example_index,
        }
    }

    /// Writes the three CSV files that [`load_predictions`] reads.
    pub fn write_csv(
        &self,
        correct_path: &Path,
        confidence_path: &Path,
        subtask_path: &Path,
    ) -> Result<()> {
        let mut cw = create(correct_path)?;
        let mut fw = create(confidence_path)?;
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| DataError::Io { path, source }
        };
        writeln!(cw, "model_id,example_id,correct").map_err(io(correct_path))?;
        writeln!(fw, "model_id,example_id,confidence").map_err(io(confidence_path))?;
        for (m, model) in self.models.iter().enumerate() {
            for (e, example) in self.examples.iter().enumerate() {
                writeln!(cw, "{model},{example},{}", self.correct(m, e) as u8)
                    .map_err(io(correct_path))?;
                writeln!(fw, "{model},{example},{}", self.confidence(m, e))
                    .map_err(io(confidence_path))?;
            }
        }
        cw.flush().map_err(io(correct_path))?;
        fw.flush().map_err(io(confidence_path))?;
        let mut sw = create(subtask_path)?;
        writeln!(sw, "example_id,subtask").map_err(io(subtask_path))?;
        for (e, example) in self.examples.iter().enumerate() {
            writeln!(sw, "{example},{}", self.subtask[e]).map_err(io(subtask_path))?;
        }
        sw.flush().map_err(io(subtask_path))
    }
}

fn index_ids<T>(ids: &[T], what: &'static str) -> Result<HashMap<T, usize>>
where
    T: Clone + Eq + std::hash::Hash + fmt::Display,
{
    let mut index = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if index.insert(id.clone(), i).is_some() {
            return Err(DataError::DuplicateId {
                what,
                id: id.to_string(),
            });
        }
    }
    Ok(index)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })
}

struct CsvRows {
    path: PathBuf,
    reader: csv::Reader<File>,
}

impl CsvRows {
    fn open(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|source| DataError::MissingFile {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .quoting(false)
            .from_reader(file);
        let found = reader.headers().map_err(|e| DataError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            reason: e.to_string(),
        })?;
        if found.iter().ne(header.iter().copied()) {
            return Err(DataError::BadHeader {
                path: path.to_path_buf(),
                expected: header.join(","),
                found: found.iter().collect::<Vec<_>>().join(","),
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            reader,
        })
    }

    /// Visits every data row with its 1-based line number.
    fn for_each(
        mut self,
        mut f: impl FnMut(&Path, u64, &csv::StringRecord) -> Result<()>,
    ) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = record.position().map_or(0, |p| p.line());
                    f(&self.path, line, &record)?;
                }
                Err(e) => {
                    let line = e.position().map_or(0, |p| p.line());
                    return Err(DataError::Malformed {
                        path: self.path,
                        line,
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
}

fn malformed(path: &Path, line: u64, reason: impl Into<String>) -> DataError {
    DataError::Malformed {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn non_empty<'a>(path: &Path, line: u64, field: &'a str, what: &str) -> Result<&'a str> {
    if field.is_empty() {
        Err(malformed(path, line, format!("empty {what}")))
    } else {
        Ok(field)
    }
}

/// Cells keyed by (model, example) plus first-appearance order of both axes.
struct KeyedCells<T> {
    models: Vec<String>,
    examples: Vec<String>,
    model_pos: HashMap<String, usize>,
    example_pos: HashMap<String, usize>,
    cells: HashMap<(usize, usize), T>,
}

impl<T> KeyedCells<T> {
    fn new() -> Self {
        Self {
            models: Vec::new(),
            examples: Vec::new(),
            model_pos: HashMap::new(),
            example_pos: HashMap::new(),
            cells: HashMap::new(),
        }
    }

    fn insert(&mut self, path: &Path, model: &str, example: &str, value: T) -> Result<()> {
        let m = intern(&mut self.models, &mut self.model_pos, model);
        let e = intern(&mut self.examples, &mut self.example_pos, example);
        if self.cells.insert((m, e), value).is_some() {
            return Err(DataError::DuplicateCell {
                path: path.to_path_buf(),
                model: model.to_string(),
                example: example.to_string(),
            });
        }
        Ok(())
    }
}

fn intern(order: &mut Vec<String>, pos: &mut HashMap<String, usize>, key: &str) -> usize {
    if let Some(&i) = pos.get(key) {
        return i;
    }
    order.push(key.to_string());
    pos.insert(key.to_string(), order.len() - 1);
    order.len() - 1
}

fn read_cells<T>(
    path: &Path,
    header: [&str; 3],
    parse: impl Fn(&str) -> Option<T>,
) -> Result<KeyedCells<T>> {
    let mut cells = KeyedCells::new();
    CsvRows::open(path, &header)?.for_each(|path, line, rec| {
        if rec.len() != 3 {
            return Err(malformed(
                path,
                line,
                format!("expected 3 fields, got {}", rec.len()),
            ));
        }
        let model = non_empty(path, line, &rec[0], "model_id")?;
        let example = non_empty(path, line, &rec[1], "example_id")?;
        let value = parse(rec[2].trim()).ok_or_else(|| {
            malformed(
                path,
                line,
                format!("invalid {} value `{}`", header[2], &rec[2]),
            )
        })?;
        cells.insert(path, model, example, value)
    })?;
    Ok(cells)
}

/// Reads the correctness, confidence and subtask CSVs and joins them on ids.
pub fn load_predictions(
    correct_path: &Path,
    confidence_path: &Path,
    subtask_path: &Path,
) -> Result<PredictionMatrix> {
    let correct = read_cells(
        correct_path,
        ["model_id", "example_id", "correct"],
        |s| match s {
            "0" => Some(false),
            "1" => Some(true),
            _ => None,
        },
    )?;
    let conf = read_cells(
        confidence_path,
        ["model_id", "example_id", "confidence"],
        |s| s.parse::<f64>().ok().filter(|v| !v.is_nan()),
    )?;

    for example in &correct.examples {
        if !conf.example_pos.contains_key(example) {
            return Err(DataError::ExampleMissingConfidence {
                example: example.clone(),
            });
        }
    }
    for example in &conf.examples {
        if !correct.example_pos.contains_key(example) {
            return Err(DataError::ExampleMissingCorrectness {
                example: example.clone(),
            });
        }
    }
    for model in &correct.models {
        if !conf.model_pos.contains_key(model) {
            return Err(DataError::ModelMissingConfidence {
                model: model.clone(),
            });
        }
    }
    for model in &conf.models {
        if !correct.model_pos.contains_key(model) {
            return Err(DataError::ModelMissingCorrectness {
                model: model.clone(),
            });
        }
    }

    let (nm, ne) = (correct.models.len(), correct.examples.len());
    let mut bits = Vec::with_capacity(nm * ne);
    let mut confidence = Vec::with_capacity(nm * ne);
    for (m, model) in correct.models.iter().enumerate() {
        let cm = conf.model_pos[model];
        for (e, example) in correct.examples.iter().enumerate() {
            let missing = |which| DataError::MissingCell {
                which,
                model: model.clone(),
                example: example.clone(),
            };
            let bit = *correct
                .cells
                .get(&(m, e))
                .ok_or_else(|| missing("correctness"))?;
            let ce = conf.example_pos[example];
            let c = *conf
                .cells
                .get(&(cm, ce))
                .ok_or_else(|| missing("confidence"))?;
            if !(0.0..=1.0).contains(&c) {
                return Err(DataError::ConfidenceOutOfRange {
                    model: model.clone(),
                    example: example.clone(),
                    value: c,
                });
            }
            bits.push(bit);
            confidence.push(c);
        }
    }

    let mut labels: HashMap<String, String> = HashMap::new();
    CsvRows::open(subtask_path, &["example_id", "subtask"])?.for_each(|path, line, rec| {
        if rec.len() != 2 {
            return Err(malformed(
                path,
                line,
                format!("expected 2 fields, got {}", rec.len()),
            ));
        }
        let example = non_empty(path, line, &rec[0], "example_id")?;
        let subtask = non_empty(path, line, &rec[1], "subtask")?;
        if !correct.example_pos.contains_key(example) {
            return Err(DataError::UnknownLabeledExample {
                example: example.to_string(),
            });
        }
        if labels
            .insert(example.to_string(), subtask.to_string())
            .is_some()
        {
            return Err(DataError::DuplicateLabel {
                example: example.to_string(),
            });
        }
        Ok(())
    })?;
    let subtasks = correct
        .examples
        .iter()
        .map(|e| {
            labels
                .remove(e)
                .ok_or_else(|| DataError::UnlabeledExample { example: e.clone() })
        })
        .collect::<Result<Vec<_>>>()?;

    PredictionMatrix::new(
        correct.models.into_iter().map(ModelId).collect(),
        correct.examples.into_iter().map(ExampleId).collect(),
        bits,
        confidence,
        subtasks,
    )
}

/// Reads the model metadata CSV. Ids need not appear in any matrix.
pub fn load_model_meta(path: &Path) -> Result<Vec<ModelMeta>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    CsvRows::open(path, &["model_id", "param_count_b", "instruct", "family"])?.for_each(
        |path, line, rec| {
            if rec.len() != 4 {
                return Err(malformed(
                    path,
                    line,
                    format!("expected 4 fields, got {}", rec.len()),
                ));
            }
            let model = non_empty(path, line, &rec[0], "model_id")?;
            let params: f64 = rec[1]
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| {
                    malformed(path, line, format!("invalid param_count_b `{}`", &rec[1]))
                })?;
            if params < 0.0 {
                return Err(DataError::NegativeParamCount {
                    model: model.to_string(),
                    value: params,
                });
            }
            let instruct = match rec[2].trim() {
                "true" => true,
                "false" => false,
                other => {
                    return Err(malformed(
                        path,
                        line,
                        format!("invalid instruct flag `{other}`"),
                    ))
                }
            };
            if !seen.insert(model.to_string()) {
                return Err(DataError::DuplicateModelMeta {
                    model: model.to_string(),
                });
            }
            let family = Some(rec[3].trim())
                .filter(|f| !f.is_empty())
                .map(String::from);
            out.push(ModelMeta {
                model_id: ModelId(model.to_string()),
                param_count_billions: params,
                instruct,
                family,
            });
            Ok(())
        },
    )?;
    Ok(out)
}

/// Conjunction of optional metadata constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPredicate {
    pub min_params: Option<f64>,
    pub max_params: Option<f64>,
    pub instruct: Option<bool>,
    pub family: Option<String>,
}

impl ModelPredicate {
    pub fn matches(&self, meta: &ModelMeta) -> bool {
        self.min_params
            .is_none_or(|lo| meta.param_count_billions >= lo)
            && self
                .max_params
                .is_none_or(|hi| meta.param_count_billions <= hi)
            && self.instruct.is_none_or(|flag| meta.instruct == flag)
            && self
                .family
                .as_ref()
                .is_none_or(|f| meta.family.as_deref() == Some(f.as_str()))
    }
}

/// Model indices (matrix order) whose metadata satisfies the predicate.
/// Models without a metadata row never match.
pub fn matching_models(
    matrix: &PredictionMatrix,
    meta: &[ModelMeta],
    predicate: &ModelPredicate,
) -> Vec<usize> {
    let keep: HashSet<&str> = meta
        .iter()
        .filter(|m| predicate.matches(m))
        .map(|m| m.model_id.as_str())
        .collect();
    (0..matrix.num_models())
        .filter(|&m| keep.contains(matrix.models()[m].as_str()))
        .collect()
}

/// Restricts the matrix to the models satisfying `predicate`, keeping every
/// example.
pub fn filter_models(
    matrix: &PredictionMatrix,
    meta: &[ModelMeta],
    predicate: &ModelPredicate,
) -> Result<PredictionMatrix> {
    let kept = matching_models(matrix, meta, predicate);
    if kept.len() < 2 {
        return Err(DataError::TooFewModels { kept: kept.len() });
    }
    let all: Vec<usize> = (0..matrix.num_examples()).collect();
    Ok(matrix.restrict(&kept, &all))
}
