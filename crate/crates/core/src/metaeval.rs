//! Meta-evaluation of a micro-benchmark against the full benchmark: mean
//! estimation error, Kendall's tau, pairwise agreement curves and the
//! minimum detectable accuracy difference (MDAD).

use std::collections::HashMap;
use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ModelId, Performance};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetaError {
    #[error("missing {which} performance for target `{model}`")]
    MissingPerformance { which: &'static str, model: String },
    #[error("need at least 2 targets, got {0}")]
    TooFewTargets(usize),
    #[error("empty target set")]
    EmptyTargets,
    #[error("bucket resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("curve resolution {curve} does not match requested resolution {requested}")]
    ResolutionMismatch { curve: f64, requested: f64 },
    #[error("threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("bootstrap needs at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("every value is undetectable")]
    AllUndetectable,
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
}

pub type Result<T, E = MetaError> = std::result::Result<T, E>;

/// One unordered target pair, oriented so that `model_hi` is at least as
/// good on the full benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub model_hi: ModelId,
    pub model_lo: ModelId,
    pub delta_full: f64,
    /// Micro-benchmark gap in the same orientation; positive means the
    /// micro-benchmark agrees.
    pub delta_micro: f64,
}

fn lookup(
    perf: &HashMap<ModelId, Performance>,
    model: &ModelId,
    which: &'static str,
) -> Result<f64> {
    perf.get(model)
        .map(|p| p.value())
        .ok_or_else(|| MetaError::MissingPerformance {
            which,
            model: model.to_string(),
        })
}

fn aligned(
    full: &HashMap<ModelId, Performance>,
    micro: &HashMap<ModelId, Performance>,
    targets: &[ModelId],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let f = targets
        .iter()
        .map(|t| lookup(full, t, "full"))
        .collect::<Result<Vec<_>>>()?;
    let m = targets
        .iter()
        .map(|t| lookup(micro, t, "micro"))
        .collect::<Result<Vec<_>>>()?;
    Ok((f, m))
}

/// All target pairs, oriented by full-benchmark performance. Exact full ties
/// are oriented by model id.
pub fn pairwise_comparisons(
    full: &HashMap<ModelId, Performance>,
    micro: &HashMap<ModelId, Performance>,
    targets: &[ModelId],
) -> Result<Vec<PairwiseComparison>> {
    if targets.len() < 2 {
        return Err(MetaError::TooFewTargets(targets.len()));
    }
    let (f, m) = aligned(full, micro, targets)?;
    let mut out = Vec::with_capacity(targets.len() * (targets.len() - 1) / 2);
    for i in 0..targets.len() {
        for j in (i + 1)..targets.len() {
            let i_first = f[i] > f[j] || (f[i] == f[j] && targets[i] <= targets[j]);
            let (hi, lo) = if i_first { (i, j) } else { (j, i) };
            out.push(PairwiseComparison {
                model_hi: targets[hi].clone(),
                model_lo: targets[lo].clone(),
                delta_full: f[hi] - f[lo],
                delta_micro: m[hi] - m[lo],
            });
        }
    }
    Ok(out)
}

/// Accuracy-gap buckets `[0, r/2), [r/2, 3r/2), …` with centroids `0, r, 2r, …`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketSpec {
    resolution: f64,
}

impl Default for BucketSpec {
    fn default() -> Self {
        Self { resolution: 0.5 }
    }
}

impl BucketSpec {
    pub fn new(resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MetaError::InvalidResolution(resolution));
        }
        Ok(Self { resolution })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Bucket index of a non-negative gap. Gaps within 1e-9 relative of a
    /// boundary (accumulated rounding in accuracy differences) snap upward.
    pub fn bucket_of(&self, delta: f64) -> usize {
        let x = delta / self.resolution + 0.5;
        (x + 1e-9 * x.abs().max(1.0)).floor().max(0.0) as usize
    }

    pub fn centroid(&self, bucket: usize) -> f64 {
        bucket as f64 * self.resolution
    }

    pub fn bounds(&self, bucket: usize) -> (f64, f64) {
        let r = self.resolution;
        let lo = if bucket == 0 {
            0.0
        } else {
            (bucket as f64 - 0.5) * r
        };
        (lo, (bucket as f64 + 0.5) * r)
    }
}

/// Per-bucket (agree, total) tallies. Merging tallies is commutative.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementCounts {
    pub agree: Vec<u64>,
    pub total: Vec<u64>,
}

impl AgreementCounts {
    pub fn record(&mut self, bucket: usize, agrees: bool) {
        if bucket >= self.total.len() {
            self.total.resize(bucket + 1, 0);
            self.agree.resize(bucket + 1, 0);
        }
        self.total[bucket] += 1;
        self.agree[bucket] += agrees as u64;
    }

    pub fn merge(&mut self, other: &AgreementCounts) {
        if other.total.len() > self.total.len() {
            self.total.resize(other.total.len(), 0);
            self.agree.resize(other.total.len(), 0);
        }
        for (i, (&a, &t)) in other.agree.iter().zip(&other.total).enumerate() {
            self.agree[i] += a;
            self.total[i] += t;
        }
    }

    pub fn comparisons(&self) -> u64 {
        self.total.iter().sum()
    }

    /// Tallies every target pair given aligned full and micro performances.
    /// Exact full ties are oriented earlier-index first, which matches
    /// `pairwise_comparisons` when targets are sorted by id.
    pub fn from_performances(full: &[f64], micro: &[f64], spec: &BucketSpec) -> Self {
        let mut counts = Self::default();
        for i in 0..full.len() {
            for j in (i + 1)..full.len() {
                let (hi, lo) = if full[i] >= full[j] { (i, j) } else { (j, i) };
                counts.record(
                    spec.bucket_of(full[hi] - full[lo]),
                    micro[hi] - micro[lo] > 0.0,
                );
            }
        }
        counts
    }

    pub fn curve(&self, spec: &BucketSpec) -> AgreementCurve {
        AgreementCurve {
            resolution: spec.resolution,
            buckets: self
                .agree
                .iter()
                .zip(&self.total)
                .enumerate()
                .map(|(k, (&agree, &total))| Bucket {
                    centroid: spec.centroid(k),
                    agree,
                    total,
                    probability: (total > 0).then(|| agree as f64 / total as f64),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub centroid: f64,
    pub agree: u64,
    pub total: u64,
    pub probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementCurve {
    pub resolution: f64,
    pub buckets: Vec<Bucket>,
}

impl AgreementCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("centroid,agree,total,probability\n");
        for b in &self.buckets {
            let p = b.probability.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{}\n", b.centroid, b.agree, b.total, p));
        }
        out
    }
}

/// Probability that the micro-benchmark orders a pair like the full
/// benchmark, per full-gap bucket. Ties on the micro-benchmark disagree.
pub fn agreement_curve(comparisons: &[PairwiseComparison], spec: &BucketSpec) -> AgreementCurve {
    let mut counts = AgreementCounts::default();
    for c in comparisons {
        counts.record(spec.bucket_of(c.delta_full), c.delta_micro > 0.0);
    }
    counts.curve(spec)
}

/// A bucket centroid, or the sentinel for "no bucket reaches the threshold".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MdadValue {
    Detectable(f64),
    Undetectable,
}

impl MdadValue {
    pub fn value(self) -> Option<f64> {
        match self {
            MdadValue::Detectable(v) => Some(v),
            MdadValue::Undetectable => None,
        }
    }
}

impl fmt::Display for MdadValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MdadValue::Detectable(v) => write!(f, "{v}"),
            MdadValue::Undetectable => f.write_str("undetectable"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WireMdad {
    Value(f64),
    Sentinel(Sentinel),
}

#[derive(Serialize, Deserialize)]
enum Sentinel {
    #[serde(rename = "undetectable")]
    Undetectable,
}

impl Serialize for MdadValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            MdadValue::Detectable(v) => WireMdad::Value(v),
            MdadValue::Undetectable => WireMdad::Sentinel(Sentinel::Undetectable),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MdadValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match WireMdad::deserialize(d)? {
            WireMdad::Value(v) => MdadValue::Detectable(v),
            WireMdad::Sentinel(_) => MdadValue::Undetectable,
        })
    }
}

/// Rounds to the nearest 0.5 for display.
pub fn round_half(v: f64) -> f64 {
    (v * 2.0).round() / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdadResult {
    pub value: MdadValue,
    pub threshold: f64,
    pub resolution: f64,
    pub rounded_value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Share of bootstrap resamples that were undetectable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undetectable_fraction: Option<f64>,
}

impl MdadResult {
    pub fn from_value(value: MdadValue, threshold: f64, resolution: f64) -> Self {
        Self {
            rounded_value: value.value().map(round_half),
            value,
            threshold,
            resolution,
            ci_low: None,
            ci_high: None,
            undetectable_fraction: None,
        }
    }

    /// Attaches a bootstrap interval, widened if needed to contain the point
    /// value.
    pub fn with_ci(mut self, ci: &BootstrapCi) -> Self {
        let v = self.value.value();
        self.ci_low = match (ci.low, v) {
            (Some(l), Some(v)) => Some(l.min(v)),
            (l, _) => l,
        };
        self.ci_high = match (ci.high, v) {
            (Some(h), Some(v)) => Some(h.max(v)),
            (h, _) => h,
        };
        self.undetectable_fraction = Some(ci.undetectable_fraction);
        self
    }
}

/// Flat CSV of MDAD results, one row per (method, n).
pub fn mdad_csv(rows: &[(&str, usize, &MdadResult)]) -> String {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut out = String::from("method,n,mdad,ci_low,ci_high,threshold,resolution\n");
    for (method, n, r) in rows {
        out.push_str(&format!(
            "{method},{n},{},{},{},{},{}\n",
            r.value,
            opt(r.ci_low),
            opt(r.ci_high),
            r.threshold,
            r.resolution
        ));
    }
    out
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MetaError::InvalidThreshold(threshold));
    }
    Ok(())
}

/// Smallest centroid of a non-empty bucket whose agreement reaches
/// `threshold`. In strict mode every later non-empty bucket must pass too.
pub fn mdad_with(
    curve: &AgreementCurve,
    threshold: f64,
    resolution: f64,
    strict: bool,
) -> Result<MdadResult> {
    check_threshold(threshold)?;
    if (curve.resolution - resolution).abs() > 1e-12 {
        return Err(MetaError::ResolutionMismatch {
            curve: curve.resolution,
            requested: resolution,
        });
    }
    Ok(MdadResult::from_value(
        first_passing(
            curve.buckets.iter().map(|b| (b.agree, b.total)),
            threshold,
            strict,
        )
        .map_or(MdadValue::Undetectable, |k| {
            MdadValue::Detectable(curve.buckets[k].centroid)
        }),
        threshold,
        resolution,
    ))
}

pub fn mdad(curve: &AgreementCurve, threshold: f64, resolution: f64) -> Result<MdadResult> {
    mdad_with(curve, threshold, resolution, false)
}

fn first_passing(
    buckets: impl Iterator<Item = (u64, u64)>,
    threshold: f64,
    strict: bool,
) -> Option<usize> {
    let mut candidate = None;
    for (k, (agree, total)) in buckets.enumerate() {
        if total == 0 {
            continue;
        }
        let pass = agree as f64 / total as f64 >= threshold;
        match (pass, candidate, strict) {
            (true, None, false) => return Some(k),
            (true, None, true) => candidate = Some(k),
            (false, Some(_), true) => candidate = None,
            _ => {}
        }
    }
    candidate
}

/// MDAD straight from tallies, without materializing a curve.
pub fn mdad_from_counts(
    counts: &AgreementCounts,
    spec: &BucketSpec,
    threshold: f64,
    strict: bool,
) -> MdadValue {
    first_passing(
        counts
            .agree
            .iter()
            .copied()
            .zip(counts.total.iter().copied()),
        threshold,
        strict,
    )
    .map_or(MdadValue::Undetectable, |k| {
        MdadValue::Detectable(spec.centroid(k))
    })
}

/// Mean absolute gap between full and micro accuracy over the targets.
pub fn mean_estimation_error(
    full: &HashMap<ModelId, Performance>,
    micro: &HashMap<ModelId, Performance>,
    targets: &[ModelId],
) -> Result<f64> {
    if targets.is_empty() {
        return Err(MetaError::EmptyTargets);
    }
    let (f, m) = aligned(full, micro, targets)?;
    Ok(mean_abs_error(&f, &m))
}

pub fn mean_abs_error(full: &[f64], micro: &[f64]) -> f64 {
    full.iter()
        .zip(micro)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / full.len() as f64
}

/// Kendall's tau as `1 - 2|C| / C(T, 2)`, where a pair is discordant when the
/// sign of its full-benchmark gap differs from the sign of its micro gap
/// (so a micro tie on a full-distinguished pair is discordant).
pub fn kendall_tau(
    full: &HashMap<ModelId, Performance>,
    micro: &HashMap<ModelId, Performance>,
    targets: &[ModelId],
) -> Result<f64> {
    if targets.len() < 2 {
        return Err(MetaError::TooFewTargets(targets.len()));
    }
    let (f, m) = aligned(full, micro, targets)?;
    Ok(kendall_tau_slices(&f, &m))
}

/// Number of pairs tied within each run of equal keys of a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut pairs = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            pairs += run * (run - 1) / 2;
            run = 1;
        }
    }
    pairs + run * (run - 1) / 2
}

/// Merge sort counting strict inversions (pairs i < j with v[i] > v[j]).
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            inv += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    inv
}

/// Discordant-pair count in O(T log T): strict inversions plus pairs tied on
/// exactly one side.
pub fn discordant_pairs(full: &[f64], micro: &[f64]) -> u64 {
    let mut idx: Vec<usize> = (0..full.len()).collect();
    idx.sort_by(|&a, &b| {
        full[a]
            .total_cmp(&full[b])
            .then(micro[a].total_cmp(&micro[b]))
    });
    let full_sorted: Vec<f64> = idx.iter().map(|&i| full[i]).collect();
    let joint: Vec<(u64, u64)> = idx
        .iter()
        .map(|&i| (full[i].to_bits(), micro[i].to_bits()))
        .collect();
    let tie_full = tied_pairs(&full_sorted);
    let tie_both = tied_pairs(&joint);
    let mut micro_sorted: Vec<f64> = idx.iter().map(|&i| micro[i]).collect();
    let inversions = count_inversions(&mut micro_sorted, &mut Vec::with_capacity(full.len()));
    let tie_micro = tied_pairs(&micro_sorted);
    inversions + (tie_full - tie_both) + (tie_micro - tie_both)
}

pub fn kendall_tau_slices(full: &[f64], micro: &[f64]) -> f64 {
    let t = full.len() as u64;
    let pairs = t * (t - 1) / 2;
    1.0 - 2.0 * discordant_pairs(full, micro) as f64 / pairs as f64
}

/// Percentile bootstrap interval plus the share of undetectable resamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub low: Option<f64>,
    pub high: Option<f64>,
    pub undetectable_fraction: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn percentile_interval(mut stats: Vec<f64>, resamples: usize, confidence: f64) -> BootstrapCi {
    let undefined = resamples - stats.len();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - confidence) / 2.0;
    let (low, high) = if stats.is_empty() {
        (None, None)
    } else {
        (
            Some(quantile(&stats, alpha)),
            Some(quantile(&stats, 1.0 - alpha)),
        )
    };
    BootstrapCi {
        low,
        high,
        undetectable_fraction: undefined as f64 / resamples as f64,
    }
}

fn check_bootstrap(len: usize, confidence: f64) -> Result<()> {
    if len < 2 {
        return Err(MetaError::TooFewValues(len));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(MetaError::InvalidConfidence(confidence));
    }
    Ok(())
}

/// Percentile bootstrap of the mean of per-trial values. `None` marks an
/// undetectable trial; any resample drawing one is undetectable and is
/// excluded from the percentile bounds.
pub fn bootstrap_ci(
    values: &[Option<f64>],
    confidence: f64,
    resamples: usize,
    seed_value: u64,
) -> Result<BootstrapCi> {
    check_bootstrap(values.len(), confidence)?;
    if values.iter().all(Option::is_none) {
        return Err(MetaError::AllUndetectable);
    }
    let mut rng = seed::rng(seed_value);
    let n = values.len();
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut sum = 0.0;
        let mut defined = true;
        for _ in 0..n {
            match values[rng.random_range(0..n)] {
                Some(v) => sum += v,
                None => defined = false,
            }
        }
        if defined {
            stats.push(sum / n as f64);
        }
    }
    Ok(percentile_interval(stats, resamples, confidence))
}

/// Bootstrap of the pooled-curve MDAD: resample whole trials, pool their
/// tallies, and recompute the MDAD of each resample. `statistic` maps a
/// list of chosen trial indices to an MDAD (so per-subtask averaging can
/// reuse the resampler).
pub fn bootstrap_resampled<F>(
    trials: usize,
    confidence: f64,
    resamples: usize,
    seed_value: u64,
    mut statistic: F,
) -> Result<BootstrapCi>
where
    F: FnMut(&[usize]) -> MdadValue,
{
    check_bootstrap(trials, confidence)?;
    let mut rng = seed::rng(seed_value);
    let mut chosen = vec![0; trials];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        chosen
            .iter_mut()
            .for_each(|c| *c = rng.random_range(0..trials));
        if let MdadValue::Detectable(v) = statistic(&chosen) {
            stats.push(v);
        }
    }
    Ok(percentile_interval(stats, resamples, confidence))
}

/// Pools per-trial tallies and bootstraps the pooled MDAD.
pub fn bootstrap_pooled_mdad(
    per_trial: &[AgreementCounts],
    spec: &BucketSpec,
    threshold: f64,
    strict: bool,
    confidence: f64,
    resamples: usize,
    seed_value: u64,
) -> Result<BootstrapCi> {
    let mut pooled = AgreementCounts::default();
    bootstrap_resampled(
        per_trial.len(),
        confidence,
        resamples,
        seed_value,
        |chosen| {
            pooled.agree.iter_mut().for_each(|v| *v = 0);
            pooled.total.iter_mut().for_each(|v| *v = 0);
            for &t in chosen {
                pooled.merge(&per_trial[t]);
            }
            mdad_from_counts(&pooled, spec, threshold, strict)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn ids(names: &[&str]) -> Vec<ModelId> {
        names.iter().map(|n| ModelId::new(*n).unwrap()).collect()
    }

    fn perf(pairs: &[(&str, f64)]) -> HashMap<ModelId, Performance> {
        pairs
            .iter()
            .map(|&(n, v)| (ModelId::new(n).unwrap(), Performance::new(v).unwrap()))
            .collect()
    }

    #[test]
    fn pair_counts_and_orientation() {
        let t = ids(&["A", "B", "C", "D"]);
        let p = perf(&[("A", 1.0), ("B", 2.0), ("C", 3.0), ("D", 4.0)]);
        assert_eq!(pairwise_comparisons(&p, &p, &t).unwrap().len(), 6);

        let t = ids(&["B", "A"]);
        let c = pairwise_comparisons(
            &perf(&[("A", 60.0), ("B", 50.0)]),
            &perf(&[("A", 55.0), ("B", 57.0)]),
            &t,
        )
        .unwrap();
        assert_eq!(c[0].model_hi.as_str(), "A");
        assert_eq!((c[0].delta_full, c[0].delta_micro), (10.0, -2.0));

        let tie = pairwise_comparisons(
            &perf(&[("A", 50.0), ("B", 50.0)]),
            &perf(&[("A", 50.0), ("B", 50.0)]),
            &t,
        )
        .unwrap();
        assert_eq!((tie[0].model_hi.as_str(), tie[0].delta_full), ("A", 0.0));

        let missing =
            pairwise_comparisons(&perf(&[("A", 50.0)]), &perf(&[("A", 50.0), ("B", 1.0)]), &t);
        assert!(matches!(
            missing,
            Err(MetaError::MissingPerformance { which: "full", .. })
        ));
    }

    #[test]
    fn bucket_boundaries() {
        let s = BucketSpec::default();
        assert_eq!(s.bucket_of(0.0), 0);
        assert_eq!(s.bucket_of(0.2499), 0);
        assert_eq!(s.bucket_of(0.25), 1);
        assert_eq!(s.bucket_of(0.74), 1);
        assert_eq!(s.bucket_of(0.75), 2);
        assert_eq!(s.centroid(2), 1.0);
        assert_eq!(s.bounds(0), (0.0, 0.25));
        assert_eq!(s.bounds(3), (1.25, 1.75));
        // accumulated rounding just under a boundary snaps up
        assert_eq!(s.bucket_of(0.75 - 1e-13), 2);
        assert!(BucketSpec::new(0.0).is_err());
    }

    #[test]
    fn identical_and_flat_micro() {
        let t = ids(&["a", "b", "c", "d"]);
        let full = perf(&[("a", 10.0), ("b", 12.0), ("c", 15.5), ("d", 30.0)]);
        let curve = agreement_curve(
            &pairwise_comparisons(&full, &full, &t).unwrap(),
            &BucketSpec::default(),
        );
        for b in curve
            .buckets
            .iter()
            .filter(|b| b.total > 0 && b.centroid > 0.0)
        {
            assert_eq!(b.probability, Some(1.0));
        }
        let flat = perf(&[("a", 50.0), ("b", 50.0), ("c", 50.0), ("d", 50.0)]);
        let curve = agreement_curve(
            &pairwise_comparisons(&full, &flat, &t).unwrap(),
            &BucketSpec::default(),
        );
        for b in curve.buckets.iter().filter(|b| b.total > 0) {
            assert_eq!(b.probability, Some(0.0));
        }
        assert_eq!(curve.buckets.iter().map(|b| b.total).sum::<u64>(), 6);
    }

    fn curve_of(probs: &[f64]) -> AgreementCurve {
        AgreementCurve {
            resolution: 0.5,
            buckets: probs
                .iter()
                .enumerate()
                .map(|(k, &p)| Bucket {
                    centroid: k as f64 * 0.5,
                    agree: (p * 100.0).round() as u64,
                    total: 100,
                    probability: Some(p),
                })
                .collect(),
        }
    }

    #[test]
    fn mdad_definition() {
        let c = curve_of(&[0.5, 0.7, 0.85, 0.9]);
        assert_eq!(
            mdad(&c, 0.8, 0.5).unwrap().value,
            MdadValue::Detectable(1.0)
        );
        assert_eq!(
            mdad(&c, 0.7, 0.5).unwrap().value,
            MdadValue::Detectable(0.5)
        );
        let low = curve_of(&[0.5, 0.6, 0.7, 0.79]);
        let r = mdad(&low, 0.8, 0.5).unwrap();
        assert_eq!(r.value, MdadValue::Undetectable);
        assert_eq!(r.rounded_value, None);
        assert!(mdad(&c, 1.0, 0.5).is_err());
        assert!(matches!(
            mdad(&c, 0.8, 0.25),
            Err(MetaError::ResolutionMismatch { .. })
        ));
    }

    #[test]
    fn mdad_strict_mode_and_empty_buckets() {
        let bumpy = curve_of(&[0.2, 0.9, 0.6, 0.95]);
        assert_eq!(
            mdad_with(&bumpy, 0.8, 0.5, false).unwrap().value,
            MdadValue::Detectable(0.5)
        );
        assert_eq!(
            mdad_with(&bumpy, 0.8, 0.5, true).unwrap().value,
            MdadValue::Detectable(1.5)
        );
        let mut gap = curve_of(&[0.2, 0.0, 0.9]);
        gap.buckets[1].total = 0;
        gap.buckets[1].probability = None;
        assert_eq!(
            mdad(&gap, 0.8, 0.5).unwrap().value,
            MdadValue::Detectable(1.0)
        );
    }

    #[test]
    fn rounding_to_half() {
        let c = AgreementCurve {
            resolution: 0.25,
            buckets: (0..4)
                .map(|k| Bucket {
                    centroid: k as f64 * 0.25,
                    agree: if k == 3 { 9 } else { 0 },
                    total: 10,
                    probability: None,
                })
                .collect(),
        };
        let r = mdad(&c, 0.8, 0.25).unwrap();
        assert_eq!(r.value, MdadValue::Detectable(0.75));
        assert_eq!(r.rounded_value, Some(1.0));
    }

    #[test]
    fn estimation_error_examples() {
        let t = ids(&["A", "B"]);
        let same = perf(&[("A", 60.0), ("B", 40.0)]);
        assert_eq!(mean_estimation_error(&same, &same, &t).unwrap(), 0.0);
        let micro = perf(&[("A", 55.0), ("B", 50.0)]);
        assert_eq!(mean_estimation_error(&same, &micro, &t).unwrap(), 7.5);
        let sym = perf(&[("A", 65.0), ("B", 35.0)]);
        assert_eq!(mean_estimation_error(&same, &sym, &t).unwrap(), 5.0);
        assert!(matches!(
            mean_estimation_error(&same, &sym, &[]),
            Err(MetaError::EmptyTargets)
        ));
    }

    #[test]
    fn tau_examples() {
        let t = ids(&["A", "B", "C", "D", "E"]);
        let full = perf(&[
            ("A", 50.0),
            ("B", 40.0),
            ("C", 30.0),
            ("D", 20.0),
            ("E", 10.0),
        ]);
        assert_eq!(kendall_tau(&full, &full, &t).unwrap(), 1.0);
        let rev = perf(&[
            ("A", 10.0),
            ("B", 20.0),
            ("C", 30.0),
            ("D", 40.0),
            ("E", 50.0),
        ]);
        assert_eq!(kendall_tau(&full, &rev, &t).unwrap(), -1.0);

        let t4 = ids(&["A", "B", "C", "D"]);
        let micro = perf(&[("A", 50.0), ("B", 30.0), ("C", 40.0), ("D", 20.0)]);
        let tau = kendall_tau(&full, &micro, &t4).unwrap();
        assert!((tau - (1.0 - 2.0 / 6.0)).abs() < 1e-12);
        assert!(matches!(
            kendall_tau(&full, &micro, &t4[..1]),
            Err(MetaError::TooFewTargets(1))
        ));
    }

    fn brute_discordant(f: &[f64], m: &[f64]) -> u64 {
        let mut c = 0;
        for i in 0..f.len() {
            for j in (i + 1)..f.len() {
                let sf = (f[i] - f[j]).partial_cmp(&0.0).unwrap();
                let sm = (m[i] - m[j]).partial_cmp(&0.0).unwrap();
                c += (sf != sm) as u64;
            }
        }
        c
    }

    proptest! {
        #[test]
        fn tau_matches_brute_force_with_ties(
            pairs in proptest::collection::vec((0u8..5, 0u8..5), 2..9)
        ) {
            let f: Vec<f64> = pairs.iter().map(|p| p.0 as f64 * 10.0).collect();
            let m: Vec<f64> = pairs.iter().map(|p| p.1 as f64 * 10.0).collect();
            prop_assert_eq!(discordant_pairs(&f, &m), brute_discordant(&f, &m));
            let tau = kendall_tau_slices(&f, &m);
            prop_assert!((-1.0..=1.0).contains(&tau));
        }

        #[test]
        fn mdad_monotone_in_threshold(
            counts in proptest::collection::vec((0u64..20, 1u64..20), 1..15),
            lo in 0.05f64..0.95, bump in 0.0f64..0.5,
        ) {
            let mut c = AgreementCounts::default();
            for (k, &(a, t)) in counts.iter().enumerate() {
                for i in 0..t {
                    c.record(k, i < a.min(t));
                }
            }
            let spec = BucketSpec::default();
            let hi = (lo + bump).min(0.99);
            let a = mdad_from_counts(&c, &spec, lo, false).value().unwrap_or(f64::INFINITY);
            let b = mdad_from_counts(&c, &spec, hi, false).value().unwrap_or(f64::INFINITY);
            prop_assert!(b >= a);
        }

        #[test]
        fn bucket_counts_ignore_order(mut deltas in proptest::collection::vec((0.0f64..20.0, -5.0f64..5.0), 1..40)) {
            let spec = BucketSpec::default();
            let make = |d: &[(f64, f64)]| -> Vec<PairwiseComparison> {
                d.iter().map(|&(f, m)| PairwiseComparison {
                    model_hi: ModelId::new("a").unwrap(),
                    model_lo: ModelId::new("b").unwrap(),
                    delta_full: f,
                    delta_micro: m,
                }).collect()
            };
            let a = agreement_curve(&make(&deltas), &spec);
            deltas.reverse();
            let b = agreement_curve(&make(&deltas), &spec);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.buckets.iter().map(|b| b.total).sum::<u64>(), deltas.len() as u64);
        }
    }

    #[test]
    fn bootstrap_degenerate_cases() {
        let ci = bootstrap_ci(&[Some(3.0); 4], 0.95, 1000, 1).unwrap();
        assert_eq!((ci.low, ci.high), (Some(3.0), Some(3.0)));
        let ci = bootstrap_ci(&[Some(0.0), Some(10.0)], 0.95, 1000, 1).unwrap();
        let (l, h) = (ci.low.unwrap(), ci.high.unwrap());
        assert!(l <= 5.0 && h >= 5.0 && h > l);
        assert!(matches!(
            bootstrap_ci(&[None, None], 0.95, 10, 0),
            Err(MetaError::AllUndetectable)
        ));
        assert!(matches!(
            bootstrap_ci(&[Some(1.0)], 0.95, 10, 0),
            Err(MetaError::TooFewValues(1))
        ));
    }

    #[test]
    fn bootstrap_sentinels_propagate() {
        let ci = bootstrap_ci(&[Some(1.0), None, Some(2.0), Some(3.0)], 0.95, 4000, 9).unwrap();
        // P(no sentinel in 4 draws) = (3/4)^4
        let expected = 1.0 - 0.75f64.powi(4);
        assert!(
            (ci.undetectable_fraction - expected).abs() < 0.03,
            "{}",
            ci.undetectable_fraction
        );
        assert!(ci.low.unwrap() >= 1.0 && ci.high.unwrap() <= 3.0);
    }

    #[test]
    fn bootstrap_coverage() {
        let normal = Normal::new(5.0, 1.0).unwrap();
        let mut rng = seed::rng(2024);
        let mut covered = 0;
        for rep in 0..100 {
            let values: Vec<Option<f64>> = (0..50).map(|_| Some(normal.sample(&mut rng))).collect();
            let ci = bootstrap_ci(&values, 0.95, 10_000, rep).unwrap();
            if ci.low.unwrap() <= 5.0 && 5.0 <= ci.high.unwrap() {
                covered += 1;
            }
        }
        assert!(covered >= 90, "covered {covered}/100");
    }

    #[test]
    fn pooled_bootstrap_contains_point_for_single_trial_pattern() {
        let spec = BucketSpec::default();
        let mut t = AgreementCounts::default();
        for _ in 0..10 {
            t.record(0, false);
            t.record(4, true);
        }
        let ci = bootstrap_pooled_mdad(&[t.clone(), t], &spec, 0.8, false, 0.95, 200, 3).unwrap();
        assert_eq!(
            (ci.low, ci.high, ci.undetectable_fraction),
            (Some(2.0), Some(2.0), 0.0)
        );
    }

    #[test]
    fn mdad_csv_rows() {
        let r = mdad(&curve_of(&[0.1, 0.2]), 0.8, 0.5).unwrap();
        let ok = mdad(&curve_of(&[0.1, 0.9]), 0.8, 0.5).unwrap();
        let csv = mdad_csv(&[("random-uniform", 10, &r), ("diversity", 25, &ok)]);
        assert_eq!(
            csv,
            "method,n,mdad,ci_low,ci_high,threshold,resolution\nrandom-uniform,10,undetectable,,,0.8,0.5\ndiversity,25,0.5,,,0.8,0.5\n"
        );
    }

    #[test]
    fn mdad_json_sentinel() {
        let json = serde_json::to_string(&MdadValue::Undetectable).unwrap();
        assert_eq!(json, "\"undetectable\"");
        let back: MdadValue = serde_json::from_str("2.5").unwrap();
        assert_eq!(back, MdadValue::Detectable(2.5));
    }
}
