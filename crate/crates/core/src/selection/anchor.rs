use super::kmedoids::{pam, Dissimilarity};
use super::{Estimator, Method, MicroBenchmark, Result, SelectionRequest, Signal};
use crate::data::PredictionMatrix;

/// `1 - r` between examples, `r` the Pearson correlation of their
/// source-model confidence vectors, clamped to `[0, 2]`. An example whose
/// confidences do not vary has correlation 0 with every other example.
pub fn correlation_dissimilarity(matrix: &PredictionMatrix) -> Dissimilarity {
    let (nm, ne) = (matrix.num_models(), matrix.num_examples());
    // column-standardized confidences, example-major
    let mut z = vec![0.0; ne * nm];
    for e in 0..ne {
        let col = &mut z[e * nm..(e + 1) * nm];
        for (m, v) in col.iter_mut().enumerate() {
            *v = matrix.confidence(m, e);
        }
        let mean = col.iter().sum::<f64>() / nm as f64;
        col.iter_mut().for_each(|v| *v -= mean);
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            col.iter_mut().for_each(|v| *v /= norm);
        } else {
            col.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Dissimilarity::from_fn(ne, |i, j| {
        let a = &z[i * nm..(i + 1) * nm];
        let b = &z[j * nm..(j + 1) * nm];
        let r: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        (1.0 - r).clamp(0.0, 2.0)
    })
}

/// Anchor Points: k-medoids (k = n) over correlation dissimilarity; each
/// medoid is weighted by its cluster size and the estimate averages
/// correct-class confidence.
pub fn select_anchor_points(req: &SelectionRequest<'_>) -> Result<MicroBenchmark> {
    req.check_size()?;
    req.require_models(2)?;
    let d = correlation_dissimilarity(req.matrix);
    let clusters = pam(&d, req.n);
    let picked = clusters
        .medoids
        .iter()
        .zip(&clusters.sizes)
        .map(|(&m, &s)| (m, s as f64))
        .collect();
    Ok(req.micro(
        Method::AnchorPoints,
        Estimator::ClusterWeighted(Signal::Confidence),
        picked,
    ))
}
