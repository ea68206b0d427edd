use super::kmeans::{kmeans, sq_dist, Points};
use super::{Estimator, Method, MicroBenchmark, Result, SelectionError, SelectionRequest};
use crate::irt::{example_embedding, IrtModel};
use crate::seed;

/// tinyBenchmarks: k-means (k = n) on IRT example embeddings, keeping the
/// member closest to each centroid, weighted by cluster size.
pub fn select_tinybenchmarks(req: &SelectionRequest<'_>, irt: &IrtModel) -> Result<MicroBenchmark> {
    req.check_size()?;
    let dim = irt.dim + 1;
    let mut data = Vec::with_capacity(req.pool_size() * dim);
    for id in req.matrix.examples() {
        let v = example_embedding(irt, id)
            .map_err(|_| SelectionError::IrtPoolMismatch(id.to_string()))?;
        data.extend(v);
    }
    let points = Points::new(&data, dim);
    let mut rng = seed::rng(req.seed);
    let clusters = kmeans(points, req.n, &mut rng)?;
    let picked = clusters
        .members()
        .iter()
        .enumerate()
        .map(|(c, members)| {
            let centroid = clusters.centroid(c);
            let best = members
                .iter()
                .copied()
                .fold((f64::INFINITY, usize::MAX), |best, i| {
                    let d = sq_dist(points.get(i), centroid);
                    if d < best.0 {
                        (d, i)
                    } else {
                        best
                    }
                })
                .1;
            (best, members.len() as f64)
        })
        .collect();
    Ok(req.micro(
        Method::TinyBenchmarks,
        Estimator::ClusterWeighted(req.params.tiny_signal),
        picked,
    ))
}
