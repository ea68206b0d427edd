use nalgebra::{DMatrix, SymmetricEigen};

use super::{Estimator, Method, MicroBenchmark, Result, SelectionRequest};
use crate::data::PredictionMatrix;

const JITTER: f64 = 1e-9;
/// Conditional variance below which the remaining candidates are treated
/// as spanned by the selection.
const EXHAUSTED: f64 = 1e-15;

/// Projects each example's source-model confidence vector onto the top
/// `dims` principal directions of the mean-centered example × model matrix.
/// Returns example-major coordinates with `dims` columns (directions beyond
/// the data's rank contribute zeros).
pub fn pca_project(matrix: &PredictionMatrix, dims: usize) -> Vec<f64> {
    let (nm, ne) = (matrix.num_models(), matrix.num_examples());
    let mut x = DMatrix::<f64>::zeros(ne, nm);
    for m in 0..nm {
        let row = matrix.confidence_row(m);
        let mean = row.iter().sum::<f64>() / ne as f64;
        for (e, &c) in row.iter().enumerate() {
            x[(e, m)] = c - mean;
        }
    }
    let cov = x.transpose() * &x;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..nm).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut out = vec![0.0; ne * dims];
    for (c, &axis) in order.iter().take(dims).enumerate() {
        let v = eig.eigenvectors.column(axis);
        let proj = &x * v;
        for e in 0..ne {
            out[e * dims + c] = proj[e];
        }
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if v.len() % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Greedy MAP inference for a DPP with Gaussian kernel on the given points:
/// repeatedly adds the point with the largest conditional variance given the
/// current selection (incremental Cholesky). Bandwidth is the median
/// pairwise distance. Returns selected indices in selection order.
pub fn greedy_log_det(points: &[f64], dim: usize, n: usize) -> Vec<usize> {
    let count = points.len() / dim;
    assert!(n <= count);
    let p = |i: usize| &points[i * dim..(i + 1) * dim];
    let sq =
        |i: usize, j: usize| -> f64 { p(i).iter().zip(p(j)).map(|(a, b)| (a - b) * (a - b)).sum() };

    let mut dists = Vec::with_capacity(count * count.saturating_sub(1) / 2);
    for i in 0..count {
        for j in (i + 1)..count {
            dists.push(sq(i, j).sqrt());
        }
    }
    let max = dists.iter().copied().fold(0.0, f64::max);
    let mut bandwidth = median(dists);
    if bandwidth <= 0.0 {
        bandwidth = if max > 0.0 { max } else { 1.0 };
    }
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    let kernel = |i: usize, j: usize| -> f64 {
        if i == j {
            1.0 + JITTER
        } else {
            (-gamma * sq(i, j)).exp()
        }
    };

    let mut gain: Vec<f64> = (0..count).map(|i| kernel(i, i)).collect();
    let mut chosen = vec![false; count];
    let mut factors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut selected = Vec::with_capacity(n);
    let argmax = |gain: &[f64], chosen: &[bool]| {
        (0..count)
            .filter(|&i| !chosen[i])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if gain[b] >= gain[i] => Some(b),
                _ => Some(i),
            })
    };
    while selected.len() < n {
        let j = argmax(&gain, &chosen).expect("n <= count");
        if gain[j] <= EXHAUSTED {
            selected.extend((0..count).filter(|&i| !chosen[i]).take(n - selected.len()));
            break;
        }
        chosen[j] = true;
        selected.push(j);
        if selected.len() == n {
            break;
        }
        let dj = gain[j].sqrt();
        let mut e = vec![0.0; count];
        for i in (0..count).filter(|&i| !chosen[i]) {
            let dot: f64 = factors.iter().map(|f| f[j] * f[i]).sum();
            let v = (kernel(j, i) - dot) / dj;
            e[i] = v;
            gain[i] -= v * v;
        }
        factors.push(e);
    }
    selected
}

/// Diversity sampling: greedy log-determinant selection in a PCA projection
/// of the source-model confidence embeddings.
pub fn select_diversity(req: &SelectionRequest<'_>) -> Result<MicroBenchmark> {
    req.check_size()?;
    req.require_models(2)?;
    let dims = req.params.pca_dims.max(1);
    let points = pca_project(req.matrix, dims);
    let picked = greedy_log_det(&points, dims, req.n)
        .into_iter()
        .map(|i| (i, 1.0))
        .collect();
    Ok(req.micro(Method::Diversity, Estimator::PlainMean, picked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::test_util::from_confidence;
    use crate::selection::MethodParams;

    #[test]
    fn first_pick_is_lowest_index() {
        let pts = [0.0, 1.0, 5.0, 2.0];
        assert_eq!(greedy_log_det(&pts, 1, 1), vec![0]);
    }

    #[test]
    fn exhausts_pool_with_duplicates() {
        let pts = [0.0, 0.0, 1.0, 1.0, 3.0];
        let mut sel = greedy_log_det(&pts, 1, 5);
        sel.sort();
        assert_eq!(sel, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn duplicates_only_after_distinct_points() {
        let pts = [0.0, 0.0, 1.0, 2.5, 2.5, 4.0];
        let sel = greedy_log_det(&pts, 1, 4);
        // four distinct locations exist; no duplicate pair may be picked
        let mut locs: Vec<u64> = sel.iter().map(|&i| pts[i].to_bits()).collect();
        locs.sort();
        locs.dedup();
        assert_eq!(locs.len(), 4, "{sel:?}");
    }

    #[test]
    fn projection_preserves_pairwise_geometry_when_rank_is_low() {
        // confidence vectors vary along one direction only
        let conf: Vec<Vec<f64>> = (0..3)
            .map(|m| {
                (0..6)
                    .map(|e| 0.2 + 0.1 * e as f64 * (m + 1) as f64 / 3.0)
                    .collect()
            })
            .collect();
        let m = from_confidence(&conf);
        let proj = pca_project(&m, 4);
        let dist = |a: usize, b: usize, v: &dyn Fn(usize, usize) -> f64, d: usize| -> f64 {
            (0..d)
                .map(|k| (v(a, k) - v(b, k)).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let orig = |e: usize, k: usize| conf[k][e];
        let projd = |e: usize, k: usize| proj[e * 4 + k];
        for a in 0..6 {
            for b in 0..6 {
                assert!((dist(a, b, &orig, 3) - dist(a, b, &projd, 4)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn full_pool_selection() {
        let conf = vec![vec![0.1, 0.5, 0.9, 0.3, 0.3], vec![0.2, 0.4, 0.8, 0.6, 0.6]];
        let m = from_confidence(&conf);
        let params = MethodParams::default();
        let req = SelectionRequest {
            matrix: &m,
            n: 5,
            seed: 0,
            params: &params,
        };
        let mb = select_diversity(&req).unwrap();
        assert_eq!(mb.example_ids, m.examples());
    }
}
