//! Seeded k-means with k-means++ initialization and Lloyd iterations.

use rand::Rng as _;

use super::{Result, SelectionError};
use crate::seed::Rng;

pub const MAX_ITER: usize = 300;
pub const MAX_REPAIRS: usize = 10;

/// Points stored row-major, `dim` coordinates each.
#[derive(Debug, Clone, Copy)]
pub struct Points<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl<'a> Points<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        assert!(
            dim > 0 && data.len().is_multiple_of(dim),
            "ragged point buffer"
        );
        Self { data, dim }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Number of distinct points (exact equality).
    pub fn distinct(&self) -> usize {
        let mut rows: Vec<Vec<u64>> = (0..self.len())
            .map(|i| self.get(i).iter().map(|x| x.to_bits()).collect())
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows.len()
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignment: Vec<usize>,
    /// `k * dim` centroid coordinates.
    pub centroids: Vec<f64>,
    pub dim: usize,
    pub iterations: usize,
}

impl KMeans {
    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &a) in self.assignment.iter().enumerate() {
            out[a].push(i);
        }
        out
    }
}

fn plus_plus_init(points: Points<'_>, k: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    let n = points.len();
    let mut centers = Vec::with_capacity(k * points.dim);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(points.get(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.get(i), points.get(first)))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(SelectionError::TooFewDistinctPoints {
                k,
                distinct: points.distinct(),
            });
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            acc += w;
            if w > 0.0 && acc > target {
                pick = Some(i);
                break;
            }
        }
        // rounding can leave target just past the last cumulative value
        let pick = pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"));
        let c = points.get(pick);
        centers.extend_from_slice(c);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.get(i), c));
        }
    }
    Ok(centers)
}

fn assign(points: Points<'_>, centers: &[f64], out: &mut [usize], dist: &mut [f64]) {
    let dim = points.dim;
    let k = centers.len() / dim;
    for i in 0..points.len() {
        let p = points.get(i);
        let mut best = (f64::INFINITY, 0);
        for c in 0..k {
            let d = sq_dist(p, &centers[c * dim..(c + 1) * dim]);
            if d < best.0 {
                best = (d, c);
            }
        }
        out[i] = best.1;
        dist[i] = best.0;
    }
}

fn update_means(points: Points<'_>, assignment: &[usize], centers: &mut [f64]) {
    let dim = points.dim;
    let k = centers.len() / dim;
    let mut counts = vec![0usize; k];
    centers.iter_mut().for_each(|c| *c = 0.0);
    for (i, &a) in assignment.iter().enumerate() {
        counts[a] += 1;
        for (c, x) in centers[a * dim..(a + 1) * dim]
            .iter_mut()
            .zip(points.get(i))
        {
            *c += x;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        for v in &mut centers[c * dim..(c + 1) * dim] {
            *v /= n as f64;
        }
    }
}

/// Clusters `points` into `k` groups. Distance ties go to the lowest
/// centroid index; an empty cluster is re-seeded at the point farthest from
/// its current centroid (at most [`MAX_REPAIRS`] times).
pub fn kmeans(points: Points<'_>, k: usize, rng: &mut Rng) -> Result<KMeans> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(SelectionError::SizeExceedsPool { n: k, pool: n });
    }
    let mut centers = plus_plus_init(points, k, rng)?;
    let mut assignment = vec![usize::MAX; n];
    let mut next = vec![0usize; n];
    let mut dist = vec![0.0; n];
    let mut repairs = 0;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        assign(points, &centers, &mut next, &mut dist);
        let mut sizes = vec![0usize; k];
        for &a in &next {
            sizes[a] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            repairs += 1;
            if repairs > MAX_REPAIRS {
                return Err(SelectionError::EmptyCluster {
                    repairs: MAX_REPAIRS,
                });
            }
            let far = (0..n)
                .filter(|&i| sizes[next[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                })
                .ok_or(SelectionError::EmptyCluster { repairs })?;
            centers[empty * points.dim..(empty + 1) * points.dim].copy_from_slice(points.get(far));
            continue;
        }
        if next == assignment {
            break;
        }
        std::mem::swap(&mut assignment, &mut next);
        update_means(points, &assignment, &mut centers);
    }
    if assignment[0] == usize::MAX {
        // never reached a repair-free assignment
        return Err(SelectionError::EmptyCluster { repairs });
    }
    Ok(KMeans {
        assignment,
        centroids: centers,
        dim: points.dim,
        iterations,
    })
}
