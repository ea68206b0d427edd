use rand::seq::index;

use super::kmeans::{kmeans, Points};
use super::{Estimator, Method, MicroBenchmark, Result, SelectionError, SelectionRequest};
use crate::seed;

/// Splits `n` across strata proportionally to their sizes with
/// largest-remainder rounding. Allocations are capped at stratum size (the
/// excess moves to the largest strata with room) and every non-empty stratum
/// receives at least one draw so that all inclusion probabilities are
/// positive.
pub fn proportional_allocation(sizes: &[usize], n: usize) -> Result<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    if n > total {
        return Err(SelectionError::SizeExceedsPool { n, pool: total });
    }
    let strata = sizes.iter().filter(|&&s| s > 0).count();
    if n < strata {
        return Err(SelectionError::FewerThanStrata { n, strata });
    }
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| n * s / total).collect();
    let mut rest: Vec<usize> = (0..sizes.len()).collect();
    rest.sort_by_key(|&h| (std::cmp::Reverse(n * sizes[h] % total), h));
    let mut leftover = n - alloc.iter().sum::<usize>();
    for &h in &rest {
        if leftover == 0 {
            break;
        }
        alloc[h] += 1;
        leftover -= 1;
    }

    let mut by_size: Vec<usize> = (0..sizes.len()).collect();
    by_size.sort_by_key(|&h| (std::cmp::Reverse(sizes[h]), h));
    let mut excess: usize = 0;
    for (a, &s) in alloc.iter_mut().zip(sizes) {
        if *a > s {
            excess += *a - s;
            *a = s;
        }
    }
    while excess > 0 {
        for &h in &by_size {
            if excess > 0 && alloc[h] < sizes[h] {
                alloc[h] += 1;
                excess -= 1;
            }
        }
    }

    for h in 0..sizes.len() {
        if sizes[h] > 0 && alloc[h] == 0 {
            let donor = (0..sizes.len())
                .filter(|&g| alloc[g] > 1)
                .max_by_key(|&g| (alloc[g], std::cmp::Reverse(g)))
                .expect("n >= number of strata leaves a donor");
            alloc[donor] -= 1;
            alloc[h] = 1;
        }
    }
    Ok(alloc)
}

/// Stratified sampling over 1-d k-means strata of mean source-model
/// confidence, scored with the Horvitz–Thompson estimator.
pub fn select_stratified_confidence(req: &SelectionRequest<'_>) -> Result<MicroBenchmark> {
    req.check_size()?;
    req.require_models(1)?;
    let pool = req.pool_size();
    let k = req.params.strata;
    if pool < k {
        return Err(SelectionError::TooFewExamples {
            need: k,
            have: pool,
        });
    }
    let m = req.matrix;
    let mut mean = vec![0.0; pool];
    for model in 0..m.num_models() {
        for (acc, c) in mean.iter_mut().zip(m.confidence_row(model)) {
            *acc += c;
        }
    }
    let nm = m.num_models() as f64;
    mean.iter_mut().for_each(|v| *v /= nm);

    let points = Points::new(&mean, 1);
    let k = k.min(points.distinct());
    let mut rng = seed::rng(req.seed);
    let strata = kmeans(points, k, &mut rng)?.members();
    let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
    let alloc = proportional_allocation(&sizes, req.n)?;

    let mut picked = Vec::with_capacity(req.n);
    for (members, &take) in strata.iter().zip(&alloc) {
        if take == 0 {
            continue;
        }
        let weight = members.len() as f64 / take as f64;
        picked.extend(
            index::sample(&mut rng, members.len(), take)
                .into_iter()
                .map(|i| (members[i], weight)),
        );
    }
    Ok(req.micro(
        Method::StratifiedConfidence,
        Estimator::HorvitzThompson,
        picked,
    ))
}
