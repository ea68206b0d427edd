use rand::seq::index;

use super::{Estimator, Method, MicroBenchmark, Result, SelectionError, SelectionRequest};
use crate::seed;

/// `n` distinct pool examples, uniformly without replacement.
pub fn select_random_uniform(req: &SelectionRequest<'_>) -> Result<MicroBenchmark> {
    req.check_size()?;
    let mut rng = seed::rng(req.seed);
    let picked = index::sample(&mut rng, req.pool_size(), req.n)
        .into_iter()
        .map(|i| (i, 1.0))
        .collect();
    Ok(req.micro(Method::RandomUniform, Estimator::PlainMean, picked))
}

/// ⌊n/t⌋ examples from each of the `t` subtasks. The total is below `n`
/// when `t` does not divide `n`.
pub fn select_random_subtask_stratified(req: &SelectionRequest<'_>) -> Result<MicroBenchmark> {
    req.check_size()?;
    let groups = req.matrix.subtask_groups();
    let t = groups.len();
    if req.n < t {
        return Err(SelectionError::FewerThanSubtasks {
            n: req.n,
            subtasks: t,
        });
    }
    let per = req.n / t;
    if let Some((name, members)) = groups.iter().find(|(_, m)| m.len() < per) {
        return Err(SelectionError::SubtaskTooSmall {
            subtask: name.to_string(),
            size: members.len(),
            need: per,
        });
    }
    let mut rng = seed::rng(req.seed);
    let mut picked = Vec::with_capacity(per * t);
    for members in groups.values() {
        picked.extend(
            index::sample(&mut rng, members.len(), per)
                .into_iter()
                .map(|i| (members[i], 1.0)),
        );
    }
    Ok(req.micro(Method::RandomSubtask, Estimator::PlainMean, picked))
}
