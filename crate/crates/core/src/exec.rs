//! Pluggable execution of independent gradient shards.
//!
//! Batches are cut into shards of [`SHARD_ROWS`] rows regardless of how many
//! workers run them, and partial results are always summed in shard order,
//! so the reduced gradient is bit-identical for any worker count.

use alloc::vec::Vec;

use crate::error::Result;
use crate::network::LossTerms;

/// Rows per gradient shard.
pub const SHARD_ROWS: usize = 500;

/// Loss terms and flat gradient of one shard.
pub type Partial = Result<(LossTerms, Vec<f64>)>;

/// Runs `tasks` independent jobs and returns their results in task order.
pub trait Executor: Sync {
    fn run(&self, tasks: usize, job: &(dyn Fn(usize) -> Partial + Sync)) -> Vec<Partial>;
}

/// Runs every shard on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Serial;

impl Executor for Serial {
    fn run(&self, tasks: usize, job: &(dyn Fn(usize) -> Partial + Sync)) -> Vec<Partial> {
        (0..tasks).map(job).collect()
    }
}

/// Sums shard results in order.
pub(crate) fn reduce(parts: Vec<Partial>, num_params: usize) -> Result<(LossTerms, Vec<f64>)> {
    let mut terms = LossTerms::default();
    let mut grad = alloc::vec![0.0; num_params];
    for part in parts {
        let (t, g) = part?;
        terms = terms + t;
        for (acc, v) in grad.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    Ok((terms, grad))
}

/// Shard boundaries for `rows` rows.
pub(crate) fn shards(rows: usize) -> Vec<core::ops::Range<usize>> {
    (0..rows.div_ceil(SHARD_ROWS))
        .map(|i| i * SHARD_ROWS..((i + 1) * SHARD_ROWS).min(rows))
        .collect()
}
