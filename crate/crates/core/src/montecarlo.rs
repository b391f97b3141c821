//! Chunked, order-stable parallel execution of independent trials.
//!
//! Trials are split into fixed-size chunks that run on the current rayon pool.
//! Chunk results come back in chunk order and are merged sequentially, so the
//! merged statistics are bit-identical for any worker count.

use std::ops::Range;

use rayon::prelude::*;

use crate::analytics::{estimate_bernoulli_at, Estimate, MeanAccumulator};
use crate::channel::{run_trial, MessageId};
use crate::error::{Error, Result};
use crate::rng::{RandomSource, MESSAGE_STREAM_SHIFT};
use crate::schemes::Scheme;

pub const CHUNK: u64 = 1 << 14;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "POISSON_LAB_THREADS";

pub fn map_chunks<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync + Send,
{
    let ranges: Vec<Range<u64>> = (0..n.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(n))
        .collect();
    ranges.into_par_iter().map(f).collect()
}

/// Configure the global rayon pool from [`THREADS_ENV`], if set. Must run
/// before any parallel work; later calls are no-ops.
pub fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::config(THREADS_ENV, format!("expected a positive integer, got {raw:?}")))?;
    // already initialized is fine
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// Aggregated outcome of many transmissions of one message.
#[derive(Debug, Clone, Copy, Default)]
pub struct MessageStats {
    pub message: MessageId,
    pub trials: u64,
    pub errors: u64,
    pub energy: MeanAccumulator,
    /// Per-trial `1{correct} - energy`.
    pub correct_minus_energy: MeanAccumulator,
}

impl MessageStats {
    fn merge(&mut self, other: &MessageStats) {
        self.trials += other.trials;
        self.errors += other.errors;
        self.energy.merge(&other.energy);
        self.correct_minus_energy.merge(&other.correct_minus_energy);
    }

    pub fn p_err(&self, level: f64) -> Result<Estimate> {
        estimate_bernoulli_at(self.errors, self.trials, level)
    }

    pub fn energy(&self, level: f64) -> Result<Estimate> {
        self.energy.estimate_at(level)
    }
}

/// Run `n_trials` transmissions of `message` through `scheme`. Trial `i` uses
/// [`RandomSource::for_trial`]`(seed, message, i)`.
pub fn simulate_message(
    scheme: &Scheme,
    message: MessageId,
    n_trials: u64,
    seed: u64,
) -> Result<MessageStats> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials must be >= 1"));
    }
    if n_trials >= 1 << MESSAGE_STREAM_SHIFT {
        return Err(Error::invalid(format!("n_trials must be < 2^{MESSAGE_STREAM_SHIFT}")));
    }
    scheme.check_message(message)?;
    let params = scheme.params();
    let horizon = scheme.spec().horizon;
    let chunks = map_chunks(n_trials, |range| {
        let mut acc = MessageStats {
            message,
            ..Default::default()
        };
        for i in range {
            let src = RandomSource::for_trial(seed, message, i);
            let r = run_trial(scheme, scheme, message, &params, horizon, src)?;
            acc.trials += 1;
            acc.errors += u64::from(!r.correct);
            acc.energy.push(r.energy);
            acc.correct_minus_energy
                .push(f64::from(u8::from(r.correct)) - r.energy);
        }
        Ok(acc)
    })?;
    let mut total = MessageStats {
        message,
        ..Default::default()
    };
    chunks.iter().for_each(|c| total.merge(c));
    Ok(total)
}

/// [`simulate_message`] for every message of the scheme.
pub fn simulate_all(scheme: &Scheme, n_trials: u64, seed: u64) -> Result<Vec<MessageStats>> {
    (0..scheme.spec().messages)
        .map(|m| simulate_message(scheme, m, n_trials, seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range_in_order() {
        let out = map_chunks(3 * CHUNK + 5, |r| Ok((r.start, r.end))).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out[0], (0, CHUNK));
        assert_eq!(out[3], (3 * CHUNK, 3 * CHUNK + 5));
        assert!(map_chunks(0, |r| Ok(r.start)).unwrap().is_empty());
    }

    #[test]
    fn errors_propagate() {
        let r: Result<Vec<()>> = map_chunks(10, |_| Err(Error::invalid("boom")));
        assert!(r.is_err());
    }
}
