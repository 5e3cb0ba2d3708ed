//! Throughput measurement for cache lookups and full reward evaluations.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::env::Environment;
use crate::model::{DatasetSample, ToolCall};
use crate::reward::score_total;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub entries: usize,
    pub lookups: usize,
    pub lookup_hits: usize,
    pub lookups_per_sec: f64,
    pub reward_evals: usize,
    pub reward_evals_per_sec: f64,
}

/// Predicted transcripts for `sample`: the exact ground truth, or one with a
/// perturbed argument in its last call, chosen by `rng`.
fn predicted_calls<R: Rng>(sample: &DatasetSample, rng: &mut R) -> Vec<ToolCall> {
    let mut calls: Vec<ToolCall> = sample.ground_truth.tool_calls().cloned().collect();
    if rng.random_bool(0.5) {
        if let Some(last) = calls.last_mut() {
            if let Some((_, v)) = last.args.iter_mut().next() {
                *v = json!("perturbed");
            }
        }
    }
    calls
}

/// Times `lookups` key lookups of stored calls (each one canonicalizes and
/// hashes the call) and `reward_evals` episodes of execute-then-score over
/// `samples`.
pub fn run_bench(
    env: &Environment,
    samples: &[DatasetSample],
    lambda: f64,
    lookups: usize,
    reward_evals: usize,
    seed: u64,
) -> BenchReport {
    let store = env.store();
    let mut r = rng::stream(seed, &["bench"]);
    let entries = store.entries();
    let probes: Vec<ToolCall> = if entries.is_empty() {
        Vec::new()
    } else {
        (0..lookups.min(4096))
            .map(|_| entries[r.random_range(0..entries.len())].call.clone())
            .collect()
    };

    let mut hits = 0;
    let t = Instant::now();
    if !probes.is_empty() {
        for i in 0..lookups {
            if store.lookup_call(&probes[i % probes.len()]).is_some() {
                hits += 1;
            }
        }
    }
    let lookup_secs = t.elapsed().as_secs_f64();

    let episodes: Vec<(&DatasetSample, Vec<ToolCall>)> =
        samples.iter().map(|s| (s, predicted_calls(s, &mut r))).collect();
    let mut sink = 0.0;
    let t = Instant::now();
    if !episodes.is_empty() {
        for i in 0..reward_evals {
            let (sample, calls) = &episodes[i % episodes.len()];
            let obs: Vec<_> = calls.iter().map(|c| env.execute(c)).collect();
            sink += score_total(calls, &obs, &sample.ground_truth, env.registry(), lambda).r_total;
        }
    }
    let eval_secs = t.elapsed().as_secs_f64();
    log::debug!("bench checksum {sink}");

    let rate = |n: usize, secs: f64| if secs > 0.0 { n as f64 / secs } else { 0.0 };
    BenchReport {
        seed,
        entries: store.len(),
        lookups: if probes.is_empty() { 0 } else { lookups },
        lookup_hits: hits,
        lookups_per_sec: rate(hits, lookup_secs),
        reward_evals: if episodes.is_empty() { 0 } else { reward_evals },
        reward_evals_per_sec: rate(if episodes.is_empty() { 0 } else { reward_evals }, eval_secs),
    }
}
