//! Constrained data synthesis: sample consistent traces from the cache, turn
//! them into queries, verify the echo-back and replay the result.

mod generate;
mod sample;

pub use generate::{
    build_prompt, verify_echo_back, ExecGenerator, FallbackGenerator, Generator, GeneratorError,
    QueryDraft, QUERY_SYSTEM_PROMPT,
};
pub use sample::{sample_trace, SampleError, Trace, TraceStep};

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cache::{CacheStore, InvertedIndex};
use crate::canon::canonical_string;
use crate::env::Environment;
use crate::model::{DatasetSample, GroundTruth, GroundTruthCall, Provenance};
use crate::rng;
use crate::template::WorkflowTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthConfig {
    pub per_template: usize,
    pub seed: u64,
    pub max_restarts: usize,
    pub attempts_per_slot: usize,
}

impl SynthConfig {
    pub fn new(per_template: usize, seed: u64) -> Self {
        Self {
            per_template,
            seed,
            max_restarts: 10,
            attempts_per_slot: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    Exhausted,
    Closure,
    Generator,
    EchoMismatch,
    EmptyQuery,
    Replay,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateReport {
    pub attempted: usize,
    pub accepted: usize,
    pub failures: BTreeMap<FailureCause, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub attempted: usize,
    pub accepted: usize,
    pub yield_rate: f64,
    pub failures: BTreeMap<FailureCause, usize>,
    pub templates: BTreeMap<String, TemplateReport>,
}

/// Ground truth for a trace: calls grouped into turns by dependency depth.
pub fn ground_truth_from_trace(template: &WorkflowTemplate, trace: &Trace) -> GroundTruth {
    let layers = template.turn_layers();
    let calls = trace
        .steps
        .iter()
        .enumerate()
        .map(|(t, s)| GroundTruthCall {
            turn: layers[t],
            call: s.call.clone(),
            depends_on: template.depends_on(t).to_vec(),
            dependency_args: s.dependency_args.clone(),
        })
        .collect();
    let obs = trace.steps.iter().map(|s| s.observation.clone()).collect();
    GroundTruth::new(template.id.clone(), calls, Some(obs)).expect("template-derived ground truth is valid")
}

struct SlotOutcome {
    sample: Option<DatasetSample>,
    failures: Vec<FailureCause>,
}

#[allow(clippy::too_many_arguments)]
fn run_slot(
    template: &WorkflowTemplate,
    slot: usize,
    store: &CacheStore,
    index: &InvertedIndex,
    env: &Environment,
    generator: &dyn Generator,
    cfg: &SynthConfig,
) -> SlotOutcome {
    let mut rng = rng::stream(cfg.seed, &["synth", &template.id, &slot.to_string()]);
    let mut failures = Vec::new();
    for _ in 0..cfg.attempts_per_slot {
        let trace = match sample_trace(template, store, index, &mut rng, cfg.seed, cfg.max_restarts) {
            Ok(t) => t,
            Err(SampleError::Exhausted { .. }) => {
                failures.push(FailureCause::Exhausted);
                continue;
            }
            Err(e @ SampleError::Closure { .. }) => {
                log::warn!("template {}: {e}", template.id);
                failures.push(FailureCause::Closure);
                continue;
            }
        };
        let draft = match generator.generate(&trace, &build_prompt(&trace)) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("template {} slot {slot}: {e}", template.id);
                failures.push(FailureCause::Generator);
                continue;
            }
        };
        if draft.query.trim().is_empty() {
            failures.push(FailureCause::EmptyQuery);
            continue;
        }
        if !verify_echo_back(&draft, &trace) {
            failures.push(FailureCause::EchoMismatch);
            continue;
        }
        let gt = ground_truth_from_trace(template, &trace);
        if env.replay(&gt).iter().any(|o| o.is_error()) {
            failures.push(FailureCause::Replay);
            continue;
        }
        return SlotOutcome {
            sample: Some(DatasetSample {
                id: format!("{}-{slot:04}", template.id),
                query: draft.query,
                ground_truth: gt,
                provenance: Provenance {
                    template_id: template.id.clone(),
                    seed: cfg.seed,
                    generator_id: generator.id(),
                },
                logic: template.logic,
            }),
            failures,
        };
    }
    SlotOutcome {
        sample: None,
        failures,
    }
}

/// Attempts `per_template` samples per template. Slots run in parallel with
/// independent rng streams; output order is template order, then slot.
pub fn synthesize_dataset(
    templates: &[WorkflowTemplate],
    store: &CacheStore,
    index: &InvertedIndex,
    env: &Environment,
    generator: &dyn Generator,
    cfg: &SynthConfig,
) -> (Vec<DatasetSample>, SynthesisReport) {
    let jobs: Vec<(usize, usize)> = (0..templates.len())
        .flat_map(|t| (0..cfg.per_template).map(move |s| (t, s)))
        .collect();
    let outcomes: Vec<SlotOutcome> = jobs
        .par_iter()
        .map(|&(t, s)| run_slot(&templates[t], s, store, index, env, generator, cfg))
        .collect();

    let mut report = SynthesisReport::default();
    let mut samples = Vec::new();
    for ((t, _), out) in jobs.iter().zip(outcomes) {
        let tr = report.templates.entry(templates[*t].id.clone()).or_default();
        tr.attempted += 1;
        report.attempted += 1;
        for f in out.failures {
            *tr.failures.entry(f).or_default() += 1;
            *report.failures.entry(f).or_default() += 1;
        }
        if let Some(s) = out.sample {
            tr.accepted += 1;
            report.accepted += 1;
            samples.push(s);
        }
    }
    if report.attempted > 0 {
        report.yield_rate = report.accepted as f64 / report.attempted as f64;
    }
    (samples, report)
}

/// One canonical JSON line per sample.
pub fn write_dataset<W: Write>(samples: &[DatasetSample], mut out: W) -> std::io::Result<()> {
    for s in samples {
        let v = serde_json::to_value(s).map_err(std::io::Error::other)?;
        out.write_all(canonical_string(&v).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn dataset_bytes(samples: &[DatasetSample]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(samples, &mut buf).expect("writing to memory");
    buf
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_dataset(text: &str) -> Result<Vec<DatasetSample>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
