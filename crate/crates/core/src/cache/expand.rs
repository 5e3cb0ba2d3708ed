//! Workflow-aware cache expansion: run whole template chains against an
//! upstream so every dependent lookup over stored observations is itself stored.

use super::store::{CacheBuilder, Inserted};
use super::upstream::{ParamSampler, Upstream, UpstreamError};
use super::CacheError;
use crate::model::{Observation, ToolCall};
use crate::path::ExtractError;
use crate::rng;
use crate::template::WorkflowTemplate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpandError {
    #[error("template {template}: upstream failed at step {step}: {source}")]
    Upstream {
        template: String,
        step: usize,
        #[source]
        source: UpstreamError,
    },
    #[error("template {template}: upstream returned an error observation at step {step}")]
    UpstreamErrorObservation { template: String, step: usize },
    #[error("template {template}: step {step} param {param:?} could not be extracted: {source}")]
    Closure {
        template: String,
        step: usize,
        param: String,
        #[source]
        source: ExtractError,
    },
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExpansionStats {
    pub chains: usize,
    pub new_entries: usize,
}

/// Executes `template` end to end `breadth` times and inserts every
/// `(call, observation)` pair. Independent arguments come from `sampler`
/// (seeded per chain); dependent ones are extracted from the observations
/// produced earlier in the same chain.
pub fn expand_workflow(
    template: &WorkflowTemplate,
    upstream: &dyn Upstream,
    sampler: &dyn ParamSampler,
    builder: &mut CacheBuilder,
    breadth: usize,
    seed: u64,
) -> Result<ExpansionStats, ExpandError> {
    expand_chains(template, upstream, sampler, builder, 0..breadth, seed)
}

/// Like [`expand_workflow`] over an explicit range of chain indices, so a
/// cache can be grown in increments without repeating earlier chains.
pub fn expand_chains(
    template: &WorkflowTemplate,
    upstream: &dyn Upstream,
    sampler: &dyn ParamSampler,
    builder: &mut CacheBuilder,
    chains: std::ops::Range<usize>,
    seed: u64,
) -> Result<ExpansionStats, ExpandError> {
    let mut stats = ExpansionStats::default();
    for chain in chains {
        let mut rng = rng::stream(seed, &["expand", &template.id, &chain.to_string()]);
        let mut observations: Vec<Observation> = Vec::with_capacity(template.len());
        for (step, function) in template.pattern.iter().enumerate() {
            let upstream_err = |source| ExpandError::Upstream {
                template: template.id.clone(),
                step,
                source,
            };
            let mut args = sampler
                .sample_params(function, &mut rng)
                .map_err(upstream_err)?;
            if let Some(dep) = template.step(step) {
                for (param, binding) in &dep.dependency_args {
                    let value = binding
                        .from_field
                        .extract(&observations[binding.from_step])
                        .map_err(|source| ExpandError::Closure {
                            template: template.id.clone(),
                            step,
                            param: param.clone(),
                            source,
                        })?;
                    args.insert(param.clone(), value.clone());
                }
            }
            let call = ToolCall::new(function.clone(), args)
                .map_err(|e| upstream_err(UpstreamError::Failed(e.to_string())))?;
            let obs = upstream.respond(&call, seed).map_err(upstream_err)?;
            if obs.is_error() {
                return Err(ExpandError::UpstreamErrorObservation {
                    template: template.id.clone(),
                    step,
                });
            }
            if let Inserted::New(_) = builder.insert(call, obs.clone())? {
                stats.new_entries += 1;
            }
            observations.push(obs);
        }
        stats.chains += 1;
    }
    Ok(stats)
}
