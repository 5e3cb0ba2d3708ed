use std::collections::BTreeMap;

use rand::RngCore;
use serde_json::Value;
use thiserror::Error;

use crate::model::{Observation, ToolCall};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpstreamError {
    #[error("upstream has no function {0:?}")]
    UnknownFunction(String),
    #[error("upstream failure: {0}")]
    Failed(String),
}

/// Source of observations for cache collection. Implementations must be
/// deterministic: identical `(call, seed)` yields a byte-identical observation.
pub trait Upstream: Send + Sync {
    fn respond(&self, call: &ToolCall, seed: u64) -> Result<Observation, UpstreamError>;
}

/// Draws parameter assignments for calls that are not fully determined by
/// dependency bindings.
pub trait ParamSampler: Send + Sync {
    fn sample_params(
        &self,
        function: &str,
        rng: &mut dyn RngCore,
    ) -> Result<BTreeMap<String, Value>, UpstreamError>;
}
