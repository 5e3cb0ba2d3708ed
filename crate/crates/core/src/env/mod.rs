//! The execution environment: argument validation, cached execution and
//! multi-turn episodes over the text protocol.

mod episode;
mod protocol;
mod validate;

pub use episode::{EpisodeError, EpisodeState, StepOutcome, TranscriptEntry};
pub use protocol::{
    call_from_json, parse_tool_calls, render_parse_error, render_tool_call, render_tool_calls,
    render_tool_response, ParseError,
};
pub use validate::{is_valid_date, is_valid_time, validate_args, ValidationResult, Validator, Violation};

use std::sync::Arc;

use serde_json::json;

use crate::cache::CacheStore;
use crate::canon::canonical_key;
use crate::model::{ErrorCode, GroundTruth, Observation, ToolCall};
use crate::schema::Registry;

pub const DEFAULT_MAX_TURNS: usize = 10;

/// A frozen cache plus the registry its calls are validated against. Cheap to
/// clone and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Environment {
    store: Arc<CacheStore>,
    registry: Arc<Registry>,
}

impl Environment {
    pub fn new(store: Arc<CacheStore>, registry: Arc<Registry>) -> Self {
        Self { store, registry }
    }

    pub fn store(&self) -> &CacheStore {
        &self.store
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Executes one call. Failures are returned as error observations; a miss
    /// is only reported for calls that passed validation.
    pub fn execute(&self, call: &ToolCall) -> Observation {
        let Some(schema) = self.registry.get(&call.function) else {
            return Observation::error(
                ErrorCode::UnknownFunction,
                format!("unknown function '{}'", call.function),
                json!({"function": call.function}),
            );
        };
        let validation = validate_args(schema, call);
        if !validation.ok {
            return Observation::error(
                ErrorCode::ValidationFailed,
                format!(
                    "{} invalid argument(s) for '{}'",
                    validation.violations.len(),
                    call.function
                ),
                json!({"violations": validation.violations}),
            );
        }
        let key = canonical_key(call);
        match self.store.lookup(&key) {
            Some(obs) => obs.clone(),
            None => Observation::error(
                ErrorCode::CacheMiss,
                format!("no result for this '{}' request", call.function),
                json!({"function": call.function, "key": key.to_hex()}),
            ),
        }
    }

    /// Executes every ground-truth call in order.
    pub fn replay(&self, gt: &GroundTruth) -> Vec<Observation> {
        gt.tool_calls().map(|c| self.execute(c)).collect()
    }
}
