//! Core value types: calls, observations, ground truth and dataset samples.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("function name must be non-empty")]
    EmptyFunction,
    #[error("arguments must be a map, got {0}")]
    ArgsNotMap(String),
    #[error("successful observation payload must be non-null")]
    NullPayload,
    #[error("is_error flag disagrees with error detail")]
    InconsistentError,
    #[error("ground truth: {0}")]
    GroundTruth(String),
}

/// One action: a function selection plus its parameter assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCall")]
pub struct ToolCall {
    pub function: String,
    pub args: BTreeMap<String, Value>,
}

#[derive(Deserialize)]
struct RawCall {
    function: String,
    #[serde(default)]
    args: BTreeMap<String, Value>,
}

impl TryFrom<RawCall> for ToolCall {
    type Error = ModelError;
    fn try_from(raw: RawCall) -> Result<Self, Self::Error> {
        ToolCall::new(raw.function, raw.args)
    }
}

impl ToolCall {
    pub fn new(
        function: impl Into<String>,
        args: BTreeMap<String, Value>,
    ) -> Result<Self, ModelError> {
        let function = function.into();
        if function.is_empty() {
            return Err(ModelError::EmptyFunction);
        }
        Ok(Self { function, args })
    }

    /// Builds a call from a JSON object of arguments.
    pub fn from_value(function: impl Into<String>, args: Value) -> Result<Self, ModelError> {
        match args {
            Value::Object(map) => Self::new(function, map.into_iter().collect()),
            Value::Null => Self::new(function, BTreeMap::new()),
            other => Err(ModelError::ArgsNotMap(crate::canon::canonical_string(&other))),
        }
    }

    pub fn args_value(&self) -> Value {
        Value::Object(self.args.clone().into_iter().collect::<Map<_, _>>())
    }

    /// Exact match: same function (case-sensitive) and canonically equal args.
    pub fn matches(&self, other: &ToolCall) -> bool {
        self.function == other.function
            && self.args.len() == other.args.len()
            && self.args.iter().all(|(k, v)| {
                other
                    .args
                    .get(k)
                    .is_some_and(|w| crate::canon::canonical_eq(v, w))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    ValidationFailed,
    CacheMiss,
    UnknownFunction,
}

impl ErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCode::ValidationFailed => "VALIDATION_FAILED",
            ErrorCode::CacheMiss => "CACHE_MISS",
            ErrorCode::UnknownFunction => "UNKNOWN_FUNCTION",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationError {
    pub code: ErrorCode,
    pub message: String,
}

/// Result of executing a call: a payload, or a structured error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawObservation", into = "RawObservation")]
pub struct Observation {
    payload: Value,
    error: Option<ObservationError>,
}

#[derive(Serialize, Deserialize)]
struct RawObservation {
    payload: Value,
    is_error: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<ObservationError>,
}

impl TryFrom<RawObservation> for Observation {
    type Error = ModelError;
    fn try_from(raw: RawObservation) -> Result<Self, Self::Error> {
        if raw.is_error != raw.error.is_some() {
            return Err(ModelError::InconsistentError);
        }
        if !raw.is_error && raw.payload.is_null() {
            return Err(ModelError::NullPayload);
        }
        Ok(Self {
            payload: raw.payload,
            error: raw.error,
        })
    }
}

impl From<Observation> for RawObservation {
    fn from(o: Observation) -> Self {
        RawObservation {
            is_error: o.error.is_some(),
            payload: o.payload,
            error: o.error,
        }
    }
}

impl Observation {
    pub fn ok(payload: Value) -> Result<Self, ModelError> {
        if payload.is_null() {
            return Err(ModelError::NullPayload);
        }
        Ok(Self {
            payload,
            error: None,
        })
    }

    /// An error observation shaped like a failing upstream API response.
    pub fn error(code: ErrorCode, message: impl Into<String>, details: Value) -> Self {
        let message = message.into();
        let mut payload = json!({
            "status": false,
            "code": code.as_str(),
            "message": message,
        });
        if !details.is_null() {
            payload["details"] = details;
        }
        Self {
            payload,
            error: Some(ObservationError { code, message }),
        }
    }

    pub fn payload(&self) -> &Value {
        &self.payload
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    pub fn error_detail(&self) -> Option<&ObservationError> {
        self.error.as_ref()
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        self.error.as_ref().map(|e| e.code)
    }
}

/// Logical composition label attached to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicType {
    ExplicitConjunction,
    ParallelConjunction,
    FallbackLogic,
    AlternativeOptions,
}

impl LogicType {
    pub fn as_str(&self) -> &'static str {
        match self {
            LogicType::ExplicitConjunction => "explicit_conjunction",
            LogicType::ParallelConjunction => "parallel_conjunction",
            LogicType::FallbackLogic => "fallback_logic",
            LogicType::AlternativeOptions => "alternative_options",
        }
    }
}

/// A ground-truth call with its turn and the dependency edges that point at it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthCall {
    pub turn: usize,
    pub call: ToolCall,
    /// Indices of earlier ground-truth calls whose observations feed this one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depends_on: Vec<usize>,
    /// Names of parameters whose values are propagated from earlier observations.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dependency_args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGroundTruth")]
pub struct GroundTruth {
    pub template_id: String,
    pub calls: Vec<GroundTruthCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_observations: Option<Vec<Observation>>,
}

#[derive(Deserialize)]
struct RawGroundTruth {
    #[serde(default)]
    template_id: String,
    calls: Vec<GroundTruthCall>,
    #[serde(default)]
    expected_observations: Option<Vec<Observation>>,
}

impl TryFrom<RawGroundTruth> for GroundTruth {
    type Error = ModelError;
    fn try_from(raw: RawGroundTruth) -> Result<Self, Self::Error> {
        GroundTruth::new(raw.template_id, raw.calls, raw.expected_observations)
    }
}

impl GroundTruth {
    pub fn new(
        template_id: impl Into<String>,
        calls: Vec<GroundTruthCall>,
        expected_observations: Option<Vec<Observation>>,
    ) -> Result<Self, ModelError> {
        let gt = Self {
            template_id: template_id.into(),
            calls,
            expected_observations,
        };
        gt.validate()?;
        Ok(gt)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::GroundTruth(m));
        if self.calls.is_empty() {
            return err("no calls".into());
        }
        let turns: BTreeSet<usize> = self.calls.iter().map(|c| c.turn).collect();
        let n = turns.len();
        if turns.iter().copied().ne(1..=n) {
            return err(format!("turn indices {turns:?} are not contiguous from 1"));
        }
        for (i, c) in self.calls.iter().enumerate() {
            for &d in &c.depends_on {
                if d >= self.calls.len() || d == i {
                    return err(format!("call {i} depends on invalid index {d}"));
                }
            }
        }
        if let Some(obs) = &self.expected_observations {
            if obs.len() != self.calls.len() {
                return err("expected_observations length differs from calls".into());
            }
        }
        Ok(())
    }

    /// Number of turns N.
    pub fn n_turns(&self) -> usize {
        self.calls.iter().map(|c| c.turn).max().unwrap_or(0)
    }

    /// Call indices grouped by turn, turn 1 first.
    pub fn turns(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_turns()];
        for (i, c) in self.calls.iter().enumerate() {
            out[c.turn - 1].push(i);
        }
        out
    }

    /// Dependency edges `(j, i)`: call i consumes an observation of call j.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.calls
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.depends_on.iter().map(move |&j| (j, i)))
            .collect()
    }

    pub fn tool_calls(&self) -> impl Iterator<Item = &ToolCall> {
        self.calls.iter().map(|c| &c.call)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub template_id: String,
    pub seed: u64,
    pub generator_id: String,
}

/// A query paired with the call sequence that answers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub id: String,
    pub query: String,
    pub ground_truth: GroundTruth,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logic: Option<LogicType>,
}
