//! Graduated reward: per-call AST and execution scores, first-match alignment,
//! the dependency-gated orchestration score and their weighted total.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canon::{canonical_eq, ValueKind};
use crate::model::{GroundTruth, Observation, ToolCall};
use crate::schema::{FunctionSchema, Registry};

pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Maps each ground-truth call index to the predicted call aligned with it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentMap {
    pub assignments: Vec<Option<usize>>,
}

impl AlignmentMap {
    pub fn get(&self, gt_index: usize) -> Option<usize> {
        self.assignments.get(gt_index).copied().flatten()
    }

    /// For each of `n_pred` predicted calls, the ground-truth call it was
    /// aligned to, if any.
    pub fn inverse(&self, n_pred: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_pred];
        for (i, k) in self.assignments.iter().enumerate() {
            if let Some(k) = *k {
                out[k] = Some(i);
            }
        }
        out
    }

    pub fn matched(&self) -> usize {
        self.assignments.iter().filter(|a| a.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallScore {
    pub ast: f64,
    pub sem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub per_call: Vec<CallScore>,
    pub r_atomic: f64,
    pub r_orch: f64,
    pub r_total: f64,
    pub lambda: f64,
    pub alignment: AlignmentMap,
}

/// Parameter coverage times type accuracy over the shared parameters.
pub fn struct_score(pred: &BTreeMap<String, Value>, gt: &BTreeMap<String, Value>) -> f64 {
    if gt.is_empty() {
        return 1.0;
    }
    let mut shared = 0usize;
    let mut typed = 0usize;
    for (k, want) in gt {
        if let Some(got) = pred.get(k) {
            shared += 1;
            if ValueKind::of(got) == ValueKind::of(want) {
                typed += 1;
            }
        }
    }
    if shared == 0 {
        return 0.0;
    }
    (shared as f64 / gt.len() as f64) * (typed as f64 / shared as f64)
}

fn args_equal(a: &BTreeMap<String, Value>, b: &BTreeMap<String, Value>) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .all(|(k, v)| b.get(k).is_some_and(|w| canonical_eq(v, w)))
}

/// Three-level structural score against the aligned ground-truth call. An
/// unaligned call scores 0.
pub fn score_ast(pred: &ToolCall, gt: Option<&ToolCall>) -> f64 {
    let Some(gt) = gt else { return 0.0 };
    let name = if pred.function == gt.function { 1.0 } else { 0.0 };
    let exact = if args_equal(&pred.args, &gt.args) { 1.0 } else { 0.0 };
    name / 3.0 + struct_score(&pred.args, &gt.args) / 3.0 + exact / 3.0
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Null | Value::Bool(false) => false,
        Value::String(s) => !s.is_empty(),
        Value::Array(a) => !a.is_empty(),
        Value::Object(o) => !o.is_empty(),
        _ => true,
    }
}

fn has_error_indicator(payload: &Value) -> bool {
    let Value::Object(m) = payload else {
        return false;
    };
    if m.get("error").is_some_and(truthy) || m.get("errors").is_some_and(truthy) {
        return true;
    }
    if m.get("is_error") == Some(&Value::Bool(true)) || m.get("success") == Some(&Value::Bool(false)) {
        return true;
    }
    match m.get("status") {
        Some(Value::Bool(false)) => true,
        Some(Value::String(s)) => {
            matches!(s.to_ascii_lowercase().as_str(), "error" | "fail" | "failed" | "failure")
        }
        _ => false,
    }
}

fn is_empty_payload(payload: &Value) -> bool {
    match payload {
        Value::Null => true,
        Value::Array(a) => a.is_empty(),
        Value::Object(m) => m.is_empty(),
        Value::String(s) => s.is_empty(),
        _ => false,
    }
}

/// 1 when the call executed and returned a well-formed, non-error response,
/// whether or not it matches the ground truth.
pub fn score_semantic(obs: &Observation, schema: Option<&FunctionSchema>) -> f64 {
    let payload = obs.payload();
    if obs.is_error() || is_empty_payload(payload) || has_error_indicator(payload) {
        return 0.0;
    }
    if let Some(schema) = schema {
        let holder = match payload {
            Value::Array(a) => &a[0],
            other => other,
        };
        if schema.response_fields.iter().any(|f| holder.get(f).is_none()) {
            return 0.0;
        }
    }
    1.0
}

/// First-match alignment by function name, scanning ground truth in order.
pub fn align_calls(pred: &[ToolCall], gt: &GroundTruth) -> AlignmentMap {
    let mut used = vec![false; pred.len()];
    let assignments = gt
        .tool_calls()
        .map(|g| {
            let k = (0..pred.len()).find(|&k| !used[k] && pred[k].function == g.function)?;
            used[k] = true;
            Some(k)
        })
        .collect();
    AlignmentMap { assignments }
}

fn per_call(
    pred: &[ToolCall],
    observations: &[Observation],
    gt: &GroundTruth,
    registry: &Registry,
    alignment: &AlignmentMap,
) -> Vec<CallScore> {
    let owner = alignment.inverse(pred.len());
    pred.iter()
        .enumerate()
        .map(|(k, call)| CallScore {
            ast: score_ast(call, owner[k].map(|i| &gt.calls[i].call)),
            sem: observations
                .get(k)
                .map_or(0.0, |o| score_semantic(o, registry.get(&call.function))),
        })
        .collect()
}

fn atomic_from(scores: &[CallScore]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().map(|s| (s.ast + s.sem) / 2.0).sum::<f64>() / scores.len() as f64
}

/// Mean over predicted calls of the average of AST and execution scores.
/// `observations[k]` is the result of executing `pred[k]`.
pub fn score_atomic(
    pred: &[ToolCall],
    observations: &[Observation],
    gt: &GroundTruth,
    registry: &Registry,
) -> f64 {
    let alignment = align_calls(pred, gt);
    atomic_from(&per_call(pred, observations, gt, registry, &alignment))
}

/// Fraction of ground-truth calls that are matched and whose every
/// prerequisite was matched at an earlier predicted position.
pub fn orch_from(alignment: &AlignmentMap, gt: &GroundTruth) -> f64 {
    let credited = gt
        .calls
        .iter()
        .enumerate()
        .filter(|(i, c)| {
            alignment.get(*i).is_some_and(|mi| {
                c.depends_on
                    .iter()
                    .all(|&j| alignment.get(j).is_some_and(|mj| mj < mi))
            })
        })
        .count();
    credited as f64 / gt.calls.len() as f64
}

pub fn score_orch(pred: &[ToolCall], gt: &GroundTruth) -> f64 {
    orch_from(&align_calls(pred, gt), gt)
}

pub fn score_total(
    pred: &[ToolCall],
    observations: &[Observation],
    gt: &GroundTruth,
    registry: &Registry,
    lambda: f64,
) -> RewardReport {
    let alignment = align_calls(pred, gt);
    let per_call = per_call(pred, observations, gt, registry, &alignment);
    let r_atomic = atomic_from(&per_call);
    let r_orch = orch_from(&alignment, gt);
    RewardReport {
        per_call,
        r_atomic,
        r_orch,
        r_total: lambda * r_atomic + (1.0 - lambda) * r_orch,
        lambda,
        alignment,
    }
}
