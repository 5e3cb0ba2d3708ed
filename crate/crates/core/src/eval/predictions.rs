//! Model outputs for batch scoring, one JSON document per line:
//!
//! * `{"id", "turns": [[call, ...], ...]}` where a call is
//!   `{"name", "arguments"}` or `{"function", "args"}`, or
//! * `{"id", "assistant": [text, ...]}`: raw assistant messages. A message
//!   that fails to parse contributes an empty turn; the first message without
//!   calls ends the transcript.

use std::collections::{HashMap, HashSet};

use serde_json::Value;
use thiserror::Error;

use super::EpisodeRecord;
use crate::env::{call_from_json, parse_tool_calls, Environment};
use crate::model::{DatasetSample, Observation, ToolCall};

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("prediction for unknown sample {0:?}")]
    UnknownSample(String),
    #[error("duplicate prediction for sample {0:?}")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub turns: Vec<Vec<ToolCall>>,
}

fn call_from_doc(v: &Value) -> Result<ToolCall, String> {
    if v.get("function").is_some() {
        serde_json::from_value(v.clone()).map_err(|e| e.to_string())
    } else {
        call_from_json(v)
    }
}

fn turns_from_texts(texts: &[Value]) -> Result<Vec<Vec<ToolCall>>, String> {
    let mut turns = Vec::new();
    for t in texts {
        let text = t.as_str().ok_or("assistant messages must be strings")?;
        match parse_tool_calls(text) {
            Ok(calls) if calls.is_empty() => break,
            Ok(calls) => turns.push(calls),
            Err(_) => turns.push(Vec::new()),
        }
    }
    Ok(turns)
}

pub fn parse_prediction(v: &Value) -> Result<Prediction, String> {
    let id = v["id"].as_str().ok_or("missing string \"id\"")?.to_string();
    let turns = match (&v["turns"], &v["assistant"]) {
        (Value::Array(turns), Value::Null) => turns
            .iter()
            .map(|turn| {
                turn.as_array()
                    .ok_or_else(|| "each turn must be a list of calls".to_string())?
                    .iter()
                    .map(call_from_doc)
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?,
        (Value::Null, Value::Array(texts)) => turns_from_texts(texts)?,
        _ => return Err("expected exactly one of \"turns\" or \"assistant\" lists".into()),
    };
    Ok(Prediction { id, turns })
}

pub fn read_predictions(text: &str) -> Result<Vec<Prediction>, PredictionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let fmt = |reason: String| PredictionError::Format { line: i + 1, reason };
            let v: Value = serde_json::from_str(l).map_err(|e| fmt(e.to_string()))?;
            parse_prediction(&v).map_err(fmt)
        })
        .collect()
}

/// Pairs every sample with its prediction, in dataset order. Samples without
/// a prediction get an empty transcript.
pub fn join_predictions(
    samples: &[DatasetSample],
    predictions: Vec<Prediction>,
) -> Result<Vec<EpisodeRecord>, PredictionError> {
    let known: HashSet<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    let mut by_id: HashMap<String, Vec<Vec<ToolCall>>> = HashMap::new();
    for p in predictions {
        if !known.contains(p.id.as_str()) {
            return Err(PredictionError::UnknownSample(p.id));
        }
        if by_id.contains_key(&p.id) {
            return Err(PredictionError::Duplicate(p.id));
        }
        by_id.insert(p.id, p.turns);
    }
    Ok(samples
        .iter()
        .map(|s| EpisodeRecord {
            id: s.id.clone(),
            ground_truth: s.ground_truth.clone(),
            logic: s.logic,
            pred_turns: by_id.remove(&s.id).unwrap_or_default(),
        })
        .collect())
}

/// Executes the predicted calls in order, as an episode would have.
pub fn execute_record(env: &Environment, rec: &EpisodeRecord) -> Vec<Observation> {
    rec.pred_turns.iter().flatten().map(|c| env.execute(c)).collect()
}
