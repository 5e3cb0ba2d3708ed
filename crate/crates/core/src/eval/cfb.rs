//! Adapter for ComplexFuncBench-style conversation files.
//!
//! Each line is `{"id", "conversations": [...]}` where a conversation is a
//! list of messages:
//!
//! * `{"role": "user", "content": text}`: the first one becomes the query.
//! * `{"role": "assistant", "function_call": [{"name", "arguments"}, ...]}`:
//!   one turn of (possibly parallel) calls.
//! * `{"role": "observation", "content": [response, ...]}`: responses for the
//!   preceding turn, one per call.
//! * `{"role": "assistant", "content": text}` with no calls ends the episode.
//!
//! The files carry no dependency annotations, so they are inferred: an
//! argument value that does not occur in the user query but equals a scalar
//! leaf of an earlier response is treated as propagated from the most recent
//! such response.

use serde_json::Value;
use thiserror::Error;

use super::Prediction;
use crate::canon::canonical_eq;
use crate::model::{DatasetSample, GroundTruth, GroundTruthCall, Observation, Provenance, ToolCall};

#[derive(Debug, Error)]
pub enum CfbError {
    #[error("conversation format: {0}")]
    Format(String),
}

fn fail<T>(m: impl Into<String>) -> Result<T, CfbError> {
    Err(CfbError::Format(m.into()))
}

fn id_of(doc: &Value) -> String {
    match &doc["id"] {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn messages(doc: &Value) -> Result<&Vec<Value>, CfbError> {
    doc["conversations"]
        .as_array()
        .ok_or_else(|| CfbError::Format("missing \"conversations\" list".into()))
}

fn parse_call(v: &Value) -> Result<ToolCall, CfbError> {
    let name = v["name"].as_str().unwrap_or_default();
    let args = match &v["arguments"] {
        Value::String(s) => serde_json::from_str(s).map_err(|e| CfbError::Format(e.to_string()))?,
        other => other.clone(),
    };
    ToolCall::from_value(name, args).map_err(|e| CfbError::Format(e.to_string()))
}

/// Predicted or reference calls grouped by assistant message.
pub fn turns_from_cfb(doc: &Value) -> Result<Vec<Vec<ToolCall>>, CfbError> {
    let mut turns = Vec::new();
    for m in messages(doc)? {
        if m["role"] != "assistant" {
            continue;
        }
        match &m["function_call"] {
            Value::Array(calls) if !calls.is_empty() => {
                turns.push(calls.iter().map(parse_call).collect::<Result<_, _>>()?);
            }
            Value::Object(_) => turns.push(vec![parse_call(&m["function_call"])?]),
            _ => {}
        }
    }
    Ok(turns)
}

fn contains_leaf(haystack: &Value, needle: &Value) -> bool {
    match haystack {
        Value::Array(a) => a.iter().any(|v| contains_leaf(v, needle)),
        Value::Object(m) => m.values().any(|v| contains_leaf(v, needle)),
        leaf => canonical_eq(leaf, needle),
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) if !s.is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// A model's conversation as a prediction for the sample with the same id.
pub fn prediction_from_cfb(doc: &Value) -> Result<Prediction, CfbError> {
    Ok(Prediction {
        id: id_of(doc),
        turns: turns_from_cfb(doc)?,
    })
}

/// Converts a reference conversation into a dataset sample.
pub fn sample_from_cfb(doc: &Value) -> Result<DatasetSample, CfbError> {
    let msgs = messages(doc)?;
    let query = msgs
        .iter()
        .find(|m| m["role"] == "user")
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string();
    if query.is_empty() {
        return fail("no user query");
    }

    let mut calls: Vec<GroundTruthCall> = Vec::new();
    let mut observations: Vec<Option<Value>> = Vec::new();
    let mut turn = 0;
    let mut last_turn_start = 0;
    for m in msgs {
        match m["role"].as_str() {
            Some("assistant") => {
                let group = match &m["function_call"] {
                    Value::Array(c) if !c.is_empty() => c.iter().map(parse_call).collect::<Result<Vec<_>, _>>()?,
                    Value::Object(_) => vec![parse_call(&m["function_call"])?],
                    _ => continue,
                };
                turn += 1;
                last_turn_start = calls.len();
                for call in group {
                    calls.push(GroundTruthCall {
                        turn,
                        call,
                        depends_on: vec![],
                        dependency_args: vec![],
                    });
                    observations.push(None);
                }
            }
            Some("observation") => {
                let n = calls.len() - last_turn_start;
                let items: Vec<Value> = match &m["content"] {
                    Value::Array(a) if a.len() == n => a.clone(),
                    Value::String(s) => match serde_json::from_str::<Value>(s) {
                        Ok(Value::Array(a)) if a.len() == n => a,
                        Ok(v) if n == 1 => vec![v],
                        _ => continue,
                    },
                    v if n == 1 => vec![v.clone()],
                    _ => continue,
                };
                for (k, item) in items.into_iter().enumerate() {
                    observations[last_turn_start + k] = Some(item);
                }
            }
            _ => {}
        }
    }
    if calls.is_empty() {
        return fail("no function calls");
    }

    for i in 0..calls.len() {
        let mut deps = Vec::new();
        let mut dep_args = Vec::new();
        let earlier = calls[..i].iter().map(|c| c.turn).filter(|&t| t < calls[i].turn).count();
        for (name, value) in &calls[i].call.args {
            let Some(text) = scalar_text(value) else { continue };
            if query.contains(&text) {
                continue;
            }
            let source = (0..earlier)
                .rev()
                .find(|&j| observations[j].as_ref().is_some_and(|o| contains_leaf(o, value)));
            if let Some(j) = source {
                if !deps.contains(&j) {
                    deps.push(j);
                }
                dep_args.push(name.clone());
            }
        }
        deps.sort_unstable();
        calls[i].depends_on = deps;
        calls[i].dependency_args = dep_args;
    }

    let expected = observations
        .into_iter()
        .map(|o| o.and_then(|v| Observation::ok(v).ok()))
        .collect::<Option<Vec<_>>>();
    let id = id_of(doc);
    let ground_truth = GroundTruth::new(id.clone(), calls, expected).map_err(|e| CfbError::Format(e.to_string()))?;
    Ok(DatasetSample {
        id: id.clone(),
        query,
        ground_truth,
        provenance: Provenance {
            template_id: id,
            seed: 0,
            generator_id: "complexfuncbench".into(),
        },
        logic: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn doc() -> Value {
        json!({
            "id": "Cross-7",
            "conversations": [
                {"role": "user", "content": "Hotels in Montreal from 2024-11-20 to 2024-11-23, and things to do."},
                {"role": "assistant", "function_call": [
                    {"name": "Search_Hotel_Destination", "arguments": {"query": "Montreal"}},
                    {"name": "Search_Attraction_Location", "arguments": {"query": "Montreal"}}
                ]},
                {"role": "observation", "content": [
                    {"status": true, "data": [{"dest_id": "-569541", "search_type": "city"}]},
                    {"status": true, "data": {"destinations": [{"id": "ChIJDbdkHFQayUwR7-8fITgxTmU"}]}}
                ]},
                {"role": "assistant", "function_call": [
                    {"name": "Search_Hotels", "arguments": "{\"dest_id\": \"-569541\", \"search_type\": \"city\", \"arrival_date\": \"2024-11-20\"}"}
                ]},
                {"role": "observation", "content": [{"status": true, "data": {"hotels": []}}]},
                {"role": "assistant", "content": "Here are some options."}
            ]
        })
    }

    #[test]
    fn converts_reference_conversation() {
        let s = sample_from_cfb(&doc()).unwrap();
        assert_eq!(s.id, "Cross-7");
        assert!(s.query.starts_with("Hotels in Montreal"));
        let gt = &s.ground_truth;
        assert_eq!(gt.n_turns(), 2);
        assert_eq!(gt.calls[2].depends_on, vec![0]);
        assert_eq!(gt.calls[2].dependency_args, vec!["dest_id".to_string(), "search_type".to_string()]);
        assert_eq!(gt.expected_observations.as_ref().map(Vec::len), Some(3));
    }

    #[test]
    fn extracts_predicted_turns() {
        let turns = turns_from_cfb(&doc()).unwrap();
        assert_eq!(turns.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1]);
        assert_eq!(turns[1][0].args["arrival_date"], "2024-11-20");
        let p = prediction_from_cfb(&doc()).unwrap();
        assert_eq!((p.id.as_str(), p.turns), ("Cross-7", turns));
    }

    #[test]
    fn rejects_empty_conversations() {
        assert!(sample_from_cfb(&json!({"id": 1, "conversations": []})).is_err());
        assert!(sample_from_cfb(&json!({"id": 1})).is_err());
    }
}
