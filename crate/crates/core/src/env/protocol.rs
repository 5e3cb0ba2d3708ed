//! The `<tool_call>` / `<tool_response>` text protocol.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::canon::spaced_string;
use crate::model::{Observation, ToolCall};

const CALL_OPEN: &str = "<tool_call>";
const CALL_CLOSE: &str = "</tool_call>";

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("tool_call block {block}: {reason}")]
pub struct ParseError {
    pub block: usize,
    pub reason: String,
}

/// Extracts every `<tool_call>` block in document order. No blocks is a
/// valid, empty result.
pub fn parse_tool_calls(text: &str) -> Result<Vec<ToolCall>, ParseError> {
    let mut calls = Vec::new();
    let mut rest = text;
    let mut block = 0;
    while let Some(start) = rest.find(CALL_OPEN) {
        let after = &rest[start + CALL_OPEN.len()..];
        let err = |reason: String| ParseError { block, reason };
        let end = after
            .find(CALL_CLOSE)
            .ok_or_else(|| err("missing </tool_call>".into()))?;
        calls.push(parse_body(after[..end].trim()).map_err(err)?);
        rest = &after[end + CALL_CLOSE.len()..];
        block += 1;
    }
    Ok(calls)
}

fn parse_body(body: &str) -> Result<ToolCall, String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))?;
    call_from_json(&v)
}

/// Reads a `{"name", "arguments"}` document; `arguments` may be an object or
/// a string holding one.
pub fn call_from_json(v: &Value) -> Result<ToolCall, String> {
    let obj = v.as_object().ok_or("body must be a JSON object")?;
    let name = match obj.get("name") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => return Err("\"name\" must be a non-empty string".into()),
        None => return Err("missing \"name\"".into()),
    };
    let args = match obj.get("arguments") {
        Some(Value::Object(m)) => m.clone().into_iter().collect(),
        // Some chat templates encode arguments as a JSON string.
        Some(Value::String(s)) => match serde_json::from_str(s) {
            Ok(Value::Object(m)) => m.into_iter().collect(),
            _ => return Err("\"arguments\" string does not hold a JSON object".into()),
        },
        Some(_) => return Err("\"arguments\" must be an object".into()),
        None => return Err("missing \"arguments\"".into()),
    };
    ToolCall::new(name, args).map_err(|e| e.to_string())
}

pub fn render_tool_call(call: &ToolCall) -> String {
    format!(
        "{CALL_OPEN}\n{{\"name\": {}, \"arguments\": {}}}\n{CALL_CLOSE}",
        spaced_string(&Value::String(call.function.clone())),
        spaced_string(&call.args_value()),
    )
}

/// Renders calls as consecutive blocks; the inverse of [`parse_tool_calls`].
pub fn render_tool_calls(calls: &[ToolCall]) -> String {
    calls
        .iter()
        .map(render_tool_call)
        .collect::<Vec<_>>()
        .join("\n")
}

fn response_block(result: &Value) -> String {
    format!(
        "<tool_response>\n{}\n</tool_response>",
        spaced_string(&json!({ "result": result }))
    )
}

pub fn render_tool_response(obs: &Observation) -> String {
    response_block(obs.payload())
}

pub fn render_parse_error(err: &ParseError) -> String {
    response_block(&json!({
        "status": false,
        "code": "PARSE_ERROR",
        "message": err.reason,
        "details": {"block": err.block},
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn parses_the_prompt_format() {
        let text = "Let me look that up.\n<tool_call>\n{\"name\": \"Search_Car_Location\",\n \"arguments\": {\"query\": \"San Diego Marriott La Jolla\"}}\n</tool_call>";
        let calls = parse_tool_calls(text).unwrap();
        assert_eq!(calls.len(), 1);
        assert_eq!(calls[0].function, "Search_Car_Location");
        assert_eq!(calls[0].args["query"], "San Diego Marriott La Jolla");
    }

    #[test]
    fn no_blocks_is_empty() {
        assert!(parse_tool_calls("Here is your summary.").unwrap().is_empty());
    }

    #[test]
    fn truncated_body_fails_at_block_zero() {
        let err = parse_tool_calls("<tool_call>\n{\"name\": \"F\", \"argum").unwrap_err();
        assert_eq!(err.block, 0);
        let err = parse_tool_calls("<tool_call>{\"name\": \"F\", \"argum</tool_call>").unwrap_err();
        assert_eq!(err.block, 0);
    }

    #[test]
    fn error_reports_the_failing_block() {
        let text = "<tool_call>{\"name\": \"A\", \"arguments\": {}}</tool_call><tool_call>[1]</tool_call>";
        assert_eq!(parse_tool_calls(text).unwrap_err().block, 1);
    }

    #[test]
    fn string_arguments_accepted() {
        let text = r#"<tool_call>{"name": "A", "arguments": "{\"x\": 1}"}</tool_call>"#;
        assert_eq!(parse_tool_calls(text).unwrap()[0].args["x"], 1);
    }

    #[test]
    fn response_wraps_payload_in_result() {
        let obs = Observation::ok(json!([{"coordinates": {"latitude": 32.87, "longitude": -117.22}}])).unwrap();
        assert_eq!(
            render_tool_response(&obs),
            "<tool_response>\n{\"result\": [{\"coordinates\": {\"latitude\": 32.87, \"longitude\": -117.22}}]}\n</tool_response>"
        );
    }

    fn value() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::from),
            any::<i64>().prop_map(Value::from),
            (-1e9f64..1e9).prop_map(Value::from),
            "\\PC{0,12}".prop_map(Value::from),
        ];
        leaf.prop_recursive(3, 16, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Value::from),
                prop::collection::btree_map("[a-z]{1,5}", inner, 0..4)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        })
    }

    fn call() -> impl Strategy<Value = ToolCall> {
        ("[A-Za-z_]{1,12}", prop::collection::btree_map("[a-z_]{1,8}", value(), 0..5))
            .prop_map(|(f, a): (String, BTreeMap<String, Value>)| ToolCall::new(f, a).unwrap())
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(calls in prop::collection::vec(call(), 0..4)) {
            let parsed = parse_tool_calls(&render_tool_calls(&calls)).unwrap();
            prop_assert_eq!(parsed.len(), calls.len());
            for (p, c) in parsed.iter().zip(&calls) {
                prop_assert!(p.matches(c));
            }
        }

        #[test]
        fn parser_never_panics(s in "\\PC{0,200}") {
            let _ = parse_tool_calls(&s);
            let _ = parse_tool_calls(&format!("<tool_call>{s}</tool_call>"));
        }
    }
}
