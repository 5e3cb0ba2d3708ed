use std::collections::BTreeMap;
use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::sample::Trace;
use crate::canon::{canonical_eq, canonical_string};

pub const QUERY_SYSTEM_PROMPT: &str = "You are generating natural language queries for a travel booking assistant. You will be given EXACT API parameter values to use (from validated cache). Your task is ONLY to generate a natural language query that matches these exact parameters. DO NOT modify the parameter values.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDraft {
    pub query: String,
    /// The parameters the query encodes, one map per trace step.
    pub chosen_parameters: Vec<BTreeMap<String, Value>>,
    #[serde(default)]
    pub variation_notes: String,
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("generator process: {0}")]
    Process(String),
    #[error("generator output is not a query draft: {0}")]
    Output(String),
}

pub trait Generator: Send + Sync {
    /// Recorded in sample provenance.
    fn id(&self) -> String;
    fn generate(&self, trace: &Trace, prompt: &str) -> Result<QueryDraft, GeneratorError>;
}

fn prompt_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => canonical_string(other),
    }
}

/// The user message asking for a query that states exactly the trace's
/// parameters.
pub fn build_prompt(trace: &Trace) -> String {
    let pattern: Vec<&str> = trace.steps.iter().map(|s| s.call.function.as_str()).collect();
    let mut p = format!("Workflow pattern: {}\nEXACT PARAMETERS TO USE (do not modify):\n", pattern.join(" -> "));
    for (t, step) in trace.steps.iter().enumerate() {
        p.push_str(&format!("Step {t} - {}:\n", step.call.function));
        for (k, v) in trace.query_params(t) {
            p.push_str(&format!("  {k}: '{}'\n", prompt_value(v)));
        }
        if !step.dependency_args.is_empty() {
            p.push_str(&format!(
                "  (Parameters from previous step results) {}\n",
                step.dependency_args.join(", ")
            ));
        }
    }
    p.push_str(concat!(
        "\nTask: Generate a query matching these exact parameters.\n",
        "OUTPUT FORMAT (JSON):\n",
        "{\"query\": \"...\", \"chosen_parameters\": [...],\n",
        " \"variation_notes\": \"Brief scenario description\"}\n",
        "IMPORTANT: Query must match the exact parameters above.",
    ));
    p
}

fn humanize(ident: &str) -> String {
    let mut out = String::new();
    let mut prev_lower = false;
    for c in ident.chars() {
        if c == '_' || c == '-' {
            out.push(' ');
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower {
            out.push(' ');
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        out.extend(c.to_lowercase());
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn join_and(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Deterministic template-stitched English that states every query
/// parameter verbatim and echoes them back exactly.
#[derive(Debug, Clone, Default)]
pub struct FallbackGenerator;

impl Generator for FallbackGenerator {
    fn id(&self) -> String {
        "fallback".into()
    }

    fn generate(&self, trace: &Trace, _prompt: &str) -> Result<QueryDraft, GeneratorError> {
        let n = trace.steps.len();
        let mut sentences = Vec::with_capacity(n);
        let mut chosen = Vec::with_capacity(n);
        for (t, step) in trace.steps.iter().enumerate() {
            let params: BTreeMap<String, Value> =
                trace.query_params(t).map(|(k, v)| (k.clone(), v.clone())).collect();
            let mut parts = Vec::new();
            let mut subject = None;
            for (k, v) in &params {
                if k == "query" {
                    subject = Some(format!("\"{}\"", prompt_value(v)));
                } else {
                    parts.push(format!("{} {}", humanize(k), prompt_value(v)));
                }
            }
            let lead = match (n, t) {
                (1, _) => "Please",
                (_, 0) => "First,",
                (_, t) if t + 1 == n => "Finally,",
                _ => "Then,",
            };
            let mut s = format!("{lead} {}", humanize(&step.call.function));
            if let Some(subject) = subject {
                s.push_str(&format!(" for {subject}"));
            }
            if !parts.is_empty() {
                s.push_str(&format!(" with {}", join_and(&parts)));
            }
            if !step.dependency_args.is_empty() {
                s.push_str(" using the previous result");
            }
            s.push('.');
            sentences.push(s);
            chosen.push(params);
        }
        Ok(QueryDraft {
            query: sentences.join(" "),
            chosen_parameters: chosen,
            variation_notes: format!("{} step workflow", n),
        })
    }
}

/// Runs an external command per trace: a JSON request
/// `{"system", "prompt", "trace"}` on stdin, a [`QueryDraft`] on stdout.
#[derive(Debug, Clone)]
pub struct ExecGenerator {
    pub command: String,
}

impl Generator for ExecGenerator {
    fn id(&self) -> String {
        format!("exec:{}", self.command)
    }

    fn generate(&self, trace: &Trace, prompt: &str) -> Result<QueryDraft, GeneratorError> {
        let request = json!({"system": QUERY_SYSTEM_PROMPT, "prompt": prompt, "trace": trace});
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| GeneratorError::Process(e.to_string()))?;
        if let Some(mut stdin) = child.stdin.take() {
            stdin
                .write_all(request.to_string().as_bytes())
                .map_err(|e| GeneratorError::Process(e.to_string()))?;
        }
        let out = child
            .wait_with_output()
            .map_err(|e| GeneratorError::Process(e.to_string()))?;
        if !out.status.success() {
            return Err(GeneratorError::Process(format!("exited with {}", out.status)));
        }
        serde_json::from_slice(&out.stdout).map_err(|e| GeneratorError::Output(e.to_string()))
    }
}

/// True iff every query parameter of every step is echoed back, canonically
/// equal, at the same step. Propagated parameters are exempt.
pub fn verify_echo_back(draft: &QueryDraft, trace: &Trace) -> bool {
    draft.chosen_parameters.len() == trace.steps.len()
        && (0..trace.steps.len()).all(|t| {
            let echoed = &draft.chosen_parameters[t];
            trace
                .query_params(t)
                .all(|(k, v)| echoed.get(k).is_some_and(|e| canonical_eq(e, v)))
        })
}
