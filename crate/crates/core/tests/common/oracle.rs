//! A second, direct implementation of the reward and accuracy formulas. It
//! shares no scoring code with the library and works on plain JSON.

#![allow(dead_code)]

use serde_json::{Map, Value};

pub type Call = (String, Map<String, Value>);

fn kind(v: &Value) -> u8 {
    match v {
        Value::Null => 0,
        Value::Bool(_) => 1,
        Value::Number(_) => 2,
        Value::String(_) => 3,
        Value::Array(_) => 4,
        Value::Object(_) => 5,
    }
}

pub fn first_match(pred: &[Call], gt: &[Call]) -> Vec<Option<usize>> {
    let mut used = vec![false; pred.len()];
    gt.iter()
        .map(|(name, _)| {
            let k = (0..pred.len()).find(|&k| !used[k] && pred[k].0 == *name)?;
            used[k] = true;
            Some(k)
        })
        .collect()
}

pub fn s_struct(pred: &Map<String, Value>, gt: &Map<String, Value>) -> f64 {
    if gt.is_empty() {
        return 1.0;
    }
    let both: Vec<&String> = gt.keys().filter(|k| pred.contains_key(*k)).collect();
    if both.is_empty() {
        return 0.0;
    }
    let typed = both.iter().filter(|k| kind(&pred[**k]) == kind(&gt[**k])).count();
    (both.len() as f64 / gt.len() as f64) * (typed as f64 / both.len() as f64)
}

pub fn r_ast(pred: &Call, gt: Option<&Call>) -> f64 {
    let Some(gt) = gt else { return 0.0 };
    let name = if pred.0 == gt.0 { 1.0 } else { 0.0 };
    let exact = if pred.1 == gt.1 { 1.0 } else { 0.0 };
    name / 3.0 + s_struct(&pred.1, &gt.1) / 3.0 + exact / 3.0
}

/// `obs` is the serialized observation document `{payload, is_error, ...}`.
pub fn r_sem(obs: &Value, response_fields: &[String]) -> f64 {
    if obs["is_error"] != Value::Bool(false) {
        return 0.0;
    }
    let p = &obs["payload"];
    let empty = match p {
        Value::Null => true,
        Value::Array(a) => a.is_empty(),
        Value::Object(m) => m.is_empty(),
        Value::String(s) => s.is_empty(),
        _ => false,
    };
    if empty {
        return 0.0;
    }
    if let Value::Object(m) = p {
        let truthy = |v: &Value| match v {
            Value::Null | Value::Bool(false) => false,
            Value::String(s) => !s.is_empty(),
            Value::Array(a) => !a.is_empty(),
            Value::Object(o) => !o.is_empty(),
            _ => true,
        };
        if m.get("error").is_some_and(truthy) || m.get("errors").is_some_and(truthy) {
            return 0.0;
        }
        if m.get("is_error") == Some(&Value::Bool(true)) || m.get("success") == Some(&Value::Bool(false)) {
            return 0.0;
        }
        match m.get("status") {
            Some(Value::Bool(false)) => return 0.0,
            Some(Value::String(s))
                if ["error", "fail", "failed", "failure"].contains(&s.to_ascii_lowercase().as_str()) =>
            {
                return 0.0
            }
            _ => {}
        }
    }
    let holder = match p {
        Value::Array(a) => &a[0],
        other => other,
    };
    for f in response_fields {
        if holder.get(f).is_none() {
            return 0.0;
        }
    }
    1.0
}

pub struct Scores {
    pub r_atomic: f64,
    pub r_orch: f64,
    pub r_total: f64,
}

pub fn score(
    pred: &[Call],
    sem: &[f64],
    gt: &[Call],
    edges: &[(usize, usize)],
    lambda: f64,
) -> Scores {
    let mu = first_match(pred, gt);
    let mut owner = vec![None; pred.len()];
    for (i, m) in mu.iter().enumerate() {
        if let Some(k) = m {
            owner[*k] = Some(i);
        }
    }
    let r_atomic = if pred.is_empty() {
        0.0
    } else {
        let mut total = 0.0;
        for k in 0..pred.len() {
            let ast = r_ast(&pred[k], owner[k].map(|i| &gt[i]));
            total += (ast + sem[k]) / 2.0;
        }
        total / pred.len() as f64
    };
    let mut orch = 0.0;
    for i in 0..gt.len() {
        let Some(mi) = mu[i] else { continue };
        let ok = edges
            .iter()
            .filter(|(_, t)| *t == i)
            .all(|(j, _)| matches!(mu[*j], Some(mj) if mj < mi));
        if ok {
            orch += 1.0;
        }
    }
    let r_orch = orch / gt.len() as f64;
    Scores {
        r_atomic,
        r_orch,
        r_total: lambda * r_atomic + (1.0 - lambda) * r_orch,
    }
}

/// Consecutive successful turns from the start, positional.
pub fn turns_succeeded(pred_turns: &[Vec<Call>], gt_turns: &[Vec<Call>]) -> usize {
    let mut n = 0;
    for (t, want) in gt_turns.iter().enumerate() {
        let mut pool: Vec<&Call> = pred_turns.get(t).map(|v| v.iter().collect()).unwrap_or_default();
        let mut ok = true;
        for w in want {
            match pool.iter().position(|p| *p == w) {
                Some(i) => {
                    pool.remove(i);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        n += 1;
    }
    n
}
