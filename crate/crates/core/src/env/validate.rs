use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::ToolCall;
use crate::schema::{FunctionSchema, ValidatorSpec};

/// The eight argument validators, in the order they run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validator {
    Required,
    Type,
    Date,
    Time,
    Latitude,
    Longitude,
    Enum,
    NonEmpty,
}

impl Validator {
    pub const ALL: [Validator; 8] = [
        Validator::Required,
        Validator::Type,
        Validator::Date,
        Validator::Time,
        Validator::Latitude,
        Validator::Longitude,
        Validator::Enum,
        Validator::NonEmpty,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub validator: Validator,
    pub param: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }
}

pub fn is_valid_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
        && NaiveDate::parse_from_str(s, "%Y-%m-%d").is_ok()
}

pub fn is_valid_time(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 5 || b[2] != b':' || ![0, 1, 3, 4].iter().all(|&i| b[i].is_ascii_digit()) {
        return false;
    }
    let hh = (b[0] - b'0') * 10 + (b[1] - b'0');
    let mm = (b[3] - b'0') * 10 + (b[4] - b'0');
    hh < 24 && mm < 60
}

/// Runs every validator over the call and collects all violations. Parameters
/// the schema does not declare are left alone.
pub fn validate_args(schema: &FunctionSchema, call: &ToolCall) -> ValidationResult {
    let mut out = Vec::new();
    let mut push = |validator, param: &str, message: String| {
        out.push(Violation {
            validator,
            param: param.to_string(),
            message,
        })
    };
    let present = |name: &str| call.args.get(name).filter(|v| !v.is_null());

    for v in Validator::ALL {
        for (name, spec) in &schema.params {
            let Some(value) = present(name) else {
                if v == Validator::Required && spec.required {
                    push(v, name, format!("missing required parameter '{name}'"));
                }
                continue;
            };
            let typed = spec.ty.accepts(value);
            match v {
                Validator::Required => {}
                Validator::Type => {
                    if !typed {
                        push(v, name, format!("'{name}' must be of type {}", spec.ty.as_str()));
                    }
                }
                _ if !typed => {}
                Validator::Date => {
                    if let (Some(ValidatorSpec::Date), Some(s)) = (&spec.constraint, value.as_str()) {
                        if !is_valid_date(s) {
                            push(v, name, format!("'{name}' must be a date in YYYY-MM-DD format, got {s:?}"));
                        }
                    }
                }
                Validator::Time => {
                    if let (Some(ValidatorSpec::Time), Some(s)) = (&spec.constraint, value.as_str()) {
                        if !is_valid_time(s) {
                            push(v, name, format!("'{name}' must be a time in HH:MM format, got {s:?}"));
                        }
                    }
                }
                Validator::Latitude => {
                    if let (Some(ValidatorSpec::Latitude), Some(x)) = (&spec.constraint, value.as_f64()) {
                        if !(-90.0..=90.0).contains(&x) {
                            push(v, name, format!("'{name}' must be within [-90, 90], got {x}"));
                        }
                    }
                }
                Validator::Longitude => {
                    if let (Some(ValidatorSpec::Longitude), Some(x)) = (&spec.constraint, value.as_f64()) {
                        if !(-180.0..=180.0).contains(&x) {
                            push(v, name, format!("'{name}' must be within [-180, 180], got {x}"));
                        }
                    }
                }
                Validator::Enum => {
                    if let Some(ValidatorSpec::Enum(allowed)) = &spec.constraint {
                        let ok = match value {
                            Value::String(s) => allowed.iter().any(|a| a == s),
                            _ => false,
                        };
                        if !ok {
                            push(v, name, format!("'{name}' must be one of {allowed:?}"));
                        }
                    }
                }
                Validator::NonEmpty => {
                    if value.as_str().is_some_and(|s| s.trim().is_empty()) {
                        push(v, name, format!("'{name}' must not be empty"));
                    }
                }
            }
        }
    }
    ValidationResult::from_violations(out)
}
