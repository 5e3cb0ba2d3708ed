//! Function schemas and the registry of available tools.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::canon::ValueKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    String,
    Integer,
    Number,
    Boolean,
    Array,
    Object,
}

impl ParamType {
    pub fn accepts(&self, v: &Value) -> bool {
        match self {
            ParamType::String => v.is_string(),
            ParamType::Integer => v.is_i64() || v.is_u64(),
            ParamType::Number => v.is_number(),
            ParamType::Boolean => v.is_boolean(),
            ParamType::Array => v.is_array(),
            ParamType::Object => v.is_object(),
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            ParamType::String => ValueKind::String,
            ParamType::Integer | ParamType::Number => ValueKind::Number,
            ParamType::Boolean => ValueKind::Bool,
            ParamType::Array => ValueKind::List,
            ParamType::Object => ValueKind::Map,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ParamType::String => "string",
            ParamType::Integer => "integer",
            ParamType::Number => "number",
            ParamType::Boolean => "boolean",
            ParamType::Array => "array",
            ParamType::Object => "object",
        }
    }
}

/// Value constraint attached to a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidatorSpec {
    /// `YYYY-MM-DD`, calendar-valid.
    Date,
    /// `HH:MM`, 24-hour clock.
    Time,
    Latitude,
    Longitude,
    Enum(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    #[serde(rename = "type")]
    pub ty: ParamType,
    #[serde(default)]
    pub required: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ValidatorSpec>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSchema {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamSpec>,
    /// Top-level keys a successful map-rooted response is expected to carry.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub response_fields: Vec<String>,
}

impl FunctionSchema {
    /// Tool description in the function-calling layout chat templates consume.
    pub fn to_tool_json(&self) -> Value {
        let mut properties = serde_json::Map::new();
        for (name, spec) in &self.params {
            let mut p = json!({"type": spec.ty.as_str()});
            if !spec.description.is_empty() {
                p["description"] = json!(spec.description);
            }
            match &spec.constraint {
                Some(ValidatorSpec::Enum(values)) => p["enum"] = json!(values),
                Some(ValidatorSpec::Date) => p["format"] = json!("YYYY-MM-DD"),
                Some(ValidatorSpec::Time) => p["format"] = json!("HH:MM"),
                Some(ValidatorSpec::Latitude) => {
                    p["minimum"] = json!(-90);
                    p["maximum"] = json!(90);
                }
                Some(ValidatorSpec::Longitude) => {
                    p["minimum"] = json!(-180);
                    p["maximum"] = json!(180);
                }
                None => {}
            }
            properties.insert(name.clone(), p);
        }
        let required: Vec<&String> = self
            .params
            .iter()
            .filter(|(_, s)| s.required)
            .map(|(n, _)| n)
            .collect();
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": properties,
                    "required": required,
                }
            }
        })
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("duplicate function name {0:?}")]
    Duplicate(String),
    #[error("registry document: {0}")]
    Parse(#[from] serde_json::Error),
}

/// The tool set available to the agent, keyed by exact function name.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    functions: BTreeMap<String, FunctionSchema>,
}

impl Registry {
    pub fn new(schemas: Vec<FunctionSchema>) -> Result<Self, RegistryError> {
        let mut functions = BTreeMap::new();
        for s in schemas {
            if functions.contains_key(&s.name) {
                return Err(RegistryError::Duplicate(s.name));
            }
            functions.insert(s.name.clone(), s);
        }
        Ok(Self { functions })
    }

    /// Parses a registry file: a JSON list of function schemas.
    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        Self::new(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let list: Vec<&FunctionSchema> = self.functions.values().collect();
        serde_json::to_string_pretty(&list).expect("registry serialization")
    }

    pub fn get(&self, name: &str) -> Option<&FunctionSchema> {
        self.functions.get(name)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FunctionSchema> {
        self.functions.values()
    }

    pub fn tools_json(&self) -> Vec<Value> {
        self.iter().map(FunctionSchema::to_tool_json).collect()
    }
}
