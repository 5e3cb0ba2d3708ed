//! Canonical text form for argument values and the cache key derived from it.
//!
//! Canonical text is compact JSON with object keys sorted by byte order,
//! integers printed without leading zeros and floats in their shortest
//! round-trip decimal form. Everything that compares parameter values for
//! equality (cache keys, index postings, exact-match scoring) goes through
//! this one encoding.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::model::ToolCall;

/// Fixed-width digest identifying a `(function, args)` pair.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey([u8; 32]);

impl CacheKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        let arr: [u8; 32] = bytes.try_into().ok()?;
        Some(Self(arr))
    }
}

impl fmt::Debug for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CacheKey({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for CacheKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for CacheKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CacheKey::from_hex(&s).ok_or_else(|| serde::de::Error::custom("invalid cache key"))
    }
}

/// Hash of the canonical form of a call. Total and order-independent over
/// argument keys; function names are compared case-sensitively.
pub fn canonical_key(call: &ToolCall) -> CacheKey {
    let mut hasher = Sha256::new();
    hasher.update((call.function.len() as u64).to_le_bytes());
    hasher.update(call.function.as_bytes());
    let mut buf = String::with_capacity(64);
    buf.push('{');
    for (i, (k, v)) in call.args.iter().enumerate() {
        if i > 0 {
            buf.push(',');
        }
        write_string(&mut buf, k);
        buf.push(':');
        write_value(&mut buf, v, Style::Compact);
    }
    buf.push('}');
    hasher.update(buf.as_bytes());
    CacheKey(hasher.finalize().into())
}

/// Canonical compact text of a value.
pub fn canonical_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, Style::Compact);
    out
}

/// Canonical text with `", "` and `": "` separators, the layout used on the
/// tool-call text protocol.
pub fn spaced_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, Style::Spaced);
    out
}

/// Canonical equality: two values are equal iff their canonical text is.
pub fn canonical_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) => true,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::String(x), Value::String(y)) => x == y,
        (Value::Number(_), Value::Number(_)) => canonical_string(a) == canonical_string(b),
        (Value::Array(x), Value::Array(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| canonical_eq(p, q))
        }
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len()
                && x.iter()
                    .all(|(k, v)| y.get(k).is_some_and(|w| canonical_eq(v, w)))
        }
        _ => false,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Style {
    Compact,
    Spaced,
}

fn write_value(out: &mut String, v: &Value, style: Style) {
    let (item_sep, kv_sep) = match style {
        Style::Compact => (",", ":"),
        Style::Spaced => (", ", ": "),
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        // serde_json prints integers plainly and floats via ryu (shortest round-trip)
        Value::Number(n) => out.push_str(&n.to_string()),
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(item_sep);
                }
                write_value(out, item, style);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_unstable();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push_str(item_sep);
                }
                write_string(out, k);
                out.push_str(kv_sep);
                write_value(out, &map[k], style);
            }
            out.push('}');
        }
    }
}

fn write_string(out: &mut String, s: &str) {
    // serde_json escaping of a plain string cannot fail
    out.push_str(&serde_json::to_string(s).expect("string serialization"));
}

/// Coarse JSON type of a value, used by type checks in scoring and
/// validation. Integers and floats share the `Number` kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Null,
    Bool,
    Number,
    String,
    List,
    Map,
}

impl ValueKind {
    pub fn of(v: &Value) -> Self {
        match v {
            Value::Null => ValueKind::Null,
            Value::Bool(_) => ValueKind::Bool,
            Value::Number(_) => ValueKind::Number,
            Value::String(_) => ValueKind::String,
            Value::Array(_) => ValueKind::List,
            Value::Object(_) => ValueKind::Map,
        }
    }
}
