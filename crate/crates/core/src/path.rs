//! Field-path expressions used to pull values out of observations.
//!
//! Grammar:
//!
//! ```text
//! path  := seg ( '.' field | index )*
//! seg   := field | index
//! field := [A-Za-z_][A-Za-z0-9_]*
//! index := '[' digits ']'
//! ```
//!
//! A leading index addresses a list-rooted payload, e.g. `[0].coordinates.latitude`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::Observation;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Segment {
    Field(String),
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathExpr {
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("path syntax error at byte {offset}: {reason}")]
pub struct PathSyntaxError {
    pub offset: usize,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("path not found: segment {segment} does not resolve")]
    PathNotFound { segment: usize },
    #[error("cannot extract from an error observation")]
    ErrorObservation,
}

impl PathExpr {
    pub fn new(segments: Vec<Segment>) -> Option<Self> {
        let valid = !segments.is_empty()
            && segments.iter().all(|s| match s {
                Segment::Field(name) => is_field_name(name),
                Segment::Index(_) => true,
            });
        valid.then_some(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Canonical string form; `parse_path(render(p)) == p`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, seg) in self.segments.iter().enumerate() {
            match seg {
                Segment::Field(name) => {
                    if i > 0 {
                        out.push('.');
                    }
                    out.push_str(name);
                }
                Segment::Index(n) => {
                    out.push('[');
                    out.push_str(&n.to_string());
                    out.push(']');
                }
            }
        }
        out
    }

    /// Navigates a successful observation's payload.
    pub fn extract<'a>(&self, obs: &'a Observation) -> Result<&'a Value, ExtractError> {
        if obs.is_error() {
            return Err(ExtractError::ErrorObservation);
        }
        self.extract_value(obs.payload())
    }

    pub fn extract_value<'a>(&self, root: &'a Value) -> Result<&'a Value, ExtractError> {
        let mut node = root;
        for (i, seg) in self.segments.iter().enumerate() {
            let next = match (seg, node) {
                (Segment::Field(name), Value::Object(map)) => map.get(name),
                (Segment::Index(n), Value::Array(items)) => items.get(*n),
                _ => None,
            };
            node = next.ok_or(ExtractError::PathNotFound { segment: i })?;
        }
        Ok(node)
    }
}

fn is_field_name(s: &str) -> bool {
    let mut bytes = s.bytes();
    matches!(bytes.next(), Some(b) if b.is_ascii_alphabetic() || b == b'_')
        && bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

pub fn parse_path(src: &str) -> Result<PathExpr, PathSyntaxError> {
    let bytes = src.as_bytes();
    let err = |offset, reason| Err(PathSyntaxError { offset, reason });
    if bytes.is_empty() {
        return err(0, "empty path");
    }
    let mut segments = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let b = bytes[pos];
        if b == b'[' {
            let start = pos + 1;
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            if end == start {
                return err(start, "expected digits");
            }
            if end >= bytes.len() || bytes[end] != b']' {
                return err(end, "expected ']'");
            }
            let n: usize = match src[start..end].parse() {
                Ok(n) => n,
                Err(_) => return err(start, "index out of range"),
            };
            segments.push(Segment::Index(n));
            pos = end + 1;
        } else {
            if !segments.is_empty() {
                if b != b'.' {
                    return err(pos, "expected '.' or '['");
                }
                pos += 1;
            }
            let start = pos;
            match bytes.get(pos) {
                Some(c) if c.is_ascii_alphabetic() || *c == b'_' => pos += 1,
                _ => return err(start, "expected field name"),
            }
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_')
            {
                pos += 1;
            }
            segments.push(Segment::Field(src[start..pos].to_string()));
        }
    }
    Ok(PathExpr { segments })
}

impl FromStr for PathExpr {
    type Err = PathSyntaxError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_path(s)
    }
}

impl fmt::Display for PathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Serialize for PathExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for PathExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_path(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn f(s: &str) -> Segment {
        Segment::Field(s.into())
    }

    #[test]
    fn parses_list_rooted_path() {
        let p = parse_path("[0].coordinates.latitude").unwrap();
        assert_eq!(p.segments(), &[Segment::Index(0), f("coordinates"), f("latitude")]);
    }

    #[test]
    fn parses_map_rooted_path() {
        let p = parse_path("search_context.searchKey").unwrap();
        assert_eq!(p.segments(), &[f("search_context"), f("searchKey")]);
        let p = parse_path("search_results[0].vehicle_id").unwrap();
        assert_eq!(
            p.segments(),
            &[f("search_results"), Segment::Index(0), f("vehicle_id")]
        );
    }

    #[test]
    fn syntax_errors_report_offsets() {
        let cases = [
            ("", 0),
            ("a..b", 2),
            ("[x]", 1),
            ("[1", 2),
            ("a.1b", 2),
            ("a b", 1),
            ("a.", 2),
            ("[]", 1),
            ("a[0]b", 4),
            (".a", 0),
        ];
        for (src, offset) in cases {
            let e = parse_path(src).unwrap_err();
            assert_eq!(e.offset, offset, "{src:?}: {e}");
        }
    }

    #[test]
    fn extracts_from_car_rental_observation() {
        let o2 = Observation::ok(json!({
            "search_results": [{"vehicle_id": "637318066", "price": 52.1}],
            "search_context": {"searchKey": "eyJhYmMiOjF9"}
        }))
        .unwrap();
        let p = parse_path("search_results[0].vehicle_id").unwrap();
        assert_eq!(p.extract(&o2).unwrap(), &json!("637318066"));
    }

    #[test]
    fn extract_single_field_and_bounds() {
        let o = Observation::ok(json!({"x": 7})).unwrap();
        assert_eq!(parse_path("x").unwrap().extract(&o).unwrap(), &json!(7));
        let l = Observation::ok(json!([1, 2])).unwrap();
        assert_eq!(
            parse_path("[3]").unwrap().extract(&l),
            Err(ExtractError::PathNotFound { segment: 0 })
        );
        // shape mismatches
        assert_eq!(
            parse_path("x[0]").unwrap().extract(&o),
            Err(ExtractError::PathNotFound { segment: 1 })
        );
        assert_eq!(
            parse_path("[0].a").unwrap().extract(&o),
            Err(ExtractError::PathNotFound { segment: 0 })
        );
    }

    #[test]
    fn extract_on_error_observation_is_rejected() {
        let e = Observation::error(crate::model::ErrorCode::CacheMiss, "miss", Value::Null);
        assert_eq!(
            parse_path("status").unwrap().extract(&e),
            Err(ExtractError::ErrorObservation)
        );
    }

    fn segment() -> impl Strategy<Value = Segment> {
        prop_oneof![
            "[A-Za-z_][A-Za-z0-9_]{0,8}".prop_map(Segment::Field),
            (0usize..10_000).prop_map(Segment::Index),
        ]
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(segs in prop::collection::vec(segment(), 1..6)) {
            let p = PathExpr::new(segs).unwrap();
            prop_assert_eq!(parse_path(&p.render()).unwrap(), p);
        }

        #[test]
        fn parser_never_panics(src in "\\PC{0,16}") {
            let _ = parse_path(&src);
        }

        #[test]
        fn extraction_is_pure(n in 0usize..4) {
            let o = Observation::ok(json!([{"a": 1}, {"a": 2}, {"a": [3]}])).unwrap();
            let before = o.clone();
            let p = PathExpr::new(vec![Segment::Index(n), Segment::Field("a".into())]).unwrap();
            let first = p.extract(&o).cloned();
            prop_assert_eq!(p.extract(&o).cloned(), first);
            prop_assert_eq!(o, before);
        }
    }
}
