//! Line-delimited snapshot files: one canonical JSON entry per line, by id.

use std::io::{BufRead, Write};

use serde::Deserialize;

use super::store::{CacheBuilder, CacheStore, EntryId, Inserted};
use super::CacheError;
use crate::model::{Observation, ToolCall};

#[derive(Deserialize)]
struct Line {
    id: EntryId,
    call: ToolCall,
    observation: Observation,
}

pub fn save_snapshot<W: Write>(store: &CacheStore, mut out: W) -> std::io::Result<()> {
    for e in store.entries() {
        out.write_all(e.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn snapshot_string(store: &CacheStore) -> String {
    let mut buf = Vec::new();
    save_snapshot(store, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("snapshot is utf-8")
}

/// Loads a snapshot. Ids must be dense and ascending from 0.
pub fn load_snapshot<R: BufRead>(input: R) -> Result<CacheStore, CacheError> {
    let mut builder = CacheBuilder::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CacheError::Snapshot {
            line: n + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| CacheError::Snapshot {
            line: n + 1,
            message: e.to_string(),
        })?;
        let expected = builder.len() as EntryId;
        if parsed.id != expected {
            return Err(CacheError::Snapshot {
                line: n + 1,
                message: format!("expected id {expected}, found {}", parsed.id),
            });
        }
        match builder.insert(parsed.call, parsed.observation)? {
            Inserted::New(_) => {}
            Inserted::Duplicate(first) => {
                return Err(CacheError::Snapshot {
                    line: n + 1,
                    message: format!("duplicate of entry {first}"),
                })
            }
        }
    }
    Ok(builder.build())
}

pub fn load_snapshot_file(path: &std::path::Path) -> Result<CacheStore, CacheError> {
    let f = std::fs::File::open(path).map_err(|source| CacheError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_snapshot(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::build_cache;
    use proptest::prelude::*;
    use serde_json::json;

    fn entry_strategy() -> impl Strategy<Value = (String, i64, String, f64)> {
        ("[A-Z][a-z_]{0,6}", any::<i64>(), "\\PC{0,8}", -1e6f64..1e6)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn save_load_save_is_identical(rows in prop::collection::vec(entry_strategy(), 0..40)) {
            let pairs: Vec<_> = rows.into_iter().map(|(f, n, s, x)| (
                ToolCall::from_value(f, json!({"n": n, "s": s, "x": x})).unwrap(),
                Observation::ok(json!({"echo": [n, s, x], "nested": {"z": 1, "a": null}})).unwrap(),
            )).collect();
            let store = build_cache(pairs).unwrap();
            let first = snapshot_string(&store);
            let loaded = load_snapshot(first.as_bytes()).unwrap();
            prop_assert_eq!(snapshot_string(&loaded), first);
            prop_assert_eq!(loaded.len(), store.len());
        }
    }

    #[test]
    fn rejects_out_of_order_ids() {
        let line = r#"{"call":{"args":{},"function":"F"},"id":3,"observation":{"is_error":false,"payload":[1]}}"#;
        let err = load_snapshot(line.as_bytes()).unwrap_err();
        assert!(matches!(err, CacheError::Snapshot { line: 1, .. }), "{err}");
    }

    #[test]
    fn rejects_garbage() {
        assert!(load_snapshot("not json\n".as_bytes()).is_err());
    }
}
