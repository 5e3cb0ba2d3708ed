use std::collections::{BTreeMap, HashMap};

use serde_json::json;

use super::CacheError;
use crate::canon::{canonical_key, canonical_string, CacheKey};
use crate::model::{Observation, ToolCall};

pub type EntryId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub id: EntryId,
    pub key: CacheKey,
    pub call: ToolCall,
    pub observation: Observation,
}

impl CacheEntry {
    /// One snapshot line: `{"call":…,"id":…,"observation":…}` in canonical text.
    pub fn to_line(&self) -> String {
        canonical_string(&json!({
            "id": self.id,
            "call": self.call,
            "observation": self.observation,
        }))
    }
}

/// Frozen response cache. Lookups are hash-map probes on the canonical key.
#[derive(Debug, Clone, Default)]
pub struct CacheStore {
    entries: Vec<CacheEntry>,
    by_key: HashMap<CacheKey, EntryId>,
    by_function: BTreeMap<String, Vec<EntryId>>,
}

impl CacheStore {
    pub fn lookup(&self, key: &CacheKey) -> Option<&Observation> {
        self.by_key
            .get(key)
            .map(|&id| &self.entries[id as usize].observation)
    }

    pub fn lookup_call(&self, call: &ToolCall) -> Option<&Observation> {
        self.lookup(&canonical_key(call))
    }

    pub fn entry(&self, id: EntryId) -> Option<&CacheEntry> {
        self.entries.get(id as usize)
    }

    pub fn entries(&self) -> &[CacheEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ids of every entry for a function, ascending.
    pub fn ids_for_function(&self, function: &str) -> &[EntryId] {
        self.by_function
            .get(function)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn functions(&self) -> impl Iterator<Item = &str> {
        self.by_function.keys().map(String::as_str)
    }
}

/// Outcome of a single insert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inserted {
    New(EntryId),
    Duplicate(EntryId),
}

/// Single-writer build phase of a [`CacheStore`].
#[derive(Debug, Default)]
pub struct CacheBuilder {
    store: CacheStore,
}

impl CacheBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reopens a frozen store for extension; ids of existing entries are kept.
    pub fn from_store(store: CacheStore) -> Self {
        Self { store }
    }

    pub fn insert(&mut self, call: ToolCall, observation: Observation) -> Result<Inserted, CacheError> {
        if observation.is_error() {
            return Err(CacheError::ErrorObservation {
                function: call.function,
            });
        }
        let key = canonical_key(&call);
        let store = &mut self.store;
        if let Some(&first) = store.by_key.get(&key) {
            let existing = &store.entries[first as usize].observation;
            return if canonical_string(existing.payload()) == canonical_string(observation.payload()) {
                Ok(Inserted::Duplicate(first))
            } else {
                Err(CacheError::Conflict {
                    key,
                    first,
                    second: store.entries.len() as EntryId,
                })
            };
        }
        let id = EntryId::try_from(store.entries.len()).map_err(|_| CacheError::Full)?;
        store.by_key.insert(key, id);
        store
            .by_function
            .entry(call.function.clone())
            .or_default()
            .push(id);
        store.entries.push(CacheEntry {
            id,
            key,
            call,
            observation,
        });
        Ok(Inserted::New(id))
    }

    pub fn contains(&self, call: &ToolCall) -> bool {
        self.store.by_key.contains_key(&canonical_key(call))
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn build(self) -> CacheStore {
        self.store
    }
}

/// Builds a store from `(call, observation)` pairs. Identical duplicates
/// collapse into one entry; same key with a different payload is a conflict.
pub fn build_cache<I>(entries: I) -> Result<CacheStore, CacheError>
where
    I: IntoIterator<Item = (ToolCall, Observation)>,
{
    let mut builder = CacheBuilder::new();
    for (call, obs) in entries {
        builder.insert(call, obs)?;
    }
    Ok(builder.build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn pair(q: &str, payload: serde_json::Value) -> (ToolCall, Observation) {
        (
            ToolCall::from_value("Search_Car_Location", json!({"query": q})).unwrap(),
            Observation::ok(payload).unwrap(),
        )
    }

    #[test]
    fn identical_pairs_dedup() {
        let p = pair("a", json!([{"x": 1}]));
        let store = build_cache(vec![p.clone(), p]).unwrap();
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn conflicting_payloads_rejected() {
        let err = build_cache(vec![pair("a", json!([1])), pair("a", json!([2]))]).unwrap_err();
        match err {
            CacheError::Conflict { first, second, .. } => assert_eq!((first, second), (0, 1)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn error_observations_rejected() {
        let call = ToolCall::from_value("F", json!({})).unwrap();
        let obs = Observation::error(crate::model::ErrorCode::CacheMiss, "x", serde_json::Value::Null);
        assert!(matches!(
            build_cache(vec![(call, obs)]),
            Err(CacheError::ErrorObservation { .. })
        ));
    }

    #[test]
    fn lookup_present_and_absent() {
        let store = build_cache(vec![
            pair(
                "San Diego Marriott La Jolla",
                json!([{"coordinates": {"latitude": 32.87, "longitude": -117.22}}]),
            ),
        ])
        .unwrap();
        let call =
            ToolCall::from_value("Search_Car_Location", json!({"query": "San Diego Marriott La Jolla"}))
                .unwrap();
        let got = store.lookup_call(&call).unwrap();
        assert_eq!(got.payload()[0]["coordinates"]["latitude"], json!(32.87));
        assert_eq!(got.payload()[0]["coordinates"]["longitude"], json!(-117.22));
        let unseen = ToolCall::from_value("Search_Car_Location", json!({"query": "nowhere"})).unwrap();
        assert!(store.lookup_call(&unseen).is_none());
    }

    #[test]
    fn repeated_lookups_are_identical() {
        let store = build_cache(vec![pair("a", json!({"v": [1, 2, 3]}))]).unwrap();
        let key = store.entries()[0].key;
        let first = canonical_string(store.lookup(&key).unwrap().payload());
        for _ in 0..1_000_000 {
            let o = store.lookup(&key).unwrap();
            assert_eq!(o.payload()["v"][2], 3);
        }
        assert_eq!(canonical_string(store.lookup(&key).unwrap().payload()), first);
    }
}
