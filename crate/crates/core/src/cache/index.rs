//! Three-level inverted index `(function, parameter, value) -> entry ids`.

use std::collections::HashMap;

use serde_json::Value;

use super::store::{CacheStore, EntryId};
use crate::canon::canonical_string;

#[derive(Debug, Clone, Default)]
pub struct InvertedIndex {
    postings: HashMap<String, HashMap<String, HashMap<String, Vec<EntryId>>>>,
    all: HashMap<String, Vec<EntryId>>,
}

/// Indexes every `(param, value)` pair of every cached call. Values are keyed
/// by their canonical text, so lookups use the same equality as cache keys.
pub fn build_index(store: &CacheStore) -> InvertedIndex {
    let mut idx = InvertedIndex::default();
    for e in store.entries() {
        idx.all.entry(e.call.function.clone()).or_default().push(e.id);
        let by_param = idx.postings.entry(e.call.function.clone()).or_default();
        for (param, value) in &e.call.args {
            by_param
                .entry(param.clone())
                .or_default()
                .entry(canonical_string(value))
                .or_default()
                .push(e.id);
        }
    }
    // entries are visited in id order, so every list is already sorted
    idx
}

impl InvertedIndex {
    pub fn posting(&self, function: &str, param: &str, canonical_value: &str) -> &[EntryId] {
        self.postings
            .get(function)
            .and_then(|m| m.get(param))
            .and_then(|m| m.get(canonical_value))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn all_for(&self, function: &str) -> &[EntryId] {
        self.all.get(function).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Total number of posting lists.
    pub fn posting_count(&self) -> usize {
        self.postings
            .values()
            .flat_map(|m| m.values())
            .map(|m| m.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    /// Entries of `function` whose call carries every `(param, value)`
    /// constraint, ascending. No constraints selects every entry of the function.
    pub fn query(&self, function: &str, constraints: &[(&str, &Value)]) -> Vec<EntryId> {
        let canon: Vec<(&str, String)> = constraints
            .iter()
            .map(|(p, v)| (*p, canonical_string(v)))
            .collect();
        self.query_canonical(
            function,
            &canon.iter().map(|(p, v)| (*p, v.as_str())).collect::<Vec<_>>(),
        )
    }

    pub fn query_canonical(&self, function: &str, constraints: &[(&str, &str)]) -> Vec<EntryId> {
        if constraints.is_empty() {
            return self.all_for(function).to_vec();
        }
        let mut lists: Vec<&[EntryId]> = constraints
            .iter()
            .map(|(p, v)| self.posting(function, p, v))
            .collect();
        lists.sort_by_key(|l| l.len());
        let mut acc: Vec<EntryId> = lists[0].to_vec();
        for other in &lists[1..] {
            if acc.is_empty() {
                break;
            }
            acc = intersect(&acc, other);
        }
        acc
    }
}

/// Intersection of two ascending lists; gallops through the longer one.
fn intersect(small: &[EntryId], large: &[EntryId]) -> Vec<EntryId> {
    let mut out = Vec::with_capacity(small.len().min(large.len()));
    let mut rest = large;
    for &x in small {
        match rest.binary_search(&x) {
            Ok(pos) => {
                out.push(x);
                rest = &rest[pos + 1..];
            }
            Err(pos) => rest = &rest[pos..],
        }
        if rest.is_empty() {
            break;
        }
    }
    out
}
