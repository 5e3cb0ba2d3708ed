//! The deterministic response store, its inverted index and collection.

mod expand;
mod index;
mod mock;
mod snapshot;
mod store;
mod upstream;

pub use expand::{expand_chains, expand_workflow, ExpandError, ExpansionStats};
pub use index::{build_index, InvertedIndex};
pub use mock::{MockError, MockUpstream};
pub use snapshot::{load_snapshot, load_snapshot_file, save_snapshot, snapshot_string};
pub use store::{build_cache, CacheBuilder, CacheEntry, CacheStore, EntryId, Inserted};
pub use upstream::{ParamSampler, Upstream, UpstreamError};

use thiserror::Error;

use crate::canon::CacheKey;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("conflicting observations for key {key}: entry {first} vs incoming {second}")]
    Conflict {
        key: CacheKey,
        first: EntryId,
        second: EntryId,
    },
    #[error("refusing to store an error observation for {function}")]
    ErrorObservation { function: String },
    #[error("cache is full")]
    Full,
    #[error("snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },
    #[error("reading snapshot {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
