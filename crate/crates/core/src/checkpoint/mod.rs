//! Coordinated checkpointing: scheduling, records and the on-disk store.
//!
//! All processes write a baseline record when an incarnation starts. After
//! that only computational processes write, one incremental record per wave.
//! A wave becomes visible to restarts only when `LATEST` is rewritten to name
//! it, which happens after every record of the wave has landed.

mod policy;
mod record;
mod store;

use thiserror::Error;

pub use policy::{optimal_interval, CheckpointPolicy, Mode, PolicyError};
pub use record::{digest_hex, CheckpointRecord, RecordKind, WorldDigest};
pub use store::{record_path, CheckpointStore, LatestMarker};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("checkpoint store I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint data: {0}")]
    Corrupt(String),
    #[error("wave {incarnation}/{seq} is missing the record for rank {rank}")]
    IncompleteWave {
        incarnation: u64,
        seq: u64,
        rank: usize,
    },
    #[error("checkpoint was written for {found} ranks, restart asked for {wanted}")]
    WidthMismatch { found: usize, wanted: usize },
}
