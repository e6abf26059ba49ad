//! The application-facing message-passing API and the protocol state behind
//! it.
//!
//! Point-to-point traffic and collectives are routed through the replica
//! mapping: a computational sender feeds the computational copy of the
//! destination, a replica sender feeds the replica copy, and a computational
//! sender without a replica also covers the destination's replica. Every
//! copy logs every logical send under a per-channel send id, whether or not
//! it physically transmitted it, which is what makes resend and skip
//! reconciliation possible after a repair.

pub mod collective;
mod comm;
pub mod request;
pub mod state;

pub use collective::{
    decode_f64s, decode_u64s, encode_f64s, encode_u64s, CollInput, CollKind, CollOp,
    CollectiveError, CollectiveLogEntry, ReduceOp, Transfer,
};
pub use comm::{Comm, Completion, Request};
pub use request::{RequestHandle, RequestId, RequestKind, SubKind, SubRequest};
pub use state::{
    CollState, DrainedChunk, IdSet, ProcRuntime, RecvChannel, RuntimeSnapshot, SendLog,
    SendLogEntry,
};
