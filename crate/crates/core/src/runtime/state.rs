//! Per-process protocol state: send logs, receive channels and collective
//! bookkeeping. None of this touches the simulated wire.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::collective::{CollOp, CollectiveLogEntry, Inbox};
use crate::topology::ProcessId;

/// Set of send ids stored as a gap-free prefix `1..=upto` plus sparse extras.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdSet {
    upto: u64,
    extra: BTreeSet<u64>,
}

impl IdSet {
    pub fn contains(&self, id: u64) -> bool {
        (id >= 1 && id <= self.upto) || self.extra.contains(&id)
    }

    /// Returns false if `id` was already present.
    pub fn insert(&mut self, id: u64) -> bool {
        if self.contains(id) || id == 0 {
            return false;
        }
        if id == self.upto + 1 {
            self.upto = id;
            while self.extra.remove(&(self.upto + 1)) {
                self.upto += 1;
            }
        } else {
            self.extra.insert(id);
        }
        true
    }

    /// Largest `k` such that `1..=k` are all present.
    pub fn prefix(&self) -> u64 {
        self.upto
    }

    pub fn len(&self) -> u64 {
        self.upto + self.extra.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn max(&self) -> u64 {
        self.extra.last().copied().unwrap_or(self.upto)
    }

    /// Ids in `1..=g` not in the set.
    pub fn missing_up_to(&self, g: u64) -> Vec<u64> {
        (self.upto + 1..=g)
            .filter(|id| !self.extra.contains(id))
            .collect()
    }

    /// Ids in the set strictly above `g`.
    pub fn above(&self, g: u64) -> Vec<u64> {
        let mut out: Vec<u64> = (g + 1..=self.upto).collect();
        out.extend(self.extra.range(g + 1..));
        out
    }

    /// True when the set is exactly `1..=n`.
    pub fn is_exactly_prefix(&self, n: u64) -> bool {
        self.extra.is_empty() && self.upto == n
    }
}

/// A message sitting at the receiver, either delivered normally or pulled
/// off the wire by a drain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrainedChunk {
    pub source: ProcessId,
    pub send_id: u64,
    pub tag: u32,
    pub payload: Vec<u8>,
    /// Came off the wire during a drain rather than a regular delivery.
    pub drained: bool,
    pub matched: bool,
}

/// Receive side of one logical channel `(src rank -> this rank)`.
///
/// Chunks become matchable strictly in send-id order, which keeps receive
/// order equal to send order even when recovery resends arrive late.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecvChannel {
    /// Every id ever accepted on this channel.
    received: IdSet,
    /// Ids the application has consumed.
    consumed: IdSet,
    /// Accepted but not yet contiguous.
    ahead: BTreeMap<u64, DrainedChunk>,
    /// Contiguous, unmatched, in id order.
    ready: VecDeque<DrainedChunk>,
    /// Ids consumed here whose current sender has not logged them yet; a
    /// later arrival with one of these ids is a duplicate.
    skip: BTreeSet<u64>,
    pub duplicates_dropped: u64,
    pub skipped_arrivals: u64,
    pub double_consumes: u64,
}

impl RecvChannel {
    pub fn received(&self) -> &IdSet {
        &self.received
    }

    pub fn consumed(&self) -> &IdSet {
        &self.consumed
    }

    pub fn skip_set(&self) -> &BTreeSet<u64> {
        &self.skip
    }

    pub fn add_skips<I: IntoIterator<Item = u64>>(&mut self, ids: I) {
        self.skip.extend(ids);
    }

    /// Accepts an arriving chunk. Returns false if it was suppressed.
    pub fn accept(&mut self, chunk: DrainedChunk) -> bool {
        let id = chunk.send_id;
        if self.skip.remove(&id) {
            self.skipped_arrivals += 1;
            return false;
        }
        if !self.received.insert(id) {
            self.duplicates_dropped += 1;
            return false;
        }
        self.ahead.insert(id, chunk);
        let contiguous = self.received.prefix();
        while let Some(entry) = self.ahead.first_entry() {
            if *entry.key() > contiguous {
                break;
            }
            self.ready.push_back(entry.remove());
        }
        true
    }

    /// Takes the oldest ready chunk carrying `tag`.
    pub fn take_match(&mut self, tag: u32) -> Option<DrainedChunk> {
        let pos = self.ready.iter().position(|c| c.tag == tag)?;
        let mut chunk = self.ready.remove(pos)?;
        chunk.matched = true;
        if !self.consumed.insert(chunk.send_id) {
            self.double_consumes += 1;
        }
        Some(chunk)
    }

    /// Unmatched chunks held by this channel.
    pub fn pending(&self) -> impl Iterator<Item = &DrainedChunk> {
        self.ready.iter().chain(self.ahead.values())
    }
}

/// One sender-retained message copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SendLogEntry {
    pub send_id: u64,
    pub dest_logical_rank: usize,
    pub tag: u32,
    pub payload: Vec<u8>,
    pub timestamp: f64,
}

/// Sender-based message log with per-destination gap-free counters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SendLog {
    counters: BTreeMap<usize, u64>,
    entries: BTreeMap<usize, BTreeMap<u64, SendLogEntry>>,
    bytes: usize,
}

impl SendLog {
    pub fn counter(&self, dest: usize) -> u64 {
        self.counters.get(&dest).copied().unwrap_or(0)
    }

    pub fn counters(&self) -> &BTreeMap<usize, u64> {
        &self.counters
    }

    /// Appends a copy under the next id for `dest` and returns that id.
    pub fn append(&mut self, dest: usize, tag: u32, payload: Vec<u8>, timestamp: f64) -> u64 {
        let c = self.counters.entry(dest).or_insert(0);
        *c += 1;
        let send_id = *c;
        self.bytes += payload.len();
        self.entries.entry(dest).or_default().insert(
            send_id,
            SendLogEntry {
                send_id,
                dest_logical_rank: dest,
                tag,
                payload,
                timestamp,
            },
        );
        send_id
    }

    pub fn entry(&self, dest: usize, send_id: u64) -> Option<&SendLogEntry> {
        self.entries.get(&dest)?.get(&send_id)
    }

    pub fn bytes(&self) -> usize {
        self.bytes
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops entries stamped before `t`. Returns freed payload bytes.
    pub fn trim_before(&mut self, t: f64) -> usize {
        let mut freed = 0;
        for per_dest in self.entries.values_mut() {
            per_dest.retain(|_, e| {
                let keep = e.timestamp >= t;
                if !keep {
                    freed += e.payload.len();
                }
                keep
            });
        }
        self.bytes -= freed;
        freed
    }

    fn restore_counters(counters: BTreeMap<usize, u64>) -> Self {
        Self {
            counters,
            ..Self::default()
        }
    }
}

/// Collective bookkeeping for one process.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CollState {
    /// Sequence number of the last collective issued.
    pub issued: u64,
    /// Sequence number of the last collective completed.
    pub completed: u64,
    pub inbox: Inbox,
    pub log: BTreeMap<u64, CollectiveLogEntry>,
    pub active: Option<CollOp>,
    pub duplicates_dropped: u64,
}

impl CollState {
    /// Stores an arriving transfer unless it is stale or a duplicate.
    pub fn accept(&mut self, seq: u64, phase: u8, src: usize, data: Vec<u8>) -> bool {
        if seq <= self.completed || self.inbox.contains_key(&(seq, phase, src)) {
            self.duplicates_dropped += 1;
            return false;
        }
        self.inbox.insert((seq, phase, src), data);
        true
    }

    pub fn log_bytes(&self) -> usize {
        self.log.values().map(CollectiveLogEntry::bytes).sum()
    }

    /// Drops inbox entries for `seq` once it has completed.
    pub fn clear_inbox(&mut self, seq: u64) {
        self.inbox.retain(|(s, _, _), _| *s > seq);
    }
}

/// The part of a process's runtime state that a checkpoint preserves.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeSnapshot {
    pub send_counters: BTreeMap<usize, u64>,
    pub channels: BTreeMap<usize, RecvChannel>,
    pub coll_issued: u64,
    pub coll_completed: u64,
    pub coll_inbox: Inbox,
}

/// Everything the runtime keeps for one live process.
#[derive(Clone, Debug, Default)]
pub struct ProcRuntime {
    pub send_log: SendLog,
    pub channels: BTreeMap<usize, RecvChannel>,
    pub coll: CollState,
}

impl ProcRuntime {
    pub fn channel(&mut self, src: usize) -> &mut RecvChannel {
        self.channels.entry(src).or_default()
    }

    pub fn log_bytes(&self) -> usize {
        self.send_log.bytes() + self.coll.log_bytes()
    }

    pub fn snapshot(&self) -> RuntimeSnapshot {
        RuntimeSnapshot {
            send_counters: self.send_log.counters().clone(),
            channels: self.channels.clone(),
            coll_issued: self.coll.issued,
            coll_completed: self.coll.completed,
            coll_inbox: self.coll.inbox.clone(),
        }
    }

    pub fn restore(snap: RuntimeSnapshot) -> Self {
        Self {
            send_log: SendLog::restore_counters(snap.send_counters),
            channels: snap.channels,
            coll: CollState {
                issued: snap.coll_issued,
                completed: snap.coll_completed,
                inbox: snap.coll_inbox,
                ..CollState::default()
            },
        }
    }

    /// Drops every logged send and completed collective stamped before `t`.
    pub fn trim_logs(&mut self, t: f64) -> usize {
        let mut freed = self.send_log.trim_before(t);
        self.coll.log.retain(|_, e| {
            let keep = e.completed_at.is_none_or(|c| c >= t);
            if !keep {
                freed += e.bytes();
            }
            keep
        });
        freed
    }
}
