//! The fault-intolerant native transport and the layer that hides failures
//! from it.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::topology::ProcessId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EnvId(pub u64);

/// Wire payloads. Point-to-point messages are keyed by their per-channel
/// send id; collective transfers by `(collective seq, phase, source rank)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    P2p {
        src_rank: usize,
        dst_rank: usize,
        send_id: u64,
        tag: u32,
        data: Vec<u8>,
    },
    Coll {
        seq: u64,
        phase: u8,
        src_rank: usize,
        data: Vec<u8>,
    },
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::P2p { data, .. } | Payload::Coll { data, .. } => data.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub id: EnvId,
    pub src: ProcessId,
    pub dst: ProcessId,
    pub epoch: u64,
    pub payload: Payload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeerStatus {
    Up,
    Down,
}

/// Call-site audit. Only non-blocking primitives are used, except for
/// receives that a successful probe has already guaranteed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportCounters {
    pub nonblocking_calls: u64,
    pub blocking_calls: u64,
    pub probe_guaranteed_recvs: u64,
    pub aborts: u64,
}

/// Reliable, per-pair FIFO delivery between live processes.
#[derive(Default)]
pub struct NativeTransport {
    in_flight: BTreeMap<ProcessId, VecDeque<EnvId>>,
    envelopes: BTreeMap<EnvId, Envelope>,
    peer_status: BTreeMap<ProcessId, PeerStatus>,
    last_arrival: BTreeMap<(ProcessId, ProcessId), f64>,
    next_id: u64,
    counters: TransportCounters,
}

impl NativeTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, uid: ProcessId) {
        self.peer_status.insert(uid, PeerStatus::Up);
    }

    pub fn mark_down(&mut self, uid: ProcessId) {
        self.peer_status.insert(uid, PeerStatus::Down);
    }

    pub fn is_up(&self, uid: ProcessId) -> bool {
        self.peer_status.get(&uid) == Some(&PeerStatus::Up)
    }

    pub fn counters(&self) -> TransportCounters {
        self.counters
    }

    pub fn count_test(&mut self) {
        self.counters.nonblocking_calls += 1;
    }

    pub fn count_abort(&mut self) {
        self.counters.aborts += 1;
    }

    /// Non-blocking send. Returns the envelope id and its arrival time, which
    /// never precedes an earlier envelope on the same `(src, dst)` pair.
    pub fn post(
        &mut self,
        src: ProcessId,
        dst: ProcessId,
        epoch: u64,
        payload: Payload,
        now: f64,
        latency: f64,
    ) -> (EnvId, f64) {
        self.counters.nonblocking_calls += 1;
        let id = EnvId(self.next_id);
        self.next_id += 1;
        let last = self
            .last_arrival
            .entry((src, dst))
            .or_insert(f64::NEG_INFINITY);
        let arrival = (now + latency).max(*last);
        *last = arrival;
        self.in_flight.entry(dst).or_default().push_back(id);
        self.envelopes.insert(
            id,
            Envelope {
                id,
                src,
                dst,
                epoch,
                payload,
            },
        );
        (id, arrival)
    }

    /// Completes the wire transfer of `id`. `None` if it was already drained.
    pub fn take(&mut self, id: EnvId) -> Option<Envelope> {
        let env = self.envelopes.remove(&id)?;
        if let Some(q) = self.in_flight.get_mut(&env.dst) {
            if let Some(pos) = q.iter().position(|e| *e == id) {
                q.remove(pos);
            }
        }
        Some(env)
    }

    /// Probe-and-receive everything addressed to `dst`, in injection order.
    pub fn drain(&mut self, dst: ProcessId) -> Vec<Envelope> {
        let ids: Vec<EnvId> = self
            .in_flight
            .remove(&dst)
            .map(Vec::from)
            .unwrap_or_default();
        // One iprobe per message plus the final empty probe.
        self.counters.nonblocking_calls += ids.len() as u64 + 1;
        self.counters.probe_guaranteed_recvs += ids.len() as u64;
        ids.into_iter()
            .filter_map(|id| self.envelopes.remove(&id))
            .collect()
    }

    pub fn is_in_flight(&self, id: EnvId) -> bool {
        self.envelopes.contains_key(&id)
    }

    pub fn in_flight_to(&self, dst: ProcessId) -> usize {
        self.in_flight.get(&dst).map_or(0, VecDeque::len)
    }

    pub fn in_flight_total(&self) -> usize {
        self.envelopes.len()
    }

    pub fn destinations(&self) -> Vec<ProcessId> {
        self.in_flight
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(d, _)| *d)
            .collect()
    }

    /// Drops all in-flight traffic. Used when the whole job is relaunched.
    pub fn reset_wire(&mut self) {
        self.in_flight.clear();
        self.envelopes.clear();
        self.last_arrival.clear();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservationKind {
    /// The dead child is known (waitpid-style).
    Exited(ProcessId),
    /// Something on the node died; the coordinator has to poll to find out.
    Unidentified,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub at: f64,
    pub node: usize,
    pub kind: ObservationKind,
}

/// Raised when a failure observation reaches the native layer unfiltered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NativeAbort {
    pub observation: Observation,
}

/// Sits between the native server process and the operating system.
/// Captured observations are withheld while the job is live and handed back
/// in capture order once it ends.
#[derive(Debug, Default)]
pub struct InterceptionLayer {
    enabled: bool,
    suppressed: Vec<Observation>,
    forwarded: u64,
}

impl InterceptionLayer {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            ..Self::default()
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    /// Captures an observation and forwards it to the local coordinator.
    pub fn capture(&mut self, obs: Observation) -> Result<(), NativeAbort> {
        if !self.enabled {
            return Err(NativeAbort { observation: obs });
        }
        self.suppressed.push(obs);
        self.forwarded += 1;
        Ok(())
    }

    pub fn forwarded(&self) -> u64 {
        self.forwarded
    }

    pub fn pending(&self) -> &[Observation] {
        &self.suppressed
    }

    /// Releases every withheld observation at job completion or abort.
    pub fn release(&mut self) -> Vec<Observation> {
        std::mem::take(&mut self.suppressed)
    }
}
