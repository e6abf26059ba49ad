//! Composite requests and the per-process request queue.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::simnet::EnvId;
use crate::topology::ProcessId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RequestId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RequestKind {
    Send,
    Recv,
    Collective,
}

/// What one transport-level sub-request waits for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubKind {
    /// An envelope on the wire to `dst`.
    Send { env: EnvId, dst: ProcessId },
    /// The next matching chunk on a logical channel.
    Recv { src: usize, tag: u32 },
    /// One collective transfer `(phase, source rank)`.
    CollIn { seq: u64, phase: u8, src: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubRequest {
    pub kind: SubKind,
    pub done: bool,
    pub polls: u64,
}

impl SubRequest {
    pub fn new(kind: SubKind) -> Self {
        Self {
            kind,
            done: false,
            polls: 0,
        }
    }
}

/// A non-blocking operation as the application sees it: up to one
/// computational-side and one replica-side sub-request plus any number of
/// extra sub-requests for inter-group traffic and collective inputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestHandle {
    pub id: RequestId,
    pub kind: RequestKind,
    /// Logical peer for point-to-point requests.
    pub peer: Option<usize>,
    /// Collective sequence number for collective requests.
    pub coll_seq: Option<u64>,
    pub cmp_subreq: Option<SubRequest>,
    pub rep_subreq: Option<SubRequest>,
    pub extra_subreqs: Vec<SubRequest>,
    pub completed: bool,
    /// Received payload, once a receive completes.
    pub payload: Option<Vec<u8>>,
    /// Collective result, once a collective completes.
    pub result: Option<Vec<Vec<u8>>>,
}

impl RequestHandle {
    pub fn new(id: RequestId, kind: RequestKind) -> Self {
        Self {
            id,
            kind,
            peer: None,
            coll_seq: None,
            cmp_subreq: None,
            rep_subreq: None,
            extra_subreqs: Vec::new(),
            completed: false,
            payload: None,
            result: None,
        }
    }

    pub fn subreqs(&self) -> impl Iterator<Item = &SubRequest> {
        self.cmp_subreq
            .iter()
            .chain(self.rep_subreq.iter())
            .chain(self.extra_subreqs.iter())
    }

    pub fn subreqs_mut(&mut self) -> impl Iterator<Item = &mut SubRequest> {
        self.cmp_subreq
            .iter_mut()
            .chain(self.rep_subreq.iter_mut())
            .chain(self.extra_subreqs.iter_mut())
    }

    /// Re-derives `completed` from the sub-requests. Collective requests
    /// additionally need their result.
    pub fn refresh(&mut self) -> bool {
        let subs_done = self.subreqs().all(|s| s.done);
        self.completed = match self.kind {
            RequestKind::Collective => subs_done && self.result.is_some(),
            RequestKind::Recv => subs_done && self.payload.is_some(),
            RequestKind::Send => subs_done,
        };
        self.completed
    }
}

/// Per-process queue in issue order.
#[derive(Clone, Debug, Default)]
pub struct RequestQueue {
    next: u64,
    reqs: BTreeMap<RequestId, RequestHandle>,
    pub polls: u64,
}

impl RequestQueue {
    pub fn next_id(&mut self) -> RequestId {
        self.next += 1;
        RequestId(self.next)
    }

    pub fn push(&mut self, req: RequestHandle) {
        self.reqs.insert(req.id, req);
    }

    pub fn get(&self, id: RequestId) -> Option<&RequestHandle> {
        self.reqs.get(&id)
    }

    pub fn get_mut(&mut self, id: RequestId) -> Option<&mut RequestHandle> {
        self.reqs.get_mut(&id)
    }

    pub fn remove(&mut self, id: RequestId) -> Option<RequestHandle> {
        self.reqs.remove(&id)
    }

    pub fn ids(&self) -> Vec<RequestId> {
        self.reqs.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.reqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reqs.is_empty()
    }

    pub fn clear(&mut self) {
        self.reqs.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completes_only_when_every_subrequest_is_done() {
        let mut r = RequestHandle::new(RequestId(1), RequestKind::Send);
        r.cmp_subreq = Some(SubRequest::new(SubKind::Send {
            env: EnvId(0),
            dst: ProcessId(1),
        }));
        r.extra_subreqs = (0..3)
            .map(|i| {
                SubRequest::new(SubKind::Send {
                    env: EnvId(i),
                    dst: ProcessId(2),
                })
            })
            .collect();
        r.cmp_subreq.as_mut().unwrap().done = true;
        r.extra_subreqs[0].done = true;
        r.extra_subreqs[1].done = true;
        assert!(!r.refresh());
        r.extra_subreqs[2].done = true;
        assert!(r.refresh());
    }

    #[test]
    fn send_with_no_subrequests_is_trivially_complete() {
        let mut r = RequestHandle::new(RequestId(1), RequestKind::Send);
        assert!(r.refresh());
    }
}
