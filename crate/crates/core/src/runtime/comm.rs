use std::cell::RefCell;
use std::future::poll_fn;
use std::rc::Rc;
use std::task::Poll;

use serde::Serialize;

use super::{decode_f64s, encode_f64s, CollInput, CollKind, ReduceOp, RequestId, RequestKind};
use crate::engine::kernel::Kernel;
use crate::engine::Bucket;
use crate::topology::{ProcessId, Side};

/// A process's handle on the message-passing runtime.
///
/// Addresses are logical ranks `0..size()`. Whether the caller is a
/// computational process or a replica is invisible to the application
/// except through [`Comm::is_replica`].
pub struct Comm {
    k: Rc<RefCell<Kernel>>,
    uid: ProcessId,
}

/// An outstanding non-blocking operation.
#[derive(Debug, PartialEq, Eq)]
#[must_use = "requests must be waited on"]
pub struct Request {
    id: RequestId,
    kind: RequestKind,
}

impl Request {
    pub fn kind(&self) -> RequestKind {
        self.kind
    }
}

/// What a completed request produced.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Completion {
    pub payload: Option<Vec<u8>>,
    pub result: Option<Vec<Vec<u8>>>,
}

impl Comm {
    pub(crate) fn new(k: Rc<RefCell<Kernel>>, uid: ProcessId) -> Self {
        Self { k, uid }
    }

    pub fn uid(&self) -> ProcessId {
        self.uid
    }

    /// Logical rank. Stable for the life of the process, even across a
    /// promotion.
    pub fn rank(&self) -> usize {
        self.k.borrow().role(self.uid).logical_rank
    }

    pub fn size(&self) -> usize {
        self.k.borrow().width()
    }

    pub fn is_replica(&self) -> bool {
        self.k.borrow().role(self.uid).side == Side::Rep
    }

    pub fn now(&self) -> f64 {
        self.k.borrow().sim_now()
    }

    /// Configured simulated seconds for one application step.
    pub fn step_seconds(&self) -> f64 {
        self.k.borrow().step_seconds()
    }

    pub fn isend(&self, dest: usize, tag: u32, data: Vec<u8>) -> Request {
        let id = self.k.borrow_mut().isend(self.uid, dest, tag, data);
        Request {
            id,
            kind: RequestKind::Send,
        }
    }

    pub fn irecv(&self, src: usize, tag: u32) -> Request {
        let id = self.k.borrow_mut().irecv(self.uid, src, tag);
        Request {
            id,
            kind: RequestKind::Recv,
        }
    }

    /// Non-blocking completion check.
    pub fn test(&self, req: &Request) -> bool {
        let mut k = self.k.borrow_mut();
        if k.is_blocked(self.uid) {
            return false;
        }
        k.test_all(self.uid);
        k.request_done(self.uid, req.id)
    }

    /// Number of progress passes this process has made over its queue.
    pub fn progress_polls(&self) -> u64 {
        self.k.borrow().poll_count(self.uid)
    }

    pub async fn wait(&self, req: Request) -> Completion {
        poll_fn(|_| {
            let mut k = self.k.borrow_mut();
            if k.is_blocked(self.uid) {
                return Poll::Pending;
            }
            k.test_all(self.uid);
            if !k.request_done(self.uid, req.id) {
                return Poll::Pending;
            }
            let h = k
                .take_request(self.uid, req.id)
                .expect("completed request is queued");
            Poll::Ready(Completion {
                payload: h.payload,
                result: h.result,
            })
        })
        .await
    }

    pub async fn waitall(&self, reqs: Vec<Request>) -> Vec<Completion> {
        let mut out = Vec::with_capacity(reqs.len());
        for r in reqs {
            out.push(self.wait(r).await);
        }
        out
    }

    pub async fn send(&self, dest: usize, tag: u32, data: Vec<u8>) {
        let r = self.isend(dest, tag, data);
        self.wait(r).await;
    }

    pub async fn recv(&self, src: usize, tag: u32) -> Vec<u8> {
        let r = self.irecv(src, tag);
        self.wait(r).await.payload.unwrap_or_default()
    }

    async fn collective(&self, kind: CollKind, input: CollInput) -> Vec<Vec<u8>> {
        let id = self.k.borrow_mut().start_collective(self.uid, kind, input);
        let done = self
            .wait(Request {
                id,
                kind: RequestKind::Collective,
            })
            .await;
        done.result.unwrap_or_default()
    }

    pub async fn barrier(&self) {
        self.collective(CollKind::Barrier, CollInput::None).await;
    }

    pub async fn bcast(&self, root: usize, data: Vec<u8>) -> Vec<u8> {
        let mut r = self
            .collective(CollKind::Bcast { root }, CollInput::Single(data))
            .await;
        r.pop().unwrap_or_default()
    }

    pub async fn allreduce(&self, op: ReduceOp, data: Vec<u8>) -> Vec<u8> {
        let mut r = self
            .collective(CollKind::Allreduce { op }, CollInput::Single(data))
            .await;
        r.pop().unwrap_or_default()
    }

    pub async fn allreduce_f64(&self, op: ReduceOp, values: &[f64]) -> Vec<f64> {
        decode_f64s(&self.allreduce(op, encode_f64s(values)).await)
    }

    /// Root gets every rank's contribution in rank order; others get nothing.
    pub async fn gather(&self, root: usize, data: Vec<u8>) -> Vec<Vec<u8>> {
        self.collective(CollKind::Gather { root }, CollInput::Single(data))
            .await
    }

    /// `parts` is only read on the root and must have one entry per rank.
    pub async fn scatter(&self, root: usize, parts: Vec<Vec<u8>>) -> Vec<u8> {
        let input = if self.rank() == root {
            CollInput::Parts(parts)
        } else {
            CollInput::None
        };
        let mut r = self.collective(CollKind::Scatter { root }, input).await;
        r.pop().unwrap_or_default()
    }

    pub async fn allgather(&self, data: Vec<u8>) -> Vec<Vec<u8>> {
        self.collective(CollKind::Allgather, CollInput::Single(data))
            .await
    }

    pub async fn alltoall(&self, parts: Vec<Vec<u8>>) -> Vec<Vec<u8>> {
        self.collective(CollKind::Alltoall, CollInput::Parts(parts))
            .await
    }

    /// Spends `secs` of simulated time computing.
    pub async fn compute(&self, secs: f64) {
        self.sleep(secs, None).await;
    }

    async fn sleep(&self, secs: f64, bucket: Option<Bucket>) {
        let mut started = false;
        poll_fn(|_| {
            let mut k = self.k.borrow_mut();
            if k.is_blocked(self.uid) {
                return Poll::Pending;
            }
            if !started {
                started = true;
                k.start_compute(self.uid, secs, bucket);
            }
            if k.compute_pending(self.uid) {
                Poll::Pending
            } else {
                Poll::Ready(())
            }
        })
        .await
    }

    /// Step boundary: trims logs if needed and joins a pending checkpoint.
    pub(crate) async fn safe_point<S: Serialize>(&self, step: u64, state: &S) {
        let trim = {
            let mut k = self.k.borrow_mut();
            if k.is_blocked(self.uid) {
                0.0
            } else {
                k.maybe_trim(self.uid)
            }
        };
        if trim > 0.0 {
            self.sleep(trim, Some(Bucket::LogRemoval)).await;
        }
        let capture = || bincode::serialize(state).expect("app state serializes");
        poll_fn(|_| {
            let mut k = self.k.borrow_mut();
            if k.is_blocked(self.uid) {
                return Poll::Pending;
            }
            if k.boundary(self.uid, step, &capture) {
                Poll::Ready(())
            } else {
                Poll::Pending
            }
        })
        .await
    }

    pub(crate) fn finish<S: Serialize>(&self, state: &S) {
        let bytes = bincode::serialize(state).expect("app state serializes");
        self.k.borrow_mut().finish(self.uid, bytes);
    }
}
