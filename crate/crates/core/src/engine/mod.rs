//! Runs a mini-app on the simulated machine.
//!
//! Virtual processes are plain futures polled by a single-threaded
//! executor. Between events the executor polls every runnable process, in
//! uid order, until none can make progress; then it dispatches the next
//! event. Nothing depends on wall-clock time or thread scheduling, so a run
//! is a pure function of its [`RunConfig`].

mod accounting;
mod config;
pub(crate) mod kernel;
mod outcome;

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::task::{Context, Waker};

use thiserror::Error;

pub use accounting::{Bucket, BucketTimes, Ledger};
pub use config::{RunConfig, StoreSpec};
pub use outcome::{Audit, RunOutcome, RunStats};

use crate::bench::MiniApp;
use crate::checkpoint::StoreError;
use crate::runtime::Comm;
use crate::topology::{ProcessId, TopologyError};
use kernel::{AppMeta, Kernel, SpawnReq};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("simulation stalled: {0}")]
    Stalled(String),
}

type Task = Pin<Box<dyn Future<Output = ()>>>;

fn spawn<A: MiniApp>(app: &A, k: &Rc<RefCell<Kernel>>, req: SpawnReq) -> Task {
    let comm = Comm::new(Rc::clone(k), req.uid);
    let app = app.clone();
    Box::pin(async move {
        let n = comm.size();
        let mut state: A::State = match req.state {
            Some(bytes) => bincode::deserialize(&bytes).expect("checkpointed state decodes"),
            None => app.init(req.rank, n),
        };
        for step in req.start_step..app.total_steps() {
            comm.safe_point(step, &state).await;
            app.step(&mut state, &comm, step).await;
        }
        comm.finish(&state);
    })
}

/// Runs `app` to completion (or until the config stops it).
pub fn run<A: MiniApp>(app: &A, cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let meta = AppMeta {
        name: app.name().to_string(),
        total_steps: app.total_steps(),
        flops_per_step: app.flops_per_step(),
    };
    let init = {
        let app = app.clone();
        let n = cfg.n;
        Box::new(move |rank: usize| {
            bincode::serialize(&app.init(rank, n)).expect("app state serializes")
        })
    };
    let kernel = Rc::new(RefCell::new(Kernel::new(cfg.clone(), meta, init)?));
    kernel.borrow_mut().start()?;
    let mut tasks: BTreeMap<ProcessId, Task> = BTreeMap::new();
    let mut cx = Context::from_waker(Waker::noop());
    loop {
        let (drops, spawns) = {
            let mut k = kernel.borrow_mut();
            (k.take_drops(), k.take_spawns())
        };
        for uid in drops {
            tasks.remove(&uid);
        }
        for req in spawns {
            tasks.insert(req.uid, spawn(app, &kernel, req));
        }
        loop {
            let next = kernel.borrow_mut().next_runnable();
            let Some(uid) = next else { break };
            if let Some(task) = tasks.get_mut(&uid) {
                if task.as_mut().poll(&mut cx).is_ready() {
                    tasks.remove(&uid);
                }
            }
        }
        let mut k = kernel.borrow_mut();
        if let Some(err) = k.take_fatal() {
            return Err(err);
        }
        k.check_done();
        if k.is_over() {
            break;
        }
        if !k.dispatch_next() {
            return Err(RunError::Stalled(k.stall_report()));
        }
    }
    drop(tasks);
    let kernel = Rc::try_unwrap(kernel)
        .ok()
        .expect("tasks are gone")
        .into_inner();
    Ok(kernel.into_outcome())
}
