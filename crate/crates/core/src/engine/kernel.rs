//! Global simulation state and event handlers.
//!
//! The kernel owns everything except the process futures themselves, which
//! live in the executor. Processes reach the kernel through
//! [`crate::runtime::Comm`]; the executor polls them between events.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::accounting::{Bucket, Ledger};
use super::config::{RunConfig, StoreSpec};
use super::outcome::{Audit, RunOutcome, RunStats};
use super::RunError;
use crate::bench::Metrics;
use crate::checkpoint::{CheckpointRecord, CheckpointStore, LatestMarker, RecordKind, WorldDigest};
use crate::failure::{classify, plan_recovery, FailureEvent, ProcView, VictimSelector};
use crate::runtime::request::RequestQueue;
use crate::runtime::{
    CollInput, CollKind, CollOp, CollectiveLogEntry, DrainedChunk, ProcRuntime, RequestHandle,
    RequestId, RequestKind, SubKind, SubRequest, Transfer,
};
use crate::simnet::{
    CoordinatorLayout, EnvId, Envelope, EventQueue, InterceptionLayer, NativeTransport,
    Observation, ObservationKind, ObservationStyle, Payload, Trace,
};
use crate::topology::{ProcessId, Role, Side, WorldView};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Ev {
    Deliver(EnvId),
    Wake { uid: ProcessId, gen: u64 },
    Kill(usize),
    Detect,
    RepairDone(u64),
    CkptTimer(u64),
    CkptRequest(u64),
    RecordWrite { wave: u64, rank: usize },
    WaveCommit(u64),
    LaunchDone(u64),
    Halt,
}

impl Ev {
    fn describe(&self) -> (&'static str, Option<u64>, u64) {
        match *self {
            Ev::Deliver(e) => ("deliver", None, e.0),
            Ev::Wake { uid, gen } => ("wake", Some(uid.0), gen),
            Ev::Kill(i) => ("kill", None, i as u64),
            Ev::Detect => ("detect", None, 0),
            Ev::RepairDone(g) => ("repair-done", None, g),
            Ev::CkptTimer(g) => ("ckpt-timer", None, g),
            Ev::CkptRequest(w) => ("ckpt-request", None, w),
            Ev::RecordWrite { wave, rank } => ("record-write", Some(rank as u64), wave),
            Ev::WaveCommit(w) => ("wave-commit", None, w),
            Ev::LaunchDone(g) => ("launch-done", None, g),
            Ev::Halt => ("halt", None, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PauseKind {
    Launch,
    CkptWrite,
    Repair,
    Restart,
}

struct Timer {
    deadline: f64,
    /// Remaining seconds while the world is paused.
    frozen: Option<f64>,
}

pub(crate) struct Proc {
    slot: usize,
    role: Role,
    pub(crate) rt: ProcRuntime,
    reqs: RequestQueue,
    active_coll_req: Option<RequestId>,
    /// Step currently executing (or about to).
    step: u64,
    finished: Option<Vec<u8>>,
    timer: Option<Timer>,
    wake_gen: u64,
    checked_in: Option<u64>,
    capture: Option<Vec<u8>>,
    base: Bucket,
    jitter: ChaCha8Rng,
}

struct Wave {
    id: u64,
    target: Option<u64>,
    tainted: bool,
    quiesce_at: Option<f64>,
    seq: u64,
    records: BTreeMap<usize, CheckpointRecord>,
}

pub(crate) struct SpawnReq {
    pub uid: ProcessId,
    pub rank: usize,
    pub start_step: u64,
    pub state: Option<Vec<u8>>,
}

pub(crate) struct AppMeta {
    pub name: String,
    pub total_steps: u64,
    pub flops_per_step: f64,
}

pub(crate) type InitState = Box<dyn Fn(usize) -> Vec<u8>>;

pub(crate) struct Kernel {
    cfg: RunConfig,
    meta: AppMeta,
    init_state: InitState,
    q: EventQueue<Ev>,
    trace: Trace,
    transport: NativeTransport,
    interception: InterceptionLayer,
    layout: CoordinatorLayout,
    world: WorldView,
    procs: BTreeMap<ProcessId, Proc>,
    ledger: Ledger,
    runnable: BTreeSet<ProcessId>,
    /// Active global pauses, innermost last.
    pauses: Vec<(PauseKind, Bucket)>,
    rng: ChaCha8Rng,
    next_uid: u64,
    incarnation: u64,
    first_launch: bool,
    /// Steps already done by a run this one resumed from.
    resumed_steps: u64,
    store: Option<CheckpointStore>,
    wave: Option<Wave>,
    wave_ids: u64,
    wave_seq: u64,
    wave_deferred: bool,
    ckpt_gen: u64,
    last_stable: f64,
    undetected: BTreeSet<ProcessId>,
    repair: Option<BTreeSet<ProcessId>>,
    repair_gen: u64,
    launch_gen: u64,
    restart_pending: bool,
    failures: Vec<FailureEvent>,
    failure_index: BTreeMap<ProcessId, usize>,
    spawns: Vec<SpawnReq>,
    drops: Vec<ProcessId>,
    stats: RunStats,
    done: bool,
    halted: bool,
    aborted: Option<String>,
    fatal: Option<RunError>,
}

fn compute_bucket(role: Role) -> Bucket {
    match role.side {
        Side::Cmp => Bucket::Useful,
        Side::Rep => Bucket::Redundant,
    }
}

impl Kernel {
    pub(crate) fn new(
        cfg: RunConfig,
        meta: AppMeta,
        init_state: InitState,
    ) -> Result<Self, RunError> {
        if cfg.n == 0 {
            return Err(RunError::Config(
                "at least one computational process is required".into(),
            ));
        }
        if cfg.m > cfg.n {
            return Err(RunError::Config(format!(
                "{} replicas for {} ranks",
                cfg.m, cfg.n
            )));
        }
        if let Some(tau) = cfg.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(RunError::Config(format!(
                    "checkpoint interval must be positive, got {tau}"
                )));
            }
        }
        if !(cfg.ckpt_cost >= 0.0 && cfg.ckpt_cost.is_finite()) || !(cfg.step_seconds >= 0.0) {
            return Err(RunError::Config(
                "checkpoint cost and step time must be non-negative".into(),
            ));
        }
        let store = if cfg.mode.checkpoints() || cfg.resume {
            Some(match &cfg.store {
                StoreSpec::Memory => CheckpointStore::memory(),
                StoreSpec::Dir(p) => CheckpointStore::dir(p)?,
            })
        } else {
            None
        };
        let slots = cfg.n + cfg.m;
        let layout = CoordinatorLayout::new(slots, cfg.sim.node_size, cfg.sim.coordinator_groups);
        let world = WorldView::build(0, 0, &[]).expect("empty world");
        Ok(Self {
            trace: Trace::new(cfg.trace_dump),
            interception: InterceptionLayer::new(cfg.sim.interception),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_f00d),
            ledger: Ledger::new(slots),
            cfg,
            meta,
            init_state,
            q: EventQueue::new(),
            transport: NativeTransport::new(),
            layout,
            world,
            procs: BTreeMap::new(),
            runnable: BTreeSet::new(),
            pauses: Vec::new(),
            next_uid: 0,
            incarnation: 0,
            first_launch: true,
            resumed_steps: 0,
            store,
            wave: None,
            wave_ids: 0,
            wave_seq: 0,
            wave_deferred: false,
            ckpt_gen: 0,
            last_stable: 0.0,
            undetected: BTreeSet::new(),
            repair: None,
            repair_gen: 0,
            launch_gen: 0,
            restart_pending: false,
            failures: Vec::new(),
            failure_index: BTreeMap::new(),
            spawns: Vec::new(),
            drops: Vec::new(),
            stats: RunStats::default(),
            done: false,
            halted: false,
            aborted: None,
            fatal: None,
        })
    }

    fn now(&self) -> f64 {
        self.q.now()
    }

    fn at(&mut self, ev: Ev, t: f64) {
        self.q
            .schedule(ev, t)
            .expect("kernel never schedules into the past");
    }

    fn after(&mut self, ev: Ev, delay: f64) {
        self.q.schedule_in(ev, delay);
    }

    pub(crate) fn start(&mut self) -> Result<(), RunError> {
        for i in 0..self.cfg.failures.len() {
            let t = self.cfg.failures[i].time;
            self.at(Ev::Kill(i), t);
        }
        if let Some(t) = self.cfg.stop_at {
            self.at(Ev::Halt, t);
        }
        self.launch()
    }

    fn fail(&mut self, err: RunError) {
        if self.fatal.is_none() {
            self.fatal = Some(err);
        }
    }

    // ---- launch / restart -------------------------------------------------

    fn next_incarnation(&self) -> Result<u64, RunError> {
        if !self.first_launch {
            return Ok(self.incarnation + 1);
        }
        if !self.cfg.resume {
            return Ok(0);
        }
        let store = self.store.as_ref().expect("resume implies a store");
        let used = store
            .list()?
            .iter()
            .filter_map(|p| {
                p.components()
                    .next()?
                    .as_os_str()
                    .to_str()?
                    .parse::<u64>()
                    .ok()
            })
            .max();
        Ok(used.map_or(0, |u| u + 1))
    }

    fn launch(&mut self) -> Result<(), RunError> {
        let (n, m) = (self.cfg.n, self.cfg.m);
        self.incarnation = self.next_incarnation()?;
        let first = std::mem::replace(&mut self.first_launch, false);
        let uids: Vec<ProcessId> = (0..n + m)
            .map(|_| {
                self.next_uid += 1;
                ProcessId(self.next_uid - 1)
            })
            .collect();
        self.world = WorldView::build(n, m, &uids)?;
        self.layout
            .assign(uids.iter().enumerate().map(|(s, u)| (s, *u)));
        self.layout.forget_failures();

        let wave = match &self.store {
            Some(store) if self.cfg.mode.checkpoints() || self.cfg.resume => {
                match store.latest()? {
                    Some(mk) if mk.nc != n => {
                        return Err(crate::checkpoint::StoreError::WidthMismatch {
                            found: mk.nc,
                            wanted: n,
                        }
                        .into())
                    }
                    Some(mk) => Some(store.load_wave(mk)?),
                    None => None,
                }
            }
            _ => None,
        };
        if first {
            self.resumed_steps = wave.as_ref().map_or(0, |w| w[0].step);
        }
        let now = self.now();
        let mut baselines = Vec::new();
        for (slot, &uid) in uids.iter().enumerate() {
            let role = self
                .world
                .role_of(uid)
                .expect("fresh world contains every uid");
            let rank = role.logical_rank;
            if self.store.is_some() {
                baselines.push(CheckpointRecord {
                    logical_rank: rank,
                    launch_rank: slot,
                    incarnation: self.incarnation,
                    kind: RecordKind::Baseline,
                    seq: 0,
                    step: 0,
                    app_state: (self.init_state)(rank),
                    runtime_state: Default::default(),
                    world: WorldDigest { n, m, epoch: 0 },
                });
            }
            let (state, rt, step) = match &wave {
                Some(recs) => {
                    let r = &recs[rank];
                    (
                        Some(r.app_state.clone()),
                        ProcRuntime::restore(r.runtime_state.clone()),
                        r.step,
                    )
                }
                None => (None, ProcRuntime::default(), 0),
            };
            self.procs.insert(
                uid,
                Proc {
                    slot,
                    role,
                    rt,
                    reqs: RequestQueue::default(),
                    active_coll_req: None,
                    step,
                    finished: None,
                    timer: None,
                    wake_gen: 0,
                    checked_in: None,
                    capture: None,
                    base: Bucket::Idle,
                    jitter: ChaCha8Rng::seed_from_u64(self.cfg.seed.rotate_left(17) ^ uid.0),
                },
            );
            self.transport.register(uid);
            self.ledger.set_alive(slot, true, now);
            self.ledger.set_base(slot, Bucket::Idle, now);
            self.spawns.push(SpawnReq {
                uid,
                rank,
                start_step: step,
                state,
            });
            self.runnable.insert(uid);
        }
        // Two-phase restore: baselines land (and are read back) before any
        // process resumes from the incremental wave.
        if let Some(store) = self.store.as_mut() {
            for b in &baselines {
                store.put(b)?;
            }
            for b in &baselines {
                if store
                    .get(b.incarnation, 0, b.launch_rank, RecordKind::Baseline)?
                    .is_none()
                {
                    return Err(RunError::Config("baseline record vanished".into()));
                }
            }
        }
        self.stats.incarnations += 1;
        if wave.is_some() {
            self.stats.restores += 1;
        }
        self.wave_seq = 0;
        self.wave_deferred = false;
        self.last_stable = now;
        self.ledger.snapshot(now);
        self.arm_timer();

        if first {
            let mut cost = 0.0;
            if self.store.is_some() {
                cost += self.cfg.sim.storage.baseline_seconds(n + m);
            }
            if wave.is_some() {
                cost += self.cfg.ckpt_cost;
            }
            if cost > 0.0 {
                let bucket = if wave.is_some() {
                    Bucket::Restore
                } else {
                    Bucket::Create
                };
                self.pause(PauseKind::Launch, bucket);
                self.launch_gen += 1;
                let g = self.launch_gen;
                self.after(Ev::LaunchDone(g), cost);
            }
        } else {
            self.restart_pending = false;
            self.resume(PauseKind::Restart);
        }
        Ok(())
    }

    fn arm_timer(&mut self) {
        self.ckpt_gen += 1;
        if let (true, Some(tau)) = (self.cfg.mode.checkpoints(), self.cfg.tau) {
            let g = self.ckpt_gen;
            self.after(Ev::CkptTimer(g), tau);
        }
    }

    fn begin_restart(&mut self) {
        self.stats.restarts += 1;
        self.abort_wave();
        self.repair = None;
        let now = self.now();
        self.stats.lost_work_s += self.ledger.roll_back(now);
        let uids: Vec<ProcessId> = self.procs.keys().copied().collect();
        for uid in uids {
            let p = self.procs.remove(&uid).unwrap();
            self.ledger.set_alive(p.slot, false, now);
            self.transport.mark_down(uid);
            self.drops.push(uid);
        }
        self.runnable.clear();
        self.undetected.clear();
        self.transport.reset_wire();
        self.stats.released_observations += self.interception.release().len() as u64;
        self.pauses.clear();
        self.pause(PauseKind::Restart, Bucket::Restore);
        let has_wave = self
            .store
            .as_ref()
            .is_some_and(|s| matches!(s.latest(), Ok(Some(_))));
        let mut cost = self.cfg.sim.relaunch_seconds();
        if self.store.is_some() {
            cost += self
                .cfg
                .sim
                .storage
                .baseline_seconds(self.cfg.n + self.cfg.m);
        }
        if has_wave {
            cost += self.cfg.ckpt_cost;
        }
        self.restart_pending = true;
        self.launch_gen += 1;
        let g = self.launch_gen;
        self.after(Ev::LaunchDone(g), cost);
    }

    // ---- pause / resume ---------------------------------------------------

    fn is_paused(&self) -> bool {
        !self.pauses.is_empty()
    }

    fn pause(&mut self, kind: PauseKind, bucket: Bucket) {
        let now = self.now();
        if self.pauses.is_empty() {
            for p in self.procs.values_mut() {
                if let Some(t) = p.timer.as_mut() {
                    if t.frozen.is_none() {
                        t.frozen = Some((t.deadline - now).max(0.0));
                        p.wake_gen += 1;
                    }
                }
            }
        }
        self.pauses.retain(|(k, _)| *k != kind);
        self.pauses.push((kind, bucket));
        self.ledger.set_pause(Some(bucket), now);
    }

    /// Ends one pause. Processes run again once no pause is left.
    fn resume(&mut self, kind: PauseKind) {
        let before = self.pauses.len();
        self.pauses.retain(|(k, _)| *k != kind);
        if self.pauses.len() == before {
            return;
        }
        let now = self.now();
        self.ledger
            .set_pause(self.pauses.last().map(|(_, b)| *b), now);
        if self.is_paused() {
            return;
        }
        let mut wakes = Vec::new();
        for (uid, p) in self.procs.iter_mut() {
            if let Some(t) = p.timer.as_mut() {
                if let Some(rem) = t.frozen.take() {
                    t.deadline = now + rem;
                    p.wake_gen += 1;
                    wakes.push((*uid, p.wake_gen, t.deadline));
                }
            }
        }
        for (uid, gen, at) in wakes {
            self.at(Ev::Wake { uid, gen }, at);
        }
        self.runnable.extend(self.procs.keys().copied());
        if std::mem::take(&mut self.wave_deferred) && self.wave.is_none() && self.repair.is_none() {
            self.start_wave();
        }
    }

    // ---- dispatch ---------------------------------------------------------

    /// Dispatches one event. Returns false when the queue is empty.
    pub(crate) fn dispatch_next(&mut self) -> bool {
        let Some((t, id, ev)) = self.q.pop() else {
            return false;
        };
        let (kind, uid, detail) = ev.describe();
        self.trace.record(t, id.0, kind, uid, detail);
        self.stats.events += 1;
        match ev {
            Ev::Deliver(env) => {
                if let Some(e) = self.transport.take(env) {
                    self.deliver(e, false);
                }
            }
            Ev::Wake { uid, gen } => self.on_wake(uid, gen),
            Ev::Kill(i) => self.on_kill(i),
            Ev::Detect => self.on_detect(),
            Ev::RepairDone(g) => self.on_repair_done(g),
            Ev::CkptTimer(g) => self.on_ckpt_timer(g),
            Ev::CkptRequest(w) => self.on_ckpt_request(w),
            Ev::RecordWrite { wave, rank } => self.on_record_write(wave, rank),
            Ev::WaveCommit(w) => self.on_wave_commit(w),
            Ev::LaunchDone(g) => {
                if g == self.launch_gen {
                    if self.restart_pending {
                        if let Err(e) = self.launch() {
                            self.fail(e);
                        }
                    } else {
                        self.resume(PauseKind::Launch);
                    }
                }
            }
            Ev::Halt => self.halted = true,
        }
        if self
            .cfg
            .halt_after_events
            .is_some_and(|k| self.stats.events >= k)
        {
            self.halted = true;
        }
        true
    }

    fn deliver(&mut self, e: Envelope, drained: bool) {
        if drained {
            self.stats.drained_chunks += 1;
        }
        let Some(p) = self.procs.get_mut(&e.dst) else {
            self.stats.dropped_to_dead += 1;
            return;
        };
        match e.payload {
            Payload::P2p {
                src_rank,
                send_id,
                tag,
                data,
                ..
            } => {
                let chunk = DrainedChunk {
                    source: e.src,
                    send_id,
                    tag,
                    payload: data,
                    drained,
                    matched: false,
                };
                p.rt.channel(src_rank).accept(chunk);
            }
            Payload::Coll {
                seq,
                phase,
                src_rank,
                data,
            } => {
                p.rt.coll.accept(seq, phase, src_rank, data);
            }
        }
        self.runnable.insert(e.dst);
        if self.procs.contains_key(&e.src) {
            self.runnable.insert(e.src);
        }
    }

    /// Pulls every in-flight envelope off the wire into its receiver.
    fn drain_all(&mut self) -> Vec<DrainedChunk> {
        let mut out = Vec::new();
        for dst in self.transport.destinations() {
            for env in self.transport.drain(dst) {
                if let Payload::P2p {
                    send_id, tag, data, ..
                } = &env.payload
                {
                    out.push(DrainedChunk {
                        source: env.src,
                        send_id: *send_id,
                        tag: *tag,
                        payload: data.clone(),
                        drained: true,
                        matched: false,
                    });
                }
                self.deliver(env, true);
            }
        }
        out
    }

    fn on_wake(&mut self, uid: ProcessId, gen: u64) {
        let now = self.now();
        let Some(p) = self.procs.get_mut(&uid) else {
            return;
        };
        if p.wake_gen != gen || p.timer.as_ref().is_none_or(|t| t.frozen.is_some()) {
            return;
        }
        p.timer = None;
        p.base = Bucket::Idle;
        let slot = p.slot;
        self.ledger.set_base(slot, Bucket::Idle, now);
        self.runnable.insert(uid);
    }

    // ---- failures ---------------------------------------------------------

    fn select_victim(&mut self, selector: &VictimSelector) -> Option<ProcessId> {
        let live: Vec<ProcessId> = self.procs.keys().copied().collect();
        if live.is_empty() {
            return None;
        }
        match selector {
            VictimSelector::Random => Some(live[self.rng.random_range(0..live.len())]),
            VictimSelector::RandomRecoverable => {
                let mut pending: BTreeSet<ProcessId> = self.undetected.clone();
                if let Some(r) = &self.repair {
                    pending.extend(r.iter().copied());
                }
                let ok: Vec<ProcessId> = live
                    .into_iter()
                    .filter(|v| {
                        let mut s = pending.clone();
                        s.insert(*v);
                        self.world.shrink(&s).is_ok()
                    })
                    .collect();
                if ok.is_empty() {
                    None
                } else {
                    Some(ok[self.rng.random_range(0..ok.len())])
                }
            }
            VictimSelector::Uid(u) => Some(ProcessId(*u)).filter(|u| self.procs.contains_key(u)),
            VictimSelector::Cmp(r) => self
                .world
                .route(*r, Side::Cmp)
                .ok()
                .flatten()
                .filter(|u| self.procs.contains_key(u)),
            VictimSelector::Rep(r) => self
                .world
                .replica_of(*r)
                .filter(|u| self.procs.contains_key(u)),
        }
    }

    fn on_kill(&mut self, i: usize) {
        if self.done {
            return;
        }
        let selector = self.cfg.failures[i].selector.clone();
        match self.select_victim(&selector) {
            Some(uid) => self.kill(uid),
            None => self.stats.kills_skipped += 1,
        }
    }

    fn kill(&mut self, uid: ProcessId) {
        let Some(p) = self.procs.remove(&uid) else {
            return;
        };
        let now = self.now();
        self.stats.kills += 1;
        self.ledger.set_alive(p.slot, false, now);
        self.transport.mark_down(uid);
        self.drops.push(uid);
        self.runnable.remove(&uid);
        self.undetected.insert(uid);
        self.failure_index.insert(uid, self.failures.len());
        self.failures.push(FailureEvent {
            victim: uid,
            time: now,
            detected_at: None,
            classification: None,
        });
        if let Some(w) = self.wave.as_mut() {
            w.tainted = true;
        }
        let node = self.layout.node_of_slot(p.slot);
        let style = self.cfg.sim.observation;
        let kind = match style {
            ObservationStyle::Waitpid => ObservationKind::Exited(uid),
            ObservationStyle::Poll => ObservationKind::Unidentified,
        };
        match self.interception.capture(Observation {
            at: now,
            node,
            kind,
        }) {
            Err(abort) => {
                self.transport.count_abort();
                self.aborted = Some(format!(
                    "native transport observed a peer death on node {} at {:.6} s and aborted the job",
                    abort.observation.node, abort.observation.at
                ));
            }
            Ok(()) => {
                if style == ObservationStyle::Poll {
                    let transport = &self.transport;
                    let found = self.layout.poll_members(node, |u| transport.is_up(u));
                    self.stats.coordinator_polls += 1;
                    debug_assert!(found.contains(&uid));
                }
                let prop =
                    self.layout
                        .propagate_failure(node, style, self.cfg.sim.coordinator_hop_s);
                self.stats.coordinator_messages += prop.messages() as u64;
                self.after(Ev::Detect, prop.max_latency());
            }
        }
    }

    fn on_detect(&mut self) {
        if self.undetected.is_empty() {
            return;
        }
        let now = self.now();
        let batch = std::mem::take(&mut self.undetected);
        for uid in &batch {
            self.layout.learn_everywhere(*uid);
            if let Some(&i) = self.failure_index.get(uid) {
                self.failures[i].detected_at = Some(now);
            }
        }
        self.stats.detections += 1;
        self.abort_wave();
        if let Some(mut failed) = self.repair.take() {
            failed.extend(batch);
            self.stats.repair_restarts += 1;
            if self.world.shrink(&failed).is_ok() {
                self.begin_repair(failed);
            } else {
                self.record_classes(&failed);
                self.lost_both_copies(&failed);
            }
            return;
        }
        if !self.cfg.mode.repairs() {
            self.record_classes(&batch);
            self.begin_restart();
        } else if self.world.shrink(&batch).is_ok() {
            self.begin_repair(batch);
        } else {
            self.record_classes(&batch);
            self.lost_both_copies(&batch);
        }
    }

    /// Some logical rank has no live copy left. Without checkpoints there
    /// is nothing to restart from, so the job fails.
    fn lost_both_copies(&mut self, failed: &BTreeSet<ProcessId>) {
        if self.cfg.mode.checkpoints() {
            return self.begin_restart();
        }
        let lost = match self.world.shrink(failed) {
            Err(crate::topology::TopologyError::Unrecoverable(ranks)) => ranks,
            _ => Vec::new(),
        };
        self.aborted = Some(format!(
            "logical ranks {lost:?} lost both copies at {:.6} s",
            self.now()
        ));
    }

    fn record_classes(&mut self, failed: &BTreeSet<ProcessId>) {
        for (uid, class) in classify(&self.world, failed) {
            if let Some(&i) = self.failure_index.get(&uid) {
                self.failures[i].classification = Some(class);
            }
        }
    }

    fn begin_repair(&mut self, failed: BTreeSet<ProcessId>) {
        self.repair = Some(failed);
        self.pause(PauseKind::Repair, Bucket::Rollback);
        self.repair_gen += 1;
        let g = self.repair_gen;
        let cost = self.cfg.sim.repair_seconds(self.world.world().len());
        self.after(Ev::RepairDone(g), cost);
    }

    fn on_repair_done(&mut self, g: u64) {
        if g != self.repair_gen {
            return;
        }
        let Some(failed) = self.repair.take() else {
            return;
        };
        self.record_classes(&failed);
        self.drain_all();
        let next = match self.world.shrink(&failed) {
            Ok(w) => w,
            Err(_) => return self.lost_both_copies(&failed),
        };
        self.world = next;
        self.stats.repairs += 1;
        let now = self.now();
        for (uid, p) in self.procs.iter_mut() {
            let role = self
                .world
                .role_of(*uid)
                .expect("survivors stay in the world");
            if role != p.role {
                self.stats.promotions += 1;
                p.role = role;
                if matches!(p.base, Bucket::Useful | Bucket::Redundant) {
                    p.base = compute_bucket(role);
                    self.ledger.set_base(p.slot, p.base, now);
                }
            }
        }
        let views: BTreeMap<ProcessId, ProcView<'_>> = self
            .procs
            .iter()
            .map(|(u, p)| {
                (
                    *u,
                    ProcView {
                        role: p.role,
                        rt: &p.rt,
                    },
                )
            })
            .collect();
        let plan = match plan_recovery(&self.world, &views) {
            Ok(plan) => plan,
            Err(e) => {
                drop(views);
                self.stats.recovery_fallbacks += 1;
                self.stats.last_recovery_error = Some(e.to_string());
                return self.begin_restart();
            }
        };
        drop(views);
        debug_assert!(plan.is_consistent());
        for ((uid, src), ids) in &plan.skips {
            self.stats.skips += ids.len() as u64;
            self.procs
                .get_mut(uid)
                .unwrap()
                .rt
                .channel(*src)
                .add_skips(ids.iter().copied());
        }
        for r in &plan.resends {
            self.stats.resends += 1;
            let payload = Payload::P2p {
                src_rank: r.src_rank,
                dst_rank: r.entry.dest_logical_rank,
                send_id: r.entry.send_id,
                tag: r.entry.tag,
                data: r.entry.payload.clone(),
            };
            self.post(r.from, r.to, payload);
        }
        for rp in &plan.replays {
            let role = self.procs[&rp.from].role;
            self.stats.replayed_transfers += 1;
            self.post_transfer(rp.from, role, rp.seq, &rp.transfer);
        }
        self.stats.frontier_max = self.stats.frontier_max.max(plan.frontier);
        self.resume(PauseKind::Repair);
    }

    // ---- checkpoint waves -------------------------------------------------

    fn on_ckpt_timer(&mut self, g: u64) {
        if g != self.ckpt_gen || self.done {
            return;
        }
        if self.is_paused()
            || self.wave.is_some()
            || self.repair.is_some()
            || !self.undetected.is_empty()
        {
            self.wave_deferred = true;
            return;
        }
        self.start_wave();
    }

    fn start_wave(&mut self) {
        self.wave_ids += 1;
        self.wave = Some(Wave {
            id: self.wave_ids,
            target: None,
            tainted: !self.undetected.is_empty(),
            quiesce_at: None,
            seq: 0,
            records: BTreeMap::new(),
        });
        self.stats.waves_requested += 1;
        let prop = self
            .layout
            .broadcast_from_primary(self.cfg.sim.coordinator_hop_s);
        self.stats.coordinator_messages += prop.messages() as u64;
        let id = self.wave_ids;
        self.after(Ev::CkptRequest(id), prop.max_latency());
    }

    fn on_ckpt_request(&mut self, id: u64) {
        let Some(w) = self.wave.as_ref() else { return };
        if w.id != id || w.target.is_some() {
            return;
        }
        let any_finished = self.procs.values().any(|p| p.finished.is_some());
        let target = self
            .procs
            .values()
            .map(|p| p.step + 1)
            .max()
            .unwrap_or(u64::MAX);
        if any_finished || target >= self.meta.total_steps {
            // Too late in the run for another wave; the timer stays off
            // until the next launch.
            self.wave = None;
            self.stats.waves_cancelled += 1;
            self.ckpt_gen += 1;
            return;
        }
        self.wave.as_mut().unwrap().target = Some(target);
        self.stats.wave_request_times.push(self.now());
        self.check_quiesce();
    }

    fn check_quiesce(&mut self) {
        let Some(w) = self.wave.as_ref() else { return };
        if w.target.is_none() || w.quiesce_at.is_some() || self.procs.is_empty() {
            return;
        }
        let (id, target) = (w.id, w.target.unwrap());
        if !self.procs.values().all(|p| p.checked_in == Some(id)) {
            return;
        }
        self.drain_all();
        let now = self.now();
        self.wave_seq += 1;
        let seq = self.wave_seq;
        let (n, epoch) = (self.cfg.n, self.world.epoch());
        let n_rep = self.world.n_rep();
        let mut records = BTreeMap::new();
        for (uid, p) in &self.procs {
            debug_assert!(
                p.reqs.is_empty(),
                "{uid} holds requests across a step boundary"
            );
            if p.role.side == Side::Cmp {
                records.insert(
                    p.role.logical_rank,
                    CheckpointRecord {
                        logical_rank: p.role.logical_rank,
                        launch_rank: p.slot,
                        incarnation: self.incarnation,
                        kind: RecordKind::Incremental,
                        seq,
                        step: target,
                        app_state: p.capture.clone().unwrap_or_default(),
                        runtime_state: p.rt.snapshot(),
                        world: WorldDigest { n, m: n_rep, epoch },
                    },
                );
            }
        }
        for p in self.procs.values() {
            if p.role.side == Side::Rep {
                let twin = &records[&p.role.logical_rank];
                if p.capture.as_deref() != Some(&twin.app_state[..]) {
                    self.stats.coherence_violations += 1;
                }
            }
        }
        let w = self.wave.as_mut().unwrap();
        w.quiesce_at = Some(now);
        w.seq = seq;
        w.records = records;
        self.pause(PauseKind::CkptWrite, Bucket::Create);
        let c = self.cfg.ckpt_cost;
        for rank in 0..n {
            let at = now + c * (rank + 1) as f64 / (n + 1) as f64;
            self.at(Ev::RecordWrite { wave: id, rank }, at);
        }
        self.after(Ev::WaveCommit(id), c);
    }

    fn on_record_write(&mut self, id: u64, rank: usize) {
        let Some(w) = self.wave.as_ref().filter(|w| w.id == id) else {
            return;
        };
        let Some(rec) = w.records.get(&rank) else {
            return;
        };
        let res = self.store.as_mut().expect("waves imply a store").put(rec);
        if let Err(e) = res {
            self.fail(e.into());
        }
    }

    fn on_wave_commit(&mut self, id: u64) {
        let Some(w) = self.wave.as_ref().filter(|w| w.id == id) else {
            return;
        };
        if w.tainted {
            return self.abort_wave();
        }
        let marker = LatestMarker {
            incarnation: self.incarnation,
            seq: w.seq,
            nc: self.cfg.n,
        };
        let quiesce_at = w.quiesce_at.unwrap_or(self.now());
        if self
            .store
            .as_mut()
            .expect("waves imply a store")
            .commit_latest(marker)
            .is_err()
        {
            return self.abort_wave();
        }
        self.stats.waves_committed += 1;
        self.last_stable = quiesce_at;
        self.wave = None;
        self.release_checkins();
        self.resume(PauseKind::CkptWrite);
        let now = self.now();
        self.ledger.snapshot(now);
        self.arm_timer();
    }

    fn release_checkins(&mut self) {
        let now = self.now();
        for (uid, p) in self.procs.iter_mut() {
            if p.checked_in.take().is_some() {
                p.capture = None;
                p.base = Bucket::Idle;
                self.ledger.set_base(p.slot, Bucket::Idle, now);
                self.runnable.insert(*uid);
            }
        }
    }

    fn abort_wave(&mut self) {
        if self.wave.take().is_none() {
            return;
        }
        self.stats.waves_aborted += 1;
        self.release_checkins();
        self.resume(PauseKind::CkptWrite);
        self.arm_timer();
    }

    // ---- wire helpers -----------------------------------------------------

    fn post(&mut self, src: ProcessId, dst: ProcessId, payload: Payload) -> EnvId {
        let lat = self.cfg.sim.latency(payload.len());
        let now = self.now();
        let (env, arrival) = self
            .transport
            .post(src, dst, self.world.epoch(), payload, now, lat);
        self.at(Ev::Deliver(env), arrival);
        self.stats.envelopes += 1;
        env
    }

    fn post_transfer(&mut self, from: ProcessId, role: Role, seq: u64, t: &Transfer) {
        for target in self.world.transfer_targets(role, t.dest) {
            let payload = Payload::Coll {
                seq,
                phase: t.phase,
                src_rank: role.logical_rank,
                data: t.data.clone(),
            };
            self.post(from, target, payload);
        }
    }

    // ---- process-facing API ----------------------------------------------

    pub(crate) fn is_blocked(&self, uid: ProcessId) -> bool {
        self.is_paused() || !self.procs.contains_key(&uid) || self.is_over()
    }

    fn proc(&self, uid: ProcessId) -> &Proc {
        self.procs
            .get(&uid)
            .unwrap_or_else(|| panic!("{uid} is not live"))
    }

    fn proc_mut(&mut self, uid: ProcessId) -> &mut Proc {
        self.procs
            .get_mut(&uid)
            .unwrap_or_else(|| panic!("{uid} is not live"))
    }

    pub(crate) fn role(&self, uid: ProcessId) -> Role {
        self.proc(uid).role
    }

    pub(crate) fn width(&self) -> usize {
        self.cfg.n
    }

    pub(crate) fn sim_now(&self) -> f64 {
        self.now()
    }

    pub(crate) fn step_seconds(&self) -> f64 {
        self.cfg.step_seconds
    }

    pub(crate) fn isend(
        &mut self,
        uid: ProcessId,
        dest: usize,
        tag: u32,
        data: Vec<u8>,
    ) -> RequestId {
        assert!(
            dest < self.cfg.n,
            "destination rank {dest} out of range for width {}",
            self.cfg.n
        );
        let now = self.now();
        let p = self.proc_mut(uid);
        let role = p.role;
        let send_id = p.rt.send_log.append(dest, tag, data.clone(), now);
        let id = p.reqs.next_id();
        let mut req = RequestHandle::new(id, RequestKind::Send);
        req.peer = Some(dest);
        for target in self.world.transfer_targets(role, dest) {
            let target_side = self.world.role_of(target).expect("targets are live").side;
            let payload = Payload::P2p {
                src_rank: role.logical_rank,
                dst_rank: dest,
                send_id,
                tag,
                data: data.clone(),
            };
            let env = self.post(uid, target, payload);
            let sub = SubRequest::new(SubKind::Send { env, dst: target });
            match (role.side, target_side) {
                (_, Side::Cmp) => req.cmp_subreq = Some(sub),
                (Side::Rep, Side::Rep) => req.rep_subreq = Some(sub),
                (Side::Cmp, Side::Rep) => req.extra_subreqs.push(sub),
            }
        }
        self.stats.sends += 1;
        self.proc_mut(uid).reqs.push(req);
        id
    }

    pub(crate) fn irecv(&mut self, uid: ProcessId, src: usize, tag: u32) -> RequestId {
        assert!(
            src < self.cfg.n,
            "source rank {src} out of range for width {}",
            self.cfg.n
        );
        let p = self.proc_mut(uid);
        let id = p.reqs.next_id();
        let mut req = RequestHandle::new(id, RequestKind::Recv);
        req.peer = Some(src);
        let sub = SubRequest::new(SubKind::Recv { src, tag });
        match p.role.side {
            Side::Cmp => req.cmp_subreq = Some(sub),
            Side::Rep => req.rep_subreq = Some(sub),
        }
        p.reqs.push(req);
        self.test_all(uid);
        id
    }

    pub(crate) fn start_collective(
        &mut self,
        uid: ProcessId,
        kind: CollKind,
        input: CollInput,
    ) -> RequestId {
        let n = self.cfg.n;
        let p = self.proc_mut(uid);
        assert!(
            p.rt.coll.active.is_none(),
            "{uid} started a collective while another is active"
        );
        let seq = p.rt.coll.issued + 1;
        let (op, out) = CollOp::start(seq, kind.clone(), p.role.logical_rank, n, input)
            .unwrap_or_else(|e| panic!("invalid collective call: {e}"));
        p.rt.coll.issued = seq;
        p.rt.coll.log.insert(
            seq,
            CollectiveLogEntry {
                collective_seq: seq,
                digest: kind.digest(),
                kind,
                outgoing: out.clone(),
                result: None,
                completed_at: None,
            },
        );
        let id = p.reqs.next_id();
        let mut req = RequestHandle::new(id, RequestKind::Collective);
        req.coll_seq = Some(seq);
        req.extra_subreqs = op
            .expected_inputs()
            .into_iter()
            .map(|(phase, src)| SubRequest::new(SubKind::CollIn { seq, phase, src }))
            .collect();
        p.rt.coll.active = Some(op);
        p.active_coll_req = Some(id);
        p.reqs.push(req);
        let role = p.role;
        for t in &out {
            self.post_transfer(uid, role, seq, t);
        }
        self.stats.collectives += 1;
        self.test_all(uid);
        id
    }

    fn progress_collective(&mut self, uid: ProcessId) {
        let now = self.now();
        let p = self.proc_mut(uid);
        let Some(op) = p.rt.coll.active.as_mut() else {
            return;
        };
        let prog = op
            .progress(&p.rt.coll.inbox)
            .unwrap_or_else(|e| panic!("collective failed on {uid}: {e}"));
        let seq = op.seq;
        let role = p.role;
        let entry =
            p.rt.coll
                .log
                .get_mut(&seq)
                .expect("active collectives are logged");
        entry.outgoing.extend(prog.outgoing.iter().cloned());
        if let Some(result) = prog.result {
            entry.result = Some(result.clone());
            entry.completed_at = Some(now);
            p.rt.coll.completed = seq;
            p.rt.coll.active = None;
            p.rt.coll.clear_inbox(seq);
            if let Some(req) = p.active_coll_req.take().and_then(|id| p.reqs.get_mut(id)) {
                req.result = Some(result);
            }
        }
        for t in &prog.outgoing {
            self.post_transfer(uid, role, seq, t);
        }
    }

    /// One pass over the whole request queue.
    pub(crate) fn test_all(&mut self, uid: ProcessId) {
        self.progress_collective(uid);
        let Kernel {
            procs, transport, ..
        } = self;
        let p = procs.get_mut(&uid).expect("tested process is live");
        p.reqs.polls += 1;
        for id in p.reqs.ids() {
            let req = p.reqs.get_mut(id).unwrap();
            if req.completed {
                continue;
            }
            let mut payload = None;
            for sub in req.subreqs_mut().filter(|s| !s.done) {
                sub.polls += 1;
                transport.count_test();
                sub.done = match sub.kind {
                    SubKind::Send { env, .. } => !transport.is_in_flight(env),
                    SubKind::Recv { src, tag } => {
                        match p.rt.channels.entry(src).or_default().take_match(tag) {
                            Some(chunk) => {
                                payload = Some(chunk.payload);
                                true
                            }
                            None => false,
                        }
                    }
                    SubKind::CollIn { seq, phase, src } => {
                        p.rt.coll.completed >= seq
                            || p.rt.coll.inbox.contains_key(&(seq, phase, src))
                    }
                };
            }
            if payload.is_some() {
                req.payload = payload;
            }
            req.refresh();
        }
    }

    pub(crate) fn request_done(&self, uid: ProcessId, id: RequestId) -> bool {
        self.procs
            .get(&uid)
            .and_then(|p| p.reqs.get(id))
            .is_some_and(|r| r.completed)
    }

    pub(crate) fn take_request(&mut self, uid: ProcessId, id: RequestId) -> Option<RequestHandle> {
        self.procs.get_mut(&uid)?.reqs.remove(id)
    }

    pub(crate) fn poll_count(&self, uid: ProcessId) -> u64 {
        self.proc(uid).reqs.polls
    }

    pub(crate) fn start_compute(&mut self, uid: ProcessId, secs: f64, bucket: Option<Bucket>) {
        if secs <= 0.0 {
            return;
        }
        let now = self.now();
        let jitter = self.cfg.sim.compute_jitter;
        let p = self.proc_mut(uid);
        let secs = if jitter > 0.0 && bucket.is_none() {
            secs * (1.0 + jitter * p.jitter.random::<f64>())
        } else {
            secs
        };
        p.wake_gen += 1;
        p.timer = Some(Timer {
            deadline: now + secs,
            frozen: None,
        });
        p.base = bucket.unwrap_or_else(|| compute_bucket(p.role));
        let (gen, slot, base) = (p.wake_gen, p.slot, p.base);
        self.ledger.set_base(slot, base, now);
        self.at(Ev::Wake { uid, gen }, now + secs);
    }

    pub(crate) fn compute_pending(&self, uid: ProcessId) -> bool {
        self.procs.get(&uid).is_some_and(|p| p.timer.is_some())
    }

    /// Step boundary. Returns true when the process may run `step`.
    pub(crate) fn boundary(
        &mut self,
        uid: ProcessId,
        step: u64,
        capture: &dyn Fn() -> Vec<u8>,
    ) -> bool {
        let wave = self
            .wave
            .as_ref()
            .map(|w| (w.id, w.target, w.quiesce_at.is_some()));
        let now = self.now();
        let p = self.proc_mut(uid);
        if p.checked_in.is_some() {
            return false;
        }
        p.step = step;
        match wave {
            Some((id, Some(target), false)) if target == step => {
                p.checked_in = Some(id);
                p.capture = Some(capture());
                p.base = Bucket::Create;
                let slot = p.slot;
                self.ledger.set_base(slot, Bucket::Create, now);
                self.check_quiesce();
                false
            }
            _ => true,
        }
    }

    pub(crate) fn finish(&mut self, uid: ProcessId, state: Vec<u8>) {
        let now = self.now();
        let total = self.meta.total_steps;
        let p = self.proc_mut(uid);
        p.finished = Some(state);
        p.step = total;
        p.base = Bucket::Idle;
        let slot = p.slot;
        self.ledger.set_base(slot, Bucket::Idle, now);
    }

    /// Trims the process's logs if they exceed the threshold. Returns the
    /// seconds the trim costs.
    pub(crate) fn maybe_trim(&mut self, uid: ProcessId) -> f64 {
        let threshold = self.cfg.sim.log_trim_threshold_bytes;
        let bw = self.cfg.sim.memory_bandwidth_bytes_per_s;
        let stable = self.last_stable;
        let p = self.proc_mut(uid);
        if (p.rt.log_bytes() as u64) <= threshold {
            return 0.0;
        }
        let freed = p.rt.trim_logs(stable);
        self.stats.trims += 1;
        self.stats.trimmed_bytes += freed as u64;
        freed as f64 / bw
    }

    // ---- executor hooks ---------------------------------------------------

    pub(crate) fn next_runnable(&mut self) -> Option<ProcessId> {
        if self.is_paused() || self.is_over() {
            return None;
        }
        self.runnable.pop_first()
    }

    pub(crate) fn take_spawns(&mut self) -> Vec<SpawnReq> {
        std::mem::take(&mut self.spawns)
    }

    pub(crate) fn take_drops(&mut self) -> Vec<ProcessId> {
        std::mem::take(&mut self.drops)
    }

    pub(crate) fn check_done(&mut self) {
        if self.done || self.procs.is_empty() || self.restart_pending {
            return;
        }
        if !self.procs.values().all(|p| p.finished.is_some()) {
            return;
        }
        let covered = (0..self.cfg.n).all(|r| {
            self.procs.contains_key(&self.world.cmp_group()[r])
                || self
                    .world
                    .replica_of(r)
                    .is_some_and(|u| self.procs.contains_key(&u))
        });
        if covered {
            self.done = true;
        }
    }

    pub(crate) fn is_over(&self) -> bool {
        self.done || self.halted || self.aborted.is_some() || self.fatal.is_some()
    }

    pub(crate) fn take_fatal(&mut self) -> Option<RunError> {
        self.fatal.take()
    }

    pub(crate) fn stall_report(&self) -> String {
        let waiting: Vec<String> = self
            .procs
            .iter()
            .filter(|(_, p)| p.finished.is_none())
            .map(|(u, p)| {
                format!(
                    "{u}(rank {} {:?}, step {}, {} reqs)",
                    p.role.logical_rank,
                    p.role.side,
                    p.step,
                    p.reqs.len()
                )
            })
            .collect();
        format!(
            "no events left at t={} with live processes waiting: {}",
            self.now(),
            waiting.join(", ")
        )
    }

    fn audit(&self) -> Audit {
        let mut audit = Audit::default();
        for (uid, p) in &self.procs {
            for src in 0..self.cfg.n {
                // A source that died after finishing (and was never
                // detected) is stood in for by its surviving twin, which sent
                // the same messages.
                let candidates = [
                    Some(self.world.expected_source(p.role, src)),
                    Some(self.world.cmp_group()[src]),
                    self.world.replica_of(src),
                ];
                let Some(sender) = candidates
                    .into_iter()
                    .flatten()
                    .find_map(|u| self.procs.get(&u))
                else {
                    audit
                        .violations
                        .push(format!("{uid}: no live source for rank {src}"));
                    continue;
                };
                let g = sender.rt.send_log.counter(p.role.logical_rank);
                audit.channels += 1;
                audit.messages += g;
                let ch = p.rt.channels.get(&src).cloned().unwrap_or_default();
                if ch.double_consumes > 0 {
                    audit.violations.push(format!(
                        "{uid}: {} duplicate consumptions from rank {src}",
                        ch.double_consumes
                    ));
                }
                if !ch.consumed().is_exactly_prefix(g) {
                    audit.violations.push(format!(
                        "{uid}: consumed {} ids (prefix {}) from rank {src}, sender counter is {g}",
                        ch.consumed().len(),
                        ch.consumed().prefix()
                    ));
                }
            }
        }
        audit
    }

    pub(crate) fn into_outcome(mut self) -> RunOutcome {
        let end = self.now();
        let buckets = self.ledger.close(end);
        let completed = self.done;
        let n = self.cfg.n;
        let mut rank_states: Vec<Vec<u8>> = Vec::new();
        let mut coherent = true;
        if completed {
            for r in 0..n {
                let cmp = self.world.cmp_group()[r];
                let rep = self.world.replica_of(r);
                let cmp_state = self.procs.get(&cmp).and_then(|p| p.finished.clone());
                let rep_state = rep
                    .and_then(|u| self.procs.get(&u))
                    .and_then(|p| p.finished.clone());
                if let (Some(a), Some(b)) = (&cmp_state, &rep_state) {
                    coherent &= a == b;
                }
                rank_states.push(cmp_state.or(rep_state).unwrap_or_default());
            }
        }
        let checksum = completed.then(|| crate::bench::checksum_of(&rank_states));
        let audit = if completed {
            self.audit()
        } else {
            Audit::default()
        };
        let cores = self.cfg.n + self.cfg.m;
        let flops_total = if completed {
            n as f64
                * self.meta.total_steps.saturating_sub(self.resumed_steps) as f64
                * self.meta.flops_per_step
        } else {
            0.0
        };
        let metrics = Metrics::from_buckets(&buckets, end, cores, flops_total);
        self.stats.transport = self.transport.counters();
        self.stats.interception_forwarded = self.interception.forwarded();
        if completed {
            self.stats.released_observations += self.interception.release().len() as u64;
        }
        RunOutcome {
            app: self.meta.name.clone(),
            n,
            m: self.cfg.m,
            mode: self.cfg.mode,
            seed: self.cfg.seed,
            completed,
            halted: self.halted && !completed,
            aborted: self.aborted.clone(),
            checksum,
            rank_checksums: rank_states
                .iter()
                .map(|s| crate::checkpoint::digest_hex(s))
                .collect(),
            replicas_coherent: coherent && self.stats.coherence_violations == 0,
            end_time: end,
            trace_hash: self.trace.hash_hex(),
            trace_dump: self.trace.take_dump(),
            metrics,
            stats: self.stats,
            audit,
            failures: self.failures,
            final_world: self.world,
            incarnation: self.incarnation,
        }
    }
}
