//! Message reconciliation after a repair.
//!
//! Runs once the wire has been drained and the world shrunk. For every live
//! receiver and every logical source, the copy that will feed the receiver
//! from now on is compared against what the receiver already holds: ids the
//! new source logged but the receiver never got are resent from the log, ids
//! the receiver got but the new source has not produced yet go into the
//! receiver's skip set. Collectives are reconciled afterwards: everything
//! past the global frontier is re-sent from each process's collective log
//! under the new routing and duplicates are dropped on arrival.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runtime::{CollectiveError, ProcRuntime, SendLogEntry, Transfer};
use crate::topology::{ProcessId, Role, WorldView};

/// What the planner needs to know about one live process.
#[derive(Clone, Copy)]
pub struct ProcView<'a> {
    pub role: Role,
    pub rt: &'a ProcRuntime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resend {
    pub from: ProcessId,
    pub to: ProcessId,
    pub src_rank: usize,
    pub entry: SendLogEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollReplay {
    pub from: ProcessId,
    pub seq: u64,
    pub transfer: Transfer,
}

/// Outcome of the reconciliation exchange.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecoveryLedger {
    /// `(receiver, source rank)` -> contiguous received prefix.
    pub received_upto: BTreeMap<(ProcessId, usize), u64>,
    /// `(receiver, source rank)` -> ids to suppress on arrival.
    pub skips: BTreeMap<(ProcessId, usize), Vec<u64>>,
    pub resends: Vec<Resend>,
    /// Smallest completed collective sequence number over live processes.
    pub frontier: u64,
    pub replays: Vec<CollReplay>,
}

impl RecoveryLedger {
    pub fn is_noop(&self) -> bool {
        self.resends.is_empty() && self.skips.is_empty() && self.replays.is_empty()
    }

    /// Checks that no id is both resent to and skipped at the same receiver.
    pub fn is_consistent(&self) -> bool {
        self.resends.iter().all(|r| {
            let key = (r.to, r.src_rank);
            !self
                .skips
                .get(&key)
                .is_some_and(|s| s.contains(&r.entry.send_id))
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("{sender} needs to resend id {send_id} to rank {dest_rank} but the entry was trimmed")]
    LogGap {
        sender: ProcessId,
        dest_rank: usize,
        send_id: u64,
    },
    #[error("no live process serves logical rank {0}")]
    MissingSource(usize),
    #[error(transparent)]
    Collective(#[from] CollectiveError),
}

pub fn plan_recovery(
    world: &WorldView,
    procs: &BTreeMap<ProcessId, ProcView<'_>>,
) -> Result<RecoveryLedger, RecoveryError> {
    let mut ledger = RecoveryLedger::default();
    let n = world.n_cmp();
    for (&to, view) in procs {
        let me = view.role.logical_rank;
        for src in 0..n {
            let from = world.expected_source(view.role, src);
            let sender = procs.get(&from).ok_or(RecoveryError::MissingSource(src))?;
            let g = sender.rt.send_log.counter(me);
            let received = view
                .rt
                .channels
                .get(&src)
                .map(|c| c.received().clone())
                .unwrap_or_default();
            ledger.received_upto.insert((to, src), received.prefix());
            for send_id in received.missing_up_to(g) {
                let entry = sender
                    .rt
                    .send_log
                    .entry(me, send_id)
                    .ok_or(RecoveryError::LogGap {
                        sender: from,
                        dest_rank: me,
                        send_id,
                    })?;
                ledger.resends.push(Resend {
                    from,
                    to,
                    src_rank: src,
                    entry: entry.clone(),
                });
            }
            let ahead = received.above(g);
            if !ahead.is_empty() {
                ledger.skips.insert((to, src), ahead);
            }
        }
    }

    ledger.frontier = procs
        .values()
        .map(|v| v.rt.coll.completed)
        .min()
        .unwrap_or(0);
    let mut digests: BTreeMap<u64, u64> = BTreeMap::new();
    for (&from, view) in procs {
        for (&seq, entry) in view.rt.coll.log.range(ledger.frontier + 1..) {
            let d = *digests.entry(seq).or_insert(entry.digest);
            if d != entry.digest {
                return Err(CollectiveError::Mismatch {
                    seq,
                    mine: entry.digest,
                    theirs: d,
                }
                .into());
            }
            for t in &entry.outgoing {
                ledger.replays.push(CollReplay {
                    from,
                    seq,
                    transfer: t.clone(),
                });
            }
        }
    }
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::DrainedChunk;
    use crate::topology::Side;
    use std::collections::BTreeSet;

    fn chunk(id: u64) -> DrainedChunk {
        DrainedChunk {
            source: ProcessId(0),
            send_id: id,
            tag: 0,
            payload: vec![],
            drained: false,
            matched: false,
        }
    }

    #[test]
    fn no_failure_is_a_fixed_point() {
        let world = WorldView::build(2, 0, &[ProcessId(0), ProcessId(1)]).unwrap();
        let mut a = ProcRuntime::default();
        let mut b = ProcRuntime::default();
        a.send_log.append(1, 0, vec![1], 0.0);
        b.channel(0).accept(chunk(1));
        let procs = BTreeMap::from([
            (
                ProcessId(0),
                ProcView {
                    role: Role {
                        side: Side::Cmp,
                        logical_rank: 0,
                    },
                    rt: &a,
                },
            ),
            (
                ProcessId(1),
                ProcView {
                    role: Role {
                        side: Side::Cmp,
                        logical_rank: 1,
                    },
                    rt: &b,
                },
            ),
        ]);
        assert!(plan_recovery(&world, &procs).unwrap().is_noop());
    }

    #[test]
    fn promoted_replica_ahead_and_behind() {
        // N=2, M=2. cmp1 (uid 1) dies. rep1 (uid 3) is promoted.
        // rep1 received ids 1..=3 from rep0; cmp0 has sent only 1..=2 to rank 1
        // so far: id 3 must be skipped. cmp0 received 1..=1 from cmp1 but
        // rep1 logged 1..=2: id 2 must be resent.
        let world = WorldView::build(2, 2, &[0, 1, 2, 3].map(ProcessId)).unwrap();
        let next = world.shrink(&BTreeSet::from([ProcessId(1)])).unwrap();
        let mut cmp0 = ProcRuntime::default();
        let mut rep0 = ProcRuntime::default();
        let mut rep1 = ProcRuntime::default();
        for _ in 0..2 {
            cmp0.send_log.append(1, 0, vec![], 0.0);
        }
        for _ in 0..3 {
            rep0.send_log.append(1, 0, vec![], 0.0);
        }
        for id in 1..=3 {
            rep1.channel(0).accept(chunk(id));
        }
        for _ in 0..2 {
            rep1.send_log.append(0, 0, vec![], 0.0);
        }
        cmp0.channel(1).accept(chunk(1));
        rep0.channel(1).accept(chunk(1));
        rep0.channel(1).accept(chunk(2));
        let cmp = |r| Role {
            side: Side::Cmp,
            logical_rank: r,
        };
        let procs = BTreeMap::from([
            (
                ProcessId(0),
                ProcView {
                    role: cmp(0),
                    rt: &cmp0,
                },
            ),
            (
                ProcessId(2),
                ProcView {
                    role: Role {
                        side: Side::Rep,
                        logical_rank: 0,
                    },
                    rt: &rep0,
                },
            ),
            (
                ProcessId(3),
                ProcView {
                    role: cmp(1),
                    rt: &rep1,
                },
            ),
        ]);
        let plan = plan_recovery(&next, &procs).unwrap();
        assert_eq!(plan.skips.get(&(ProcessId(3), 0)), Some(&vec![3]));
        let resent: Vec<_> = plan
            .resends
            .iter()
            .map(|r| (r.from, r.to, r.entry.send_id))
            .collect();
        assert_eq!(resent, vec![(ProcessId(3), ProcessId(0), 2)]);
        assert!(plan.is_consistent());
    }

    #[test]
    fn trimmed_entry_is_a_log_gap() {
        let world = WorldView::build(2, 0, &[ProcessId(0), ProcessId(1)]).unwrap();
        let mut a = ProcRuntime::default();
        let b = ProcRuntime::default();
        a.send_log.append(1, 0, vec![1], 0.0);
        a.send_log.trim_before(1.0);
        let procs = BTreeMap::from([
            (
                ProcessId(0),
                ProcView {
                    role: Role {
                        side: Side::Cmp,
                        logical_rank: 0,
                    },
                    rt: &a,
                },
            ),
            (
                ProcessId(1),
                ProcView {
                    role: Role {
                        side: Side::Cmp,
                        logical_rank: 1,
                    },
                    rt: &b,
                },
            ),
        ]);
        assert!(matches!(
            plan_recovery(&world, &procs),
            Err(RecoveryError::LogGap { send_id: 1, .. })
        ));
    }
}
