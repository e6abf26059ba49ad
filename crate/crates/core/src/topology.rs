//! Process identity and the computational/replica split.
//!
//! A job is launched with `N + M` processes. The first `N` are computational
//! and carry the application-visible logical ranks `0..N`; the last `M` are
//! replicas of logical ranks `0..M`. Every communication is resolved against a
//! [`WorldView`], an immutable snapshot of the live processes and of the six
//! logical communicators built from them. Repair never mutates a view in
//! place: [`WorldView::shrink`] returns the next epoch.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Globally unique process identifier. Never reused within a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProcessId(pub u64);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Cmp,
    Rep,
}

/// What a live process is doing for the application.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Role {
    pub side: Side,
    pub logical_rank: usize,
}

/// Names one of the intra-communicator groups of a [`WorldView`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupRef {
    World,
    Cmp,
    Rep,
    CmpNoRep,
}

/// An inter-communicator linking two groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bridge {
    pub local: GroupRef,
    pub remote: GroupRef,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("replica count {m} exceeds process count {n}")]
    TooManyReplicas { n: usize, m: usize },
    #[error("expected {expected} process ids, got {got}")]
    WrongUidCount { expected: usize, got: usize },
    #[error("duplicate process id {0}")]
    DuplicateUid(ProcessId),
    #[error("logical ranks {0:?} lost every copy")]
    Unrecoverable(Vec<usize>),
    #[error("logical rank {0} has no live replica")]
    NoReplica(usize),
    #[error("logical rank {rank} out of range for width {width}")]
    RankOutOfRange { rank: usize, width: usize },
    #[error("world invariant violated: {0}")]
    Invariant(String),
}

/// Live process topology for one repair epoch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldView {
    n_cmp: usize,
    n_rep: usize,
    world: Vec<ProcessId>,
    cmp_group: Vec<ProcessId>,
    rep_group: Vec<ProcessId>,
    cmp_no_rep_group: Vec<ProcessId>,
    cmp_rep_bridge: Option<Bridge>,
    cmp_no_rep_bridge: Option<Bridge>,
    replica_map: BTreeMap<usize, ProcessId>,
    epoch: u64,
}

impl WorldView {
    /// Launch layout: `uids[..n]` are computational ranks `0..n`,
    /// `uids[n..]` replicate ranks `0..m`.
    pub fn build(n: usize, m: usize, uids: &[ProcessId]) -> Result<Self, TopologyError> {
        if m > n {
            return Err(TopologyError::TooManyReplicas { n, m });
        }
        if uids.len() != n + m {
            return Err(TopologyError::WrongUidCount {
                expected: n + m,
                got: uids.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for uid in uids {
            if !seen.insert(*uid) {
                return Err(TopologyError::DuplicateUid(*uid));
            }
        }
        let cmp = uids[..n].to_vec();
        let replica_map = uids[n..].iter().enumerate().map(|(r, u)| (r, *u)).collect();
        Ok(Self::assemble(cmp, replica_map, 0))
    }

    fn assemble(cmp: Vec<ProcessId>, replica_map: BTreeMap<usize, ProcessId>, epoch: u64) -> Self {
        // rep_group is ordered by the logical rank each replica mirrors; its
        // positions are the replicas' ranks inside the replica communicator.
        let rep_group: Vec<ProcessId> = replica_map.values().copied().collect();
        let cmp_no_rep_group: Vec<ProcessId> = cmp
            .iter()
            .enumerate()
            .filter(|(r, _)| !replica_map.contains_key(r))
            .map(|(_, u)| *u)
            .collect();
        let mut world = cmp.clone();
        world.extend(rep_group.iter().copied());
        let cmp_rep_bridge = (!rep_group.is_empty()).then_some(Bridge {
            local: GroupRef::Cmp,
            remote: GroupRef::Rep,
        });
        let cmp_no_rep_bridge =
            (!rep_group.is_empty() && !cmp_no_rep_group.is_empty()).then_some(Bridge {
                local: GroupRef::CmpNoRep,
                remote: GroupRef::Rep,
            });
        Self {
            n_cmp: cmp.len(),
            n_rep: rep_group.len(),
            world,
            cmp_group: cmp,
            rep_group,
            cmp_no_rep_group,
            cmp_rep_bridge,
            cmp_no_rep_bridge,
            replica_map,
            epoch,
        }
    }

    pub fn n_cmp(&self) -> usize {
        self.n_cmp
    }

    pub fn n_rep(&self) -> usize {
        self.n_rep
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn world(&self) -> &[ProcessId] {
        &self.world
    }

    pub fn cmp_group(&self) -> &[ProcessId] {
        &self.cmp_group
    }

    pub fn rep_group(&self) -> &[ProcessId] {
        &self.rep_group
    }

    pub fn cmp_no_rep_group(&self) -> &[ProcessId] {
        &self.cmp_no_rep_group
    }

    pub fn cmp_rep_bridge(&self) -> Option<Bridge> {
        self.cmp_rep_bridge
    }

    pub fn cmp_no_rep_bridge(&self) -> Option<Bridge> {
        self.cmp_no_rep_bridge
    }

    pub fn replica_map(&self) -> &BTreeMap<usize, ProcessId> {
        &self.replica_map
    }

    pub fn group(&self, group: GroupRef) -> &[ProcessId] {
        match group {
            GroupRef::World => &self.world,
            GroupRef::Cmp => &self.cmp_group,
            GroupRef::Rep => &self.rep_group,
            GroupRef::CmpNoRep => &self.cmp_no_rep_group,
        }
    }

    pub fn contains(&self, uid: ProcessId) -> bool {
        self.world.contains(&uid)
    }

    pub fn role_of(&self, uid: ProcessId) -> Option<Role> {
        if let Some(r) = self.cmp_group.iter().position(|u| *u == uid) {
            return Some(Role {
                side: Side::Cmp,
                logical_rank: r,
            });
        }
        self.replica_map
            .iter()
            .find(|(_, u)| **u == uid)
            .map(|(r, _)| Role {
                side: Side::Rep,
                logical_rank: *r,
            })
    }

    pub fn replica_of(&self, logical_rank: usize) -> Option<ProcessId> {
        self.replica_map.get(&logical_rank).copied()
    }

    /// Resolves a logical rank to the process serving it on `side`.
    pub fn route(
        &self,
        logical_rank: usize,
        side: Side,
    ) -> Result<Option<ProcessId>, TopologyError> {
        if logical_rank >= self.n_cmp {
            return Err(TopologyError::RankOutOfRange {
                rank: logical_rank,
                width: self.n_cmp,
            });
        }
        Ok(match side {
            Side::Cmp => Some(self.cmp_group[logical_rank]),
            Side::Rep => self.replica_of(logical_rank),
        })
    }

    /// Physical destinations for a logical transfer `sender -> dest` issued by
    /// the copy `sender`.
    ///
    /// Computational sources feed computational destinations, replicas feed
    /// replicas, and a computational source stands in for its missing replica
    /// when the destination is replicated. A replica source with no replica
    /// destination sends nothing.
    pub fn transfer_targets(&self, sender: Role, dest: usize) -> Vec<ProcessId> {
        let dest_rep = self.replica_of(dest);
        match sender.side {
            Side::Cmp => {
                let mut out = vec![self.cmp_group[dest]];
                if let Some(rep) = dest_rep {
                    if self.replica_of(sender.logical_rank).is_none() {
                        out.push(rep);
                    }
                }
                out
            }
            Side::Rep => dest_rep.into_iter().collect(),
        }
    }

    /// The copy of logical rank `src` that feeds `receiver` under
    /// [`Self::transfer_targets`].
    pub fn expected_source(&self, receiver: Role, src: usize) -> ProcessId {
        match receiver.side {
            Side::Cmp => self.cmp_group[src],
            Side::Rep => self.replica_of(src).unwrap_or(self.cmp_group[src]),
        }
    }

    /// Removes `failed` and returns the next epoch. Computational processes
    /// with a live replica are replaced by it; dead replicas are dropped.
    /// Ids that are not part of this view are ignored.
    pub fn shrink(&self, failed: &BTreeSet<ProcessId>) -> Result<Self, TopologyError> {
        let mut next = self.remove(failed)?;
        next.epoch = self.epoch + 1;
        Ok(next)
    }

    /// Replaces the computational process of `logical_rank` with its replica.
    /// The promoted process leaves the replica group; nothing backfills it.
    pub fn promote(&self, logical_rank: usize) -> Result<Self, TopologyError> {
        if logical_rank >= self.n_cmp {
            return Err(TopologyError::RankOutOfRange {
                rank: logical_rank,
                width: self.n_cmp,
            });
        }
        if !self.replica_map.contains_key(&logical_rank) {
            return Err(TopologyError::NoReplica(logical_rank));
        }
        let failed = BTreeSet::from([self.cmp_group[logical_rank]]);
        let mut next = self.remove(&failed)?;
        next.epoch = self.epoch + 1;
        Ok(next)
    }

    fn remove(&self, failed: &BTreeSet<ProcessId>) -> Result<Self, TopologyError> {
        let mut cmp = self.cmp_group.clone();
        let mut replica_map = self.replica_map.clone();
        replica_map.retain(|_, u| !failed.contains(u));
        let mut lost = Vec::new();
        for (rank, uid) in cmp.iter_mut().enumerate() {
            if failed.contains(uid) {
                match replica_map.remove(&rank) {
                    Some(rep) => *uid = rep,
                    None => lost.push(rank),
                }
            }
        }
        if !lost.is_empty() {
            return Err(TopologyError::Unrecoverable(lost));
        }
        Ok(Self::assemble(cmp, replica_map, self.epoch))
    }

    /// Checks every structural invariant of the view.
    pub fn check_invariants(&self) -> Result<(), TopologyError> {
        let bad = |msg: String| Err(TopologyError::Invariant(msg));
        if self.cmp_group.len() != self.n_cmp || self.rep_group.len() != self.n_rep {
            return bad("group sizes disagree with counts".into());
        }
        if self.world[..self.n_cmp] != self.cmp_group[..] {
            return bad("cmp group is not the world prefix".into());
        }
        if self.world[self.n_cmp..] != self.rep_group[..] {
            return bad("rep group is not the world suffix".into());
        }
        let unique: BTreeSet<_> = self.world.iter().collect();
        if unique.len() != self.world.len() {
            return bad("duplicate process in world".into());
        }
        if self.replica_map.len() != self.n_rep {
            return bad("replica map size differs from rep group".into());
        }
        if self.replica_map.keys().any(|r| *r >= self.n_cmp) {
            return bad("replica of a non-existent rank".into());
        }
        if self.replica_map.values().copied().collect::<Vec<_>>() != self.rep_group {
            return bad("rep group not ordered by mirrored rank".into());
        }
        let expected_no_rep: Vec<_> = (0..self.n_cmp)
            .filter(|r| !self.replica_map.contains_key(r))
            .map(|r| self.cmp_group[r])
            .collect();
        if expected_no_rep != self.cmp_no_rep_group {
            return bad("cmp_no_rep is not cmp minus replicated ranks".into());
        }
        if self.cmp_rep_bridge.is_some() != (self.n_rep > 0) {
            return bad("cmp/rep bridge presence".into());
        }
        if self.cmp_no_rep_bridge.is_some() != (self.n_rep > 0 && !self.cmp_no_rep_group.is_empty())
        {
            return bad("cmp_no_rep/rep bridge presence".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(range: std::ops::Range<u64>) -> Vec<ProcessId> {
        range.map(ProcessId).collect()
    }

    fn set(v: &[u64]) -> BTreeSet<ProcessId> {
        v.iter().copied().map(ProcessId).collect()
    }

    #[test]
    fn build_partial_replication() {
        let w = WorldView::build(4, 2, &ids(0..6)).unwrap();
        assert_eq!(w.cmp_group(), &ids(0..4)[..]);
        assert_eq!(w.rep_group(), &ids(4..6)[..]);
        assert_eq!(
            w.replica_map(),
            &BTreeMap::from([(0, ProcessId(4)), (1, ProcessId(5))])
        );
        assert_eq!(w.cmp_no_rep_group(), &ids(2..4)[..]);
        assert!(w.cmp_rep_bridge().is_some() && w.cmp_no_rep_bridge().is_some());
        assert_eq!(w.epoch(), 0);
        w.check_invariants().unwrap();
    }

    #[test]
    fn build_without_replicas() {
        let w = WorldView::build(3, 0, &ids(0..3)).unwrap();
        assert!(w.rep_group().is_empty());
        assert_eq!(w.cmp_rep_bridge(), None);
        assert_eq!(w.cmp_no_rep_bridge(), None);
        assert_eq!(w.cmp_no_rep_group(), &ids(0..3)[..]);
    }

    #[test]
    fn build_full_replication() {
        let w = WorldView::build(2, 2, &ids(0..4)).unwrap();
        assert!(w.cmp_no_rep_group().is_empty());
        assert_eq!(w.cmp_no_rep_bridge(), None);
        assert!(w.cmp_rep_bridge().is_some());
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(
            WorldView::build(2, 3, &ids(0..5)),
            Err(TopologyError::TooManyReplicas { n: 2, m: 3 })
        );
        let dup = [ProcessId(0), ProcessId(1), ProcessId(1)];
        assert_eq!(
            WorldView::build(2, 1, &dup),
            Err(TopologyError::DuplicateUid(ProcessId(1)))
        );
    }

    #[test]
    fn shrink_drops_dead_replica() {
        let w = WorldView::build(4, 2, &ids(0..6)).unwrap();
        let s = w.shrink(&set(&[5])).unwrap();
        assert_eq!((s.n_cmp(), s.n_rep()), (4, 1));
        assert_eq!(s.replica_map(), &BTreeMap::from([(0, ProcessId(4))]));
        assert_eq!(s.cmp_no_rep_group(), &ids(1..4)[..]);
        assert_eq!(s.epoch(), 1);
        s.check_invariants().unwrap();
    }

    #[test]
    fn shrink_promotes_replica_of_dead_cmp() {
        let w = WorldView::build(4, 2, &ids(0..6)).unwrap();
        let s = w.shrink(&set(&[1])).unwrap();
        assert_eq!(s.route(1, Side::Cmp).unwrap(), Some(ProcessId(5)));
        assert_eq!((s.n_cmp(), s.n_rep()), (4, 1));
        assert_eq!(s.replica_map(), &BTreeMap::from([(0, ProcessId(4))]));
        assert_eq!(
            s.role_of(ProcessId(5)),
            Some(Role {
                side: Side::Cmp,
                logical_rank: 1
            })
        );
    }

    #[test]
    fn empty_shrink_only_bumps_epoch() {
        let w = WorldView::build(4, 2, &ids(0..6)).unwrap();
        let s = w.shrink(&BTreeSet::new()).unwrap();
        assert_eq!(s.world(), w.world());
        assert_eq!(s.epoch(), 1);
    }

    #[test]
    fn shrink_losing_both_copies_is_unrecoverable() {
        let w = WorldView::build(4, 2, &ids(0..6)).unwrap();
        assert_eq!(
            w.shrink(&set(&[0, 4])),
            Err(TopologyError::Unrecoverable(vec![0]))
        );
        assert_eq!(
            w.shrink(&set(&[3])),
            Err(TopologyError::Unrecoverable(vec![3]))
        );
    }

    #[test]
    fn promote_full_replication() {
        let w = WorldView::build(2, 2, &ids(0..4)).unwrap();
        let p = w.promote(0).unwrap();
        assert_eq!(p.cmp_group(), &[ProcessId(2), ProcessId(1)]);
        assert_eq!(p.rep_group(), &[ProcessId(3)]);
        assert_eq!(p.replica_map(), &BTreeMap::from([(1, ProcessId(3))]));
        p.check_invariants().unwrap();
    }

    #[test]
    fn promote_twice_keeps_width() {
        let w = WorldView::build(4, 4, &ids(0..8)).unwrap();
        let p = w.promote(1).unwrap().promote(3).unwrap();
        assert_eq!((p.n_cmp(), p.n_rep()), (4, 2));
    }

    #[test]
    fn promote_without_replica_fails() {
        let w = WorldView::build(4, 2, &ids(0..6)).unwrap();
        assert_eq!(w.promote(3), Err(TopologyError::NoReplica(3)));
    }

    #[test]
    fn route_lookups() {
        let w = WorldView::build(4, 2, &ids(0..6)).unwrap();
        assert_eq!(w.route(1, Side::Rep).unwrap(), Some(ProcessId(5)));
        assert_eq!(w.route(3, Side::Rep).unwrap(), None);
        assert!(w.route(4, Side::Cmp).is_err());
        let p = w.promote(0).unwrap();
        assert_eq!(p.route(0, Side::Cmp).unwrap(), Some(ProcessId(4)));
    }

    #[test]
    fn transfer_targets_follow_replica_mapping() {
        // N=2, M=1: only rank 0 replicated.
        let w = WorldView::build(2, 1, &ids(0..3)).unwrap();
        let cmp1 = Role {
            side: Side::Cmp,
            logical_rank: 1,
        };
        assert_eq!(
            w.transfer_targets(cmp1, 0),
            vec![ProcessId(0), ProcessId(2)]
        );
        let cmp0 = Role {
            side: Side::Cmp,
            logical_rank: 0,
        };
        assert_eq!(w.transfer_targets(cmp0, 1), vec![ProcessId(1)]);
        let rep0 = Role {
            side: Side::Rep,
            logical_rank: 0,
        };
        assert!(w.transfer_targets(rep0, 1).is_empty());
        assert_eq!(w.expected_source(rep0, 1), ProcessId(1));
        // Full replication never crosses sides.
        let full = WorldView::build(2, 2, &ids(0..4)).unwrap();
        assert_eq!(full.transfer_targets(cmp0, 1), vec![ProcessId(1)]);
        assert_eq!(full.transfer_targets(rep0, 1), vec![ProcessId(3)]);
    }
}
