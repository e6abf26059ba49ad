//! Per-node checkpoint coordinators arranged in node groups.
//!
//! Node 0 hosts the primary coordinator, which owns the checkpoint timer and
//! leads its own group. Other groups are led by their lowest-numbered node.
//! A non-leader only ever talks to the primary through its group leader.

use std::collections::BTreeSet;

use crate::simnet::ObservationStyle;
use crate::topology::ProcessId;

#[derive(Clone, Debug, PartialEq)]
pub struct Coordinator {
    pub node_id: usize,
    pub local_members: Vec<ProcessId>,
    pub group_leader: usize,
    pub is_primary: bool,
    /// Next checkpoint deadline; only the primary keeps one.
    pub ckpt_timer: Option<f64>,
    known_dead: BTreeSet<ProcessId>,
}

/// Outcome of pushing one piece of information through the hierarchy.
#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    /// Inter-coordinator hops until each node's coordinator knows.
    pub hops_to: Vec<usize>,
    /// Simulated time until each node's coordinator knows.
    pub latency_to: Vec<f64>,
    /// Messages sent by each coordinator.
    pub sent_by: Vec<usize>,
}

impl Propagation {
    pub fn messages(&self) -> usize {
        self.sent_by.iter().sum()
    }

    pub fn max_latency(&self) -> f64 {
        self.latency_to.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct CoordinatorLayout {
    coords: Vec<Coordinator>,
    group_size: usize,
    node_size: usize,
}

impl CoordinatorLayout {
    /// Lays out `slots` process slots on nodes of `node_size`, with `groups`
    /// node groups (default `round(sqrt(nodes))`).
    pub fn new(slots: usize, node_size: usize, groups: Option<usize>) -> Self {
        let node_size = node_size.max(1);
        let nodes = slots.div_ceil(node_size).max(1);
        let g = groups
            .unwrap_or_else(|| (nodes as f64).sqrt().round() as usize)
            .clamp(1, nodes);
        let group_size = nodes.div_ceil(g);
        let coords = (0..nodes)
            .map(|node| Coordinator {
                node_id: node,
                local_members: Vec::new(),
                group_leader: (node / group_size) * group_size,
                is_primary: node == 0,
                ckpt_timer: None,
                known_dead: BTreeSet::new(),
            })
            .collect();
        Self {
            coords,
            group_size,
            node_size,
        }
    }

    pub fn nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn groups(&self) -> usize {
        self.coords.len().div_ceil(self.group_size)
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn coordinator(&self, node: usize) -> &Coordinator {
        &self.coords[node]
    }

    pub fn primary_mut(&mut self) -> &mut Coordinator {
        &mut self.coords[0]
    }

    pub fn node_of_slot(&self, slot: usize) -> usize {
        (slot / self.node_size).min(self.coords.len() - 1)
    }

    /// Replaces node membership from `(slot, uid)` pairs.
    pub fn assign<I: IntoIterator<Item = (usize, ProcessId)>>(&mut self, members: I) {
        for c in &mut self.coords {
            c.local_members.clear();
        }
        for (slot, uid) in members {
            let node = self.node_of_slot(slot);
            self.coords[node].local_members.push(uid);
        }
    }

    fn up_hops(&self, node: usize) -> usize {
        let leader = self.coords[node].group_leader;
        usize::from(node != leader) + usize::from(leader != 0)
    }

    fn down_hops(&self, node: usize) -> usize {
        if node == 0 {
            return 0;
        }
        let leader = self.coords[node].group_leader;
        // Members of the primary's group hear from the primary directly.
        usize::from(leader != 0) + usize::from(node != leader)
    }

    /// Primary-rooted fan-out: primary to its own group and to every other
    /// leader, leaders to their members.
    pub fn broadcast_from_primary(&self, hop_s: f64) -> Propagation {
        let n = self.nodes();
        let mut sent_by = vec![0; n];
        for node in 1..n {
            let leader = self.coords[node].group_leader;
            if leader == 0 || node == leader {
                sent_by[0] += 1;
            } else {
                sent_by[leader] += 1;
            }
        }
        let hops_to: Vec<usize> = (0..n).map(|node| self.down_hops(node)).collect();
        let latency_to = hops_to.iter().map(|h| *h as f64 * hop_s).collect();
        Propagation {
            hops_to,
            latency_to,
            sent_by,
        }
    }

    /// A failure observed on `origin` goes up to the primary and then back
    /// down to every coordinator. A poll-style observation first costs the
    /// origin a round trip to each of its local members.
    pub fn propagate_failure(
        &self,
        origin: usize,
        style: ObservationStyle,
        hop_s: f64,
    ) -> Propagation {
        let mut down = self.broadcast_from_primary(hop_s);
        let up = self.up_hops(origin);
        let leader = self.coords[origin].group_leader;
        if origin != leader {
            down.sent_by[origin] += 1;
        }
        if leader != 0 {
            down.sent_by[leader] += 1;
        }
        let poll = match style {
            ObservationStyle::Waitpid => 0.0,
            ObservationStyle::Poll => 2.0 * hop_s,
        };
        for (node, hops) in down.hops_to.iter_mut().enumerate() {
            *hops = if node == origin { 0 } else { *hops + up };
            down.latency_to[node] = poll + *hops as f64 * hop_s;
        }
        down
    }

    /// Records that `node`'s coordinator knows `uid` is dead.
    pub fn learn(&mut self, node: usize, uid: ProcessId) {
        self.coords[node].known_dead.insert(uid);
    }

    pub fn learn_everywhere(&mut self, uid: ProcessId) {
        for c in &mut self.coords {
            c.known_dead.insert(uid);
        }
    }

    /// Resolves an unidentified observation by polling the node's members.
    pub fn poll_members<F: Fn(ProcessId) -> bool>(&self, node: usize, is_up: F) -> Vec<ProcessId> {
        self.coords[node]
            .local_members
            .iter()
            .copied()
            .filter(|u| !is_up(*u))
            .collect()
    }

    /// Dead processes this coordinator has been told about.
    pub fn observe_failures(&self, node: usize) -> BTreeSet<ProcessId> {
        self.coords[node].known_dead.clone()
    }

    pub fn forget_failures(&mut self) {
        for c in &mut self.coords {
            c.known_dead.clear();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_nodes_two_groups() {
        let layout = CoordinatorLayout::new(16, 4, Some(2));
        assert_eq!(layout.nodes(), 4);
        assert_eq!(layout.groups(), 2);
        assert_eq!(layout.coordinator(3).group_leader, 2);
        assert!(layout.coordinator(0).is_primary);
        // Leader of group 1 to a member of the primary's group: 2 -> 0 -> 1.
        let p = layout.propagate_failure(2, ObservationStyle::Waitpid, 1.0);
        assert_eq!(p.hops_to[1], 2);
        assert_eq!(p.hops_to[2], 0);
        assert!(p.hops_to.iter().all(|h| *h <= 4));
    }

    #[test]
    fn broadcast_is_linear_in_nodes() {
        let layout = CoordinatorLayout::new(64 * 48, 48, None);
        assert_eq!(layout.groups(), 8);
        let p = layout.broadcast_from_primary(1.0);
        assert_eq!(p.messages(), layout.nodes() - 1);
        let per_coord = layout.groups() + layout.group_size();
        assert!(p.sent_by.iter().all(|s| *s <= per_coord));
    }

    #[test]
    fn poll_identifies_dead_members() {
        let mut layout = CoordinatorLayout::new(8, 4, None);
        layout.assign((0..8).map(|s| (s, ProcessId(s as u64))));
        let dead = layout.poll_members(1, |u| u != ProcessId(6));
        assert_eq!(dead, vec![ProcessId(6)]);
        assert!(layout.observe_failures(1).is_empty());
        layout.learn_everywhere(ProcessId(6));
        assert_eq!(layout.observe_failures(0), BTreeSet::from([ProcessId(6)]));
    }
}
