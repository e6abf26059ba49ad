use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use ftsim::topology::{ProcessId, Role, Side, TopologyError, WorldView};

/// Copies of each logical rank, computational copy first.
type Copies = BTreeMap<usize, Vec<ProcessId>>;

fn copies_of(w: &WorldView) -> Copies {
    (0..w.n_cmp())
        .map(|r| {
            let mut c = vec![w.cmp_group()[r]];
            c.extend(w.replica_of(r));
            (r, c)
        })
        .collect()
}

/// What a shrink should leave behind, computed without `WorldView`.
fn expected_shrink(before: &Copies, failed: &BTreeSet<ProcessId>) -> Result<Copies, Vec<usize>> {
    let mut lost = Vec::new();
    let mut out = Copies::new();
    for (r, copies) in before {
        let live: Vec<_> = copies
            .iter()
            .copied()
            .filter(|u| !failed.contains(u))
            .collect();
        if live.is_empty() {
            lost.push(*r);
        }
        out.insert(*r, live);
    }
    if lost.is_empty() {
        Ok(out)
    } else {
        Err(lost)
    }
}

fn fresh(n: usize, m: usize) -> WorldView {
    let uids: Vec<_> = (0..(n + m) as u64).map(ProcessId).collect();
    WorldView::build(n, m, &uids).unwrap()
}

/// Every live copy of `dest` hears from exactly one copy of every `src`,
/// and that copy is `expected_source`.
fn check_routing(w: &WorldView) -> Result<(), String> {
    let roles: Vec<(ProcessId, Role)> = w
        .world()
        .iter()
        .map(|u| (*u, w.role_of(*u).unwrap()))
        .collect();
    for src in 0..w.n_cmp() {
        for (receiver, rrole) in &roles {
            let feeders: Vec<ProcessId> = roles
                .iter()
                .filter(|(_, s)| s.logical_rank == src)
                .filter(|(_, s)| {
                    w.transfer_targets(*s, rrole.logical_rank)
                        .contains(receiver)
                })
                .map(|(u, _)| *u)
                .collect();
            if feeders != [w.expected_source(*rrole, src)] {
                return Err(format!(
                    "{receiver:?} ({rrole:?}) fed by {feeders:?} for source rank {src}"
                ));
            }
        }
    }
    Ok(())
}

#[test]
fn every_small_world_routes_each_transfer_once() {
    for n in 1..=4 {
        for m in 0..=n {
            let w = fresh(n, m);
            w.check_invariants().unwrap();
            check_routing(&w).unwrap_or_else(|e| panic!("n={n} m={m}: {e}"));
        }
    }
}

#[test]
fn every_failure_set_of_every_small_world() {
    for n in 1..=4 {
        for m in 0..=n {
            let w = fresh(n, m);
            let before = copies_of(&w);
            let all = w.world().to_vec();
            for mask in 0u32..(1 << all.len()) {
                let failed: BTreeSet<_> = (0..all.len())
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| all[i])
                    .collect();
                match (w.shrink(&failed), expected_shrink(&before, &failed)) {
                    (Ok(s), Ok(want)) => {
                        assert_eq!(copies_of(&s), want, "n={n} m={m} failed={failed:?}");
                        assert_eq!(s.n_cmp(), n);
                        assert_eq!(s.epoch(), 1);
                        s.check_invariants().unwrap();
                        check_routing(&s)
                            .unwrap_or_else(|e| panic!("n={n} m={m} failed={failed:?}: {e}"));
                    }
                    (Err(TopologyError::Unrecoverable(got)), Err(want)) => assert_eq!(got, want),
                    (got, want) => panic!("n={n} m={m} failed={failed:?}: {got:?} vs {want:?}"),
                }
            }
        }
    }
}

#[test]
fn promote_swaps_in_the_replica() {
    let w = fresh(3, 2);
    let p = w.promote(1).unwrap();
    assert_eq!(p.route(1, Side::Cmp).unwrap(), Some(ProcessId(4)));
    assert_eq!(p.replica_of(1), None);
    assert!(!p.contains(ProcessId(1)));
    assert_eq!(w.promote(2), Err(TopologyError::NoReplica(2)));
}

proptest! {
    /// Failures arriving in rounds, with each round repaired before the
    /// next, behave like the oracle applied round by round.
    #[test]
    fn repeated_shrinks_match_the_oracle(
        n in 1usize..=8,
        frac in 0.0f64..=1.0,
        rounds in proptest::collection::vec(proptest::collection::vec(0u64..16, 0..3), 1..6),
    ) {
        let m = ((n as f64) * frac).round() as usize;
        let mut w = fresh(n, m);
        let mut copies = copies_of(&w);
        for (i, round) in rounds.iter().enumerate() {
            let failed: BTreeSet<ProcessId> = round.iter().copied().map(ProcessId).collect();
            match (w.shrink(&failed), expected_shrink(&copies, &failed)) {
                (Ok(s), Ok(want)) => {
                    prop_assert_eq!(copies_of(&s), want.clone());
                    prop_assert_eq!(s.epoch(), i as u64 + 1);
                    prop_assert!(s.check_invariants().is_ok());
                    prop_assert!(check_routing(&s).is_ok());
                    w = s;
                    copies = want;
                }
                (Err(TopologyError::Unrecoverable(got)), Err(want)) => {
                    prop_assert_eq!(got, want);
                    break;
                }
                (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
            }
        }
    }
}
