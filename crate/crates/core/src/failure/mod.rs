//! Failure injection, classification and message recovery.

mod model;
mod recovery;
mod schedule;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use model::{sample_failure_schedule, FailureModel, GapSampler, ModelError, DEFAULT_SHAPE};
pub use recovery::{plan_recovery, CollReplay, ProcView, RecoveryError, RecoveryLedger, Resend};
pub use schedule::{
    format_schedule, parse_schedule, ScheduleParseError, ScheduledFailure, VictimSelector,
};

use crate::topology::{ProcessId, Side, WorldView};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    ReplicaDeath,
    ComputationalDeathPromoted,
    Unrecoverable,
}

/// One process death as seen by the repair machinery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub victim: ProcessId,
    pub time: f64,
    pub detected_at: Option<f64>,
    pub classification: Option<Classification>,
}

/// Classifies every member of `failed` against the world it died in.
pub fn classify(
    world: &WorldView,
    failed: &BTreeSet<ProcessId>,
) -> BTreeMap<ProcessId, Classification> {
    let lost: BTreeSet<usize> = match world.shrink(failed) {
        Ok(_) => BTreeSet::new(),
        Err(crate::topology::TopologyError::Unrecoverable(ranks)) => ranks.into_iter().collect(),
        Err(_) => BTreeSet::new(),
    };
    failed
        .iter()
        .filter_map(|uid| {
            let role = world.role_of(*uid)?;
            let class = if lost.contains(&role.logical_rank) {
                Classification::Unrecoverable
            } else if role.side == Side::Rep {
                Classification::ReplicaDeath
            } else {
                Classification::ComputationalDeathPromoted
            };
            Some((*uid, class))
        })
        .collect()
}
