use serde::{Deserialize, Serialize};

use crate::bench::Metrics;
use crate::checkpoint::Mode;
use crate::failure::FailureEvent;
use crate::simnet::TransportCounters;
use crate::topology::WorldView;

/// Counters gathered while a run executes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub events: u64,
    pub envelopes: u64,
    pub sends: u64,
    pub collectives: u64,
    pub kills: u64,
    /// Scheduled failures that found no eligible victim.
    pub kills_skipped: u64,
    pub detections: u64,
    pub repairs: u64,
    /// Repairs restarted because another failure arrived mid-repair.
    pub repair_restarts: u64,
    pub promotions: u64,
    pub restarts: u64,
    pub incarnations: u64,
    pub restores: u64,
    /// Repairs abandoned for a restart because reconciliation failed.
    pub recovery_fallbacks: u64,
    pub last_recovery_error: Option<String>,
    pub resends: u64,
    pub skips: u64,
    pub replayed_transfers: u64,
    pub frontier_max: u64,
    pub drained_chunks: u64,
    pub dropped_to_dead: u64,
    pub waves_requested: u64,
    pub waves_committed: u64,
    pub waves_aborted: u64,
    pub waves_cancelled: u64,
    pub wave_request_times: Vec<f64>,
    pub coherence_violations: u64,
    pub trims: u64,
    pub trimmed_bytes: u64,
    /// Per-core seconds thrown away by job restarts.
    pub lost_work_s: f64,
    pub coordinator_messages: u64,
    pub coordinator_polls: u64,
    pub interception_forwarded: u64,
    pub released_observations: u64,
    pub transport: TransportCounters,
}

/// Exactly-once check over every logical channel at the end of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub channels: u64,
    /// Sum of final send counters over audited channels.
    pub messages: u64,
    pub violations: Vec<String>,
}

impl Audit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutcome {
    pub app: String,
    pub n: usize,
    pub m: usize,
    pub mode: Mode,
    pub seed: u64,
    pub completed: bool,
    /// Stopped by `stop_at` or `halt_after_events` before completing.
    pub halted: bool,
    /// Set when the native transport aborted the job.
    pub aborted: Option<String>,
    /// Digest over the final state of every logical rank.
    pub checksum: Option<String>,
    pub rank_checksums: Vec<String>,
    pub replicas_coherent: bool,
    pub end_time: f64,
    pub trace_hash: String,
    #[serde(skip)]
    pub trace_dump: Option<String>,
    pub metrics: Metrics,
    pub stats: RunStats,
    pub audit: Audit,
    pub failures: Vec<FailureEvent>,
    #[serde(skip_serializing, default = "empty_world")]
    pub final_world: WorldView,
    pub incarnation: u64,
}

fn empty_world() -> WorldView {
    WorldView::build(0, 0, &[]).expect("empty world is valid")
}
