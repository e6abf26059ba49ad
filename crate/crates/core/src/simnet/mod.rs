//! Discrete-event substrate.
//!
//! Everything that happens in a run is an event on a single queue ordered by
//! `(time, seq)`. Ties on simulated time are broken by the order in which the
//! events were scheduled, so a fixed seed and configuration always produce
//! the same dispatch sequence.

mod coord;
mod queue;
mod trace;
mod transport;

use serde::{Deserialize, Serialize};

pub use coord::{Coordinator, CoordinatorLayout, Propagation};
pub use queue::{EventId, EventQueue, ScheduleError, SimClock};
pub use trace::Trace;
pub use transport::{
    EnvId, Envelope, InterceptionLayer, NativeAbort, NativeTransport, Observation, ObservationKind,
    Payload, PeerStatus, TransportCounters,
};

pub const MIB: u64 = 1 << 20;

/// How the per-node server process learns about a dead child.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationStyle {
    /// `waitpid`-like: the observation names the dead process.
    #[default]
    Waitpid,
    /// `poll`-like: only "something died"; the coordinator polls its members.
    Poll,
}

/// Checkpoint file I/O cost model.
///
/// A wave of `n` incremental records costs
/// `latency_s + n * state_bytes / bandwidth_bytes_per_s`. The defaults put an
/// 8192-rank job with 64 MiB of state per rank at roughly 215 s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StorageModel {
    pub latency_s: f64,
    pub bandwidth_bytes_per_s: f64,
    pub baseline_bytes_per_process: u64,
}

impl Default for StorageModel {
    fn default() -> Self {
        Self {
            latency_s: 22.0,
            bandwidth_bytes_per_s: 2.85e9,
            baseline_bytes_per_process: 16 * MIB,
        }
    }
}

impl StorageModel {
    pub fn wave_seconds(&self, records: usize, state_bytes_per_rank: u64) -> f64 {
        self.latency_s + records as f64 * state_bytes_per_rank as f64 / self.bandwidth_bytes_per_s
    }

    pub fn baseline_seconds(&self, processes: usize) -> f64 {
        processes as f64 * self.baseline_bytes_per_process as f64 / self.bandwidth_bytes_per_s
    }
}

/// Substrate configuration. Loadable from JSON; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub latency_base_s: f64,
    pub latency_per_byte_s: f64,
    /// Virtual processes per node; one coordinator per node.
    pub node_size: usize,
    /// Coordinator node groups; `None` means `round(sqrt(nodes))`.
    pub coordinator_groups: Option<usize>,
    /// One inter-coordinator message.
    pub coordinator_hop_s: f64,
    /// Creating one communicator during repair.
    pub comm_create_s: f64,
    /// Latency of one control message in the repair exchange. Defaults to
    /// the data-plane latency of an 8-byte message.
    pub control_latency_s: Option<f64>,
    /// Each compute phase lasts `1 + compute_jitter * u` times its nominal
    /// length, `u` uniform in `[0, 1)` per process. Lets copies of a rank
    /// drift apart.
    pub compute_jitter: f64,
    pub storage: StorageModel,
    /// When false, the native transport sees failures and aborts the job.
    pub interception: bool,
    pub observation: ObservationStyle,
    pub log_trim_threshold_bytes: u64,
    /// Memory bandwidth used to charge log trimming.
    pub memory_bandwidth_bytes_per_s: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            latency_base_s: 1e-6,
            latency_per_byte_s: 1e-9,
            node_size: 48,
            coordinator_groups: None,
            coordinator_hop_s: 50e-6,
            comm_create_s: 1e-3,
            control_latency_s: None,
            compute_jitter: 0.0,
            storage: StorageModel::default(),
            interception: true,
            observation: ObservationStyle::Waitpid,
            log_trim_threshold_bytes: 64 * MIB,
            memory_bandwidth_bytes_per_s: 1e10,
            seed: 0,
        }
    }
}

/// Fixed per-envelope header size used by the latency model.
pub const ENVELOPE_HEADER_BYTES: usize = 32;

impl SimConfig {
    pub fn latency(&self, payload_bytes: usize) -> f64 {
        self.latency_base_s
            + (payload_bytes + ENVELOPE_HEADER_BYTES) as f64 * self.latency_per_byte_s
    }

    /// Global repair window for a world of `processes`: recreate the six
    /// communicators, then two all-to-all exchanges of receive bookkeeping.
    pub fn repair_seconds(&self, processes: usize) -> f64 {
        let hop = self.control_latency_s.unwrap_or_else(|| self.latency(8));
        6.0 * self.comm_create_s + 2.0 * processes as f64 * hop
    }

    /// Relaunching a whole job: a fresh world and its communicators.
    pub fn relaunch_seconds(&self) -> f64 {
        6.0 * self.comm_create_s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_storage_matches_large_hpcg_wave() {
        let c = StorageModel::default().wave_seconds(8192, 64 * MIB);
        assert!((c - 215.0).abs() < 1.0, "{c}");
    }

    #[test]
    fn config_json_fills_defaults() {
        let cfg = SimConfig::from_json(r#"{"node_size": 4, "seed": 9}"#).unwrap();
        assert_eq!(cfg.node_size, 4);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.latency_base_s, 1e-6);
        assert!((cfg.latency(968) - 2e-6).abs() < 1e-15);
    }
}
