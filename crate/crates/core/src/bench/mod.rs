//! Mini-apps, the efficiency model, campaigns and reports.

pub mod apps;
mod campaign;
mod report;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use campaign::{
    reference_metrics, run_campaign, run_one, Aggregate, CampaignConfig, CampaignError,
    CampaignResult, MeanStd, SeedRow, SweepConfig,
};
pub use report::{
    emit_report, read_results, row_record, write_results, ReportError, ReportFormat,
    AGGREGATE_COLUMNS, CSV_COLUMNS, RESULTS_FILE,
};

use crate::engine::{Bucket, BucketTimes};
use crate::runtime::Comm;

/// A deterministic SPMD application.
///
/// `step` must be a pure function of the state and the messages it
/// receives; recovery relies on replaying it.
pub trait MiniApp: Clone + Send + Sync + 'static {
    type State: Serialize + DeserializeOwned + Clone + 'static;

    fn name(&self) -> &str;
    fn total_steps(&self) -> u64;
    /// Floating-point operations one rank performs in one step.
    fn flops_per_step(&self) -> f64;
    fn init(&self, rank: usize, n: usize) -> Self::State;
    #[allow(async_fn_in_trait)]
    async fn step(&self, state: &mut Self::State, comm: &Comm, step: u64);
}

/// Digest over per-rank final states, in rank order. This is what
/// [`crate::RunOutcome::checksum`] reports.
pub fn checksum_of(rank_states: &[Vec<u8>]) -> String {
    let mut all = Vec::new();
    for s in rank_states {
        all.extend_from_slice(&(s.len() as u64).to_le_bytes());
        all.extend_from_slice(s);
    }
    crate::checkpoint::digest_hex(&all)
}

/// Checksum of states computed outside the simulator.
pub fn checksum_states<S: Serialize>(states: &[S]) -> String {
    let bytes: Vec<Vec<u8>> = states
        .iter()
        .map(|s| bincode::serialize(s).expect("state serializes"))
        .collect();
    checksum_of(&bytes)
}

/// Per-core time distribution and performance of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub useful_work_s: f64,
    pub redundant_work_s: f64,
    pub checkpoint_create_s: f64,
    pub restore_s: f64,
    pub rollback_s: f64,
    pub log_removal_s: f64,
    pub idle_s: f64,
    pub total_s: f64,
    pub cores: usize,
    pub flops_total: f64,
    /// FLOPS per core: `flops_total / total_s / cores`.
    pub flops_per_core: f64,
    /// Set by [`compute_efficiency`] against a reference run.
    pub efficiency: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("reference run has no floating-point throughput")]
    ZeroReference,
}

impl Metrics {
    pub fn from_buckets(b: &BucketTimes, total_s: f64, cores: usize, flops_total: f64) -> Self {
        let flops_per_core = if total_s > 0.0 && cores > 0 {
            flops_total / total_s / cores as f64
        } else {
            0.0
        };
        Self {
            useful_work_s: b.get(Bucket::Useful),
            redundant_work_s: b.get(Bucket::Redundant),
            checkpoint_create_s: b.get(Bucket::Create),
            restore_s: b.get(Bucket::Restore),
            rollback_s: b.get(Bucket::Rollback),
            log_removal_s: b.get(Bucket::LogRemoval),
            idle_s: b.get(Bucket::Idle),
            total_s,
            cores,
            flops_total,
            flops_per_core,
            efficiency: None,
        }
    }

    pub fn bucket_sum(&self) -> f64 {
        self.useful_work_s
            + self.redundant_work_s
            + self.checkpoint_create_s
            + self.restore_s
            + self.rollback_s
            + self.log_removal_s
            + self.idle_s
    }

    /// Relative deviation of the bucket sum from `total_s`.
    pub fn bucket_error(&self) -> f64 {
        if self.total_s == 0.0 {
            return self.bucket_sum().abs();
        }
        (self.bucket_sum() - self.total_s).abs() / self.total_s
    }

    /// Share of wall time spent on fault-tolerance work: checkpoint
    /// creation, restore and rollback.
    pub fn ft_overhead_share(&self) -> f64 {
        if self.total_s == 0.0 {
            return 0.0;
        }
        (self.checkpoint_create_s + self.restore_s + self.rollback_s) / self.total_s
    }
}

/// Per-core performance of `run` relative to `reference`.
pub fn compute_efficiency(run: &Metrics, reference: &Metrics) -> Result<f64, MetricsError> {
    if !(reference.flops_per_core > 0.0) {
        return Err(MetricsError::ZeroReference);
    }
    Ok(run.flops_per_core / reference.flops_per_core)
}
