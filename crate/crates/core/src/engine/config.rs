use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Mode;
use crate::failure::ScheduledFailure;
use crate::simnet::SimConfig;

/// Where checkpoint records go.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StoreSpec {
    #[default]
    Memory,
    Dir(PathBuf),
}

/// Everything that determines a run. Two runs with equal configs are
/// identical event for event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Logical width (computational processes).
    pub n: usize,
    /// Replicas, covering logical ranks `0..m`.
    pub m: usize,
    pub mode: Mode,
    /// Interval between the end of one checkpoint wave and the next request.
    /// `None` disables periodic checkpoints.
    pub tau: Option<f64>,
    /// Seconds to write one wave; also charged to read one back.
    pub ckpt_cost: f64,
    /// Simulated compute time of one application step on one rank.
    pub step_seconds: f64,
    pub sim: SimConfig,
    pub failures: Vec<ScheduledFailure>,
    pub seed: u64,
    pub store: StoreSpec,
    /// Start from the store's `LATEST` wave instead of the initial state.
    pub resume: bool,
    /// Stop the whole job at this simulated time.
    pub stop_at: Option<f64>,
    /// Stop the whole job right after this many dispatched events.
    pub halt_after_events: Option<u64>,
    /// Keep an NDJSON dump of dispatched events.
    pub trace_dump: bool,
}

impl RunConfig {
    /// Failure-free run without checkpoints. Replication mode when `m > 0`.
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            mode: if m > 0 {
                Mode::Replication
            } else {
                Mode::Checkpointing
            },
            tau: None,
            ckpt_cost: 0.0,
            step_seconds: 1.0,
            sim: SimConfig::default(),
            failures: Vec::new(),
            seed: 0,
            store: StoreSpec::Memory,
            resume: false,
            stop_at: None,
            halt_after_events: None,
            trace_dump: false,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_checkpoints(mut self, tau: f64, ckpt_cost: f64) -> Self {
        self.tau = Some(tau);
        self.ckpt_cost = ckpt_cost;
        self
    }

    pub fn with_failures(mut self, failures: Vec<ScheduledFailure>) -> Self {
        self.failures = failures;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_step_seconds(mut self, secs: f64) -> Self {
        self.step_seconds = secs;
        self
    }

    pub fn with_sim(mut self, sim: SimConfig) -> Self {
        self.sim = sim;
        self
    }

    pub fn with_store(mut self, store: StoreSpec) -> Self {
        self.store = store;
        self
    }

    pub fn resuming(mut self) -> Self {
        self.resume = true;
        self
    }

    pub fn cores(&self) -> usize {
        self.n + self.m
    }
}
