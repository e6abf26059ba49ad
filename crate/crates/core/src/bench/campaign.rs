use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::apps::AnyApp;
use super::{compute_efficiency, Metrics};
use crate::checkpoint::{optimal_interval, Mode};
use crate::engine::{RunConfig, RunError, RunOutcome};
use crate::failure::{sample_failure_schedule, FailureModel, VictimSelector};
use crate::simnet::SimConfig;

fn default_fraction() -> f64 {
    0.5
}

fn default_shape() -> f64 {
    crate::failure::DEFAULT_SHAPE
}

fn default_horizon_factor() -> f64 {
    20.0
}

/// One configuration run over several seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub app: String,
    /// Cells, rows or particles per rank.
    pub app_size: usize,
    /// Failure-free execution time the step count is derived from.
    pub target_time_s: f64,
    /// Simulated compute time of one step on one rank.
    pub step_seconds: f64,
    pub cores: usize,
    /// Share of cores running replicas; 0.5 is dual redundancy.
    #[serde(default = "default_fraction")]
    pub replica_fraction: f64,
    pub mode: Mode,
    /// System MTBF at `cores`. `None` disables failures.
    pub mtbf_s: Option<f64>,
    #[serde(default = "default_shape")]
    pub weibull_shape: f64,
    /// Seconds per checkpoint wave. When absent the storage model prices a
    /// wave of `state_bytes_per_rank` per computational rank.
    #[serde(default)]
    pub ckpt_cost_s: Option<f64>,
    #[serde(default)]
    pub state_bytes_per_rank: Option<u64>,
    /// Explicit interval; Young/Daly from `mtbf_s` and the cost otherwise.
    #[serde(default)]
    pub tau_s: Option<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sim: SimConfig,
    /// Failures are sampled up to `target_time_s` times this factor.
    #[serde(default = "default_horizon_factor")]
    pub horizon_factor: f64,
}

/// Per-seed result row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub app: String,
    pub mode: Mode,
    pub cores: usize,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub mtbf_s: Option<f64>,
    pub ckpt_cost_s: f64,
    pub tau_s: Option<f64>,
    pub completed: bool,
    pub checksum: Option<String>,
    pub failures: u64,
    pub repairs: u64,
    pub restarts: u64,
    pub waves: u64,
    pub metrics: Metrics,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    /// Runs that did not finish (a rank lost every copy with no checkpoint
    /// to fall back on). They are left out of the means below.
    pub failed: usize,
    pub efficiency: MeanStd,
    pub flops_per_core: MeanStd,
    pub total_s: MeanStd,
    pub useful_work_s: MeanStd,
    pub redundant_work_s: MeanStd,
    pub checkpoint_create_s: MeanStd,
    pub restore_s: MeanStd,
    pub rollback_s: MeanStd,
    pub log_removal_s: MeanStd,
    pub idle_s: MeanStd,
}

impl Aggregate {
    pub fn of(rows: &[SeedRow]) -> Self {
        let done: Vec<&SeedRow> = rows.iter().filter(|r| r.completed).collect();
        let col = |f: &dyn Fn(&Metrics) -> f64| {
            MeanStd::of(&done.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>())
        };
        Self {
            runs: rows.len(),
            failed: rows.len() - done.len(),
            efficiency: col(&|m| m.efficiency.unwrap_or(0.0)),
            flops_per_core: col(&|m| m.flops_per_core),
            total_s: col(&|m| m.total_s),
            useful_work_s: col(&|m| m.useful_work_s),
            redundant_work_s: col(&|m| m.redundant_work_s),
            checkpoint_create_s: col(&|m| m.checkpoint_create_s),
            restore_s: col(&|m| m.restore_s),
            rollback_s: col(&|m| m.rollback_s),
            log_removal_s: col(&|m| m.log_removal_s),
            idle_s: col(&|m| m.idle_s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    pub reference: Metrics,
    pub rows: Vec<SeedRow>,
    pub aggregate: Aggregate,
}

/// Several campaigns sharing one reference run at the smallest scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: CampaignConfig,
    pub cores: Vec<usize>,
    pub modes: Vec<Mode>,
    /// Per-core MTBF; each scale gets `per_core_mtbf_s / cores`.
    pub per_core_mtbf_s: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("unknown app {0:?}")]
    UnknownApp(String),
    #[error("invalid campaign: {0}")]
    Invalid(String),
    #[error("seed {seed}: {source}")]
    Run { seed: u64, source: RunError },
    #[error(transparent)]
    Efficiency(#[from] super::MetricsError),
}

impl CampaignConfig {
    pub fn app(&self) -> Result<AnyApp, CampaignError> {
        let steps = self.steps();
        AnyApp::by_name(&self.app, self.app_size, steps)
            .ok_or_else(|| CampaignError::UnknownApp(self.app.clone()))
    }

    pub fn steps(&self) -> u64 {
        if self.step_seconds > 0.0 {
            (self.target_time_s / self.step_seconds).round().max(1.0) as u64
        } else {
            1
        }
    }

    /// `(n, m)` for the configured core count.
    pub fn split(&self) -> Result<(usize, usize), CampaignError> {
        if self.cores == 0 {
            return Err(CampaignError::Invalid("zero cores".into()));
        }
        if !(0.0..=0.5).contains(&self.replica_fraction) {
            return Err(CampaignError::Invalid(format!(
                "replica fraction {} outside [0, 0.5]",
                self.replica_fraction
            )));
        }
        let m = if self.mode == Mode::Checkpointing {
            0
        } else {
            ((self.cores as f64 * self.replica_fraction).round() as usize).min(self.cores / 2)
        };
        if self.mode.repairs() && m == 0 {
            return Err(CampaignError::Invalid(format!(
                "{} mode needs replicas",
                self.mode.short_name()
            )));
        }
        Ok((self.cores - m, m))
    }

    pub fn ckpt_cost(&self, n: usize) -> f64 {
        match (self.ckpt_cost_s, self.state_bytes_per_rank) {
            (Some(c), _) => c,
            (None, Some(bytes)) => self.sim.storage.wave_seconds(n, bytes),
            (None, None) => 0.0,
        }
    }

    pub fn tau(&self, n: usize) -> Result<Option<f64>, CampaignError> {
        if !self.mode.checkpoints() {
            return Ok(None);
        }
        if let Some(t) = self.tau_s {
            return Ok(Some(t));
        }
        match self.mtbf_s {
            Some(mu) => optimal_interval(mu, self.ckpt_cost(n))
                .map(Some)
                .map_err(|e| CampaignError::Invalid(e.to_string())),
            None => Ok(None),
        }
    }

    /// The run configuration for one seed.
    pub fn run_config(&self, seed: u64) -> Result<RunConfig, CampaignError> {
        let (n, m) = self.split()?;
        let mut cfg = RunConfig::new(n, m)
            .with_mode(self.mode)
            .with_seed(seed)
            .with_step_seconds(self.step_seconds)
            .with_sim(self.sim.clone());
        if let Some(tau) = self.tau(n)? {
            cfg = cfg.with_checkpoints(tau, self.ckpt_cost(n));
        } else {
            cfg.ckpt_cost = self.ckpt_cost(n);
        }
        if let Some(mu) = self.mtbf_s {
            let model = FailureModel::from_system_mtbf(mu, self.cores, seed)
                .and_then(|m| m.with_shape(self.weibull_shape))
                .map_err(|e| CampaignError::Invalid(e.to_string()))?;
            let horizon = self.target_time_s * self.horizon_factor;
            cfg = cfg.with_failures(sample_failure_schedule(
                &model,
                horizon,
                VictimSelector::Random,
            ));
        }
        Ok(cfg)
    }

    /// Failure-free plain run at this scale.
    pub fn reference_config(&self) -> CampaignConfig {
        CampaignConfig {
            mode: Mode::Checkpointing,
            replica_fraction: 0.0,
            mtbf_s: None,
            ckpt_cost_s: Some(0.0),
            state_bytes_per_rank: None,
            tau_s: None,
            seeds: vec![0],
            ..self.clone()
        }
    }
}

impl SeedRow {
    pub fn from_outcome(
        cfg: &CampaignConfig,
        run: &RunConfig,
        out: RunOutcome,
        reference: &Metrics,
    ) -> Result<SeedRow, CampaignError> {
        let mut metrics = out.metrics;
        metrics.efficiency = Some(compute_efficiency(&metrics, reference)?);
        Ok(SeedRow {
            app: out.app,
            mode: cfg.mode,
            cores: cfg.cores,
            n: out.n,
            m: out.m,
            seed: out.seed,
            mtbf_s: cfg.mtbf_s,
            ckpt_cost_s: run.ckpt_cost,
            tau_s: run.tau,
            completed: out.completed,
            checksum: out.checksum,
            failures: out.stats.kills,
            repairs: out.stats.repairs,
            restarts: out.stats.restarts,
            waves: out.stats.waves_committed,
            metrics,
        })
    }
}

/// Runs one seed against a known reference.
pub fn run_one(
    cfg: &CampaignConfig,
    seed: u64,
    reference: &Metrics,
) -> Result<SeedRow, CampaignError> {
    let app = cfg.app()?;
    let run = cfg.run_config(seed)?;
    let out = app
        .run(&run)
        .map_err(|source| CampaignError::Run { seed, source })?;
    SeedRow::from_outcome(cfg, &run, out, reference)
}

pub fn reference_metrics(cfg: &CampaignConfig) -> Result<Metrics, CampaignError> {
    let reference = cfg.reference_config();
    let app = reference.app()?;
    let run = reference.run_config(0)?;
    let out = app
        .run(&run)
        .map_err(|source| CampaignError::Run { seed: 0, source })?;
    Ok(out.metrics)
}

/// Runs every seed (in parallel) and aggregates. `reference` defaults to a
/// failure-free plain run at the same scale.
pub fn run_campaign(
    cfg: &CampaignConfig,
    reference: Option<&Metrics>,
) -> Result<CampaignResult, CampaignError> {
    let reference = match reference {
        Some(r) => r.clone(),
        None => reference_metrics(cfg)?,
    };
    let rows = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_one(cfg, seed, &reference))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CampaignResult {
        config: cfg.clone(),
        aggregate: Aggregate::of(&rows),
        reference,
        rows,
    })
}

impl SweepConfig {
    pub fn campaigns(&self) -> Vec<CampaignConfig> {
        let mut out = Vec::new();
        for &cores in &self.cores {
            for &mode in &self.modes {
                let mut c = self.base.clone();
                c.cores = cores;
                c.mode = mode;
                if let Some(per_core) = self.per_core_mtbf_s {
                    c.mtbf_s = Some(per_core / cores as f64);
                }
                out.push(c);
            }
        }
        out
    }

    /// Runs every campaign against a failure-free plain run at the
    /// smallest scale.
    pub fn run(&self) -> Result<Vec<CampaignResult>, CampaignError> {
        let smallest = *self
            .cores
            .iter()
            .min()
            .ok_or_else(|| CampaignError::Invalid("no scales".into()))?;
        let mut base = self.base.clone();
        base.cores = smallest;
        let reference = reference_metrics(&base)?;
        self.campaigns()
            .iter()
            .map(|c| run_campaign(c, Some(&reference)))
            .collect()
    }
}
