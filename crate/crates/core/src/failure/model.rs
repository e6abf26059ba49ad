use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Weibull};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::schedule::{ScheduledFailure, VictimSelector};

pub const DEFAULT_SHAPE: f64 = 0.7;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("MTBF must be positive and finite, got {0}")]
    BadMtbf(f64),
    #[error("core count must be positive")]
    NoCores,
    #[error("Weibull shape must be positive and finite, got {0}")]
    BadShape(f64),
}

/// Fail-stop process deaths with Weibull inter-arrival times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureModel {
    pub per_core_mtbf: f64,
    pub core_count: usize,
    pub shape: f64,
    pub seed: u64,
}

impl FailureModel {
    pub fn new(per_core_mtbf: f64, core_count: usize, seed: u64) -> Result<Self, ModelError> {
        if !(per_core_mtbf > 0.0 && per_core_mtbf.is_finite()) {
            return Err(ModelError::BadMtbf(per_core_mtbf));
        }
        if core_count == 0 {
            return Err(ModelError::NoCores);
        }
        Ok(Self {
            per_core_mtbf,
            core_count,
            shape: DEFAULT_SHAPE,
            seed,
        })
    }

    /// Model whose system MTBF at `core_count` cores is `system_mtbf`.
    pub fn from_system_mtbf(
        system_mtbf: f64,
        core_count: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        Self::new(system_mtbf * core_count as f64, core_count, seed)
    }

    pub fn with_shape(mut self, shape: f64) -> Result<Self, ModelError> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(ModelError::BadShape(shape));
        }
        self.shape = shape;
        Ok(self)
    }

    /// The same machine at a different scale.
    pub fn at_cores(&self, core_count: usize) -> Result<Self, ModelError> {
        Ok(Self {
            core_count,
            ..Self::new(self.per_core_mtbf, core_count, self.seed)?.with_shape(self.shape)?
        })
    }

    pub fn system_mtbf(&self) -> f64 {
        self.per_core_mtbf / self.core_count as f64
    }

    /// Weibull scale whose mean equals the system MTBF.
    pub fn scale(&self) -> f64 {
        self.system_mtbf() / statrs::function::gamma::gamma(1.0 + 1.0 / self.shape)
    }

    pub fn sampler(&self) -> GapSampler {
        GapSampler {
            dist: Weibull::new(self.scale(), self.shape).expect("validated parameters"),
            rng: ChaCha8Rng::seed_from_u64(self.seed),
        }
    }
}

/// Deterministic stream of inter-failure gaps.
pub struct GapSampler {
    dist: Weibull<f64>,
    rng: ChaCha8Rng,
}

impl Iterator for GapSampler {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.dist.sample(&mut self.rng))
    }
}

/// Failure times in `(0, horizon)`, each with the same victim selector.
/// Victims are drawn when the failure fires, uniformly over the processes
/// that are live at that moment.
pub fn sample_failure_schedule(
    model: &FailureModel,
    horizon: f64,
    selector: VictimSelector,
) -> Vec<ScheduledFailure> {
    let mut out = Vec::new();
    let mut t = 0.0;
    for gap in model.sampler() {
        t += gap;
        if t >= horizon {
            break;
        }
        out.push(ScheduledFailure {
            time: t,
            selector: selector.clone(),
        });
    }
    out
}
