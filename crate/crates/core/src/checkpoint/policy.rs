use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which fault-tolerance machinery a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Periodic coordinated checkpoints; every failure rolls back.
    #[serde(alias = "ckpt")]
    Checkpointing,
    /// Replicas only; failures are repaired in place, no checkpoints.
    #[serde(alias = "repl")]
    Replication,
    /// Replicas plus checkpoints; rollback only when a rank loses both copies.
    Combined,
}

impl Mode {
    pub fn checkpoints(self) -> bool {
        matches!(self, Mode::Checkpointing | Mode::Combined)
    }

    pub fn repairs(self) -> bool {
        matches!(self, Mode::Replication | Mode::Combined)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Mode::Checkpointing => "ckpt",
            Mode::Replication => "repl",
            Mode::Combined => "combined",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ckpt" | "checkpointing" => Ok(Mode::Checkpointing),
            "repl" | "replication" => Ok(Mode::Replication),
            "combined" => Ok(Mode::Combined),
            other => Err(format!(
                "unknown mode {other:?} (expected ckpt, repl or combined)"
            )),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("MTBF and checkpoint cost must be positive and finite (got mu={mu}, C={c})")]
    NonPositive { mu: f64, c: f64 },
    #[error("checkpoint interval must be positive and finite (got {0})")]
    BadInterval(f64),
}

/// Young-Daly interval `sqrt(2 * mu * C)`.
pub fn optimal_interval(mu: f64, c: f64) -> Result<f64, PolicyError> {
    if !(mu > 0.0 && c > 0.0 && mu.is_finite() && c.is_finite()) {
        return Err(PolicyError::NonPositive { mu, c });
    }
    Ok((2.0 * mu * c).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointPolicy {
    /// System MTBF in seconds.
    pub mu: f64,
    /// Time to write one checkpoint wave.
    pub c: f64,
    /// Interval between the end of one wave and the next request.
    pub tau: f64,
    pub mode: Mode,
}

impl CheckpointPolicy {
    pub fn young_daly(mu: f64, c: f64, mode: Mode) -> Result<Self, PolicyError> {
        Ok(Self {
            mu,
            c,
            tau: optimal_interval(mu, c)?,
            mode,
        })
    }

    pub fn explicit(mu: f64, c: f64, tau: f64, mode: Mode) -> Result<Self, PolicyError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(PolicyError::BadInterval(tau));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(PolicyError::NonPositive { mu, c });
        }
        Ok(Self { mu, c, tau, mode })
    }
}
