//! Externally authored failure schedules.
//!
//! One failure per line: `time_seconds victim_selector`. Blank lines and
//! lines starting with `#` are ignored. Selectors:
//!
//! | selector | victim |
//! |---|---|
//! | `random` | uniform over live processes |
//! | `random-recoverable` | uniform over live processes whose death leaves every rank a copy |
//! | `uid:<n>` | the process with that uid, if live |
//! | `cmp:<rank>` | the computational copy of a logical rank |
//! | `rep:<rank>` | the replica of a logical rank |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VictimSelector {
    Random,
    RandomRecoverable,
    Uid(u64),
    Cmp(usize),
    Rep(usize),
}

impl fmt::Display for VictimSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VictimSelector::Random => write!(f, "random"),
            VictimSelector::RandomRecoverable => write!(f, "random-recoverable"),
            VictimSelector::Uid(u) => write!(f, "uid:{u}"),
            VictimSelector::Cmp(r) => write!(f, "cmp:{r}"),
            VictimSelector::Rep(r) => write!(f, "rep:{r}"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleParseError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
}

impl FromStr for VictimSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| format!("bad number in selector {s:?}"))
        };
        match s.split_once(':') {
            None if s == "random" => Ok(VictimSelector::Random),
            None if s == "random-recoverable" => Ok(VictimSelector::RandomRecoverable),
            Some(("uid", v)) => Ok(VictimSelector::Uid(num(v)?)),
            Some(("cmp", v)) => Ok(VictimSelector::Cmp(num(v)? as usize)),
            Some(("rep", v)) => Ok(VictimSelector::Rep(num(v)? as usize)),
            _ => Err(format!("unknown victim selector {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledFailure {
    pub time: f64,
    pub selector: VictimSelector,
}

pub fn parse_schedule(text: &str) -> Result<Vec<ScheduledFailure>, ScheduleParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| ScheduleParseError::Line { line: i + 1, msg };
        let mut parts = line.split_whitespace();
        let (Some(t), Some(sel), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!(
                "expected `time_seconds victim_selector`, got {line:?}"
            )));
        };
        let time: f64 = t.parse().map_err(|_| err(format!("bad time {t:?}")))?;
        if !(time >= 0.0 && time.is_finite()) {
            return Err(err(format!("time must be non-negative, got {t}")));
        }
        out.push(ScheduledFailure {
            time,
            selector: sel.parse().map_err(err)?,
        });
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(out)
}

pub fn format_schedule(schedule: &[ScheduledFailure]) -> String {
    schedule
        .iter()
        .map(|f| format!("{} {}\n", f.time, f.selector))
        .collect()
}
