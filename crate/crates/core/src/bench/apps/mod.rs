//! Protocol-exercising stand-ins for real workloads. Each has a
//! sequential `reference` that computes the final per-rank states without
//! the simulator.

mod cg;
mod particle;
mod stencil;

use serde::{Deserialize, Serialize};

pub use cg::{CgLike, CgState};
pub use particle::{Particle, ParticleLike, ParticleState};
pub use stencil::{StencilHalo, StencilState};

use super::checksum_states;
use crate::engine::{run, RunConfig, RunError, RunOutcome};
use crate::runtime::Comm;

pub const APP_NAMES: [&str; 3] = ["stencil_halo", "cg_like", "particle_like"];

/// Sums per-rank partials in rank order, matching the runtime's reduction.
pub(crate) fn fold_sum(partials: &[f64]) -> f64 {
    let mut acc = partials[0];
    for p in &partials[1..] {
        acc += p;
    }
    acc
}

/// Swaps edge values with both neighbours on a non-periodic line. Missing
/// neighbours read as zero.
pub(crate) async fn exchange_edges(comm: &Comm, first: f64, last: f64, tag: u32) -> (f64, f64) {
    let (me, n) = (comm.rank(), comm.size());
    let mut reqs = Vec::new();
    let left = (me > 0).then(|| comm.irecv(me - 1, tag));
    let right = (me + 1 < n).then(|| comm.irecv(me + 1, tag + 1));
    if me + 1 < n {
        reqs.push(comm.isend(me + 1, tag, last.to_le_bytes().to_vec()));
    }
    if me > 0 {
        reqs.push(comm.isend(me - 1, tag + 1, first.to_le_bytes().to_vec()));
    }
    let decode = |b: Vec<u8>| f64::from_le_bytes(b.try_into().expect("edge is one f64"));
    let l = match left {
        Some(r) => decode(comm.wait(r).await.payload.unwrap_or_default()),
        None => 0.0,
    };
    let r = match right {
        Some(r) => decode(comm.wait(r).await.payload.unwrap_or_default()),
        None => 0.0,
    };
    comm.waitall(reqs).await;
    (l, r)
}

/// One of the bundled apps, chosen by name at run time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "app", rename_all = "snake_case")]
pub enum AnyApp {
    StencilHalo(StencilHalo),
    CgLike(CgLike),
    ParticleLike(ParticleLike),
}

impl AnyApp {
    /// `size` is cells, rows or particles per rank.
    pub fn by_name(name: &str, size: usize, steps: u64) -> Option<Self> {
        Some(match name {
            "stencil_halo" | "stencil" => AnyApp::StencilHalo(StencilHalo::new(size, steps)),
            "cg_like" | "cg" => AnyApp::CgLike(CgLike::new(size, steps)),
            "particle_like" | "particle" => AnyApp::ParticleLike(ParticleLike::new(size, steps)),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnyApp::StencilHalo(_) => "stencil_halo",
            AnyApp::CgLike(_) => "cg_like",
            AnyApp::ParticleLike(_) => "particle_like",
        }
    }

    pub fn run(&self, cfg: &RunConfig) -> Result<RunOutcome, RunError> {
        match self {
            AnyApp::StencilHalo(a) => run(a, cfg),
            AnyApp::CgLike(a) => run(a, cfg),
            AnyApp::ParticleLike(a) => run(a, cfg),
        }
    }

    /// Checksum the sequential reference predicts for width `n`.
    pub fn reference_checksum(&self, n: usize) -> String {
        match self {
            AnyApp::StencilHalo(a) => checksum_states(&a.reference(n)),
            AnyApp::CgLike(a) => checksum_states(&a.reference(n)),
            AnyApp::ParticleLike(a) => checksum_states(&a.reference(n)),
        }
    }
}
