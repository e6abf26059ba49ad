use serde::{Deserialize, Serialize};

use super::{exchange_edges, fold_sum};
use crate::bench::MiniApp;
use crate::runtime::{Comm, ReduceOp};

/// Weak-scaling 1-D relaxation: halo exchange with both neighbours, then a
/// global residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilHalo {
    pub cells_per_rank: usize,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilState {
    pub u: Vec<f64>,
    pub residual_sum: f64,
    pub last_residual: f64,
}

impl StencilHalo {
    pub fn new(cells_per_rank: usize, steps: u64) -> Self {
        assert!(cells_per_rank > 0, "each rank needs at least one cell");
        Self {
            cells_per_rank,
            steps,
        }
    }

    /// Relaxes `u` in place against its halos; returns the local squared
    /// change.
    fn relax(u: &mut [f64], left: f64, right: f64) -> f64 {
        let old = u.to_vec();
        let mut change = 0.0;
        for i in 0..u.len() {
            let l = if i == 0 { left } else { old[i - 1] };
            let r = if i + 1 == old.len() {
                right
            } else {
                old[i + 1]
            };
            u[i] = 0.25 * l + 0.5 * old[i] + 0.25 * r + 1e-3;
            change += (u[i] - old[i]) * (u[i] - old[i]);
        }
        change
    }

    /// Final states computed without the simulator, all ranks in lockstep.
    pub fn reference(&self, n: usize) -> Vec<StencilState> {
        let mut states: Vec<StencilState> = (0..n).map(|r| self.init(r, n)).collect();
        for _ in 0..self.steps {
            let edges: Vec<(f64, f64)> = states
                .iter()
                .map(|s| (s.u[0], *s.u.last().unwrap()))
                .collect();
            let partials: Vec<f64> = (0..n)
                .map(|r| {
                    let left = if r > 0 { edges[r - 1].1 } else { 0.0 };
                    let right = if r + 1 < n { edges[r + 1].0 } else { 0.0 };
                    Self::relax(&mut states[r].u, left, right)
                })
                .collect();
            let total = fold_sum(&partials);
            for s in &mut states {
                s.residual_sum += total;
                s.last_residual = total;
            }
        }
        states
    }
}

impl MiniApp for StencilHalo {
    type State = StencilState;

    fn name(&self) -> &str {
        "stencil_halo"
    }

    fn total_steps(&self) -> u64 {
        self.steps
    }

    fn flops_per_step(&self) -> f64 {
        7.0 * self.cells_per_rank as f64 + 1.0
    }

    fn init(&self, rank: usize, _n: usize) -> StencilState {
        let u = (0..self.cells_per_rank)
            .map(|i| ((rank * self.cells_per_rank + i) as f64 * 0.37).sin() + 1.0)
            .collect();
        StencilState {
            u,
            residual_sum: 0.0,
            last_residual: 0.0,
        }
    }

    async fn step(&self, s: &mut StencilState, comm: &Comm, _step: u64) {
        let (left, right) = exchange_edges(comm, s.u[0], *s.u.last().unwrap(), 0).await;
        let partial = Self::relax(&mut s.u, left, right);
        comm.compute(comm.step_seconds()).await;
        let total = comm.allreduce_f64(ReduceOp::SumF64, &[partial]).await[0];
        s.residual_sum += total;
        s.last_residual = total;
    }
}
