use serde::{Deserialize, Serialize};

use super::{exchange_edges, fold_sum};
use crate::bench::MiniApp;
use crate::runtime::{Comm, ReduceOp};

/// Conjugate gradient on a distributed 1-D Poisson matrix: one
/// neighbour sparse matrix-vector product and two dot products per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgLike {
    pub rows_per_rank: usize,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgState {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub p: Vec<f64>,
    /// Global `r·r`, once known.
    pub rr: Option<f64>,
}

const TINY: f64 = 1e-300;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn spmv(p: &[f64], left: f64, right: f64) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let l = if i == 0 { left } else { p[i - 1] };
            let r = if i + 1 == p.len() { right } else { p[i + 1] };
            2.0 * p[i] - l - r
        })
        .collect()
}

fn update(s: &mut CgState, q: &[f64], rr: f64, pq: f64) {
    let alpha = if pq.abs() > TINY { rr / pq } else { 0.0 };
    for i in 0..s.x.len() {
        s.x[i] += alpha * s.p[i];
        s.r[i] -= alpha * q[i];
    }
}

fn next_direction(s: &mut CgState, rr: f64, rr_new: f64) {
    let beta = if rr.abs() > TINY { rr_new / rr } else { 0.0 };
    for i in 0..s.p.len() {
        s.p[i] = s.r[i] + beta * s.p[i];
    }
    s.rr = Some(rr_new);
}

impl CgLike {
    pub fn new(rows_per_rank: usize, steps: u64) -> Self {
        assert!(rows_per_rank > 0, "each rank needs at least one row");
        Self {
            rows_per_rank,
            steps,
        }
    }

    pub fn reference(&self, n: usize) -> Vec<CgState> {
        let mut st: Vec<CgState> = (0..n).map(|r| self.init(r, n)).collect();
        for _ in 0..self.steps {
            if st[0].rr.is_none() {
                let rr = fold_sum(&st.iter().map(|s| dot(&s.r, &s.r)).collect::<Vec<_>>());
                st.iter_mut().for_each(|s| s.rr = Some(rr));
            }
            let rr = st[0].rr.unwrap();
            let edges: Vec<(f64, f64)> =
                st.iter().map(|s| (s.p[0], *s.p.last().unwrap())).collect();
            let qs: Vec<Vec<f64>> = (0..n)
                .map(|r| {
                    let left = if r > 0 { edges[r - 1].1 } else { 0.0 };
                    let right = if r + 1 < n { edges[r + 1].0 } else { 0.0 };
                    spmv(&st[r].p, left, right)
                })
                .collect();
            let pq = fold_sum(&(0..n).map(|r| dot(&st[r].p, &qs[r])).collect::<Vec<_>>());
            for r in 0..n {
                update(&mut st[r], &qs[r], rr, pq);
            }
            let rr_new = fold_sum(&st.iter().map(|s| dot(&s.r, &s.r)).collect::<Vec<_>>());
            st.iter_mut().for_each(|s| next_direction(s, rr, rr_new));
        }
        st
    }
}

impl MiniApp for CgLike {
    type State = CgState;

    fn name(&self) -> &str {
        "cg_like"
    }

    fn total_steps(&self) -> u64 {
        self.steps
    }

    fn flops_per_step(&self) -> f64 {
        14.0 * self.rows_per_rank as f64 + 4.0
    }

    fn init(&self, rank: usize, _n: usize) -> CgState {
        let b: Vec<f64> = (0..self.rows_per_rank)
            .map(|i| 1.0 + 0.1 * ((rank * self.rows_per_rank + i) as f64).cos())
            .collect();
        CgState {
            x: vec![0.0; b.len()],
            p: b.clone(),
            r: b,
            rr: None,
        }
    }

    async fn step(&self, s: &mut CgState, comm: &Comm, _step: u64) {
        if s.rr.is_none() {
            s.rr = Some(
                comm.allreduce_f64(ReduceOp::SumF64, &[dot(&s.r, &s.r)])
                    .await[0],
            );
        }
        let rr = s.rr.unwrap();
        let (left, right) = exchange_edges(comm, s.p[0], *s.p.last().unwrap(), 10).await;
        let q = spmv(&s.p, left, right);
        comm.compute(comm.step_seconds()).await;
        let pq = comm.allreduce_f64(ReduceOp::SumF64, &[dot(&s.p, &q)]).await[0];
        update(s, &q, rr, pq);
        let rr_new = comm
            .allreduce_f64(ReduceOp::SumF64, &[dot(&s.r, &s.r)])
            .await[0];
        next_direction(s, rr, rr_new);
    }
}
