use serde::{Deserialize, Serialize};

use super::fold_sum;
use crate::bench::MiniApp;
use crate::runtime::{decode_f64s, decode_u64s, encode_f64s, encode_u64s, Comm, ReduceOp};

/// Particles drifting on a periodic line split into one unit cell per
/// rank. Migrating particles move with an all-to-all; a field kick is
/// broadcast from rank 0 every few steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleLike {
    pub particles_per_rank: usize,
    pub steps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u64,
    pub x: f64,
    pub v: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub rank: usize,
    pub particles: Vec<Particle>,
    pub energy: f64,
    /// Global particle count seen at the last step.
    pub population: u64,
}

const DT: f64 = 0.5;
const KICK_EVERY: u64 = 4;

fn kick_of(root: &ParticleState, step: u64) -> f64 {
    let mean_v = if root.particles.is_empty() {
        0.0
    } else {
        root.particles.iter().map(|p| p.v).sum::<f64>() / root.particles.len() as f64
    };
    0.01 * (step as f64 * 0.7).sin() - 0.1 * mean_v
}

fn owner(x: f64, n: usize) -> usize {
    (x.floor() as usize).min(n - 1)
}

/// Applies the kick, moves particles and splits them by destination rank.
fn advance(s: &mut ParticleState, kick: f64, n: usize) -> Vec<Vec<Particle>> {
    let mut parts = vec![Vec::new(); n];
    for mut p in s.particles.drain(..) {
        p.v += kick;
        p.x = (p.x + p.v * DT).rem_euclid(n as f64);
        parts[owner(p.x, n)].push(p);
    }
    parts
}

fn settle(s: &mut ParticleState, incoming: Vec<Vec<Particle>>) -> f64 {
    s.particles = incoming.into_iter().flatten().collect();
    s.particles.sort_by_key(|p| p.id);
    s.particles.iter().map(|p| 0.5 * p.v * p.v).sum()
}

impl ParticleLike {
    pub fn new(particles_per_rank: usize, steps: u64) -> Self {
        Self {
            particles_per_rank,
            steps,
        }
    }

    pub fn reference(&self, n: usize) -> Vec<ParticleState> {
        let mut st: Vec<ParticleState> = (0..n).map(|r| self.init(r, n)).collect();
        for step in 0..self.steps {
            let kick = if step.is_multiple_of(KICK_EVERY) {
                kick_of(&st[0], step)
            } else {
                0.0
            };
            let outgoing: Vec<Vec<Vec<Particle>>> =
                st.iter_mut().map(|s| advance(s, kick, n)).collect();
            let mut energies = Vec::with_capacity(n);
            for (dst, s) in st.iter_mut().enumerate() {
                let incoming = (0..n).map(|src| outgoing[src][dst].clone()).collect();
                energies.push(settle(s, incoming));
            }
            let energy = fold_sum(&energies);
            let population: u64 = st.iter().map(|s| s.particles.len() as u64).sum();
            for s in &mut st {
                s.energy = energy;
                s.population = population;
            }
        }
        st
    }
}

impl MiniApp for ParticleLike {
    type State = ParticleState;

    fn name(&self) -> &str {
        "particle_like"
    }

    fn total_steps(&self) -> u64 {
        self.steps
    }

    fn flops_per_step(&self) -> f64 {
        6.0 * self.particles_per_rank as f64 + 1.0
    }

    fn init(&self, rank: usize, _n: usize) -> ParticleState {
        let k = self.particles_per_rank;
        let particles = (0..k)
            .map(|i| {
                let id = (rank * k + i) as u64;
                Particle {
                    id,
                    x: rank as f64 + (i as f64 + 0.5) / k as f64,
                    v: ((id * 7919 % 13) as f64 - 6.0) * 0.05,
                }
            })
            .collect();
        ParticleState {
            rank,
            particles,
            energy: 0.0,
            population: 0,
        }
    }

    async fn step(&self, s: &mut ParticleState, comm: &Comm, step: u64) {
        let n = comm.size();
        let kick = if step.is_multiple_of(KICK_EVERY) {
            let mine = if comm.rank() == 0 {
                encode_f64s(&[kick_of(s, step)])
            } else {
                Vec::new()
            };
            decode_f64s(&comm.bcast(0, mine).await)[0]
        } else {
            0.0
        };
        let parts = advance(s, kick, n)
            .iter()
            .map(|p| bincode::serialize(p).expect("particles serialize"))
            .collect();
        comm.compute(comm.step_seconds()).await;
        let incoming = comm
            .alltoall(parts)
            .await
            .iter()
            .map(|b| bincode::deserialize(b).expect("particles decode"))
            .collect();
        let local = settle(s, incoming);
        let counts = comm
            .allgather(encode_u64s(&[s.particles.len() as u64]))
            .await;
        s.population = counts.iter().map(|c| decode_u64s(c)[0]).sum();
        s.energy = comm.allreduce_f64(ReduceOp::SumF64, &[local]).await[0];
    }
}
