#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ftsim::bench::apps::AnyApp;
use ftsim::checkpoint::Mode;
use ftsim::failure::{ScheduledFailure, VictimSelector};
use ftsim::simnet::SimConfig;
use ftsim::{RunConfig, RunOutcome};

pub const STEPS: u64 = 10;
pub const STEP_SECONDS: f64 = 0.2;

pub fn apps() -> Vec<AnyApp> {
    vec![
        AnyApp::by_name("stencil_halo", 5, STEPS).unwrap(),
        AnyApp::by_name("cg_like", 4, STEPS).unwrap(),
        AnyApp::by_name("particle_like", 6, STEPS).unwrap(),
    ]
}

/// Slow wire so that failures regularly land while messages are in flight.
pub fn slow_sim() -> SimConfig {
    SimConfig {
        latency_base_s: 0.03,
        latency_per_byte_s: 1e-5,
        node_size: 2,
        control_latency_s: Some(1e-4),
        compute_jitter: 1.0,
        ..SimConfig::default()
    }
}

/// Every `(n, m)` with `1 <= n <= 4` and `m <= n`.
pub fn widths() -> Vec<(usize, usize)> {
    (1..=4).flat_map(|n| (0..=n).map(move |m| (n, m))).collect()
}

/// A randomized schedule the protocol must survive. With replicas, even
/// seeds use pure replication with recoverable victims and odd seeds use
/// the combined mode with arbitrary victims; without replicas the job
/// relies on checkpoint/restart.
pub fn recoverable_case(n: usize, m: usize, seed: u64) -> RunConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 40) ^ ((m as u64) << 48));
    let horizon = STEPS as f64 * (STEP_SECONDS + 0.2) * 1.5;
    let (mode, selector) = match (m, seed % 2) {
        (0, _) => (Mode::Checkpointing, VictimSelector::Random),
        (_, 0) => (Mode::Replication, VictimSelector::RandomRecoverable),
        _ => (Mode::Combined, VictimSelector::Random),
    };
    let kills = rng.random_range(1..=(m + 2).min(4));
    let mut t = 0.0;
    let mut failures = Vec::new();
    for _ in 0..kills {
        t = if t > 0.0 && rng.random_bool(0.3) {
            t + rng.random_range(0.0..0.01)
        } else {
            rng.random_range(0.0..horizon)
        };
        failures.push(ScheduledFailure {
            time: t,
            selector: selector.clone(),
        });
    }
    failures.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut sim = slow_sim();
    if rng.random_bool(0.25) {
        sim.log_trim_threshold_bytes = 64;
    }
    let mut cfg = RunConfig::new(n, m)
        .with_mode(mode)
        .with_seed(seed)
        .with_step_seconds(STEP_SECONDS)
        .with_sim(sim)
        .with_failures(failures);
    if mode.checkpoints() {
        cfg = cfg.with_checkpoints(rng.random_range(0.3..1.5), rng.random_range(0.0..0.2));
    }
    cfg
}

pub fn failure_free(n: usize, m: usize) -> RunConfig {
    RunConfig::new(n, m)
        .with_step_seconds(STEP_SECONDS)
        .with_sim(slow_sim())
}

/// Reference checksums keyed by `(app, n)`.
pub fn references() -> BTreeMap<(String, usize), String> {
    let mut out = BTreeMap::new();
    for app in apps() {
        for n in 1..=4 {
            out.insert((app.name().to_string(), n), app.reference_checksum(n));
        }
    }
    out
}

/// Everything wrong with one outcome, empty when it passes.
pub fn oracle_problems(out: &RunOutcome, expected: &str) -> Vec<String> {
    let mut p = Vec::new();
    if !out.completed {
        p.push(format!("did not complete (aborted: {:?})", out.aborted));
    }
    if out.checksum.as_deref() != Some(expected) {
        p.push("checksum differs from failure-free run".into());
    }
    if !out.replicas_coherent {
        p.push("replicas diverged".into());
    }
    p.extend(out.audit.violations.iter().cloned());
    p
}
