//! Headline acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line even when an earlier one fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use common::*;
use ftsim::bench::apps::AnyApp;
use ftsim::bench::{
    emit_report, reference_metrics, run_campaign, CampaignConfig, CampaignResult, ReportFormat,
    SweepConfig,
};
use ftsim::checkpoint::{optimal_interval, CheckpointStore, Mode};
use ftsim::engine::StoreSpec;
use ftsim::failure::{FailureModel, ScheduledFailure, VictimSelector};
use ftsim::simnet::SimConfig;
use ftsim::RunConfig;

const ORACLE_SEEDS: u64 = 200;
const ORACLE_BUDGET: Duration = Duration::from_secs(600);
/// Relative slack of the bucket-sum identity.
const BUCKET_TOL: f64 = 1e-3;
/// Largest allowed spread of replication efficiency across the sweep.
const REPL_SPREAD: f64 = 0.05;
/// Distance of failure-free replication from half the plain efficiency.
const REPL_HALF_TOL: f64 = 0.02;

struct Verdict {
    name: &'static str,
    ok: bool,
    detail: String,
}

fn verdict(name: &'static str, problems: Vec<String>, summary: String) -> Verdict {
    let ok = problems.is_empty();
    let detail = if ok {
        summary
    } else {
        let shown: Vec<_> = problems.iter().take(8).cloned().collect();
        format!(
            "{summary}; {} problem(s): {}",
            problems.len(),
            shown.join(" | ")
        )
    };
    Verdict { name, ok, detail }
}

// ---- checkpoint interval and failure-rate scaling ---------------------------

/// `(system MTBF, checkpoint cost, interval)` as published, with the
/// interval cut (not rounded) to two decimals.
const INTERVALS: [(&str, f64, f64, f64); 6] = [
    ("hpcg@1024", 16000.0, 46.0, 1213.26),
    ("hpcg@2048", 8000.0, 65.0, 1019.80),
    ("hpcg@4096", 4000.0, 114.0, 954.98),
    ("hpcg@8192", 2000.0, 215.0, 927.36),
    ("cloverleaf@8192", 500.0, 42.0, 204.93),
    ("pic@8192", 500.0, 60.0, 244.94),
];

fn young_daly_intervals() -> Verdict {
    let mut problems = Vec::new();
    for (label, mu, c, published) in INTERVALS {
        let tau = optimal_interval(mu, c).unwrap();
        let truncated = (tau * 100.0).floor() / 100.0;
        if (truncated - published).abs() > 1e-9 {
            problems.push(format!(
                "{label}: tau={tau:.4} truncates to {truncated:.2}, published {published:.2}"
            ));
        }
    }
    verdict(
        "young_daly_intervals",
        problems,
        format!("{} configurations", INTERVALS.len()),
    )
}

fn mtbf_scaling() -> Verdict {
    let mut problems = Vec::new();
    let base = FailureModel::from_system_mtbf(2000.0, 8192, 7).unwrap();
    for (cores, want) in [
        (8192, 2000.0),
        (4096, 4000.0),
        (2048, 8000.0),
        (1024, 16000.0),
    ] {
        let m = base.at_cores(cores).unwrap();
        if (m.system_mtbf() - want).abs() > 1e-9 * want {
            problems.push(format!(
                "{cores} cores: system MTBF {} != {want}",
                m.system_mtbf()
            ));
        }
        // The sampled gaps must have that mean too.
        let n = 40_000;
        let mean = m.sampler().take(n).sum::<f64>() / n as f64;
        if (mean - want).abs() > 0.03 * want {
            problems.push(format!(
                "{cores} cores: sampled mean gap {mean:.1} vs {want}"
            ));
        }
    }
    verdict(
        "mtbf_scaling",
        problems,
        "2000 s at 8192 cores -> 4000 s at 4096 -> 16000 s at 1024".into(),
    )
}

// ---- oracle sweep -----------------------------------------------------------

struct OracleSweep {
    runs: usize,
    elapsed: Duration,
    oracle_problems: Vec<String>,
    audit_problems: Vec<String>,
    kills: u64,
    repairs: u64,
    restarts: u64,
    audited_messages: u64,
}

fn oracle_sweep() -> OracleSweep {
    let refs = references();
    let start = Instant::now();
    let cases: Vec<(AnyApp, usize, usize, u64)> = apps()
        .into_iter()
        .flat_map(|app| widths().into_iter().map(move |(n, m)| (app.clone(), n, m)))
        .flat_map(|(app, n, m)| (0..ORACLE_SEEDS).map(move |s| (app.clone(), n, m, s)))
        .collect();
    let results: Vec<_> = cases
        .par_iter()
        .map(|(app, n, m, seed)| {
            let tag = format!("{} n={n} m={m} seed={seed}", app.name());
            match app.run(&recoverable_case(*n, *m, *seed)) {
                Ok(out) => {
                    let mut p = oracle_problems(&out, &refs[&(app.name().to_string(), *n)]);
                    p.retain(|x| !out.audit.violations.contains(x));
                    let audit: Vec<String> = out
                        .audit
                        .violations
                        .iter()
                        .map(|v| format!("{tag}: {v}"))
                        .collect();
                    let p = p
                        .into_iter()
                        .map(|x| format!("{tag}: {x}"))
                        .collect::<Vec<_>>();
                    let s = &out.stats;
                    (
                        p,
                        audit,
                        [s.kills, s.repairs, s.restarts, out.audit.messages],
                    )
                }
                Err(e) => (vec![format!("{tag}: {e}")], Vec::new(), [0; 4]),
            }
        })
        .collect();
    let elapsed = start.elapsed();
    let mut sweep = OracleSweep {
        runs: results.len(),
        elapsed,
        oracle_problems: Vec::new(),
        audit_problems: Vec::new(),
        kills: 0,
        repairs: 0,
        restarts: 0,
        audited_messages: 0,
    };
    for (p, a, [k, r, rs, msg]) in results {
        sweep.oracle_problems.extend(p);
        sweep.audit_problems.extend(a);
        sweep.kills += k;
        sweep.repairs += r;
        sweep.restarts += rs;
        sweep.audited_messages += msg;
    }
    sweep
}

fn master_oracle(s: &OracleSweep) -> Verdict {
    let mut problems = s.oracle_problems.clone();
    if s.elapsed > ORACLE_BUDGET {
        problems.push(format!("took {:?}, budget {ORACLE_BUDGET:?}", s.elapsed));
    }
    if s.kills == 0 || s.repairs == 0 || s.restarts == 0 {
        problems.push("sweep did not exercise repair and restart".into());
    }
    verdict(
        "failure_oracle",
        problems,
        format!(
            "{} runs ({} seeds x {} widths x {} apps) in {:.1?}; {} kills, {} repairs, {} restarts",
            s.runs,
            ORACLE_SEEDS,
            widths().len(),
            apps().len(),
            s.elapsed,
            s.kills,
            s.repairs,
            s.restarts
        ),
    )
}

fn exactly_once(s: &OracleSweep) -> Verdict {
    let mut problems = s.audit_problems.clone();
    if s.audited_messages == 0 {
        problems.push("audit saw no messages".into());
    }
    verdict(
        "exactly_once_delivery",
        problems,
        format!(
            "{} application messages audited over {} runs",
            s.audited_messages, s.runs
        ),
    )
}

// ---- efficiency campaigns ---------------------------------------------------

const SWEEP_CORES: [usize; 4] = [32, 64, 128, 256];
/// Per-core MTBF of the sweep: 6400 s at 32 cores down to 800 s at 256.
const SWEEP_PER_CORE_MTBF: f64 = 204_800.0;

fn sweep_base() -> CampaignConfig {
    CampaignConfig {
        app: "stencil_halo".into(),
        app_size: 16,
        target_time_s: 10_800.0,
        step_seconds: 60.0,
        cores: SWEEP_CORES[0],
        replica_fraction: 0.5,
        mode: Mode::Replication,
        mtbf_s: None,
        weibull_shape: ftsim::failure::DEFAULT_SHAPE,
        ckpt_cost_s: None,
        // 2 GiB per rank prices a wave at 46 s on 32 cores and 215 s on 256.
        state_bytes_per_rank: Some(2 << 30),
        tau_s: None,
        seeds: (1..=16).collect(),
        sim: SimConfig::default(),
        horizon_factor: 20.0,
    }
}

fn crossover_sweep() -> Result<Vec<CampaignResult>, String> {
    SweepConfig {
        base: sweep_base(),
        cores: SWEEP_CORES.to_vec(),
        modes: vec![Mode::Replication, Mode::Checkpointing],
        per_core_mtbf_s: Some(SWEEP_PER_CORE_MTBF),
    }
    .run()
    .map_err(|e| e.to_string())
}

fn find(results: &[CampaignResult], mode: Mode, cores: usize) -> &CampaignResult {
    results
        .iter()
        .find(|r| r.config.mode == mode && r.config.cores == cores)
        .expect("campaign ran")
}

fn crossover(results: &[CampaignResult]) -> Verdict {
    let mut problems = Vec::new();
    let eff = |mode| SWEEP_CORES.map(|c| find(results, mode, c).aggregate.efficiency.mean);
    let repl = eff(Mode::Replication);
    let ckpt = eff(Mode::Checkpointing);
    let failed: Vec<usize> = SWEEP_CORES
        .map(|c| find(results, Mode::Replication, c).aggregate.failed)
        .to_vec();
    let spread = repl.iter().cloned().fold(f64::MIN, f64::max)
        - repl.iter().cloned().fold(f64::MAX, f64::min);
    if spread >= REPL_SPREAD {
        problems.push(format!("replication efficiency spread {spread:.3}"));
    }
    if ckpt.windows(2).any(|w| w[1] >= w[0]) {
        problems.push(format!(
            "checkpointing efficiency not decreasing: {ckpt:.3?}"
        ));
    }
    if ckpt[3] >= repl[3] {
        problems.push(format!(
            "checkpointing {:.3} not below replication {:.3} at the highest rate",
            ckpt[3], repl[3]
        ));
    }
    verdict(
        "efficiency_crossover",
        problems,
        format!(
            "cores {SWEEP_CORES:?}: replication {repl:.3?} (unfinished runs {failed:?}), checkpointing {ckpt:.3?}"
        ),
    )
}

fn failure_free_replication() -> (Verdict, Vec<CampaignResult>) {
    let mut problems = Vec::new();
    let mut results = Vec::new();
    let mut seen = Vec::new();
    for name in ["stencil_halo", "cg_like", "particle_like"] {
        let cfg = CampaignConfig {
            app: name.into(),
            cores: 64,
            seeds: vec![1],
            ..sweep_base()
        };
        let res = run_campaign(&cfg, None).map_err(|e| e.to_string());
        match res {
            Ok(r) => {
                let e = r.aggregate.efficiency.mean;
                seen.push(format!("{name} {e:.4}"));
                if (e - 0.5).abs() > REPL_HALF_TOL {
                    problems.push(format!("{name}: efficiency {e:.4}"));
                }
                results.push(r);
            }
            Err(e) => problems.push(format!("{name}: {e}")),
        }
    }
    (
        verdict("failure_free_replication_half", problems, seen.join(", ")),
        results,
    )
}

fn time_distribution(results: &[CampaignResult], extra: &[CampaignResult]) -> Verdict {
    let mut problems = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let all: Vec<CampaignResult> = results.iter().chain(extra).cloned().collect();
    let paths = emit_report(&all, ReportFormat::Csv, dir.path()).unwrap();
    let mut rows = 0;
    let mut worst_identity: f64 = 0.0;
    let mut worst_repl_rollback: f64 = 0.0;
    let mut reader = csv::Reader::from_path(&paths[0]).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let buckets = [
        "useful_work_s",
        "redundant_work_s",
        "checkpoint_create_s",
        "restore_s",
        "rollback_s",
        "log_removal_s",
        "idle_s",
    ]
    .map(&col);
    let (total_col, mode_col, rollback_col) = (col("total_s"), col("mode"), col("rollback_s"));
    for rec in reader.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        let total = f(total_col);
        let sum: f64 = buckets.iter().map(|&i| f(i)).sum();
        let err = (sum - total).abs() / total;
        worst_identity = worst_identity.max(err);
        if err > BUCKET_TOL {
            problems.push(format!("row {rows}: buckets {sum} vs total {total}"));
        }
        if &rec[mode_col] == "repl" {
            let share = f(rollback_col) / total;
            worst_repl_rollback = worst_repl_rollback.max(share);
            if share >= 0.01 {
                problems.push(format!("row {rows}: replication rollback share {share:.4}"));
            }
        }
        rows += 1;
    }
    let top = find(results, Mode::Checkpointing, SWEEP_CORES[3])
        .aggregate
        .clone();
    let ft = (top.checkpoint_create_s.mean + top.restore_s.mean + top.rollback_s.mean)
        / top.total_s.mean;
    if ft <= 0.25 {
        problems.push(format!(
            "checkpointing overhead share {ft:.3} at the highest rate"
        ));
    }
    verdict(
        "time_distribution",
        problems,
        format!(
            "{rows} csv rows, worst identity error {worst_identity:.2e}, worst replication rollback share {worst_repl_rollback:.2e}, checkpointing overhead {ft:.3} at {} cores",
            SWEEP_CORES[3]
        ),
    )
}

// ---- checkpoint store -------------------------------------------------------

fn atomicity_config(store: &Path) -> RunConfig {
    RunConfig::new(2, 0)
        .with_mode(Mode::Checkpointing)
        .with_checkpoints(0.45, 0.1)
        .with_step_seconds(STEP_SECONDS)
        .with_store(StoreSpec::Dir(store.to_path_buf()))
}

fn wave_dirs_beyond_latest(store: &Path, latest: Option<(u64, u64)>) -> bool {
    let s = CheckpointStore::dir(store).unwrap();
    s.list().unwrap().iter().any(|p| {
        let mut c = p
            .components()
            .map(|c| c.as_os_str().to_str().unwrap().parse::<u64>().unwrap_or(0));
        let (inc, seq) = (c.next().unwrap(), c.next().unwrap());
        seq > 0 && latest.is_none_or(|l| (inc, seq) > l)
    })
}

fn atomicity() -> Verdict {
    let app = AnyApp::by_name("stencil_halo", 5, STEPS).unwrap();
    let expected = app.reference_checksum(2);
    let mut problems = Vec::new();
    let full_dir = tempfile::tempdir().unwrap();
    let full = app.run(&atomicity_config(full_dir.path())).unwrap();
    if full.stats.waves_committed != 3 {
        problems.push(format!(
            "calibration run committed {} waves",
            full.stats.waves_committed
        ));
    }
    let events = full.stats.events;
    let mut torn = 0;
    let mut restored = 0;
    for k in 1..=events {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = atomicity_config(dir.path());
        cfg.halt_after_events = Some(k);
        if let Err(e) = app.run(&cfg) {
            problems.push(format!("halt at {k}: {e}"));
            continue;
        }
        let store = CheckpointStore::dir(dir.path()).unwrap();
        let latest = match store.latest() {
            Ok(l) => l,
            Err(e) => {
                problems.push(format!("halt at {k}: unreadable LATEST: {e}"));
                continue;
            }
        };
        if let Some(mk) = latest {
            if !store.wave_complete(mk) {
                problems.push(format!(
                    "halt at {k}: LATEST names an incomplete wave {mk:?}"
                ));
            }
            restored += 1;
        }
        if wave_dirs_beyond_latest(dir.path(), latest.map(|l| (l.incarnation, l.seq))) {
            torn += 1;
        }
        cfg.halt_after_events = None;
        cfg.resume = true;
        match app.run(&cfg) {
            Ok(out) if out.completed && out.checksum.as_deref() == Some(expected.as_str()) => {}
            Ok(out) => problems.push(format!(
                "halt at {k}: restart finished={} with a different result",
                out.completed
            )),
            Err(e) => problems.push(format!("halt at {k}: restart failed: {e}")),
        }
    }
    if torn == 0 {
        problems.push("no halt landed inside a wave write".into());
    }
    verdict(
        "checkpoint_atomicity",
        problems,
        format!("{events} halt points, {torn} inside a wave write, {restored} restarts from a committed wave"),
    )
}

fn restart_width() -> Verdict {
    let mut problems = Vec::new();
    let refs = references();
    let kill = |time, selector| ScheduledFailure { time, selector };
    let n = 4;
    for app in apps() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(n, n)
            .with_mode(Mode::Combined)
            .with_checkpoints(0.3, 0.05)
            .with_step_seconds(STEP_SECONDS)
            .with_sim(slow_sim())
            .with_store(StoreSpec::Dir(dir.path().to_path_buf()))
            .with_failures(vec![
                kill(0.25, VictimSelector::Cmp(1)),
                kill(0.3, VictimSelector::Rep(2)),
            ]);
        cfg.stop_at = Some(2.2);
        let first = match app.run(&cfg) {
            Ok(o) => o,
            Err(e) => {
                problems.push(format!("{}: first run: {e}", app.name()));
                continue;
            }
        };
        let last_repair = first
            .failures
            .iter()
            .filter_map(|f| f.detected_at)
            .fold(0.0, f64::max);
        let later_waves = first
            .stats
            .wave_request_times
            .iter()
            .filter(|&&t| t > last_repair)
            .count();
        if first.stats.repairs == 0
            || later_waves == 0
            || first.completed
            || first.final_world.world().len() >= 2 * n
        {
            problems.push(format!(
                "{}: store does not come from a shrunken world (repairs {}, waves after repair {later_waves}, completed {})",
                app.name(),
                first.stats.repairs,
                first.completed
            ));
            continue;
        }
        for new_m in [0, n / 2, n] {
            let mut again = RunConfig::new(n, new_m)
                .with_mode(if new_m == 0 {
                    Mode::Checkpointing
                } else {
                    Mode::Combined
                })
                .with_checkpoints(0.3, 0.05)
                .with_step_seconds(STEP_SECONDS)
                .with_sim(slow_sim())
                .with_store(StoreSpec::Dir(dir.path().to_path_buf()));
            again.resume = true;
            match app.run(&again) {
                Ok(out) => {
                    let p = oracle_problems(&out, &refs[&(app.name().to_string(), n)]);
                    if out.stats.restores == 0 {
                        problems.push(format!("{} m={new_m}: did not restore", app.name()));
                    }
                    problems.extend(
                        p.into_iter()
                            .map(|x| format!("{} m={new_m}: {x}", app.name())),
                    );
                }
                Err(e) => problems.push(format!("{} m={new_m}: {e}", app.name())),
            }
        }
    }
    verdict(
        "restart_at_new_width",
        problems,
        format!("N={n}, replicas 0/{}/{n}, {} apps", n / 2, apps().len()),
    )
}

// ---- determinism ------------------------------------------------------------

fn trace_hashes() -> Vec<String> {
    let cases: Vec<(AnyApp, u64)> = apps()
        .into_iter()
        .flat_map(|a| (0..12).map(move |s| (a.clone(), s)))
        .collect();
    cases
        .par_iter()
        .map(|(app, seed)| app.run(&recoverable_case(4, 2, *seed)).unwrap().trace_hash)
        .collect()
}

fn determinism() -> Verdict {
    let mut problems = Vec::new();
    let pool = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
    };
    let one = pool(1).install(trace_hashes);
    let again = pool(1).install(trace_hashes);
    let four = pool(4).install(trace_hashes);
    if one != again {
        problems.push("trace hashes differ between identical runs".into());
    }
    if one != four {
        problems.push("trace hashes differ between 1 and 4 threads".into());
    }
    if one.iter().collect::<BTreeSet<_>>().len() < one.len() / 2 {
        problems.push("trace hashes do not depend on the configuration".into());
    }
    let campaign = CampaignConfig {
        cores: 32,
        mode: Mode::Checkpointing,
        mtbf_s: Some(1500.0),
        seeds: (1..=6).collect(),
        target_time_s: 3600.0,
        ..sweep_base()
    };
    let reference = reference_metrics(&campaign).unwrap();
    let a = pool(1).install(|| run_campaign(&campaign, Some(&reference)).unwrap());
    let b = pool(4).install(|| run_campaign(&campaign, Some(&reference)).unwrap());
    if a != b {
        problems.push("campaign rows differ between 1 and 4 threads".into());
    }
    verdict(
        "determinism",
        problems,
        format!(
            "{} traces and one 6-seed campaign under 1 and 4 threads",
            one.len()
        ),
    )
}

fn main() {
    let mut verdicts = vec![young_daly_intervals(), mtbf_scaling()];
    let oracle = oracle_sweep();
    verdicts.push(master_oracle(&oracle));
    verdicts.push(exactly_once(&oracle));
    let (half, failure_free) = failure_free_replication();
    match crossover_sweep() {
        Ok(results) => {
            verdicts.push(crossover(&results));
            verdicts.push(half);
            verdicts.push(time_distribution(&results, &failure_free));
        }
        Err(e) => {
            verdicts.push(verdict(
                "efficiency_crossover",
                vec![e.clone()],
                String::new(),
            ));
            verdicts.push(half);
            verdicts.push(verdict("time_distribution", vec![e], String::new()));
        }
    }
    verdicts.push(atomicity());
    verdicts.push(restart_width());
    verdicts.push(determinism());

    let mut failed = 0;
    for v in &verdicts {
        println!(
            "{} {}: {}",
            if v.ok { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
        failed += usize::from(!v.ok);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        verdicts.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
