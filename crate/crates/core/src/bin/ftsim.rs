use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ftsim::bench::{
    emit_report, read_results, reference_metrics, run_campaign, write_results, Aggregate,
    CampaignConfig, CampaignResult, ReportFormat, SeedRow, SweepConfig,
};
use ftsim::checkpoint::Mode;
use ftsim::engine::StoreSpec;
use ftsim::failure::parse_schedule;
use ftsim::simnet::SimConfig;

#[derive(Parser)]
#[command(
    name = "ftsim",
    version,
    about = "Simulate replication and checkpoint/restart on a message-passing job"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration for one seed.
    Run(RunArgs),
    /// Run every campaign described by a JSON sweep file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
    },
    /// Turn stored results into CSV or JSON reports.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    app: String,
    #[arg(long)]
    cores: usize,
    /// Share of cores running replicas (0.5 is dual redundancy).
    #[arg(long, default_value_t = 0.5)]
    replicas: f64,
    #[arg(long)]
    mode: Mode,
    /// System MTBF in seconds; omit for a failure-free run.
    #[arg(long)]
    mtbf: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    ckpt_cost: f64,
    /// Checkpoint interval; Young/Daly when omitted.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Cells, rows or particles per rank.
    #[arg(long, default_value_t = 16)]
    app_size: usize,
    #[arg(long, default_value_t = 3600.0)]
    target_time: f64,
    #[arg(long, default_value_t = 60.0)]
    step_seconds: f64,
    #[arg(long, default_value_t = ftsim::failure::DEFAULT_SHAPE)]
    weibull_shape: f64,
    /// Substrate configuration (JSON).
    #[arg(long)]
    sim_config: Option<PathBuf>,
    /// Failure schedule file replacing the sampled one.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Checkpoint store directory (default: `<out>/store`).
    #[arg(long)]
    store: Option<PathBuf>,
    /// Start from the store's LATEST wave.
    #[arg(long)]
    resume: bool,
    /// Write every dispatched event to `<out>/trace.ndjson`.
    #[arg(long)]
    trace: bool,
}

fn run_cmd(a: RunArgs) -> Result<(), String> {
    let sim = match &a.sim_config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            SimConfig::from_json(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => SimConfig::default(),
    };
    let campaign = CampaignConfig {
        app: a.app,
        app_size: a.app_size,
        target_time_s: a.target_time,
        step_seconds: a.step_seconds,
        cores: a.cores,
        replica_fraction: a.replicas,
        mode: a.mode,
        mtbf_s: a.mtbf,
        weibull_shape: a.weibull_shape,
        ckpt_cost_s: Some(a.ckpt_cost),
        state_bytes_per_rank: None,
        tau_s: a.tau,
        seeds: vec![a.seed],
        sim,
        horizon_factor: 20.0,
    };
    let app = campaign.app().map_err(|e| e.to_string())?;
    let mut cfg = campaign.run_config(a.seed).map_err(|e| e.to_string())?;
    if let Some(p) = &a.schedule {
        let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        cfg.failures = parse_schedule(&text).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    fs::create_dir_all(&a.out).map_err(|e| format!("{}: {e}", a.out.display()))?;
    cfg.store = StoreSpec::Dir(a.store.unwrap_or_else(|| a.out.join("store")));
    cfg.resume = a.resume;
    cfg.trace_dump = a.trace;

    let reference = reference_metrics(&campaign).map_err(|e| e.to_string())?;
    let mut outcome = app.run(&cfg).map_err(|e| e.to_string())?;
    if let Some(dump) = outcome.trace_dump.take() {
        let p = a.out.join("trace.ndjson");
        fs::write(&p, dump).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    let detail = serde_json::to_string_pretty(&outcome).map_err(|e| e.to_string())?;
    fs::write(a.out.join("outcome.json"), detail).map_err(|e| e.to_string())?;
    let summary = format!(
        "{} {} n={} m={} completed={} t={:.2}s failures={} repairs={} restarts={} waves={} checksum={}",
        outcome.app,
        outcome.mode.short_name(),
        outcome.n,
        outcome.m,
        outcome.completed,
        outcome.end_time,
        outcome.stats.kills,
        outcome.stats.repairs,
        outcome.stats.restarts,
        outcome.stats.waves_committed,
        outcome.checksum.as_deref().unwrap_or("-"),
    );
    let row =
        SeedRow::from_outcome(&campaign, &cfg, outcome, &reference).map_err(|e| e.to_string())?;
    println!(
        "{summary} efficiency={:.4}",
        row.metrics.efficiency.unwrap_or(0.0)
    );
    let result = CampaignResult {
        config: campaign,
        reference,
        aggregate: Aggregate::of(std::slice::from_ref(&row)),
        rows: vec![row],
    };
    write_results(&a.out, &[result]).map_err(|e| e.to_string())?;
    Ok(())
}

fn sweep_cmd(config: PathBuf, out: PathBuf) -> Result<(), String> {
    let text = fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
    let results = match serde_json::from_str::<SweepConfig>(&text) {
        Ok(sweep) => sweep.run().map_err(|e| e.to_string())?,
        Err(sweep_err) => {
            let single: CampaignConfig = serde_json::from_str(&text).map_err(|e| {
                format!(
                    "{}: not a sweep ({sweep_err}) or a campaign ({e})",
                    config.display()
                )
            })?;
            vec![run_campaign(&single, None).map_err(|e| e.to_string())?]
        }
    };
    for r in &results {
        println!(
            "{:>14} {:>8} cores={:<5} efficiency={:.4}±{:.4} total={:.1}s",
            r.config.app,
            r.config.mode.short_name(),
            r.config.cores,
            r.aggregate.efficiency.mean,
            r.aggregate.efficiency.std,
            r.aggregate.total_s.mean
        );
    }
    let path = write_results(&out, &results).map_err(|e| e.to_string())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run(a) => run_cmd(a),
        Cmd::Sweep { config, out } => sweep_cmd(config, out),
        Cmd::Report { input, format } => read_results(&input)
            .and_then(|r| emit_report(&r, format, &input))
            .map(|paths| paths.iter().for_each(|p| println!("wrote {}", p.display())))
            .map_err(|e| e.to_string()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ftsim: {e}");
            ExitCode::FAILURE
        }
    }
}
