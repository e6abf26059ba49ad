mod common;

use proptest::prelude::*;

use common::*;
use ftsim::bench::{compute_efficiency, CampaignConfig};
use ftsim::checkpoint::Mode;
use ftsim::simnet::SimConfig;
use ftsim::RunConfig;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Each core's wall time lands in exactly one bucket, whatever happens.
    #[test]
    fn buckets_cover_the_run(app in 0usize..3, n in 1usize..=4, m_frac in 0.0f64..=1.0, seed in 0u64..10_000) {
        let m = (n as f64 * m_frac).round() as usize;
        let app = &apps()[app];
        let out = app.run(&recoverable_case(n, m, seed)).unwrap();
        let b = &out.metrics;
        prop_assert!(b.bucket_error() < 1e-9, "{:?}", b);
        prop_assert_eq!(b.cores, n + m);
        prop_assert_eq!(b.total_s, out.end_time);
        for v in [b.useful_work_s, b.redundant_work_s, b.checkpoint_create_s, b.restore_s, b.rollback_s, b.log_removal_s, b.idle_s] {
            prop_assert!(v >= 0.0);
        }
        if m == 0 {
            prop_assert_eq!(b.redundant_work_s, 0.0);
        }
    }
}

#[test]
fn halted_runs_still_balance() {
    let app = &apps()[1];
    for k in [5, 50, 200] {
        let mut cfg = recoverable_case(3, 2, 1);
        cfg.halt_after_events = Some(k);
        let out = app.run(&cfg).unwrap();
        assert!(out.halted && !out.completed);
        assert!(out.metrics.bucket_error() < 1e-9, "{:?}", out.metrics);
    }
}

#[test]
fn heavy_checkpoint_overhead_halves_efficiency() {
    let cfg = CampaignConfig {
        app: "stencil_halo".into(),
        app_size: 8,
        target_time_s: 7200.0,
        step_seconds: 60.0,
        cores: 16,
        replica_fraction: 0.0,
        mode: Mode::Checkpointing,
        mtbf_s: Some(400.0),
        weibull_shape: 0.7,
        ckpt_cost_s: Some(150.0),
        state_bytes_per_rank: None,
        tau_s: None,
        seeds: (1..=4).collect(),
        sim: SimConfig::default(),
        horizon_factor: 40.0,
    };
    let res = ftsim::bench::run_campaign(&cfg, None).unwrap();
    for row in &res.rows {
        let m = &row.metrics;
        let overhead = m.checkpoint_create_s + m.restore_s + m.rollback_s;
        assert!(row.completed);
        assert!(overhead > m.useful_work_s, "{m:?}");
        assert!(m.efficiency.unwrap() < 0.5, "{m:?}");
    }
}

#[test]
fn efficiency_is_relative_to_the_plain_run() {
    let app = &apps()[0];
    let plain = app.run(&RunConfig::new(4, 0)).unwrap();
    let half = app.run(&RunConfig::new(4, 2)).unwrap();
    let e = compute_efficiency(&half.metrics, &plain.metrics).unwrap();
    assert!((e - 4.0 / 6.0).abs() < 0.01, "{e}");
}
