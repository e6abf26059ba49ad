mod common;

use common::*;
use ftsim::bench::apps::{AnyApp, APP_NAMES};
use ftsim::RunConfig;

#[test]
fn every_app_matches_its_sequential_reference_on_every_width() {
    for app in apps() {
        for (n, m) in widths() {
            let out = app.run(&failure_free(n, m)).unwrap();
            let p = oracle_problems(&out, &app.reference_checksum(n));
            assert!(p.is_empty(), "{} n={n} m={m}: {p:?}", app.name());
        }
    }
}

#[test]
fn larger_worlds_match_too() {
    for name in APP_NAMES {
        let app = AnyApp::by_name(name, 8, 6).unwrap();
        let want = app.reference_checksum(7);
        for m in [0, 3, 7] {
            let out = app.run(&RunConfig::new(7, m)).unwrap();
            assert_eq!(out.checksum.as_deref(), Some(want.as_str()), "{name} m={m}");
        }
    }
}

#[test]
fn replicas_do_the_same_work_twice() {
    for app in apps() {
        let plain = app.run(&RunConfig::new(4, 0)).unwrap();
        let dual = app.run(&RunConfig::new(4, 4)).unwrap();
        let (p, d) = (&plain.metrics, &dual.metrics);
        assert_eq!(d.cores, 2 * p.cores);
        assert!((d.useful_work_s - d.redundant_work_s).abs() < 1e-9, "{d:?}");
        assert!((d.flops_per_core / p.flops_per_core - 0.5).abs() < 0.01);
    }
}

#[test]
fn unknown_app_names_are_rejected() {
    assert!(AnyApp::by_name("hpl", 4, 4).is_none());
}
