//! Deterministic simulation of a message-passing job protected by process
//! replication, coordinated checkpoint/restart, or both.
//!
//! A run is a set of virtual processes executing a [`bench::MiniApp`] on top
//! of a replica-aware runtime ([`runtime::Comm`]). Every process is an async
//! task driven by a single-threaded discrete-event executor, so a run is a
//! pure function of its configuration and seed.
//!
//! ```
//! use ftsim::bench::apps::StencilHalo;
//! use ftsim::engine::{run, RunConfig};
//!
//! let app = StencilHalo::new(8, 6);
//! let plain = run(&app, &RunConfig::new(4, 0)).unwrap();
//! let replicated = run(&app, &RunConfig::new(4, 4)).unwrap();
//! assert!(plain.completed && replicated.completed);
//! assert_eq!(plain.checksum, replicated.checksum);
//! ```

pub mod bench;
pub mod checkpoint;
pub mod engine;
pub mod failure;
pub mod runtime;
pub mod simnet;
pub mod topology;

pub use engine::{run, RunConfig, RunError, RunOutcome};
