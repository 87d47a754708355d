//! Discrete-event simulator for dense-reader RFID networks.
//!
//! A set of RFID readers shares a small number of channels inside one arena.
//! Each round the readers contend for slots and channels, winners read the
//! tags inside their read range, and — under the flagship protocol — share
//! what they learned through a server-mediated information-sharing phase.
//! The engine replays this round structure deterministically from a seed and
//! reports throughput, waiting-time, and energy metrics per protocol.
//!
//! Modules:
//! - [`geometry`]: arena, placement, and reader mobility.
//! - [`sift`]: slot-selection distributions and win-probability math.
//! - [`radio`]: path-loss model and beacon collision grouping.
//! - [`protocol`]: round messages, reader state, and the protocol trait.
//! - [`ierap`]: the flagship protocol (skewed slot draw, pairwise
//!   resolution, information sharing).
//! - [`baselines`]: comparison protocols.
//! - [`engine`]: the discrete-event round loop.
//! - [`metrics`]: energy ledger and report assembly.
//! - [`config`]: scenario files and presets.
//! - [`cli`]: command-line front end.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod engine;
pub mod geometry;
pub mod ierap;
pub mod metrics;
pub mod protocol;
pub mod radio;
pub mod sift;

/// Reader identifier; dense, assigned from zero in placement order.
pub type ReaderId = u32;

/// Tag identifier; dense, assigned from zero in placement order.
pub type TagId = u64;

pub use config::{preset, ConfigError, ScenarioConfig};
pub use engine::{Engine, EventKind, EventLog, SimFault};
pub use metrics::MetricsReport;
