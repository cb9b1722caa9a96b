//! Performance forensics for X11-era client/server systems.
//!
//! The crate bundles the tools needed to chase "erratic responsiveness"
//! complaints down to measurable causes:
//!
//! - [`probe`] — a scheduled injection-probe harness that launches commands
//!   on a fixed cycle, times them, and appends the results to a permanent
//!   tab-separated log. Includes a seeded gamma sample generator for
//!   synthetic workloads.
//! - [`stats`] — moment statistics, method-of-moments gamma fitting,
//!   fixed-width bucket histograms, the `vfstat` ASCII distribution report,
//!   and per-application time-series exports.
//! - [`font`] — the logarithmic font-service launch-time model: predicted
//!   launch time scales as `log(fonts)` relative to a measured baseline
//!   path, with signed percent-error comparison tables.
//! - [`load`] — exact mean-value analysis for closed queueing networks,
//!   response-time asymptotes and knee location, asymptote fitting on
//!   measured load curves, exceedance and escalation detectors, and NFS
//!   call-rate headroom.
//! - [`x11`] — a transparent interposing TCP relay that captures X11 wire
//!   traffic, an offline core-protocol decoder, sequence-number
//!   request/reply latency matching, and per-opcode latency attribution
//!   with a font-class share report.
//!
//! Every major capability has a runnable example:
//!
//! ```bash
//! cargo run --example probe_harness
//! cargo run --example vfstat_synthetic
//! cargo run --example font_scaling
//! cargo run --example load_curves
//! cargo run --example nfs_headroom
//! cargo run --example x11_trace_session
//! cargo run --example relay_overhead
//! ```
//!
//! The same operations are reachable from the `xfiles` binary; see the
//! [`cli`] module or `xfiles --help`.

pub mod cli;
pub mod font;
pub mod load;
pub mod probe;
pub mod stats;
pub mod x11;
