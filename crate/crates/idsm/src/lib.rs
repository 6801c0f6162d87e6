//! File formats, configuration, metrics and run drivers around
//! [`idsm_core`].
//!
//! The `idsm` binary exposes four subcommands:
//!
//! * `generate` writes synthetic boundary measurements,
//! * `reconstruct` runs the segment-wise reconstruction on them,
//! * `metrics` recomputes truth metrics for a finished run,
//! * `sweep` explores a grid of noise levels, damping factors, schemes and seeds.

pub mod config;
pub mod error;
pub mod formats;
pub mod heatmap;
pub mod metrics;
pub mod pipeline;

pub use config::{RunConfig, ScenarioFile};
pub use error::{Error, Result};
pub use pipeline::{generate, metrics as recompute_metrics, reconstruct, sweep, ReconstructOptions, Setup, SweepGrid};
