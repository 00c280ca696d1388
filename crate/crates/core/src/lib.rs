//! `ctxfuse`: a trace-driven simulator for context-aware, energy-aware reconfiguration
//! of multi-sensor object detection.
//!
//! A vehicle carries several sensors (cameras, LiDAR, radar) feeding detector branches.
//! A model configuration is a set of branches whose outputs are merged with weighted
//! boxes fusion. At run time a controller periodically identifies the driving context,
//! asks a gate for per-configuration loss estimates, and picks the configuration that
//! minimizes `loss * (1 - lambda_e) + energy * lambda_e`. Sensors the chosen
//! configuration does not need are clock gated.
//!
//! ## Examples
//!
//! The `examples/` directory is the main way in. Each covers one capability:
//!
//! - **`energy_accounting`** - sensor, algorithm and system energy per configuration
//! - **`weighted_boxes_fusion`** - fuse branch outputs and score them
//! - **`gate_and_select`** - gate estimates, candidate filter and joint-loss choice
//! - **`run_trace`** - the runtime controller over a generated trace
//! - **`interval_policy`** - a custom context-identification schedule
//! - **`pareto_sweep`** - energy versus loss across `lambda_e` for all gates
//! - **`scenario_replay`** - per-context results against static configurations
//! - **`table1_profile`** - the bundled profile and its reference table
//! - **`calibrate_profile`** - Monte Carlo loss priors for a profile
//!
//! ```bash
//! cargo run --example run_trace
//! cargo run --release --example pareto_sweep
//! ```
//!
//! ## Command line
//!
//! The `ctxfuse` binary wraps the same pipeline for scripted experiments:
//!
//! ```bash
//! ctxfuse run --gate estimator --lambda-e 0.01 --generate fog:30,snow:60 --out out/
//! ctxfuse sweep --lambdas 0,0.001,0.01,0.1,1 --gates knowledge,estimator,oracle --out out/
//! ctxfuse report --steps out/steps.csv --out out/
//! ```
//!
//! ## Modules
//!
//! - [`types`]: sensors, branches, configurations, contexts, boxes
//! - [`energy`]: energy model and run ledger
//! - [`fusion`]: weighted boxes fusion and detection loss
//! - [`gating`]: knowledge, estimator and oracle gates, candidate filter
//! - [`optimizer`]: joint-loss selection and `lambda_e` sweeps
//! - [`runtime`]: the controller loop
//! - [`scenario`]: traces, synthetic detections, ground-truth losses
//! - [`profile`]: profile loading, validation and bundled datasets
//! - [`report`]: CSV/JSON outputs
//! - [`cli`]: the command line

pub mod cli;
pub mod energy;
pub mod error;
pub mod fusion;
pub mod gating;
pub mod optimizer;
pub mod profile;
pub mod report;
pub mod runtime;
pub mod scenario;
pub mod types;

pub use error::{Error, Result};
pub use gating::GateKind;
pub use optimizer::JointWeights;
pub use profile::{default_profile, ProfileDataset, SystemProfile};
pub use runtime::{run_trace, RunOutput, RunParams};
pub use scenario::SimulationTrace;
pub use types::{BBox, Context, Detection, ModelConfiguration};
