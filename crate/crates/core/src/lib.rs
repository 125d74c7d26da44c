//! Thermal prediction and scheduling workbench for data-center hosts.
//!
//! The crate is organized around the pipeline it implements:
//!
//! * [`telemetry`] — parse and clean raw host telemetry logs, build per-host
//!   training datasets with an ambient-temperature target.
//! * [`regress`] — baseline regression models (OLS, ridge, lasso, SGD, MLP),
//!   RMSE scoring and k-fold cross-validation.
//! * [`gbt`] — gradient-boosted regression trees with a regularized split
//!   objective, grid search and feature-importance analysis.
//! * [`thermal`] — analytical RC temperature baseline, utilization-to-power
//!   lookup, fan-speed estimation and cooling-energy accounting.
//! * [`sim`] — discrete-interval cluster simulator: hosts, VMs, trace
//!   playback, migrations, overload/underload detection.
//! * [`sched`] — placement policies (thermal-aware, round-robin,
//!   energy-greedy) plus the prediction guard used at decision time.
//! * [`metrics`] — SLA/energy/thermal reporting and run comparison.
//! * [`models`] — on-disk model file format shared by training, scheduling
//!   and the serving endpoint.
//! * [`synth`] — deterministic synthetic telemetry and workload generators.

pub mod gbt;
pub mod metrics;
pub mod models;
pub mod regress;
pub mod sched;
pub mod sim;
pub mod synth;
pub mod telemetry;
pub mod thermal;
