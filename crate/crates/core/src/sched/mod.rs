//! Placement policies and the prediction machinery they share.
//!
//! Three schedulers implement [`crate::sim::Scheduler`]:
//!
//! * [`TasScheduler`] — thermal-aware: each VM goes to the feasible active
//!   host with the lowest predicted post-placement temperature, activating a
//!   fresh host only when nothing feasible remains.
//! * [`RrScheduler`] — a circular cursor over the full host list, skipping
//!   hosts that fail the same feasibility constraints; never consolidates.
//! * [`GraniteScheduler`] — energy-greedy reconstruction: a dynamic overload
//!   threshold (mean plus `s` standard deviations of active utilizations)
//!   and placement minimizing the estimated computing-plus-cooling energy
//!   increase.

mod features;
mod guard;
mod policy;

pub use features::{build_feature_vector, feature_vector_for_view, BankPredictor};
pub use guard::{guarded_predict, GuardedValue, PredictionGuard};
pub use policy::{
    granite_place, tas_place, CandidateRecord, GraniteScheduler, PlacementDecision, RrScheduler,
    TasScheduler,
};
