//! The false-prediction guard: models trained on narrow data can emit wild
//! values when fed inputs far outside what they saw. Predictions outside a
//! per-host plausibility band fall back to the average of the other hosts'
//! models on the same input.

use serde::{Deserialize, Serialize};

use crate::models::{ModelBank, ModelError};
use crate::sim::GuardOutcome;

/// Plausibility band for one host's predictions, derived from its training
/// target range plus a margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionGuard {
    pub lower: f64,
    pub upper: f64,
}

impl PredictionGuard {
    pub fn from_bounds(target_bounds: (f64, f64), margin_c: f64) -> PredictionGuard {
        PredictionGuard { lower: target_bounds.0 - margin_c, upper: target_bounds.1 + margin_c }
    }

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && self.lower <= v && v <= self.upper
    }
}

/// A guarded prediction and how it was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardedValue {
    pub temp_c: f64,
    pub outcome: GuardOutcome,
}

/// Predict with the host's own model; if the value falls outside the host's
/// guard band, return the mean of the peer models' predictions on the same
/// vector (each peer screened against its own band). If every peer is also
/// out of bounds, clamp the own prediction into the band and flag it
/// critical. Never returns a non-finite value.
pub fn guarded_predict(
    bank: &ModelBank,
    margin_c: f64,
    enabled: bool,
    host_id: &str,
    x: &[f64],
) -> Result<GuardedValue, ModelError> {
    let own = bank.get(host_id)?;
    let own_pred = own.predict(x)?;
    if !enabled {
        return Ok(GuardedValue { temp_c: own_pred, outcome: GuardOutcome::Disabled });
    }
    let guard = PredictionGuard::from_bounds(own.target_bounds, margin_c);
    if guard.contains(own_pred) {
        return Ok(GuardedValue { temp_c: own_pred, outcome: GuardOutcome::Clean });
    }

    let mut sum = 0.0f64;
    let mut n = 0usize;
    for (id, peer) in &bank.models {
        if id == host_id {
            continue;
        }
        let pred = peer.predict(x)?;
        if PredictionGuard::from_bounds(peer.target_bounds, margin_c).contains(pred) {
            sum += pred;
            n += 1;
        }
    }
    if n > 0 {
        return Ok(GuardedValue { temp_c: sum / n as f64, outcome: GuardOutcome::PeerAverage });
    }
    let clamped = if own_pred.is_finite() {
        own_pred.clamp(guard.lower, guard.upper)
    } else {
        (guard.lower + guard.upper) / 2.0
    };
    Ok(GuardedValue { temp_c: clamped, outcome: GuardOutcome::CriticalClamped })
}
