//! Analytical thermal and energy models: the RC temperature baseline, the
//! utilization-to-watts lookup, per-fan speed estimation, and cooling-energy
//! accounting via a coefficient-of-performance polynomial.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::regress::{LinearModel, Model};

pub const KELVIN_OFFSET: f64 = 273.15;

/// Default chilled-air supply temperature for the CoP model, °C.
pub const DEFAULT_SUPPLY_TEMP_C: f64 = 25.0;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error("thermal {0} must be positive")]
    NonPositiveParam(&'static str),
    #[error("utilization {0} outside [0, 100]")]
    UtilizationOutOfRange(f64),
    #[error("power curve invalid: {0}")]
    BadCurve(&'static str),
    #[error("negative time {0}")]
    NegativeTime(f64),
}

/// Lumped RC thermal parameters of a host.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcParams {
    /// Thermal resistance, K/W.
    pub r: f64,
    /// Heat capacity, J/K.
    pub c: f64,
    /// Initial CPU temperature, Kelvin.
    pub t_initial_k: f64,
}

impl Default for RcParams {
    fn default() -> Self {
        // Literature constants for a rack server class machine.
        RcParams { r: 0.34, c: 340.0, t_initial_k: 318.0 }
    }
}

/// Lumped RC step response: starts at the initial temperature and relaxes
/// exponentially toward the steady state `P*R + T_in` with time constant
/// `R*C`. Inputs and output in °C; the initial temperature is in Kelvin.
pub fn rc_temperature(
    power_w: f64,
    t_in_c: f64,
    t_s: f64,
    params: &RcParams,
) -> Result<f64, ThermalError> {
    if params.r.is_nan() || params.r <= 0.0 {
        return Err(ThermalError::NonPositiveParam("resistance"));
    }
    if params.c.is_nan() || params.c <= 0.0 {
        return Err(ThermalError::NonPositiveParam("capacity"));
    }
    if t_s < 0.0 {
        return Err(ThermalError::NegativeTime(t_s));
    }
    let t_initial_c = params.t_initial_k - KELVIN_OFFSET;
    let steady = power_w * params.r + t_in_c;
    Ok(steady + (t_initial_c - steady) * (-t_s / (params.r * params.c)).exp())
}

/// Measured power draw at increasing utilization levels, interpolated
/// linearly in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    /// (utilization percent, watts) sorted ascending, covering 0 and 100.
    pub points: Vec<(f64, f64)>,
}

impl PowerCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<PowerCurve, ThermalError> {
        if points.len() < 2 {
            return Err(ThermalError::BadCurve("need at least two points"));
        }
        if points[0].0 != 0.0 || points[points.len() - 1].0 != 100.0 {
            return Err(ThermalError::BadCurve("endpoints 0 and 100 required"));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(ThermalError::BadCurve("utilizations must increase"));
            }
            if w[1].1 < w[0].1 {
                return Err(ThermalError::BadCurve("watts must be nondecreasing"));
            }
        }
        if points.iter().any(|(u, w)| !u.is_finite() || !w.is_finite() || *w < 0.0) {
            return Err(ThermalError::BadCurve("points must be finite and nonnegative"));
        }
        Ok(PowerCurve { points })
    }

    /// Stand-in curve spanning the observed 56..380 W envelope of a dual-CPU
    /// rack server at 0..100% utilization. Not a vendor measurement; override
    /// per host type in the simulator config.
    pub fn default_dell_like() -> PowerCurve {
        PowerCurve::new(vec![
            (0.0, 56.0),
            (10.0, 120.0),
            (20.0, 149.0),
            (30.0, 176.0),
            (40.0, 203.0),
            (50.0, 230.0),
            (60.0, 256.0),
            (70.0, 283.0),
            (80.0, 311.0),
            (90.0, 345.0),
            (100.0, 380.0),
        ])
        .expect("static curve is valid")
    }

    pub fn idle_watts(&self) -> f64 {
        self.points[0].1
    }

    pub fn peak_watts(&self) -> f64 {
        self.points[self.points.len() - 1].1
    }
}

/// Piecewise-linear interpolation of the power curve; exact at the knots.
pub fn power_at(curve: &PowerCurve, utilization: f64) -> Result<f64, ThermalError> {
    if !(0.0..=100.0).contains(&utilization) || !utilization.is_finite() {
        return Err(ThermalError::UtilizationOutOfRange(utilization));
    }
    let pts = &curve.points;
    for w in pts.windows(2) {
        let ((u0, p0), (u1, p1)) = (w[0], w[1]);
        if utilization == u0 {
            return Ok(p0);
        }
        if utilization < u1 {
            return Ok(p0 + (p1 - p0) * (utilization - u0) / (u1 - u0));
        }
    }
    Ok(pts[pts.len() - 1].1)
}

/// Per-fan linear regressions over the non-fan features, with predictions
/// clamped to each fan's observed training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanModels {
    pub models: [LinearModel; 4],
    /// (min, max) RPM seen in training, per fan.
    pub bounds: [(f64, f64); 4],
}

/// Predict the four fan speeds for a non-fan feature vector, clamped to the
/// training bounds of each fan column.
pub fn estimate_fan_speeds(fans: &FanModels, features_without_fans: &[f64]) -> [f64; 4] {
    let mut out = [0.0f64; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        let raw = fans.models[i].predict_row(features_without_fans);
        let (lo, hi) = fans.bounds[i];
        *slot = raw.clamp(lo, hi);
    }
    out
}

/// Coefficient of performance of the cooling plant at a given supply air
/// temperature: `0.0068*T^2 + 0.0008*T + 0.458`.
pub fn cop(t_supply_c: f64) -> f64 {
    0.0068 * t_supply_c * t_supply_c + 0.0008 * t_supply_c + 0.458
}

/// Cooling energy needed to remove the heat of the given computing energy:
/// `computing / CoP(t_supply)`.
pub fn cooling_energy(computing_kwh: f64, t_supply_c: f64) -> f64 {
    debug_assert!(computing_kwh >= 0.0);
    computing_kwh / cop(t_supply_c)
}

/// Accumulated computing and cooling energy, kWh.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub computing_kwh: f64,
    pub cooling_kwh: f64,
}

impl EnergyLedger {
    pub fn add(&mut self, computing_kwh: f64, cooling_kwh: f64) {
        self.computing_kwh += computing_kwh;
        self.cooling_kwh += cooling_kwh;
    }

    pub fn total_kwh(&self) -> f64 {
        self.computing_kwh + self.cooling_kwh
    }
}
