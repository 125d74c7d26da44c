//! Feature-vector assembly for scheduling-time predictions, and the
//! [`Predictor`] implementation backed by a model bank.

use crate::models::ModelBank;
use crate::sim::{
    load_view, load_view_with, ClusterState, HostId, HostLoadView, Prediction, Predictor,
    SimConfig, SimError, VmId,
};
use crate::telemetry::FEATURE_NAMES;
use crate::thermal::{estimate_fan_speeds, power_at, FanModels};

use super::guard::guarded_predict;

/// Assemble the 13-column feature vector for a hypothetical host load:
/// power comes from the utilization lookup, fan speeds from the per-host
/// fan regressions, everything else from the load view. Column order
/// matches the datasets the models were trained on.
pub fn feature_vector_for_view(
    view: &HostLoadView,
    cfg: &SimConfig,
    fans: &FanModels,
) -> Result<Vec<f64>, SimError> {
    let power = power_at(&cfg.power_curve, view.cpu_pct)?;
    let non_fan = [
        view.cpu_pct,
        cfg.host.ram_mb,
        view.ram_used_mb,
        f64::from(cfg.host.cores),
        f64::from(view.cores_used),
        view.net_rx,
        view.net_tx,
        f64::from(view.n_vms),
        power,
    ];
    let fan = estimate_fan_speeds(fans, &non_fan);
    let mut x = Vec::with_capacity(FEATURE_NAMES.len());
    x.extend_from_slice(&non_fan);
    x.extend_from_slice(&fan);
    Ok(x)
}

/// The prediction-model input for a host, optionally with one more VM
/// placed on it.
pub fn build_feature_vector(
    state: &ClusterState,
    host: HostId,
    pending_vm: Option<VmId>,
    cfg: &SimConfig,
    fans: &FanModels,
) -> Result<Vec<f64>, SimError> {
    let view = match pending_vm {
        Some(vm) => load_view_with(state, host, cfg, &[vm], &[]),
        None => load_view(state, host, cfg),
    };
    feature_vector_for_view(&view, cfg, fans)
}

/// Temperature predictor backed by per-host model files. Host index `i` in
/// the simulator maps to the `i`-th model in host-id order.
pub struct BankPredictor<'a> {
    bank: &'a ModelBank,
    cfg: &'a SimConfig,
    host_names: Vec<&'a str>,
    pub guard_enabled: bool,
}

impl<'a> BankPredictor<'a> {
    pub fn new(bank: &'a ModelBank, cfg: &'a SimConfig) -> Result<BankPredictor<'a>, SimError> {
        if bank.len() < cfg.n_hosts as usize {
            return Err(SimError::BadConfig(format!(
                "model bank has {} hosts, config needs {}",
                bank.len(),
                cfg.n_hosts
            )));
        }
        let host_names: Vec<&str> =
            bank.host_ids().take(cfg.n_hosts as usize).map(String::as_str).collect();
        for name in &host_names {
            let m = bank.get(name).expect("listed host exists");
            if m.feature_names != FEATURE_NAMES {
                return Err(SimError::BadConfig(format!(
                    "model for {name} has feature columns {:?}; scheduling needs {FEATURE_NAMES:?}",
                    m.feature_names
                )));
            }
            if m.fan_models.is_none() {
                return Err(SimError::BadConfig(format!(
                    "model for {name} lacks fan regressions"
                )));
            }
        }
        Ok(BankPredictor { bank, cfg, host_names, guard_enabled: true })
    }

    pub fn host_name(&self, host: HostId) -> &str {
        self.host_names[host.0 as usize]
    }
}

impl Predictor for BankPredictor<'_> {
    fn predict(&self, host: HostId, view: &HostLoadView) -> Result<Prediction, SimError> {
        let name = self
            .host_names
            .get(host.0 as usize)
            .ok_or_else(|| SimError::Prediction {
                host,
                detail: format!("no model mapped to host index {}", host.0),
            })?;
        let model = self.bank.get(name).expect("validated at construction");
        let fans = model.fan_models.as_ref().expect("validated at construction");
        let x = feature_vector_for_view(view, self.cfg, fans)?;
        let value = guarded_predict(self.bank, self.cfg.guard_margin_c, self.guard_enabled, name, &x)
            .map_err(|e| SimError::Prediction { host, detail: e.to_string() })?;
        Ok(Prediction { temp_c: value.temp_c, guard: value.outcome })
    }
}
