//! The three placement policies.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::sim::{
    load_view_with, ClusterState, HostId, PlacementRequest, Prediction, Predictor, ScheduleMap,
    Scheduler, SimConfig, SimError, VmId,
};
use crate::thermal::{cop, power_at};

/// Feasibility probe outcome for one (host, vm) pair.
struct Check {
    feasible: bool,
    /// Predicted post-placement temperature; absent when the capacity or
    /// utilization screen already failed and no prediction was made.
    predicted: Option<f64>,
    /// Post-placement utilization percent (absent when capacity failed).
    util_pct: Option<f64>,
}

/// Provisional bookkeeping for one placement pass: assignments made so far
/// count against capacity, utilization and predicted temperature of their
/// targets.
struct Tracker<'a> {
    state: &'a ClusterState,
    cfg: &'a SimConfig,
    predictor: &'a dyn Predictor,
    blocked: &'a BTreeSet<HostId>,
    pending: BTreeMap<HostId, Vec<VmId>>,
    activated: BTreeSet<HostId>,
    /// Utilization bound (fraction) placements must respect.
    util_bound: f64,
}

impl<'a> Tracker<'a> {
    fn new(
        state: &'a ClusterState,
        cfg: &'a SimConfig,
        predictor: &'a dyn Predictor,
        blocked: &'a BTreeSet<HostId>,
        util_bound: f64,
    ) -> Tracker<'a> {
        Tracker {
            state,
            cfg,
            predictor,
            blocked,
            pending: BTreeMap::new(),
            activated: BTreeSet::new(),
            util_bound,
        }
    }

    fn is_active(&self, h: HostId) -> bool {
        self.state.is_active(h) || self.activated.contains(&h)
    }

    fn eligible(&self, h: HostId, req: &PlacementRequest) -> bool {
        h != req.source && !self.blocked.contains(&h)
    }

    fn with_vm(&self, h: HostId, vm: VmId) -> Vec<VmId> {
        let mut extra = self.pending.get(&h).cloned().unwrap_or_default();
        extra.push(vm);
        extra
    }

    fn capacity_ok(&self, h: HostId, extra: &[VmId]) -> bool {
        let (mut cores, mut ram) = self.state.provisioned(h);
        for &vm in extra {
            let f = self.state.flavors[vm.0 as usize];
            cores += f.cores();
            ram += f.ram_mb();
        }
        cores <= self.cfg.host.cores && ram <= self.cfg.host.ram_mb
    }

    /// Capacity screen, then utilization screen, then the thermal screen on
    /// the predicted post-placement temperature.
    fn check(&self, h: HostId, vm: VmId) -> Result<Check, SimError> {
        let extra = self.with_vm(h, vm);
        if !self.capacity_ok(h, &extra) {
            return Ok(Check { feasible: false, predicted: None, util_pct: None });
        }
        let view = load_view_with(self.state, h, self.cfg, &extra, &[]);
        if view.cpu_pct > self.util_bound * 100.0 {
            return Ok(Check { feasible: false, predicted: None, util_pct: Some(view.cpu_pct) });
        }
        let Prediction { temp_c, .. } = self.predictor.predict(h, &view)?;
        Ok(Check {
            feasible: temp_c < self.cfg.t_red,
            predicted: Some(temp_c),
            util_pct: Some(view.cpu_pct),
        })
    }

    /// Utilization percent of the host with pending assignments only.
    fn util_before(&self, h: HostId) -> f64 {
        let extra = self.pending.get(&h).cloned().unwrap_or_default();
        load_view_with(self.state, h, self.cfg, &extra, &[]).cpu_pct
    }

    fn commit(&mut self, vm: VmId, h: HostId, map: &mut ScheduleMap) {
        if !self.state.is_active(h) && self.activated.insert(h) {
            map.new_activations.push(h);
        }
        self.pending.entry(h).or_default().push(vm);
        map.assignments.insert(vm, h);
    }
}

/// One host considered during a placement decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub host: HostId,
    pub predicted: Option<f64>,
    pub feasible: bool,
}

/// A recorded placement decision, replayable to audit the argmin rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementDecision {
    pub interval: usize,
    pub vm: VmId,
    pub chosen: HostId,
    pub candidates: Vec<CandidateRecord>,
}

/// Thermal-aware scheduling: every VM goes to the feasible active host with
/// the minimum predicted post-placement temperature (ties to the smallest
/// host id); when no active host is feasible, the first feasible inactive
/// host is switched on. Each placement commits provisionally before the
/// next VM is considered.
pub struct TasScheduler {
    pub log_decisions: bool,
    pub decisions: Vec<PlacementDecision>,
}

impl TasScheduler {
    pub fn new() -> TasScheduler {
        TasScheduler { log_decisions: false, decisions: Vec::new() }
    }

    pub fn with_decision_log() -> TasScheduler {
        TasScheduler { log_decisions: true, decisions: Vec::new() }
    }
}

impl Default for TasScheduler {
    fn default() -> Self {
        Self::new()
    }
}

impl Scheduler for TasScheduler {
    fn name(&self) -> &'static str {
        "tas"
    }

    fn place(
        &mut self,
        requests: &[PlacementRequest],
        state: &ClusterState,
        cfg: &SimConfig,
        predictor: &dyn Predictor,
        blocked: &BTreeSet<HostId>,
    ) -> Result<ScheduleMap, SimError> {
        let mut tracker = Tracker::new(state, cfg, predictor, blocked, cfg.u_max);
        let mut map = ScheduleMap::default();
        for req in requests {
            let mut candidates = Vec::new();
            let mut best: Option<(f64, HostId)> = None;
            for h in state.host_ids() {
                if !tracker.eligible(h, req) || !tracker.is_active(h) {
                    continue;
                }
                let check = tracker.check(h, req.vm)?;
                if self.log_decisions {
                    candidates.push(CandidateRecord {
                        host: h,
                        predicted: check.predicted,
                        feasible: check.feasible,
                    });
                }
                if check.feasible {
                    let t = check.predicted.expect("feasible implies predicted");
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, h));
                    }
                }
            }
            let chosen = match best {
                Some((_, h)) => h,
                None => {
                    // Activation path: no active host is feasible, so the
                    // coolest feasible inactive host is switched on.
                    let mut found: Option<(f64, HostId)> = None;
                    for h in state.host_ids() {
                        if !tracker.eligible(h, req) || tracker.is_active(h) {
                            continue;
                        }
                        let check = tracker.check(h, req.vm)?;
                        if self.log_decisions {
                            candidates.push(CandidateRecord {
                                host: h,
                                predicted: check.predicted,
                                feasible: check.feasible,
                            });
                        }
                        if check.feasible {
                            let t = check.predicted.expect("feasible implies predicted");
                            if found.is_none_or(|(bt, _)| t < bt) {
                                found = Some((t, h));
                            }
                        }
                    }
                    found.map(|(_, h)| h).ok_or(SimError::PlacementExhausted(req.vm))?
                }
            };
            tracker.commit(req.vm, chosen, &mut map);
            if self.log_decisions {
                self.decisions.push(PlacementDecision {
                    interval: state.interval,
                    vm: req.vm,
                    chosen,
                    candidates,
                });
            }
        }
        Ok(map)
    }
}

/// One-shot thermal-aware placement with decision records.
pub fn tas_place(
    requests: &[PlacementRequest],
    state: &ClusterState,
    cfg: &SimConfig,
    predictor: &dyn Predictor,
    blocked: &BTreeSet<HostId>,
) -> Result<(ScheduleMap, Vec<PlacementDecision>), SimError> {
    let mut s = TasScheduler::with_decision_log();
    let map = s.place(requests, state, cfg, predictor, blocked)?;
    Ok((map, s.decisions))
}

/// Round-robin placement: a cursor walks the full host list circularly and
/// each VM lands on the first host that satisfies the same feasibility
/// constraints as the thermal-aware policy. The cursor persists across
/// intervals. Never consolidates.
pub struct RrScheduler {
    cursor: usize,
}

impl RrScheduler {
    pub fn new() -> RrScheduler {
        RrScheduler { cursor: 0 }
    }
}

impl Default for RrScheduler {
    fn default() -> Self {
        Self::new()
    }
}

impl Scheduler for RrScheduler {
    fn name(&self) -> &'static str {
        "rr"
    }

    fn consolidates(&self) -> bool {
        false
    }

    fn place(
        &mut self,
        requests: &[PlacementRequest],
        state: &ClusterState,
        cfg: &SimConfig,
        predictor: &dyn Predictor,
        blocked: &BTreeSet<HostId>,
    ) -> Result<ScheduleMap, SimError> {
        let n = state.n_hosts as usize;
        let mut tracker = Tracker::new(state, cfg, predictor, blocked, cfg.u_max);
        let mut map = ScheduleMap::default();
        for req in requests {
            let mut chosen = None;
            for k in 0..n {
                let h = HostId(((self.cursor + k) % n) as u32);
                if !tracker.eligible(h, req) {
                    continue;
                }
                if tracker.check(h, req.vm)?.feasible {
                    chosen = Some(h);
                    self.cursor = (h.0 as usize + 1) % n;
                    break;
                }
            }
            let host = chosen.ok_or(SimError::PlacementExhausted(req.vm))?;
            tracker.commit(req.vm, host, &mut map);
        }
        Ok(map)
    }
}

/// Energy-greedy consolidation in the GRANITE style: the overload threshold
/// is recomputed each interval as mean plus `s` standard deviations of the
/// active hosts' utilizations (capped by `u_max`), and each VM goes to the
/// feasible host with the smallest estimated increase in combined
/// computing-plus-cooling power.
pub struct GraniteScheduler {
    pub s: f64,
    current_threshold: f64,
}

impl GraniteScheduler {
    pub fn new(s: f64, u_max: f64) -> GraniteScheduler {
        GraniteScheduler { s, current_threshold: u_max }
    }

    /// mean + s * stddev of the utilizations, as a fraction of capacity.
    pub fn dynamic_threshold(s: f64, utils_pct: &[f64], u_max: f64) -> f64 {
        if utils_pct.is_empty() {
            return u_max;
        }
        let n = utils_pct.len() as f64;
        let mean = utils_pct.iter().sum::<f64>() / n;
        let var = utils_pct.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / n;
        ((mean + s * var.sqrt()) / 100.0).min(u_max)
    }
}

impl Scheduler for GraniteScheduler {
    fn name(&self) -> &'static str {
        "granite"
    }

    fn overload_threshold(&mut self, active_utils_pct: &[f64], u_max: f64) -> f64 {
        self.current_threshold = Self::dynamic_threshold(self.s, active_utils_pct, u_max);
        self.current_threshold
    }

    fn place(
        &mut self,
        requests: &[PlacementRequest],
        state: &ClusterState,
        cfg: &SimConfig,
        predictor: &dyn Predictor,
        blocked: &BTreeSet<HostId>,
    ) -> Result<ScheduleMap, SimError> {
        let mut tracker =
            Tracker::new(state, cfg, predictor, blocked, self.current_threshold);
        let mut map = ScheduleMap::default();
        let combined_factor = 1.0 + 1.0 / cop(cfg.t_supply_c);
        for req in requests {
            let mut best: Option<(f64, HostId)> = None;
            for h in state.host_ids() {
                if !tracker.eligible(h, req) || !tracker.is_active(h) {
                    continue;
                }
                let check = tracker.check(h, req.vm)?;
                if !check.feasible {
                    continue;
                }
                let util_after = check.util_pct.expect("feasible implies utilization");
                let watts_after = power_at(&cfg.power_curve, util_after)?;
                let watts_before = power_at(&cfg.power_curve, tracker.util_before(h))?;
                let delta = (watts_after - watts_before) * combined_factor;
                if best.is_none_or(|(bd, _)| delta < bd) {
                    best = Some((delta, h));
                }
            }
            let chosen = match best {
                Some((_, h)) => h,
                None => {
                    let mut found = None;
                    for h in state.host_ids() {
                        if !tracker.eligible(h, req) || tracker.is_active(h) {
                            continue;
                        }
                        if tracker.check(h, req.vm)?.feasible {
                            found = Some(h);
                            break;
                        }
                    }
                    found.ok_or(SimError::PlacementExhausted(req.vm))?
                }
            };
            tracker.commit(req.vm, chosen, &mut map);
        }
        Ok(map)
    }
}

/// One-shot energy-greedy placement with the given threshold sensitivity.
pub fn granite_place(
    requests: &[PlacementRequest],
    state: &ClusterState,
    cfg: &SimConfig,
    predictor: &dyn Predictor,
    blocked: &BTreeSet<HostId>,
    s: f64,
) -> Result<ScheduleMap, SimError> {
    let mut sched = GraniteScheduler::new(s, cfg.u_max);
    sched.place(requests, state, cfg, predictor, blocked)
}
