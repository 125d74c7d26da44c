//! The interval loop: demand refresh, detection, placement, migration
//! mechanics, energy accounting and per-interval rows.

use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use super::{
    ClusterState, HostId, HostLoadView, InFlight, IntervalRow, MigrationEvent, MoveReason,
    PlacementRequest, Prediction, Predictor, RunLog, ScheduleMap, Scheduler, SimConfig, SimError,
    Trace, VmDemand, VmId,
};
use crate::metrics::SlaAccumulator;
use crate::sim::GuardOutcome;
use crate::thermal::{cooling_energy, power_at};

/// CPU utilization of a host in percent (capped at 100) plus the demand
/// above capacity in percentage points.
pub fn host_utilization(state: &ClusterState, host: HostId, cfg: &SimConfig) -> (f64, f64) {
    let units: f64 = state
        .residents(host)
        .iter()
        .map(|&vm| state.demands[vm.0 as usize].core_units(state.flavors[vm.0 as usize]))
        .sum();
    let raw = units / f64::from(cfg.host.cores) * 100.0;
    (raw.min(100.0), (raw - 100.0).max(0.0))
}

/// Hypothetical load of `host` with `add`ed and `remove`d VMs.
pub fn load_view_with(
    state: &ClusterState,
    host: HostId,
    cfg: &SimConfig,
    add: &[VmId],
    remove: &[VmId],
) -> HostLoadView {
    let mut vms: Vec<VmId> = state
        .residents(host)
        .into_iter()
        .filter(|vm| !remove.contains(vm))
        .collect();
    vms.extend_from_slice(add);

    let mut units = 0.0f64;
    let mut ram = 0.0f64;
    let mut cores = 0u32;
    let mut rx = 0.0f64;
    let mut tx = 0.0f64;
    for &vm in &vms {
        let demand: &VmDemand = &state.demands[vm.0 as usize];
        let flavor = state.flavors[vm.0 as usize];
        units += demand.core_units(flavor);
        ram += demand.ram_mb;
        cores += flavor.cores();
        rx += demand.net_rx;
        tx += demand.net_tx;
    }
    HostLoadView {
        cpu_pct: (units / f64::from(cfg.host.cores) * 100.0).min(100.0),
        ram_used_mb: ram,
        n_vms: vms.len() as u32,
        cores_used: cores,
        net_rx: rx,
        net_tx: tx,
    }
}

pub fn load_view(state: &ClusterState, host: HostId, cfg: &SimConfig) -> HostLoadView {
    load_view_with(state, host, cfg, &[], &[])
}

/// Active hosts whose CPU utilization exceeds the threshold or whose
/// predicted ambient temperature reaches `t_red`. The CPU comparison is
/// strict, so a host sitting exactly at the threshold is not overloaded.
pub fn detect_overloaded(
    state: &ClusterState,
    cfg: &SimConfig,
    predictor: &dyn Predictor,
    threshold_frac: f64,
) -> Result<Vec<HostId>, SimError> {
    let mut out = Vec::new();
    for h in state.host_ids() {
        if !state.is_active(h) {
            continue;
        }
        let (util, _) = host_utilization(state, h, cfg);
        if util > threshold_frac * 100.0 {
            out.push(h);
            continue;
        }
        let pred = predictor.predict(h, &load_view(state, h, cfg))?;
        if pred.temp_c >= cfg.t_red {
            out.push(h);
        }
    }
    Ok(out)
}

/// Active hosts (ascending utilization) whose entire VM set fits on other
/// active hosts under capacity, CPU-threshold and thermal constraints.
/// Hosts are evaluated sequentially: fits committed for an earlier host
/// count against later candidates, and hosts already marked for draining
/// (or overloaded, or currently receiving a migration) are not targets.
pub fn detect_underloaded(
    state: &ClusterState,
    cfg: &SimConfig,
    predictor: &dyn Predictor,
    threshold_frac: f64,
    overloaded: &BTreeSet<HostId>,
) -> Result<Vec<HostId>, SimError> {
    let mut candidates: Vec<(f64, HostId)> = state
        .host_ids()
        .filter(|&h| state.is_active(h) && !overloaded.contains(&h))
        .filter(|&h| state.incoming(h).is_empty())
        .map(|h| (host_utilization(state, h, cfg).0, h))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut drained: Vec<HostId> = Vec::new();
    let mut drained_set: BTreeSet<HostId> = BTreeSet::new();
    // Provisional commitments from earlier candidates: vm -> target.
    let mut committed: BTreeMap<VmId, HostId> = BTreeMap::new();

    for &(_, candidate) in &candidates {
        let mut vms: Vec<VmId> = state
            .residents(candidate)
            .into_iter()
            .filter(|&vm| !state.migrating(vm))
            .collect();
        if vms.is_empty() {
            // An empty active host is trivially drained.
            drained.push(candidate);
            drained_set.insert(candidate);
            continue;
        }
        // Hardest-to-place first.
        vms.sort_by(|a, b| {
            state.flavors[b.0 as usize]
                .cores()
                .cmp(&state.flavors[a.0 as usize].cores())
                .then(a.cmp(b))
        });

        let mut tentative: BTreeMap<VmId, HostId> = BTreeMap::new();
        let mut all_fit = true;
        'vm: for &vm in &vms {
            for target in state.host_ids() {
                if target == candidate
                    || !state.is_active(target)
                    || overloaded.contains(&target)
                    || drained_set.contains(&target)
                {
                    continue;
                }
                let extra: Vec<VmId> = committed
                    .iter()
                    .chain(tentative.iter())
                    .filter(|(_, &t)| t == target)
                    .map(|(&v, _)| v)
                    .chain(std::iter::once(vm))
                    .collect();
                if fits_with(state, target, cfg, &extra)
                    && within_thresholds(state, target, cfg, predictor, threshold_frac, &extra)?
                {
                    tentative.insert(vm, target);
                    continue 'vm;
                }
            }
            all_fit = false;
            break;
        }
        if all_fit {
            committed.append(&mut tentative);
            drained.push(candidate);
            drained_set.insert(candidate);
        }
    }
    Ok(drained)
}

fn fits_with(state: &ClusterState, host: HostId, cfg: &SimConfig, extra: &[VmId]) -> bool {
    let (mut cores, mut ram) = state.provisioned(host);
    for &vm in extra {
        let f = state.flavors[vm.0 as usize];
        cores += f.cores();
        ram += f.ram_mb();
    }
    cores <= cfg.host.cores && ram <= cfg.host.ram_mb
}

fn within_thresholds(
    state: &ClusterState,
    host: HostId,
    cfg: &SimConfig,
    predictor: &dyn Predictor,
    threshold_frac: f64,
    extra: &[VmId],
) -> Result<bool, SimError> {
    let view = load_view_with(state, host, cfg, extra, &[]);
    if view.cpu_pct > threshold_frac * 100.0 {
        return Ok(false);
    }
    let pred = predictor.predict(host, &view)?;
    Ok(pred.temp_c < cfg.t_red)
}

/// VMs to evict from a host. Underloaded hosts surrender everything;
/// overloaded hosts give up VMs in ascending migration-time order
/// (memory in use over bandwidth), taking the smallest prefix that brings
/// both the CPU and thermal readings back under their thresholds.
pub fn select_vms_for_migration(
    state: &ClusterState,
    cfg: &SimConfig,
    host: HostId,
    reason: MoveReason,
    predictor: &dyn Predictor,
    threshold_frac: f64,
) -> Result<Vec<VmId>, SimError> {
    let mut vms: Vec<VmId> = state
        .residents(host)
        .into_iter()
        .filter(|&vm| !state.migrating(vm))
        .collect();
    // Ascending migration time; bandwidth is per host, so this is ascending
    // RAM in use. Ties by id keep the order total.
    vms.sort_by(|a, b| {
        state.demands[a.0 as usize]
            .ram_mb
            .total_cmp(&state.demands[b.0 as usize].ram_mb)
            .then(a.cmp(b))
    });
    match reason {
        MoveReason::Underload => Ok(vms),
        MoveReason::Overload => {
            for take in 1..=vms.len() {
                let removed = &vms[..take];
                let view = load_view_with(state, host, cfg, &[], removed);
                if view.cpu_pct > threshold_frac * 100.0 {
                    continue;
                }
                let pred = predictor.predict(host, &view)?;
                if pred.temp_c < cfg.t_red {
                    return Ok(removed.to_vec());
                }
            }
            Ok(vms)
        }
    }
}

/// Start the migrations described by a schedule map. The whole map is
/// validated against provisioned capacity first; any infeasible target
/// rejects the map and leaves the state untouched. Migration duration is
/// the VM's RAM in use over the host bandwidth.
pub fn apply_migrations(
    state: &mut ClusterState,
    map: &ScheduleMap,
    cfg: &SimConfig,
) -> Result<Vec<MigrationEvent>, SimError> {
    // Validate before mutating.
    let mut extra_by_target: BTreeMap<HostId, Vec<VmId>> = BTreeMap::new();
    for (&vm, &target) in &map.assignments {
        let source = state.placements[&vm];
        if source == target || state.migrating(vm) {
            return Err(SimError::InfeasibleTarget { vm, host: target });
        }
        extra_by_target.entry(target).or_default().push(vm);
    }
    for (&target, extra) in &extra_by_target {
        if !fits_with(state, target, cfg, extra) {
            return Err(SimError::InfeasibleTarget { vm: extra[0], host: target });
        }
    }
    debug_assert!(
        map.new_activations.iter().all(|h| extra_by_target.contains_key(h)),
        "activated hosts must receive at least one VM"
    );

    let mb_per_s = cfg.host.bandwidth_mbps / 8.0;
    let mut events = Vec::with_capacity(map.assignments.len());
    for (&vm, &target) in &map.assignments {
        let source = state.placements[&vm];
        let duration_s = state.demands[vm.0 as usize].ram_mb / mb_per_s;
        state.in_flight.push(InFlight { vm, source, target, remaining_s: duration_s });
        state.active[target.0 as usize] = true;
        events.push(MigrationEvent {
            vm,
            source,
            target,
            start_interval: state.interval,
            duration_s,
        });
    }
    Ok(events)
}

/// A full simulation run in progress.
pub struct Simulation<'a> {
    pub cfg: &'a SimConfig,
    pub state: ClusterState,
    sla: SlaAccumulator,
    events: Vec<MigrationEvent>,
    rows: Vec<IntervalRow>,
}

impl<'a> Simulation<'a> {
    /// Build the interval-zero state: flavors assigned by the config mix and
    /// an initial first-fit-decreasing placement by VM cores, identical for
    /// every policy.
    pub fn new(cfg: &'a SimConfig) -> Result<Simulation<'a>, SimError> {
        cfg.validate()?;
        let n_vms = cfg.n_vms as usize;
        let n_hosts = cfg.n_hosts as usize;
        let flavors: Vec<_> = (0..cfg.n_vms).map(|i| cfg.flavor_of(VmId(i))).collect();

        let mut order: Vec<VmId> = (0..cfg.n_vms).map(VmId).collect();
        order.sort_by(|a, b| {
            flavors[b.0 as usize].cores().cmp(&flavors[a.0 as usize].cores()).then(a.cmp(b))
        });

        let mut placements = BTreeMap::new();
        let mut used: Vec<(u32, f64)> = vec![(0, 0.0); n_hosts];
        for vm in order {
            let f = flavors[vm.0 as usize];
            let slot = (0..n_hosts).find(|&h| {
                used[h].0 + f.cores() <= cfg.host.cores
                    && used[h].1 + f.ram_mb() <= cfg.host.ram_mb
            });
            match slot {
                Some(h) => {
                    used[h].0 += f.cores();
                    used[h].1 += f.ram_mb();
                    placements.insert(vm, HostId(h as u32));
                }
                None => return Err(SimError::PlacementExhausted(vm)),
            }
        }
        let active: Vec<bool> = (0..n_hosts).map(|h| used[h].0 > 0).collect();

        Ok(Simulation {
            cfg,
            state: ClusterState {
                interval: 0,
                n_hosts: cfg.n_hosts,
                flavors,
                demands: vec![VmDemand::IDLE; n_vms],
                placements,
                active,
                in_flight: Vec::new(),
            },
            sla: SlaAccumulator::new(n_hosts, n_vms),
            events: Vec::new(),
            rows: Vec::new(),
        })
    }

    /// Advance one scheduling interval: refresh demand, detect overloaded
    /// and underloaded hosts, let the policy place the selected VMs, start
    /// the migrations, account degradation, complete finished migrations,
    /// deactivate empty hosts, and emit the interval row.
    pub fn step(
        &mut self,
        trace: &Trace,
        scheduler: &mut dyn Scheduler,
        predictor: &dyn Predictor,
    ) -> Result<IntervalRow, SimError> {
        let cfg = self.cfg;
        let t = self.state.interval;
        let interval_s = cfg.interval_s;

        for vm in 0..self.state.flavors.len() {
            self.state.demands[vm] = trace.demand(VmId(vm as u32), t);
        }

        // SLA accounting against the load the interval actually served.
        let mut active_utils = Vec::new();
        for h in self.state.host_ids() {
            let (util, _) = host_utilization(&self.state, h, cfg);
            let active = self.state.is_active(h);
            self.sla.record_host_interval(h.0 as usize, active, util >= 100.0, interval_s);
            if active {
                active_utils.push(util);
            }
        }

        let threshold = scheduler.overload_threshold(&active_utils, cfg.u_max);
        let overloaded = detect_overloaded(&self.state, cfg, predictor, threshold)?;
        let over_set: BTreeSet<HostId> = overloaded.iter().copied().collect();
        let underloaded = if scheduler.consolidates() {
            detect_underloaded(&self.state, cfg, predictor, threshold, &over_set)?
        } else {
            Vec::new()
        };
        let blocked: BTreeSet<HostId> = underloaded.iter().copied().collect();

        let mut requests: Vec<PlacementRequest> = Vec::new();
        for &h in &overloaded {
            for vm in
                select_vms_for_migration(&self.state, cfg, h, MoveReason::Overload, predictor, threshold)?
            {
                requests.push(PlacementRequest { vm, source: h, reason: MoveReason::Overload });
            }
        }
        for &h in &underloaded {
            for vm in select_vms_for_migration(
                &self.state,
                cfg,
                h,
                MoveReason::Underload,
                predictor,
                threshold,
            )? {
                requests.push(PlacementRequest { vm, source: h, reason: MoveReason::Underload });
            }
        }

        let map = if requests.is_empty() {
            ScheduleMap::default()
        } else {
            let map = scheduler.place(&requests, &self.state, cfg, predictor, &blocked)?;
            debug_assert_eq!(
                map.assignments.len(),
                requests.len(),
                "every requested VM must be assigned exactly once"
            );
            map
        };

        let new_events = apply_migrations(&mut self.state, &map, cfg)?;
        let migrations_started = new_events.len();
        for e in &new_events {
            self.sla.record_migration_started(e.vm.0 as usize);
        }
        self.events.extend(new_events);

        // Degradation accounting and migration progress.
        let mut completed: Vec<InFlight> = Vec::new();
        for m in &mut self.state.in_flight {
            let overlap = m.remaining_s.min(interval_s);
            if overlap > 0.0 {
                let demand = &self.state.demands[m.vm.0 as usize];
                let requested = demand.core_units(self.state.flavors[m.vm.0 as usize]) * overlap;
                let allocated = requested * (1.0 - cfg.degradation);
                self.sla.record_migration_slice(m.vm.0 as usize, requested, allocated);
            }
            m.remaining_s -= interval_s;
        }
        self.state.in_flight.retain(|m| {
            if m.remaining_s <= 1e-9 {
                completed.push(*m);
                false
            } else {
                true
            }
        });
        for m in completed {
            self.state.placements.insert(m.vm, m.target);
        }

        // Hosts with nothing resident, arriving or leaving power down.
        for h in self.state.host_ids() {
            let idx = h.0 as usize;
            if self.state.active[idx]
                && self.state.residents(h).is_empty()
                && self.state.incoming(h).is_empty()
                && !self.state.in_flight.iter().any(|m| m.source == h)
            {
                self.state.active[idx] = false;
            }
        }

        // End-of-interval readings.
        let n_hosts = self.state.n_hosts as usize;
        let mut host_temps = Vec::with_capacity(n_hosts);
        let mut host_utils = Vec::with_capacity(n_hosts);
        let mut watts_total = 0.0f64;
        let mut overload_debt = 0.0f64;
        let mut guard_events = 0usize;
        let mut active_hosts = 0usize;
        let mut active_temp_sum = 0.0f64;
        let mut peak = f64::NEG_INFINITY;
        for h in self.state.host_ids() {
            let (util, debt) = host_utilization(&self.state, h, cfg);
            overload_debt += debt;
            let Prediction { temp_c, guard } = predictor.predict(h, &load_view(&self.state, h, cfg))?;
            if matches!(guard, GuardOutcome::PeerAverage | GuardOutcome::CriticalClamped) {
                guard_events += 1;
            }
            if self.state.is_active(h) {
                watts_total += power_at(&cfg.power_curve, util)?;
                active_hosts += 1;
                active_temp_sum += temp_c;
            }
            peak = peak.max(temp_c);
            host_temps.push(temp_c);
            host_utils.push(util);
        }
        let computing_kwh = watts_total * interval_s / 3.6e6;
        let cooling_kwh = cooling_energy(computing_kwh, cfg.t_supply_c);

        let row = IntervalRow {
            interval: t,
            mean_temp_active: if active_hosts > 0 {
                active_temp_sum / active_hosts as f64
            } else {
                0.0
            },
            peak_temp: peak,
            active_hosts,
            computing_kwh,
            cooling_kwh,
            migrations_started,
            overload_debt,
            guard_events,
            host_temps,
            host_utils,
        };
        self.rows.push(row.clone());
        self.state.interval += 1;
        self.assert_invariants();
        Ok(row)
    }

    fn assert_invariants(&self) {
        debug_assert_eq!(self.state.placements.len(), self.state.flavors.len());
        for h in self.state.host_ids() {
            let (cores, ram) = self.state.provisioned(h);
            debug_assert!(cores <= self.cfg.host.cores, "core capacity violated on {h:?}");
            debug_assert!(ram <= self.cfg.host.ram_mb + 1e-9, "ram capacity violated on {h:?}");
            if !self.state.is_active(h) {
                debug_assert!(self.state.residents(h).is_empty());
            }
        }
    }

    /// Run the configured horizon and collect the log.
    pub fn run(
        cfg: &SimConfig,
        trace: &Trace,
        scheduler: &mut dyn Scheduler,
        predictor: &dyn Predictor,
    ) -> Result<RunLog, SimError> {
        if trace.n_vms() < cfg.n_vms as usize {
            return Err(SimError::BadTrace(format!(
                "trace covers {} VMs, config needs {}",
                trace.n_vms(),
                cfg.n_vms
            )));
        }
        let mut sim = Simulation::new(cfg)?;
        for _ in 0..cfg.horizon {
            sim.step(trace, scheduler, predictor)?;
        }
        Ok(RunLog {
            policy: scheduler.name().to_string(),
            config: cfg.clone(),
            fingerprint: fingerprint(cfg, trace),
            rows: sim.rows,
            events: sim.events,
            activity: sim.sla.hosts,
            vm_totals: sim.sla.vms,
        })
    }
}

/// Digest binding a run to its exact config and trace.
pub fn fingerprint(cfg: &SimConfig, trace: &Trace) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(cfg).expect("config serializes"));
    hasher.update((trace.interval_s).to_bits().to_le_bytes());
    for series in &trace.vms {
        for p in &series.points {
            for v in [p.cpu_pct, p.ram_mb, p.net_rx, p.net_tx] {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
    }
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}
