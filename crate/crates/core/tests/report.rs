//! Report aggregation and run comparison over real simulator output.

use std::collections::BTreeSet;

use rackheat::metrics::{aggregate, compare_runs, MetricsError};
use rackheat::sim::{
    ClusterState, GuardOutcome, HostId, HostLoadView, PlacementRequest, Prediction, Predictor,
    ScheduleMap, Scheduler, SimConfig, SimError, Simulation, Trace, VmDemand, VmFlavor, VmId,
    VmTraceSeries,
};

struct FlatPredictor;

impl Predictor for FlatPredictor {
    fn predict(&self, host: HostId, view: &HostLoadView) -> Result<Prediction, SimError> {
        Ok(Prediction {
            temp_c: 40.0 + f64::from(host.0) + 0.4 * view.cpu_pct,
            guard: GuardOutcome::Disabled,
        })
    }
}

/// Minimal first-fit policy for driving the engine in tests.
struct FirstFit;

impl Scheduler for FirstFit {
    fn name(&self) -> &'static str {
        "first_fit"
    }

    fn place(
        &mut self,
        requests: &[PlacementRequest],
        state: &ClusterState,
        cfg: &SimConfig,
        _predictor: &dyn Predictor,
        blocked: &BTreeSet<HostId>,
    ) -> Result<ScheduleMap, SimError> {
        let mut map = ScheduleMap::default();
        let mut activated = BTreeSet::new();
        // Provisional (cores, ram) committed by earlier requests in this map.
        let mut pending: std::collections::BTreeMap<HostId, (u32, f64)> = Default::default();
        for req in requests {
            let flavor = state.flavors[req.vm.0 as usize];
            let mut chosen = None;
            for h in state.host_ids() {
                if h == req.source || blocked.contains(&h) {
                    continue;
                }
                let (base_cores, base_ram) = state.provisioned(h);
                let (p_cores, p_ram) = pending.get(&h).copied().unwrap_or((0, 0.0));
                if base_cores + p_cores + flavor.cores() <= cfg.host.cores
                    && base_ram + p_ram + flavor.ram_mb() <= cfg.host.ram_mb
                {
                    if !state.is_active(h) && activated.insert(h) {
                        map.new_activations.push(h);
                    }
                    chosen = Some(h);
                    break;
                }
            }
            let h = chosen.ok_or(SimError::PlacementExhausted(req.vm))?;
            let entry = pending.entry(h).or_insert((0, 0.0));
            entry.0 += flavor.cores();
            entry.1 += flavor.ram_mb();
            map.assignments.insert(req.vm, h);
        }
        Ok(map)
    }
}

fn varied_trace(n_vms: usize, n_intervals: usize) -> Trace {
    Trace {
        interval_s: 600.0,
        vms: (0..n_vms)
            .map(|vm| VmTraceSeries {
                points: (0..n_intervals)
                    .map(|i| {
                        let wave =
                            (i as f64 / n_intervals as f64 * std::f64::consts::TAU).sin();
                        VmDemand {
                            cpu_pct: (55.0 + 40.0 * wave + (vm % 7) as f64).clamp(0.0, 100.0),
                            ram_mb: 1024.0 + 100.0 * (vm % 5) as f64,
                            net_rx: 10.0,
                            net_tx: 10.0,
                        }
                    })
                    .collect(),
            })
            .collect(),
        gaps_filled: 0,
    }
}

fn small_cfg() -> SimConfig {
    SimConfig {
        n_hosts: 6,
        n_vms: 24,
        horizon: 36,
        flavor_mix: vec![VmFlavor::C4R16, VmFlavor::C8R32],
        ..SimConfig::default()
    }
}

#[test]
fn aggregate_invariants_hold_on_a_real_run() {
    let cfg = small_cfg();
    let trace = varied_trace(24, 36);
    let log = Simulation::run(&cfg, &trace, &mut FirstFit, &FlatPredictor).unwrap();
    let report = aggregate(&log).unwrap();

    assert_eq!(report.intervals, 36);
    let max_peak = log.rows.iter().map(|r| r.peak_temp).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(report.peak_temp, max_peak);
    let kwh: f64 = log.rows.iter().map(|r| r.computing_kwh + r.cooling_kwh).sum();
    assert!((report.total_kwh - kwh).abs() < 1e-12);

    // Histogram covers every (host, interval) sample exactly once.
    let total: usize = report.histogram.iter().map(|b| b.count).sum();
    assert_eq!(total, cfg.n_hosts as usize * 36);
    let mut last = 0.0;
    for &(_, frac) in &report.cdf {
        assert!(frac >= last);
        last = frac;
    }
    assert_eq!(last, 1.0);
}

#[test]
fn compare_runs_zero_deltas_and_antisymmetry() {
    let cfg = small_cfg();
    let trace = varied_trace(24, 36);
    let a = aggregate(&Simulation::run(&cfg, &trace, &mut FirstFit, &FlatPredictor).unwrap())
        .unwrap();
    let b = a.clone();

    let table = compare_runs(&[a.clone(), b.clone()]).unwrap();
    assert_eq!(table.energy_delta_kwh[0][1], 0.0);
    assert_eq!(table.rows[0].energy_saving_of_best, 0.0);

    // Antisymmetry under report order swap.
    let fwd = compare_runs(&[a.clone(), b.clone()]).unwrap();
    let rev = compare_runs(&[b, a]).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(fwd.energy_delta_kwh[i][j], -fwd.energy_delta_kwh[j][i]);
            assert_eq!(fwd.peak_delta_c[i][j], rev.peak_delta_c[1 - i][1 - j]);
        }
    }
}

#[test]
fn compare_runs_refuses_mismatched_configs() {
    let cfg = small_cfg();
    let trace = varied_trace(24, 36);
    let a = aggregate(&Simulation::run(&cfg, &trace, &mut FirstFit, &FlatPredictor).unwrap())
        .unwrap();

    let mut other_cfg = cfg.clone();
    other_cfg.u_max = 0.8;
    let b = aggregate(
        &Simulation::run(&other_cfg, &trace, &mut FirstFit, &FlatPredictor).unwrap(),
    )
    .unwrap();

    match compare_runs(&[a, b]) {
        Err(MetricsError::MismatchedConfigs(diff)) => {
            assert!(diff.contains("u_max"), "diff should name the field: {diff}");
        }
        other => panic!("expected a config mismatch, got {other:?}"),
    }
}

#[test]
fn overload_debt_only_with_saturated_hosts() {
    let cfg = small_cfg();
    let trace = varied_trace(24, 36);
    let log = Simulation::run(&cfg, &trace, &mut FirstFit, &FlatPredictor).unwrap();
    for row in &log.rows {
        let any_saturated = row.host_utils.iter().any(|u| *u >= 100.0);
        if !any_saturated {
            assert_eq!(row.overload_debt, 0.0, "interval {}", row.interval);
        }
    }
}

#[test]
fn vm_conservation_and_capacity_throughout_a_run() {
    let cfg = small_cfg();
    let trace = varied_trace(24, 36);
    let mut sim = Simulation::new(&cfg).unwrap();
    for _ in 0..cfg.horizon {
        sim.step(&trace, &mut FirstFit, &FlatPredictor).unwrap();
        // Every VM placed exactly once.
        assert_eq!(sim.state.placements.len(), cfg.n_vms as usize);
        let placed: BTreeSet<VmId> = sim.state.placements.keys().copied().collect();
        assert_eq!(placed.len(), cfg.n_vms as usize);
        // Capacity holds per host including in-flight reservations.
        for h in sim.state.host_ids() {
            let (cores, ram) = sim.state.provisioned(h);
            assert!(cores <= cfg.host.cores);
            assert!(ram <= cfg.host.ram_mb);
            if !sim.state.is_active(h) {
                assert!(sim.state.residents(h).is_empty());
                assert!(sim.state.incoming(h).is_empty());
            }
        }
    }
}
