//! Discrete-interval data-center simulator: hosts, VMs, trace playback,
//! utilization accounting, migrations and overload/underload detection.
//!
//! The interval loop is single-threaded and deterministic; schedulers and
//! temperature predictors plug in through the [`Scheduler`] and
//! [`Predictor`] traits.

mod engine;
mod trace;

pub use engine::{
    apply_migrations, detect_overloaded, detect_underloaded, fingerprint, host_utilization,
    load_view, load_view_with, select_vms_for_migration, Simulation,
};
pub use trace::{load_trace, write_synthetic_trace, Trace, VmTraceSeries};

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{HostActivity, VmMigrationTotals};
use crate::thermal::{PowerCurve, RcParams, ThermalError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad trace: {0}")]
    BadTrace(String),
    #[error("bad simulator config: {0}")]
    BadConfig(String),
    #[error("vm {0:?} cannot be placed on any host")]
    PlacementExhausted(VmId),
    #[error("schedule map rejected: vm {vm:?} does not fit on host {host:?}")]
    InfeasibleTarget { vm: VmId, host: HostId },
    #[error("prediction failed for host {host:?}: {detail}")]
    Prediction { host: HostId, detail: String },
    #[error(transparent)]
    Thermal(#[from] ThermalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VmId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HostId(pub u32);

/// Host hardware capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostSpec {
    pub cores: u32,
    pub ram_mb: f64,
    /// Network bandwidth available for migrations, Mbps.
    pub bandwidth_mbps: f64,
}

impl Default for HostSpec {
    fn default() -> Self {
        // Dual 32-core CPUs and 512 GB RAM, 1 Gbps migration bandwidth.
        HostSpec { cores: 64, ram_mb: 524_288.0, bandwidth_mbps: 1000.0 }
    }
}

/// VM shapes offered by the cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VmFlavor {
    #[serde(rename = "1c4g")]
    C1R4,
    #[serde(rename = "2c8g")]
    C2R8,
    #[serde(rename = "4c16g")]
    C4R16,
    #[serde(rename = "8c32g")]
    C8R32,
}

impl VmFlavor {
    pub const ALL: [VmFlavor; 4] = [VmFlavor::C1R4, VmFlavor::C2R8, VmFlavor::C4R16, VmFlavor::C8R32];

    pub fn cores(self) -> u32 {
        match self {
            VmFlavor::C1R4 => 1,
            VmFlavor::C2R8 => 2,
            VmFlavor::C4R16 => 4,
            VmFlavor::C8R32 => 8,
        }
    }

    pub fn ram_mb(self) -> f64 {
        match self {
            VmFlavor::C1R4 => 4096.0,
            VmFlavor::C2R8 => 8192.0,
            VmFlavor::C4R16 => 16384.0,
            VmFlavor::C8R32 => 32768.0,
        }
    }
}

/// Per-interval resource demand of one VM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VmDemand {
    /// CPU usage as a percentage of the VM's own cores.
    pub cpu_pct: f64,
    /// RAM in use, MB.
    pub ram_mb: f64,
    /// Network in/out, Kbps.
    pub net_rx: f64,
    pub net_tx: f64,
}

impl VmDemand {
    pub const IDLE: VmDemand = VmDemand { cpu_pct: 0.0, ram_mb: 0.0, net_rx: 0.0, net_tx: 0.0 };

    /// CPU demand in core-units for a VM of the given flavor.
    pub fn core_units(&self, flavor: VmFlavor) -> f64 {
        self.cpu_pct / 100.0 * f64::from(flavor.cores())
    }
}

/// Full simulator configuration; one file describes one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_hosts: u32,
    pub n_vms: u32,
    /// Scheduling interval, seconds.
    pub interval_s: f64,
    /// Number of scheduling intervals to run.
    pub horizon: usize,
    /// CPU overload threshold as a fraction of capacity.
    pub u_max: f64,
    /// Ambient temperature threshold, °C.
    pub t_red: f64,
    /// Fraction of requested CPU lost by a VM while migrating.
    pub degradation: f64,
    /// Chilled-air supply temperature for the CoP model, °C.
    pub t_supply_c: f64,
    /// Margin added around training target bounds for the prediction guard.
    pub guard_margin_c: f64,
    /// Sensitivity of the energy-greedy policy's dynamic threshold.
    pub granite_s: f64,
    pub host: HostSpec,
    pub power_curve: PowerCurve,
    pub rc: RcParams,
    /// Flavor assignment cycles through this list by VM index.
    pub flavor_mix: Vec<VmFlavor>,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_hosts: 75,
            n_vms: 750,
            interval_s: 600.0,
            horizon: 144,
            u_max: 0.9,
            t_red: 105.0,
            degradation: 0.1,
            t_supply_c: crate::thermal::DEFAULT_SUPPLY_TEMP_C,
            guard_margin_c: 10.0,
            granite_s: 1.0,
            host: HostSpec::default(),
            power_curve: PowerCurve::default_dell_like(),
            rc: RcParams::default(),
            flavor_mix: VmFlavor::ALL.to_vec(),
            seed: 1,
        }
    }
}

impl SimConfig {
    /// Small cluster preset used by CI and the acceptance suite.
    pub fn desk_scale() -> SimConfig {
        SimConfig { n_hosts: 20, n_vms: 100, ..SimConfig::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_hosts == 0 || self.n_vms == 0 {
            return Err(SimError::BadConfig("need at least one host and one vm".into()));
        }
        if self.interval_s.is_nan() || self.interval_s <= 0.0 || self.horizon == 0 {
            return Err(SimError::BadConfig("interval and horizon must be positive".into()));
        }
        if !(0.0 < self.u_max && self.u_max <= 1.0) {
            return Err(SimError::BadConfig("u_max must be in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.degradation) {
            return Err(SimError::BadConfig("degradation must be in [0, 1]".into()));
        }
        if self.flavor_mix.is_empty() {
            return Err(SimError::BadConfig("flavor_mix must be nonempty".into()));
        }
        Ok(())
    }

    pub fn flavor_of(&self, vm: VmId) -> VmFlavor {
        self.flavor_mix[vm.0 as usize % self.flavor_mix.len()]
    }
}

/// Why a VM is being moved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveReason {
    Overload,
    Underload,
}

/// One VM the scheduler must find a target for.
#[derive(Debug, Clone, Copy)]
pub struct PlacementRequest {
    pub vm: VmId,
    pub source: HostId,
    pub reason: MoveReason,
}

/// Scheduler output: a target host per input VM plus any hosts switched on
/// to make room.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScheduleMap {
    pub assignments: BTreeMap<VmId, HostId>,
    pub new_activations: Vec<HostId>,
}

/// A migration in progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InFlight {
    pub vm: VmId,
    pub source: HostId,
    pub target: HostId,
    pub remaining_s: f64,
}

/// A started migration, kept for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MigrationEvent {
    pub vm: VmId,
    pub source: HostId,
    pub target: HostId,
    pub start_interval: usize,
    pub duration_s: f64,
}

/// Hypothetical load of one host, fed to the temperature predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HostLoadView {
    /// Utilization percent, capped at 100.
    pub cpu_pct: f64,
    pub ram_used_mb: f64,
    pub n_vms: u32,
    /// Provisioned cores of the resident VMs.
    pub cores_used: u32,
    pub net_rx: f64,
    pub net_tx: f64,
}

/// How a prediction was produced by the guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuardOutcome {
    /// Own model, in bounds.
    Clean,
    /// Own model out of bounds; peer-model average returned.
    PeerAverage,
    /// Every peer out of bounds too; own prediction clamped.
    CriticalClamped,
    /// Guard disabled; raw prediction.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub temp_c: f64,
    pub guard: GuardOutcome,
}

/// Next-interval ambient temperature predictor.
pub trait Predictor {
    fn predict(&self, host: HostId, view: &HostLoadView) -> Result<Prediction, SimError>;
}

/// A placement policy driving the simulator.
pub trait Scheduler {
    fn name(&self) -> &'static str;

    /// Per-interval CPU overload threshold (fraction). Policies with dynamic
    /// thresholds recompute it from the active hosts' utilizations.
    fn overload_threshold(&mut self, _active_utils_pct: &[f64], u_max: f64) -> f64 {
        u_max
    }

    /// Whether the step loop should run underload consolidation for this
    /// policy.
    fn consolidates(&self) -> bool {
        true
    }

    fn place(
        &mut self,
        requests: &[PlacementRequest],
        state: &ClusterState,
        cfg: &SimConfig,
        predictor: &dyn Predictor,
        blocked: &BTreeSet<HostId>,
    ) -> Result<ScheduleMap, SimError>;
}

/// Cluster state at an interval boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub interval: usize,
    pub n_hosts: u32,
    /// Flavor per VM, indexed by VM id.
    pub flavors: Vec<VmFlavor>,
    /// Demand per VM for the current interval.
    pub demands: Vec<VmDemand>,
    /// Authoritative VM placement; migrating VMs stay on the source until
    /// the migration completes.
    pub placements: BTreeMap<VmId, HostId>,
    pub active: Vec<bool>,
    pub in_flight: Vec<InFlight>,
}

impl ClusterState {
    pub fn host_ids(&self) -> impl Iterator<Item = HostId> {
        (0..self.n_hosts).map(HostId)
    }

    pub fn vm_ids(&self) -> impl Iterator<Item = VmId> {
        (0..self.flavors.len() as u32).map(VmId)
    }

    pub fn is_active(&self, h: HostId) -> bool {
        self.active[h.0 as usize]
    }

    pub fn residents(&self, h: HostId) -> Vec<VmId> {
        self.placements.iter().filter(|(_, &p)| p == h).map(|(&vm, _)| vm).collect()
    }

    pub fn incoming(&self, h: HostId) -> Vec<VmId> {
        self.in_flight.iter().filter(|m| m.target == h).map(|m| m.vm).collect()
    }

    pub fn migrating(&self, vm: VmId) -> bool {
        self.in_flight.iter().any(|m| m.vm == vm)
    }

    /// Provisioned (cores, ram) on a host: residents plus incoming
    /// reservations (pre-copy semantics hold RAM and cores on both sides).
    pub fn provisioned(&self, h: HostId) -> (u32, f64) {
        let mut cores = 0u32;
        let mut ram = 0.0f64;
        for vm in self.residents(h).into_iter().chain(self.incoming(h)) {
            let f = self.flavors[vm.0 as usize];
            cores += f.cores();
            ram += f.ram_mb();
        }
        (cores, ram)
    }

    /// Remaining provisioned headroom for a host.
    pub fn fits(&self, h: HostId, flavor: VmFlavor, spec: &HostSpec) -> bool {
        let (cores, ram) = self.provisioned(h);
        cores + flavor.cores() <= spec.cores && ram + flavor.ram_mb() <= spec.ram_mb
    }
}

/// Full per-interval record; host vectors are indexed by host id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub interval: usize,
    /// Mean predicted temperature over active hosts (0 when none active).
    pub mean_temp_active: f64,
    /// Peak predicted temperature over all hosts.
    pub peak_temp: f64,
    pub active_hosts: usize,
    pub computing_kwh: f64,
    pub cooling_kwh: f64,
    pub migrations_started: usize,
    /// Demand above capacity, in utilization percentage points summed over
    /// hosts.
    pub overload_debt: f64,
    pub guard_events: usize,
    pub host_temps: Vec<f64>,
    pub host_utils: Vec<f64>,
}

/// Everything a run produced; the input to report aggregation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLog {
    pub policy: String,
    pub config: SimConfig,
    /// Digest binding the run to its config and trace.
    pub fingerprint: String,
    pub rows: Vec<IntervalRow>,
    pub events: Vec<MigrationEvent>,
    pub activity: Vec<HostActivity>,
    pub vm_totals: Vec<VmMigrationTotals>,
}
