//! Radial load flow by forward-backward sweep, plus the hourly driver over a
//! representative day.
//!
//! Phases are decoupled: each phase is solved as its own single-phase network
//! with the branch series impedance, and no mutual coupling between phases.
//! Every bus is per-unitized on its own line-to-neutral nominal voltage and a
//! common per-phase power base, so transformers appear as plain series
//! impedances with a 1:1 ratio.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{BranchRef, Feeder, Topology, TopologyError};
use crate::HOURS;

/// Transformer leakage X/R ratio used to split the nameplate impedance.
pub const TRANSFORMER_X_OVER_R: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Winter,
    Summer,
    Shoulder,
}

impl DayType {
    pub const ALL: [DayType; 3] = [DayType::Winter, DayType::Summer, DayType::Shoulder];

    pub fn as_str(self) -> &'static str {
        match self {
            DayType::Winter => "winter",
            DayType::Summer => "summer",
            DayType::Shoulder => "shoulder",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "winter" => Some(DayType::Winter),
            "summer" => Some(DayType::Summer),
            "shoulder" => Some(DayType::Shoulder),
            _ => None,
        }
    }
}

/// Hourly multipliers applied to a load's `peak_kw`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesProfile {
    pub profile_id: String,
    pub day_type: DayType,
    pub values: [f64; HOURS],
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("profile `{0}` has a negative or non-finite value at hour {1}")]
    BadValue(String, usize),
    #[error("duplicate profile `{0}` for {1:?}")]
    Duplicate(String, DayType),
}

/// Load shapes keyed by profile id and day type.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProfileStore {
    profiles: BTreeMap<(String, DayType), [f64; HOURS]>,
}

impl ProfileStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, profile: TimeSeriesProfile) -> Result<(), ProfileError> {
        if let Some(h) = profile
            .values
            .iter()
            .position(|v| !(*v >= 0.0) || !v.is_finite())
        {
            return Err(ProfileError::BadValue(profile.profile_id, h));
        }
        let key = (profile.profile_id, profile.day_type);
        if self.profiles.contains_key(&key) {
            return Err(ProfileError::Duplicate(key.0, key.1));
        }
        self.profiles.insert(key, profile.values);
        Ok(())
    }

    pub fn get(&self, profile_id: &str, day: DayType) -> Option<&[f64; HOURS]> {
        self.profiles.get(&(profile_id.to_string(), day))
    }

    pub fn iter(&self) -> impl Iterator<Item = TimeSeriesProfile> + '_ {
        self.profiles
            .iter()
            .map(|((id, day), values)| TimeSeriesProfile {
                profile_id: id.clone(),
                day_type: *day,
                values: *values,
            })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Convergence threshold on the largest per-iteration voltage change (pu).
    pub tolerance_pu: f64,
    pub max_iterations: usize,
    /// Per-phase power base (kVA).
    pub s_base_kva: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance_pu: 1e-10,
            max_iterations: 50,
            s_base_kva: 1000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PowerFlowError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("branch `{0}` has zero impedance")]
    ZeroImpedance(String),
    #[error(
        "no convergence after {iterations} iterations; worst bus `{bus}` moved {delta_pu:e} pu"
    )]
    NotConverged {
        iterations: usize,
        bus: String,
        delta_pu: f64,
    },
    #[error("demand vector has {got} entries, feeder has {expected} buses")]
    DemandShape { expected: usize, got: usize },
    #[error("load `{load}` needs profile `{profile}` for {day:?}")]
    MissingProfile {
        load: String,
        profile: String,
        day: DayType,
    },
}

/// A fixed shunt capacitor bank (constant impedance, rated at 1.0 pu voltage).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShuntCapacitor {
    pub bus: String,
    pub kvar: f64,
}

/// Equipment changes layered over the as-built feeder.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkOverrides {
    /// Transformer index → replacement rating (kVA). Impedance percent is kept
    /// on the new base, so the ohmic impedance shrinks with the rating.
    pub transformer_rating_kva: BTreeMap<usize, f64>,
    /// Line index → replacement ampacity (A). Resistance scales inversely with
    /// ampacity; reactance is unchanged.
    pub line_ampacity_a: BTreeMap<usize, f64>,
    pub capacitors: Vec<ShuntCapacitor>,
}

impl NetworkOverrides {
    pub fn is_empty(&self) -> bool {
        self.transformer_rating_kva.is_empty()
            && self.line_ampacity_a.is_empty()
            && self.capacitors.is_empty()
    }
}

#[derive(Clone, Debug)]
struct CompiledBranch {
    kind: BranchRef,
    /// Upstream bus.
    from: usize,
    phases: [bool; 3],
    z_pu: Complex64,
    /// Amperes per unit of current, on the upstream side.
    i_base_a: f64,
    /// kVA for transformers, amperes for lines.
    rating: f64,
}

/// A feeder compiled for repeated solves.
#[derive(Clone, Debug)]
pub struct Network<'f> {
    feeder: &'f Feeder,
    topo: Topology,
    branches: Vec<CompiledBranch>,
    /// Compiled branch feeding each bus.
    parent_branch: Vec<Option<usize>>,
    bus_phases: Vec<[bool; 3]>,
    load_bus: Vec<usize>,
    capacitors: Vec<(usize, f64)>,
    s_base_kva: f64,
}

fn phase_mask(set: crate::model::PhaseSet) -> [bool; 3] {
    let mut mask = [false; 3];
    for p in set.iter() {
        mask[p.index()] = true;
    }
    mask
}

impl<'f> Network<'f> {
    pub fn compile(feeder: &'f Feeder, options: &SolverOptions) -> Result<Self, PowerFlowError> {
        Self::with_overrides(feeder, &NetworkOverrides::default(), options)
    }

    pub fn with_overrides(
        feeder: &'f Feeder,
        overrides: &NetworkOverrides,
        options: &SolverOptions,
    ) -> Result<Self, PowerFlowError> {
        let topo = Topology::build(feeder)?;
        let index = feeder.bus_index();
        let n = feeder.buses.len();
        let s_base = options.s_base_kva;
        let z_base = |kv: f64| kv * kv * 1000.0 / s_base;
        let mut parent_branch = vec![None; n];
        let mut branches = Vec::with_capacity(n.saturating_sub(1));
        for &bus in &topo.order {
            let Some((kind, from)) = topo.parent[bus] else {
                continue;
            };
            let kv = feeder.buses[from].nominal_voltage_kv;
            let compiled = match kind {
                BranchRef::Line(i) => {
                    let l = &feeder.lines[i];
                    let mut r = l.resistance_ohm_per_mi;
                    let mut ampacity = l.ampacity_a;
                    if let Some(&new_amp) = overrides.line_ampacity_a.get(&i) {
                        r *= ampacity / new_amp;
                        ampacity = new_amp;
                    }
                    let z_ohm = Complex64::new(r, l.reactance_ohm_per_mi) * l.length_mi;
                    CompiledBranch {
                        kind,
                        from,
                        phases: phase_mask(l.phases),
                        z_pu: z_ohm / z_base(kv),
                        i_base_a: s_base / kv,
                        rating: ampacity,
                    }
                }
                BranchRef::Transformer(i) => {
                    let t = &feeder.transformers[i];
                    let rating = overrides
                        .transformer_rating_kva
                        .get(&i)
                        .copied()
                        .unwrap_or(t.rating_kva);
                    let per_phase = rating / f64::from(t.phase_count.max(1));
                    let z = t.impedance_pct / 100.0;
                    let r = z / (1.0 + TRANSFORMER_X_OVER_R * TRANSFORMER_X_OVER_R).sqrt();
                    let z_own = Complex64::new(r, r * TRANSFORMER_X_OVER_R);
                    CompiledBranch {
                        kind,
                        from,
                        phases: phase_mask(feeder.buses[bus].phases),
                        z_pu: z_own * (s_base / per_phase),
                        i_base_a: s_base / kv,
                        rating,
                    }
                }
            };
            if compiled.z_pu.norm() == 0.0 {
                return Err(PowerFlowError::ZeroImpedance(
                    feeder.branch_id(kind).to_string(),
                ));
            }
            parent_branch[bus] = Some(branches.len());
            branches.push(compiled);
        }
        let load_bus = feeder.loads.iter().map(|l| index[l.bus.as_str()]).collect();
        let capacitors = overrides
            .capacitors
            .iter()
            .filter_map(|c| index.get(c.bus.as_str()).map(|&b| (b, c.kvar)))
            .collect();
        Ok(Network {
            feeder,
            topo,
            branches,
            parent_branch,
            bus_phases: feeder.buses.iter().map(|b| phase_mask(b.phases)).collect(),
            load_bus,
            capacitors,
            s_base_kva: s_base,
        })
    }

    pub fn feeder(&self) -> &'f Feeder {
        self.feeder
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn bus_count(&self) -> usize {
        self.bus_phases.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// The feeder component behind compiled branch `slot`.
    pub fn branch_ref(&self, slot: usize) -> BranchRef {
        self.branches[slot].kind
    }

    /// Compiled branch feeding `bus`.
    pub fn parent_branch(&self, bus: usize) -> Option<usize> {
        self.parent_branch[bus]
    }

    /// Thermal rating of a compiled branch: kVA for transformers, A for lines.
    pub fn branch_rating(&self, slot: usize) -> f64 {
        self.branches[slot].rating
    }

    /// Bus index of every load point, in feeder order.
    pub fn load_buses(&self) -> &[usize] {
        &self.load_bus
    }

    /// Per-bus complex demand (kW + j kvar) from per-load (kW, kvar) pairs.
    pub fn bus_demand(&self, load_kw_kvar: &[(f64, f64)]) -> Vec<Complex64> {
        let mut demand = vec![Complex64::new(0.0, 0.0); self.bus_count()];
        for (&bus, &(p, q)) in self.load_bus.iter().zip(load_kw_kvar) {
            demand[bus] += Complex64::new(p, q);
        }
        demand
    }

    /// Base demand of every load point at hour `h` of `day`.
    pub fn base_demand(
        &self,
        profiles: &ProfileStore,
        day: DayType,
        hour: usize,
    ) -> Result<Vec<(f64, f64)>, PowerFlowError> {
        self.feeder
            .loads
            .iter()
            .map(|ld| {
                let shape = profiles.get(&ld.profile_id, day).ok_or_else(|| {
                    PowerFlowError::MissingProfile {
                        load: ld.id.clone(),
                        profile: ld.profile_id.clone(),
                        day,
                    }
                })?;
                let kw = ld.peak_kw * shape[hour];
                Ok((kw, ld.kvar_for(kw)))
            })
            .collect()
    }
}

/// Converged operating point for one hour.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotResult {
    /// Per-bus per-phase voltage magnitude (pu); zero on absent phases.
    pub voltage_pu: Vec<[f64; 3]>,
    /// Per-bus per-phase voltage angle (rad).
    pub angle_rad: Vec<[f64; 3]>,
    /// Per compiled branch, per-phase current magnitude (A) on the upstream side.
    pub branch_current_a: Vec<[f64; 3]>,
    /// Per compiled branch, apparent power entering at the upstream end (kVA).
    pub branch_kva: Vec<f64>,
    /// Per compiled branch, loading as a fraction of its rating.
    pub branch_loading: Vec<f64>,
    pub losses_kw: f64,
    pub losses_kvar: f64,
    pub source_kw: f64,
    pub source_kvar: f64,
    /// Demand actually served, including shunt capacitor output (negative kvar).
    pub load_kw: f64,
    pub load_kvar: f64,
    pub iterations: usize,
}

impl SnapshotResult {
    /// Relative power-balance mismatch |S_source − S_load − S_losses| / max(|S_source|, |S_load|).
    pub fn balance_error(&self) -> f64 {
        let dp = self.source_kw - self.load_kw - self.losses_kw;
        let dq = self.source_kvar - self.load_kvar - self.losses_kvar;
        let scale =
            (self.source_kw.hypot(self.source_kvar)).max(self.load_kw.hypot(self.load_kvar));
        if scale == 0.0 {
            dp.hypot(dq)
        } else {
            dp.hypot(dq) / scale
        }
    }

    /// Smallest voltage magnitude over all present phases of `bus`.
    pub fn bus_min_voltage(&self, bus: usize, phases: [bool; 3]) -> f64 {
        (0..3)
            .filter(|&p| phases[p])
            .map(|p| self.voltage_pu[bus][p])
            .fold(f64::INFINITY, f64::min)
    }
}

fn phase_angle(p: usize) -> f64 {
    match p {
        0 => 0.0,
        1 => -2.0 * PI / 3.0,
        _ => 2.0 * PI / 3.0,
    }
}

/// Solves one hour of a radial feeder with constant-power loads.
///
/// `demand` holds one complex kVA value per bus, shared equally by the bus's
/// phases.
pub fn solve_snapshot(
    net: &Network<'_>,
    demand: &[Complex64],
    options: &SolverOptions,
) -> Result<SnapshotResult, PowerFlowError> {
    let n = net.bus_count();
    if demand.len() != n {
        return Err(PowerFlowError::DemandShape {
            expected: n,
            got: demand.len(),
        });
    }
    let zero = Complex64::new(0.0, 0.0);
    let s_base = net.s_base_kva;
    let src = net.topo.source;

    let mut phase_demand = vec![[zero; 3]; n];
    for bus in 0..n {
        let count = net.bus_phases[bus].iter().filter(|&&x| x).count();
        if count == 0 {
            continue;
        }
        let per_phase = demand[bus] / (count as f64 * s_base);
        for p in 0..3 {
            if net.bus_phases[bus][p] {
                phase_demand[bus][p] = per_phase;
            }
        }
    }
    let mut cap_pu = vec![0.0; n];
    for &(bus, kvar) in &net.capacitors {
        let count = net.bus_phases[bus].iter().filter(|&&x| x).count().max(1);
        cap_pu[bus] += kvar / (count as f64 * s_base);
    }

    let mut v = vec![[zero; 3]; n];
    for bus in 0..n {
        for p in 0..3 {
            if net.bus_phases[bus][p] {
                v[bus][p] = Complex64::from_polar(1.0, phase_angle(p));
            }
        }
    }
    let mut branch_i = vec![[zero; 3]; net.branches.len()];
    let mut node_i = vec![[zero; 3]; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        // Backward sweep: injected currents at the present voltages.
        for bus in 0..n {
            for p in 0..3 {
                node_i[bus][p] = if net.bus_phases[bus][p] {
                    let vb = v[bus][p];
                    let s = phase_demand[bus][p] - Complex64::new(0.0, cap_pu[bus] * vb.norm_sqr());
                    (s / vb).conj()
                } else {
                    zero
                };
            }
        }
        for &bus in net.topo.order.iter().rev() {
            if let Some(b) = net.parent_branch[bus] {
                let from = net.branches[b].from;
                let current = node_i[bus];
                branch_i[b] = current;
                for p in 0..3 {
                    node_i[from][p] += current[p];
                }
            }
        }
        // Forward sweep.
        let mut worst = (0.0, src);
        for &bus in &net.topo.order {
            let Some(b) = net.parent_branch[bus] else {
                continue;
            };
            let br = &net.branches[b];
            for p in 0..3 {
                if !net.bus_phases[bus][p] {
                    continue;
                }
                let updated = v[br.from][p] - br.z_pu * branch_i[b][p];
                let delta = (updated - v[bus][p]).norm();
                if !(delta <= worst.0) {
                    worst = (delta, bus);
                }
                v[bus][p] = updated;
            }
        }
        let converged = worst.0 < options.tolerance_pu;
        if converged {
            break;
        }
        if iterations >= options.max_iterations || !worst.0.is_finite() {
            return Err(PowerFlowError::NotConverged {
                iterations,
                bus: net.feeder.buses[worst.1].id.clone(),
                delta_pu: worst.0,
            });
        }
    }

    // The reported currents produced the reported voltages exactly, so the
    // source injection equals served demand plus series losses.
    let mut branch_current_a = vec![[0.0; 3]; net.branches.len()];
    let mut branch_kva = vec![0.0; net.branches.len()];
    let mut branch_loading = vec![0.0; net.branches.len()];
    let mut losses = zero;
    for (b, br) in net.branches.iter().enumerate() {
        let mut s_in = 0.0;
        let mut worst_a: f64 = 0.0;
        for p in 0..3 {
            if !br.phases[p] {
                continue;
            }
            let i = branch_i[b][p];
            losses += br.z_pu * i.norm_sqr();
            s_in += (v[br.from][p] * i.conj()).norm();
            let amps = i.norm() * br.i_base_a;
            branch_current_a[b][p] = amps;
            worst_a = worst_a.max(amps);
        }
        branch_kva[b] = s_in * s_base;
        branch_loading[b] = match br.kind {
            BranchRef::Transformer(_) => branch_kva[b] / br.rating,
            BranchRef::Line(_) => worst_a / br.rating,
        };
    }
    let mut source = zero;
    let mut served = zero;
    for bus in 0..n {
        for p in 0..3 {
            if !net.bus_phases[bus][p] {
                continue;
            }
            if bus == src {
                // Downstream branch currents leave the source bus.
                let out: Complex64 = net
                    .branches
                    .iter()
                    .zip(&branch_i)
                    .filter(|(br, _)| br.from == src)
                    .map(|(_, i)| i[p])
                    .sum();
                let own = (phase_demand[bus][p] / v[bus][p]).conj();
                source += v[bus][p] * (out + own).conj();
            }
            served += phase_demand[bus][p];
            if cap_pu[bus] != 0.0 {
                served -= Complex64::new(0.0, cap_pu[bus] * v[bus][p].norm_sqr());
            }
        }
    }
    Ok(SnapshotResult {
        voltage_pu: v
            .iter()
            .map(|row| [row[0].norm(), row[1].norm(), row[2].norm()])
            .collect(),
        angle_rad: v
            .iter()
            .map(|row| [row[0].arg(), row[1].arg(), row[2].arg()])
            .collect(),
        branch_current_a,
        branch_kva,
        branch_loading,
        losses_kw: losses.re * s_base,
        losses_kvar: losses.im * s_base,
        source_kw: source.re * s_base,
        source_kvar: source.im * s_base,
        load_kw: served.re * s_base,
        load_kvar: served.im * s_base,
        iterations,
    })
}

/// Extremes and the 24 snapshots of one representative day.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesResult {
    pub day_type: DayType,
    pub snapshots: Vec<SnapshotResult>,
    /// Per compiled branch, maximum loading fraction over the day.
    pub max_loading: Vec<f64>,
    /// Per compiled branch, maximum apparent power (kVA) over the day.
    pub max_kva: Vec<f64>,
    /// Per compiled branch, maximum phase current (A) over the day.
    pub max_current_a: Vec<f64>,
    /// Per bus, minimum voltage magnitude (pu) over present phases and hours.
    pub min_voltage: Vec<f64>,
}

impl TimeSeriesResult {
    /// Feeder-head real power for each hour (kW).
    pub fn head_kw(&self) -> [f64; HOURS] {
        let mut out = [0.0; HOURS];
        for (h, s) in self.snapshots.iter().enumerate() {
            out[h] = s.source_kw;
        }
        out
    }
}

/// Runs the 24 hourly snapshots of `day`: base demand is `peak_kw × profile[h]`
/// per load, plus `ev_kw[bus][h]` at unity power factor.
pub fn solve_timeseries(
    net: &Network<'_>,
    profiles: &ProfileStore,
    day: DayType,
    ev_kw: &[[f64; HOURS]],
    options: &SolverOptions,
) -> Result<TimeSeriesResult, TimeSeriesError> {
    let n = net.bus_count();
    if !ev_kw.is_empty() && ev_kw.len() != n {
        return Err(TimeSeriesError {
            hour: None,
            source: PowerFlowError::DemandShape {
                expected: n,
                got: ev_kw.len(),
            },
        });
    }
    let mut snapshots = Vec::with_capacity(HOURS);
    for hour in 0..HOURS {
        let base = net
            .base_demand(profiles, day, hour)
            .map_err(|e| TimeSeriesError {
                hour: None,
                source: e,
            })?;
        let mut demand = net.bus_demand(&base);
        for (bus, series) in ev_kw.iter().enumerate() {
            demand[bus] += Complex64::new(series[hour], 0.0);
        }
        let snap = solve_snapshot(net, &demand, options).map_err(|e| TimeSeriesError {
            hour: Some(hour),
            source: e,
        })?;
        snapshots.push(snap);
    }
    Ok(summarize(day, snapshots, &net.bus_phases))
}

fn summarize(
    day_type: DayType,
    snapshots: Vec<SnapshotResult>,
    phases: &[[bool; 3]],
) -> TimeSeriesResult {
    let m = snapshots.first().map_or(0, |s| s.branch_kva.len());
    let n = phases.len();
    let mut max_loading = vec![0.0f64; m];
    let mut max_kva = vec![0.0f64; m];
    let mut max_current_a = vec![0.0f64; m];
    let mut min_voltage = vec![f64::INFINITY; n];
    for s in &snapshots {
        for b in 0..m {
            max_loading[b] = max_loading[b].max(s.branch_loading[b]);
            max_kva[b] = max_kva[b].max(s.branch_kva[b]);
            let worst = s.branch_current_a[b].iter().copied().fold(0.0, f64::max);
            max_current_a[b] = max_current_a[b].max(worst);
        }
        for bus in 0..n {
            min_voltage[bus] = min_voltage[bus].min(s.bus_min_voltage(bus, phases[bus]));
        }
    }
    TimeSeriesResult {
        day_type,
        snapshots,
        max_loading,
        max_kva,
        max_current_a,
        min_voltage,
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{}{source}", match .hour { Some(h) => alloc::format!("hour {h}: "), None => String::new() })]
pub struct TimeSeriesError {
    pub hour: Option<usize>,
    pub source: PowerFlowError,
}
