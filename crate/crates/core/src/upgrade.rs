//! Violation detection across a multi-year horizon and the upgrade planner:
//! thermal resizing, capacitor placement and plan verification.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float as _;

use serde::{Deserialize, Serialize};

use crate::model::{transformer_ladder, BranchRef, Feeder, Topology};
use crate::powerflow::{
    solve_timeseries, DayType, Network, NetworkOverrides, PowerFlowError, ProfileStore,
    ShuntCapacitor, SolverOptions, TimeSeriesError, TimeSeriesResult,
};
use crate::HOURS;

pub const CAPACITOR_LADDER_KVAR: [f64; 7] = [50.0, 100.0, 150.0, 300.0, 600.0, 900.0, 1200.0];
pub const LINE_AMPACITY_LADDER_A: [f64; 8] =
    [140.0, 180.0, 230.0, 310.0, 400.0, 530.0, 670.0, 900.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    TransformerOverload,
    LineOverload,
    Undervoltage,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::TransformerOverload => "transformer_overload",
            ViolationKind::LineOverload => "line_overload",
            ViolationKind::Undervoltage => "undervoltage",
        }
    }

    pub fn is_thermal(self) -> bool {
        self != ViolationKind::Undervoltage
    }
}

/// One component-hour outside its limit. `magnitude` is the loading fraction
/// for thermal records and the voltage (pu) for undervoltage records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub component_id: String,
    pub year: i32,
    pub day_type: DayType,
    pub hour: usize,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    ResizeTransformer,
    ResizeLine,
    AddCapacitor,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::ResizeTransformer => "resize_transformer",
            ActionKind::ResizeLine => "resize_line",
            ActionKind::AddCapacitor => "add_capacitor",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "resize_transformer" => Some(ActionKind::ResizeTransformer),
            "resize_line" => Some(ActionKind::ResizeLine),
            "add_capacitor" => Some(ActionKind::AddCapacitor),
            _ => None,
        }
    }
}

/// A dated equipment change. Ratings are kVA, A or kvar by kind; `new_rating`
/// is the total over `quantity` parallel units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpgradeAction {
    pub component_id: String,
    pub kind: ActionKind,
    pub year: i32,
    pub old_rating: f64,
    pub new_rating: f64,
    pub quantity: u32,
    #[serde(default)]
    pub unit_cost_usd: f64,
}

impl UpgradeAction {
    /// Rating of one of the parallel units.
    pub fn unit_rating(&self) -> f64 {
        self.new_rating / f64::from(self.quantity.max(1))
    }

    /// Bus of a capacitor action (`cap:{bus}:{n}`).
    pub fn capacitor_bus(&self) -> Option<&str> {
        let rest = self.component_id.strip_prefix("cap:")?;
        rest.rsplit_once(':').map(|(bus, _)| bus)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpgradePlan {
    pub actions: Vec<UpgradeAction>,
}

impl UpgradePlan {
    /// Equipment in service during `year`.
    pub fn overrides_at(&self, feeder: &Feeder, year: i32) -> NetworkOverrides {
        let mut out = NetworkOverrides::default();
        for a in self.actions.iter().filter(|a| a.year <= year) {
            match a.kind {
                ActionKind::ResizeTransformer => {
                    if let Some(i) = feeder
                        .transformers
                        .iter()
                        .position(|t| t.id == a.component_id)
                    {
                        out.transformer_rating_kva.insert(i, a.new_rating);
                    }
                }
                ActionKind::ResizeLine => {
                    if let Some(i) = feeder.lines.iter().position(|l| l.id == a.component_id) {
                        out.line_ampacity_a.insert(i, a.new_rating);
                    }
                }
                ActionKind::AddCapacitor => {
                    if let Some(bus) = a.capacitor_bus() {
                        out.capacitors.push(ShuntCapacitor {
                            bus: bus.to_string(),
                            kvar: a.new_rating,
                        });
                    }
                }
            }
        }
        out
    }

    fn thermal_index(&self, component: &str) -> Option<usize> {
        self.actions
            .iter()
            .position(|a| a.kind != ActionKind::AddCapacitor && a.component_id == component)
    }

    pub fn total_rating(&self, kind: ActionKind) -> f64 {
        self.actions
            .iter()
            .filter(|a| a.kind == kind)
            .map(|a| a.new_rating)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerOptions {
    /// Thermal limit as a fraction of nameplate.
    pub thermal_limit: f64,
    pub v_min_pu: f64,
    pub v_max_pu: f64,
    pub capacitor_ladder_kvar: Vec<f64>,
    pub line_ladder_a: Vec<f64>,
    /// Bound on capacitor banks added while repairing one year.
    pub max_capacitors_per_year: usize,
    /// Bound on detect/repair passes over the whole horizon.
    pub max_passes: usize,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions {
            thermal_limit: 1.0,
            v_min_pu: 0.95,
            v_max_pu: 1.05,
            capacitor_ladder_kvar: CAPACITOR_LADDER_KVAR.to_vec(),
            line_ladder_a: LINE_AMPACITY_LADDER_A.to_vec(),
            max_capacitors_per_year: 6,
            max_passes: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("year {year}, {day:?}: {source}")]
    Solve {
        year: i32,
        day: DayType,
        source: TimeSeriesError,
    },
    #[error(transparent)]
    Network(#[from] PowerFlowError),
    #[error("no simulation results for year {0}")]
    MissingYear(i32),
}

/// EV demand of one study year: per representative day, one 24-hour row per
/// bus (in feeder bus order), or an empty list for no EV load.
#[derive(Clone, Debug, PartialEq)]
pub struct YearDemand {
    pub year: i32,
    pub ev_kw: Vec<(DayType, Vec<[f64; HOURS]>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct YearResult {
    pub year: i32,
    pub days: Vec<TimeSeriesResult>,
}

impl YearResult {
    /// Lowest non-source bus voltage and its bus index.
    pub fn min_voltage(&self, skip: usize) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for day in &self.days {
            for (bus, v) in day.min_voltage.iter().enumerate() {
                if bus != skip && best.is_none_or(|(_, b)| *v < b) {
                    best = Some((bus, *v));
                }
            }
        }
        best
    }

    pub fn max_loading(&self) -> f64 {
        self.days
            .iter()
            .flat_map(|d| d.max_loading.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Annual peak feeder-head real power (kW).
    pub fn peak_head_kw(&self) -> f64 {
        self.days
            .iter()
            .flat_map(|d| d.head_kw())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A feeder with its base profiles and the EV demand of every study year.
pub struct Horizon<'a> {
    pub feeder: &'a Feeder,
    pub profiles: &'a ProfileStore,
    pub years: &'a [YearDemand],
    pub solver: SolverOptions,
    slots: Vec<BranchRef>,
    source: usize,
    topology: Topology,
}

impl<'a> Horizon<'a> {
    pub fn new(
        feeder: &'a Feeder,
        profiles: &'a ProfileStore,
        years: &'a [YearDemand],
        solver: SolverOptions,
    ) -> Result<Self, PlanError> {
        let net = Network::compile(feeder, &solver)?;
        let slots = (0..net.branch_count()).map(|s| net.branch_ref(s)).collect();
        let topology = net.topology().clone();
        let source = topology.source;
        Ok(Horizon {
            feeder,
            profiles,
            years,
            solver,
            slots,
            source,
            topology,
        })
    }

    pub fn source_bus(&self) -> usize {
        self.source
    }

    /// Feeder component behind each compiled branch slot.
    pub fn slots(&self) -> &[BranchRef] {
        &self.slots
    }

    pub fn simulate_year(
        &self,
        index: usize,
        overrides: &NetworkOverrides,
    ) -> Result<YearResult, PlanError> {
        let demand = &self.years[index];
        let net = Network::with_overrides(self.feeder, overrides, &self.solver)?;
        let mut days = Vec::with_capacity(demand.ev_kw.len());
        for (day, ev) in &demand.ev_kw {
            let r = solve_timeseries(&net, self.profiles, *day, ev, &self.solver).map_err(
                |source| PlanError::Solve {
                    year: demand.year,
                    day: *day,
                    source,
                },
            )?;
            days.push(r);
        }
        Ok(YearResult {
            year: demand.year,
            days,
        })
    }

    pub fn simulate(&self, plan: &UpgradePlan) -> Result<Vec<YearResult>, PlanError> {
        (0..self.years.len())
            .map(|i| self.simulate_year(i, &plan.overrides_at(self.feeder, self.years[i].year)))
            .collect()
    }

    fn slot_component(&self, slot: usize) -> (&str, ViolationKind) {
        match self.slots[slot] {
            BranchRef::Transformer(i) => (
                &self.feeder.transformers[i].id,
                ViolationKind::TransformerOverload,
            ),
            BranchRef::Line(i) => (&self.feeder.lines[i].id, ViolationKind::LineOverload),
        }
    }

    /// One record per component-hour outside its limit.
    pub fn detect_violations(
        &self,
        results: &[YearResult],
        options: &PlannerOptions,
    ) -> Vec<Violation> {
        let mut out = Vec::new();
        for year in results {
            for day in &year.days {
                for (hour, snap) in day.snapshots.iter().enumerate() {
                    for (slot, loading) in snap.branch_loading.iter().enumerate() {
                        if *loading > options.thermal_limit {
                            let (id, kind) = self.slot_component(slot);
                            out.push(Violation {
                                component_id: id.to_string(),
                                year: year.year,
                                day_type: day.day_type,
                                hour,
                                kind,
                                magnitude: *loading,
                            });
                        }
                    }
                    for (bus, b) in self.feeder.buses.iter().enumerate() {
                        if bus == self.source {
                            continue;
                        }
                        let mut mask = [false; 3];
                        for p in b.phases.iter() {
                            mask[p.index()] = true;
                        }
                        let v = snap.bus_min_voltage(bus, mask);
                        if v < options.v_min_pu {
                            out.push(Violation {
                                component_id: b.id.clone(),
                                year: year.year,
                                day_type: day.day_type,
                                hour,
                                kind: ViolationKind::Undervoltage,
                                magnitude: v,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    fn thermal_clean(&self, result: &YearResult, options: &PlannerOptions) -> bool {
        result.max_loading() <= options.thermal_limit
    }
}

/// Smallest ladder size covering `required`; beyond the ladder, parallel units
/// of the largest size. Returns (total rating, unit count).
pub fn size_from_ladder(ladder: &[f64], required: f64) -> (f64, u32) {
    if let Some(size) = ladder.iter().copied().find(|s| *s >= required) {
        return (size, 1);
    }
    let largest = ladder.iter().copied().fold(0.0, f64::max);
    if largest <= 0.0 {
        return (required, 1);
    }
    let count = (required / largest).ceil().max(1.0);
    (largest * count, count as u32)
}

/// One resize per overloaded component, dated at its first violation year and
/// sized for the largest demand seen over the whole horizon.
pub fn plan_thermal_upgrades(
    horizon: &Horizon<'_>,
    results: &[YearResult],
    options: &PlannerOptions,
) -> Vec<UpgradeAction> {
    let mut plan = UpgradePlan::default();
    extend_thermal(horizon, results, options, &mut plan);
    plan.actions
}

/// Adds or enlarges thermal actions for every component that overloads in `results`.
fn extend_thermal(
    horizon: &Horizon<'_>,
    results: &[YearResult],
    options: &PlannerOptions,
    plan: &mut UpgradePlan,
) -> bool {
    let mut first_year: BTreeMap<usize, i32> = BTreeMap::new();
    let mut demand = vec![0.0f64; horizon.slots.len()];
    for year in results {
        for day in &year.days {
            for slot in 0..horizon.slots.len() {
                if day.max_loading[slot] > options.thermal_limit {
                    let e = first_year.entry(slot).or_insert(year.year);
                    *e = (*e).min(year.year);
                }
                let need = match horizon.slots[slot] {
                    BranchRef::Transformer(_) => day.max_kva[slot],
                    BranchRef::Line(_) => day.max_current_a[slot],
                };
                demand[slot] = demand[slot].max(need / options.thermal_limit);
            }
        }
    }
    let mut changed = false;
    for (&slot, &year) in &first_year {
        let (id, kind, old, ladder): (String, ActionKind, f64, &[f64]) = match horizon.slots[slot] {
            BranchRef::Transformer(i) => {
                let t = &horizon.feeder.transformers[i];
                (
                    t.id.clone(),
                    ActionKind::ResizeTransformer,
                    t.rating_kva,
                    transformer_ladder(t.phase_count),
                )
            }
            BranchRef::Line(i) => {
                let l = &horizon.feeder.lines[i];
                (
                    l.id.clone(),
                    ActionKind::ResizeLine,
                    l.ampacity_a,
                    &options.line_ladder_a,
                )
            }
        };
        match plan.thermal_index(&id) {
            Some(idx) => {
                let a = &mut plan.actions[idx];
                let target = demand[slot].max(a.new_rating * (1.0 + 1e-9));
                let (mut rating, mut qty) = size_from_ladder(ladder, target);
                if rating <= a.new_rating {
                    let bigger = ladder.iter().copied().find(|s| *s > a.new_rating);
                    (rating, qty) = match bigger {
                        Some(s) => (s, 1),
                        None => size_from_ladder(
                            ladder,
                            a.new_rating + ladder.iter().copied().fold(0.0, f64::max),
                        ),
                    };
                }
                a.new_rating = rating;
                a.quantity = qty;
                a.year = a.year.min(year);
            }
            None => {
                let (mut rating, mut qty) = size_from_ladder(ladder, demand[slot]);
                if rating <= old {
                    (rating, qty) = size_from_ladder(ladder, old * (1.0 + 1e-9));
                }
                plan.actions.push(UpgradeAction {
                    component_id: id,
                    kind,
                    year,
                    old_rating: old,
                    new_rating: rating,
                    quantity: qty,
                    unit_cost_usd: 0.0,
                });
            }
        }
        changed = true;
    }
    changed
}

fn next_capacitor_id(plan: &UpgradePlan, bus: &str) -> String {
    let n = plan
        .actions
        .iter()
        .filter(|a| a.capacitor_bus() == Some(bus))
        .count();
    format!("cap:{bus}:{}", n + 1)
}

/// Capacitor banks, year by year, wherever undervoltage remains. Returns the
/// number of banks added.
pub fn plan_voltage_support(
    horizon: &Horizon<'_>,
    options: &PlannerOptions,
    plan: &mut UpgradePlan,
) -> Result<usize, PlanError> {
    let feeder = horizon.feeder;
    let mut added = 0;
    for (idx, demand) in horizon.years.iter().enumerate() {
        let year = demand.year;
        for _ in 0..options.max_capacitors_per_year {
            let result = horizon.simulate_year(idx, &plan.overrides_at(feeder, year))?;
            let Some((worst, v)) = result.min_voltage(horizon.source) else {
                break;
            };
            if v >= options.v_min_pu {
                break;
            }
            let mut candidates = Vec::new();
            if let Some((BranchRef::Transformer(_), primary)) = horizon.topology.parent[worst] {
                if primary != horizon.source {
                    candidates.push(primary);
                }
            }
            candidates.push(worst);

            let mut chosen: Option<(usize, f64)> = None;
            let mut best_partial: Option<(usize, f64, f64)> = None;
            'sizes: for &kvar in &options.capacitor_ladder_kvar {
                for &bus in &candidates {
                    let mut trial = plan.overrides_at(feeder, year);
                    trial.capacitors.push(ShuntCapacitor {
                        bus: feeder.buses[bus].id.clone(),
                        kvar,
                    });
                    let r = horizon.simulate_year(idx, &trial)?;
                    if !horizon.thermal_clean(&r, options) {
                        continue;
                    }
                    let Some((_, vmin)) = r.min_voltage(horizon.source) else {
                        continue;
                    };
                    if vmin >= options.v_min_pu {
                        chosen = Some((bus, kvar));
                        break 'sizes;
                    }
                    if best_partial.is_none_or(|(_, _, b)| vmin > b + 1e-9) {
                        best_partial = Some((bus, kvar, vmin));
                    }
                }
            }
            let pick = match (chosen, best_partial) {
                (Some(c), _) => Some(c),
                (None, Some((bus, kvar, vmin))) if vmin > v + 1e-6 => Some((bus, kvar)),
                _ => None,
            };
            let Some((bus, kvar)) = pick else { break };
            let bus_id = feeder.buses[bus].id.clone();
            plan.actions.push(UpgradeAction {
                component_id: next_capacitor_id(plan, &bus_id),
                kind: ActionKind::AddCapacitor,
                year,
                old_rating: 0.0,
                new_rating: kvar,
                quantity: 1,
                unit_cost_usd: 0.0,
            });
            added += 1;
            if chosen.is_some() {
                break;
            }
        }
    }
    Ok(added)
}

/// Re-simulation of a plan over the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub residual: Vec<Violation>,
    pub results: Vec<YearResult>,
}

impl VerifyReport {
    pub fn is_clean(&self) -> bool {
        self.residual.is_empty()
    }

    pub fn thermal_residual(&self) -> impl Iterator<Item = &Violation> {
        self.residual.iter().filter(|v| v.kind.is_thermal())
    }
}

pub fn verify_plan(
    horizon: &Horizon<'_>,
    plan: &UpgradePlan,
    options: &PlannerOptions,
) -> Result<VerifyReport, PlanError> {
    let results = horizon.simulate(plan)?;
    let residual = horizon.detect_violations(&results, options);
    Ok(VerifyReport { residual, results })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutcome {
    pub plan: UpgradePlan,
    /// Violations of the as-built system.
    pub baseline_violations: Vec<Violation>,
    pub baseline_results: Vec<YearResult>,
    /// Final re-simulation with the plan applied.
    pub verification: VerifyReport,
    /// Components that needed parallel units beyond the largest ladder size.
    pub escalations: Vec<String>,
}

/// Full planning pass: thermal resizing first, then capacitor support,
/// repeated until the horizon verifies clean or nothing more can be done,
/// then redundant capacitors are removed.
pub fn plan_upgrades(
    horizon: &Horizon<'_>,
    options: &PlannerOptions,
) -> Result<PlanOutcome, PlanError> {
    let baseline_results = horizon.simulate(&UpgradePlan::default())?;
    let baseline_violations = horizon.detect_violations(&baseline_results, options);
    let mut plan = UpgradePlan::default();
    extend_thermal(horizon, &baseline_results, options, &mut plan);

    for _ in 0..options.max_passes {
        let report = verify_plan(horizon, &plan, options)?;
        if report.thermal_residual().next().is_some() {
            extend_thermal(horizon, &report.results, options, &mut plan);
            continue;
        }
        if report.is_clean() {
            break;
        }
        if plan_voltage_support(horizon, options, &mut plan)? == 0 {
            break;
        }
    }

    // Drop capacitors the plan can do without, newest first.
    let mut verification = verify_plan(horizon, &plan, options)?;
    let mut i = plan.actions.len();
    while i > 0 {
        i -= 1;
        if plan.actions[i].kind != ActionKind::AddCapacitor {
            continue;
        }
        let mut trial = plan.clone();
        trial.actions.remove(i);
        let report = verify_plan(horizon, &trial, options)?;
        if report.residual.len() <= verification.residual.len() {
            plan = trial;
            verification = report;
        }
    }

    plan.actions.sort_by(|a, b| {
        a.year
            .cmp(&b.year)
            .then(a.kind.cmp(&b.kind))
            .then(a.component_id.cmp(&b.component_id))
    });
    let escalations = plan
        .actions
        .iter()
        .filter(|a| a.quantity > 1)
        .map(|a| a.component_id.clone())
        .collect();
    Ok(PlanOutcome {
        plan,
        baseline_violations,
        baseline_results,
        verification,
        escalations,
    })
}

/// Cumulative share (%) of transformers that have overloaded by each year.
pub fn overload_trend(
    violations: &[Violation],
    transformer_count: usize,
    years: &[i32],
) -> Vec<(i32, f64)> {
    let mut first: BTreeMap<&str, i32> = BTreeMap::new();
    for v in violations
        .iter()
        .filter(|v| v.kind == ViolationKind::TransformerOverload)
    {
        let e = first.entry(v.component_id.as_str()).or_insert(v.year);
        *e = (*e).min(v.year);
    }
    years
        .iter()
        .map(|&y| {
            let count = first.values().filter(|&&fy| fy <= y).count();
            let pct = if transformer_count == 0 {
                0.0
            } else {
                100.0 * count as f64 / transformer_count as f64
            };
            (y, pct)
        })
        .collect()
}

/// Distinct transformers overloading in each year (not cumulative).
pub fn overloaded_transformers_by_year(
    violations: &[Violation],
    years: &[i32],
) -> Vec<(i32, usize)> {
    years
        .iter()
        .map(|&y| {
            let set: BTreeSet<&str> = violations
                .iter()
                .filter(|v| v.year == y && v.kind == ViolationKind::TransformerOverload)
                .map(|v| v.component_id.as_str())
                .collect();
            (y, set.len())
        })
        .collect()
}
