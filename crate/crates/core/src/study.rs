//! One study cell: a feeder under one charging strategy and enrollment
//! scenario across every study year, plus the metric and comparison tables
//! derived from finished cells.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float as _;
use serde::{Deserialize, Serialize};

use crate::charging::{
    aggregate_ev_load, apply_enrollment, lb_schedule, tou_schedule, unmanaged_schedule, AssetLoad,
    ChargingSchedule, EnrollmentTrajectory, EvSession, Scenario, TouWindow,
};
use crate::economics::{cost_plan, npv, CostKind, CostTable, CostedPlan, EconError};
use crate::model::{Feeder, TopologyError};
use crate::powerflow::{DayType, ProfileStore, SolverOptions};
use crate::upgrade::{
    overload_trend, overloaded_transformers_by_year, plan_upgrades, ActionKind, Horizon, PlanError,
    PlannerOptions, Violation, YearDemand, YearResult,
};
use crate::HOURS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Unmanaged,
    Tou,
    Lb,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Unmanaged, Strategy::Tou, Strategy::Lb];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Unmanaged => "unmanaged",
            Strategy::Tou => "tou",
            Strategy::Lb => "lb",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "unmanaged" => Some(Strategy::Unmanaged),
            "tou" => Some(Strategy::Tou),
            "lb" => Some(Strategy::Lb),
            _ => None,
        }
    }
}

/// Number of EVs on a feeder per study year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FleetGrowth {
    /// Explicit counts; years missing from the map have no vehicles.
    Counts {
        #[serde(deserialize_with = "year_keys")]
        counts: BTreeMap<i32, usize>,
    },
    /// Vehicles per MW of connected load, linear between the first and last study year.
    Linear { start_per_mw: f64, end_per_mw: f64 },
}

/// Accepts years as integer or string map keys, since TOML tables only have
/// string keys.
fn year_keys<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeMap<i32, usize>, D::Error> {
    #[derive(Deserialize, PartialEq, Eq, PartialOrd, Ord)]
    #[serde(untagged)]
    enum Year {
        Int(i32),
        Text(String),
    }
    BTreeMap::<Year, usize>::deserialize(d)?
        .into_iter()
        .map(|(k, v)| match k {
            Year::Int(y) => Ok((y, v)),
            Year::Text(t) => t
                .trim()
                .parse::<i32>()
                .map(|y| (y, v))
                .map_err(|_| serde::de::Error::custom(alloc::format!("`{t}` is not a year"))),
        })
        .collect()
}

impl FleetGrowth {
    pub fn vehicles(&self, feeder: &Feeder, years: &[i32], year: i32) -> usize {
        match self {
            FleetGrowth::Counts { counts } => counts.get(&year).copied().unwrap_or(0),
            FleetGrowth::Linear {
                start_per_mw,
                end_per_mw,
            } => {
                let mw: f64 = feeder.loads.iter().map(|l| l.peak_kw).sum::<f64>() / 1000.0;
                let (first, last) = (
                    years.first().copied().unwrap_or(year),
                    years.last().copied().unwrap_or(year),
                );
                let t = if last > first {
                    f64::from(year - first) / f64::from(last - first)
                } else {
                    1.0
                };
                let rate = start_per_mw + (end_per_mw - start_per_mw) * t.clamp(0.0, 1.0);
                (rate * mw).round().max(0.0) as usize
            }
        }
    }

    pub fn max_vehicles(&self, feeder: &Feeder, years: &[i32]) -> usize {
        years
            .iter()
            .map(|&y| self.vehicles(feeder, years, y))
            .max()
            .unwrap_or(0)
    }
}

/// Sessions for one feeder: the full fleet per representative day, of which
/// year `y` uses the first `counts[y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FleetInput {
    pub sessions: BTreeMap<DayType, Vec<EvSession>>,
    pub counts: BTreeMap<i32, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyParams {
    pub years: Vec<i32>,
    pub day_types: Vec<DayType>,
    pub tou_window: TouWindow,
    /// Utilization threshold of the load-balancing scheduler.
    pub lb_threshold: f64,
    pub enrollment_start_year: i32,
    pub enrollment_target_year: i32,
    pub enrollment_seed: u64,
    pub solver: SolverOptions,
    pub planner: PlannerOptions,
    pub discount_rate: f64,
    pub base_year: i32,
}

impl Default for StudyParams {
    fn default() -> Self {
        StudyParams {
            years: (2022..=2035).collect(),
            day_types: DayType::ALL.to_vec(),
            tou_window: TouWindow::default(),
            lb_threshold: 0.9,
            enrollment_start_year: 2022,
            enrollment_target_year: 2035,
            enrollment_seed: 0,
            solver: SolverOptions::default(),
            planner: PlannerOptions::default(),
            discount_rate: 0.03,
            base_year: 2022,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum StudyError {
    #[error("study years must be a non-empty contiguous ascending range")]
    Years,
    #[error("no representative days selected")]
    Days,
    #[error("scenario {0} is not one of 1-4")]
    Scenario(u8),
    #[error("no sessions for {0:?}")]
    MissingDay(DayType),
    #[error("session `{session}` is attached to unknown bus `{bus}`")]
    UnknownBus { session: String, bus: String },
    #[error("load `{load}` needs profile `{profile}` for {day:?}")]
    MissingProfile {
        load: String,
        profile: String,
        day: DayType,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Cost(#[from] EconError),
    #[error("no scenario {scenario} baseline for feeder `{feeder}` under {strategy}")]
    MissingBaseline {
        feeder: String,
        strategy: &'static str,
        scenario: u8,
    },
}

impl StudyParams {
    pub fn check(&self) -> Result<(), StudyError> {
        if self.years.is_empty() || self.years.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(StudyError::Years);
        }
        if self.day_types.is_empty() {
            return Err(StudyError::Days);
        }
        Ok(())
    }
}

/// Checks made on every schedule the cell produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleAudit {
    pub sessions: usize,
    pub enrolled: usize,
    /// Largest |delivered + unmet − required| over all sessions (kWh).
    pub max_energy_residual_kwh: f64,
    /// Largest enrolled-session power inside the TOU window (kW); only tracked under TOU.
    pub max_window_power_kw: f64,
    pub unmet_kwh: f64,
    pub lb_infeasible_assets: usize,
    pub lb_fallbacks: usize,
}

impl ScheduleAudit {
    fn absorb(&mut self, s: &EvSession, sched: &ChargingSchedule) {
        self.sessions += 1;
        if s.enrolled {
            self.enrolled += 1;
        }
        let residual = (sched.delivered_kwh() + sched.unmet_kwh - s.energy_kwh).abs();
        self.max_energy_residual_kwh = self.max_energy_residual_kwh.max(residual);
        self.unmet_kwh += sched.unmet_kwh;
    }
}

/// Per-hour feeder-level profile of one day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayProfile {
    pub year: i32,
    pub day_type: DayType,
    pub base_kw: [f64; HOURS],
    pub ev_kw: [f64; HOURS],
    /// Feeder-head real power from the load flow (base + EV + losses).
    pub head_kw: [f64; HOURS],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub feeder_id: String,
    pub strategy: Strategy,
    pub scenario: u8,
    /// Annual peak feeder-head kW before upgrades.
    pub peak_load_kw: Vec<(i32, f64)>,
    /// Distinct transformers overloading in each year before upgrades.
    pub overloaded_transformers: Vec<(i32, usize)>,
    /// Cumulative share (%) of transformers overloaded by each year.
    pub overload_trend_pct: Vec<(i32, f64)>,
    /// Distinct transformers overloaded at any time in the horizon.
    pub overloaded_transformer_total: usize,
    pub transformer_upgrade_kva: f64,
    pub line_upgrade_a: f64,
    pub capacitor_kvar: f64,
    pub transformer_cost_usd: f64,
    pub line_cost_usd: f64,
    pub capacitor_cost_usd: f64,
    pub npv_usd: f64,
}

impl CellMetrics {
    pub fn peak_kw(&self) -> f64 {
        self.peak_load_kw.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    pub fn total_cost_usd(&self) -> f64 {
        self.transformer_cost_usd + self.line_cost_usd + self.capacitor_cost_usd
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub metrics: CellMetrics,
    pub plan: CostedPlan,
    pub baseline_violations: Vec<Violation>,
    pub residual_violations: Vec<Violation>,
    pub escalations: Vec<String>,
    pub audit: ScheduleAudit,
    /// Feeder-level profiles of every (year, day), before upgrades.
    pub profiles: Vec<DayProfile>,
    /// Minimum bus voltage per year before and after the plan.
    pub min_voltage_by_year: Vec<(i32, f64, f64)>,
    /// Final-year minimum voltage per bus before and after the plan.
    pub voltage_profile: Vec<(String, f64, f64)>,
    /// Worst relative power-balance error over every solved snapshot.
    pub max_balance_error: f64,
}

fn base_kw_kvar(
    feeder: &Feeder,
    profiles: &ProfileStore,
    day: DayType,
) -> Result<Vec<([f64; HOURS], [f64; HOURS])>, StudyError> {
    feeder
        .loads
        .iter()
        .map(|ld| {
            let shape =
                profiles
                    .get(&ld.profile_id, day)
                    .ok_or_else(|| StudyError::MissingProfile {
                        load: ld.id.clone(),
                        profile: ld.profile_id.clone(),
                        day,
                    })?;
            let mut kw = [0.0; HOURS];
            let mut kvar = [0.0; HOURS];
            for h in 0..HOURS {
                kw[h] = ld.peak_kw * shape[h];
                kvar[h] = ld.kvar_for(kw[h]);
            }
            Ok((kw, kvar))
        })
        .collect()
}

/// Schedules one day's sessions under `strategy` and returns the schedules in
/// session order.
pub fn schedule_day(
    feeder: &Feeder,
    sessions: &[EvSession],
    strategy: Strategy,
    base: &[([f64; HOURS], [f64; HOURS])],
    params: &StudyParams,
    audit: &mut ScheduleAudit,
) -> Result<Vec<ChargingSchedule>, StudyError> {
    let index = feeder.bus_index();
    for s in sessions {
        if !index.contains_key(s.bus.as_str()) {
            return Err(StudyError::UnknownBus {
                session: s.session_id.clone(),
                bus: s.bus.clone(),
            });
        }
    }
    let schedules: Vec<ChargingSchedule> = match strategy {
        Strategy::Unmanaged => sessions.iter().map(unmanaged_schedule).collect(),
        Strategy::Tou => {
            let out: Vec<ChargingSchedule> = sessions
                .iter()
                .map(|s| tou_schedule(s, params.tou_window))
                .collect();
            for (s, sched) in sessions.iter().zip(&out) {
                if s.enrolled {
                    for h in (0..HOURS).filter(|h| params.tou_window.contains(*h)) {
                        audit.max_window_power_kw =
                            audit.max_window_power_kw.max(sched.power_at(h));
                    }
                }
            }
            out
        }
        Strategy::Lb => {
            let serving = feeder.serving_transformers()?;
            let mut groups: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
            for (i, s) in sessions.iter().enumerate() {
                groups
                    .entry(serving[index[s.bus.as_str()]])
                    .or_default()
                    .push(i);
            }
            let mut out: Vec<Option<ChargingSchedule>> = vec![None; sessions.len()];
            for (tx, members) in groups {
                let group: Vec<EvSession> = members.iter().map(|&i| sessions[i].clone()).collect();
                let scheds = match tx {
                    None => group.iter().map(unmanaged_schedule).collect(),
                    Some(t) => {
                        let mut asset = AssetLoad {
                            rating_kva: feeder.transformers[t].rating_kva,
                            base_kw: [0.0; HOURS],
                            base_kvar: [0.0; HOURS],
                        };
                        for (ld, (kw, kvar)) in feeder.loads.iter().zip(base) {
                            if serving[index[ld.bus.as_str()]] == Some(t) {
                                for h in 0..HOURS {
                                    asset.base_kw[h] += kw[h];
                                    asset.base_kvar[h] += kvar[h];
                                }
                            }
                        }
                        let r = lb_schedule(&group, &asset, params.lb_threshold);
                        if r.infeasible {
                            audit.lb_infeasible_assets += 1;
                        }
                        if r.fell_back {
                            audit.lb_fallbacks += 1;
                        }
                        r.schedules
                    }
                };
                for (&i, s) in members.iter().zip(scheds) {
                    out[i] = Some(s);
                }
            }
            out.into_iter()
                .map(|s| s.expect("every session scheduled"))
                .collect()
        }
    };
    for (s, sched) in sessions.iter().zip(&schedules) {
        audit.absorb(s, sched);
    }
    Ok(schedules)
}

fn bus_rows(feeder: &Feeder, schedules: &[ChargingSchedule]) -> Vec<[f64; HOURS]> {
    let mut rows = vec![[0.0; HOURS]; feeder.buses.len()];
    let index = feeder.bus_index();
    for (bus, series) in aggregate_ev_load(schedules) {
        rows[index[bus.as_str()]] = series;
    }
    rows
}

/// Scheduled EV demand of one cell over every study year, before load flow.
#[derive(Clone, Debug, PartialEq)]
pub struct CellDemand {
    pub demands: Vec<YearDemand>,
    /// Feeder-total EV kW per (year, day).
    pub ev_totals: BTreeMap<(i32, DayType), [f64; HOURS]>,
    /// Base kW and kvar per load, per day type.
    pub base_by_day: BTreeMap<DayType, Vec<([f64; HOURS], [f64; HOURS])>>,
    pub audit: ScheduleAudit,
}

/// Enrolls and schedules every (year, day) of a cell.
pub fn cell_demand(
    feeder: &Feeder,
    profiles: &ProfileStore,
    fleet: &FleetInput,
    strategy: Strategy,
    scenario: Scenario,
    params: &StudyParams,
) -> Result<CellDemand, StudyError> {
    params.check()?;
    let trajectory = EnrollmentTrajectory::for_scenario(
        scenario,
        params.enrollment_start_year,
        params.enrollment_target_year,
    )
    .ok_or(StudyError::Scenario(scenario.0))?;
    let mut base_by_day = BTreeMap::new();
    for &day in &params.day_types {
        base_by_day.insert(day, base_kw_kvar(feeder, profiles, day)?);
    }

    let mut audit = ScheduleAudit::default();
    let mut demands = Vec::with_capacity(params.years.len());
    let mut ev_totals: BTreeMap<(i32, DayType), [f64; HOURS]> = BTreeMap::new();
    for &year in &params.years {
        let count = fleet.counts.get(&year).copied().unwrap_or(0);
        let mut rows_by_day = Vec::with_capacity(params.day_types.len());
        for &day in &params.day_types {
            let all = fleet
                .sessions
                .get(&day)
                .ok_or(StudyError::MissingDay(day))?;
            let fleet_today = &all[..count.min(all.len())];
            let enrolled = apply_enrollment(fleet_today, &trajectory, year, params.enrollment_seed);
            let schedules = schedule_day(
                feeder,
                &enrolled,
                strategy,
                &base_by_day[&day],
                params,
                &mut audit,
            )?;
            let rows = bus_rows(feeder, &schedules);
            let mut total = [0.0; HOURS];
            for r in &rows {
                for h in 0..HOURS {
                    total[h] += r[h];
                }
            }
            ev_totals.insert((year, day), total);
            rows_by_day.push((day, rows));
        }
        demands.push(YearDemand {
            year,
            ev_kw: rows_by_day,
        });
    }
    Ok(CellDemand {
        demands,
        ev_totals,
        base_by_day,
        audit,
    })
}

/// Runs one (feeder, strategy, scenario) cell end to end.
pub fn run_cell(
    feeder: &Feeder,
    profiles: &ProfileStore,
    fleet: &FleetInput,
    strategy: Strategy,
    scenario: Scenario,
    params: &StudyParams,
    costs: &CostTable,
) -> Result<CellResult, StudyError> {
    let CellDemand {
        demands,
        ev_totals,
        base_by_day,
        audit,
    } = cell_demand(feeder, profiles, fleet, strategy, scenario, params)?;
    let horizon = Horizon::new(feeder, profiles, &demands, params.solver.clone())?;
    let outcome = plan_upgrades(&horizon, &params.planner)?;
    let costed = cost_plan(&outcome.plan, feeder, costs, &params.years)?;
    let npv_usd = npv(&costed.stream, params.discount_rate, params.base_year)?;

    let source = horizon.source_bus();
    let mut max_balance_error: f64 = 0.0;
    for r in outcome
        .baseline_results
        .iter()
        .chain(&outcome.verification.results)
    {
        for d in &r.days {
            for s in &d.snapshots {
                max_balance_error = max_balance_error.max(s.balance_error());
            }
        }
    }

    let mut day_profiles = Vec::new();
    for r in &outcome.baseline_results {
        for d in &r.days {
            let base = &base_by_day[&d.day_type];
            let mut base_kw = [0.0; HOURS];
            for (kw, _) in base {
                for h in 0..HOURS {
                    base_kw[h] += kw[h];
                }
            }
            day_profiles.push(DayProfile {
                year: r.year,
                day_type: d.day_type,
                base_kw,
                ev_kw: ev_totals[&(r.year, d.day_type)],
                head_kw: d.head_kw(),
            });
        }
    }

    let min_v = |r: &YearResult| r.min_voltage(source).map_or(1.0, |p| p.1);
    let min_voltage_by_year = outcome
        .baseline_results
        .iter()
        .zip(&outcome.verification.results)
        .map(|(b, a)| (b.year, min_v(b), min_v(a)))
        .collect();
    let bus_min = |r: &YearResult, bus: usize| {
        r.days
            .iter()
            .map(|d| d.min_voltage[bus])
            .fold(f64::INFINITY, f64::min)
    };
    let voltage_profile = match (
        outcome.baseline_results.last(),
        outcome.verification.results.last(),
    ) {
        (Some(b), Some(a)) => feeder
            .buses
            .iter()
            .enumerate()
            .map(|(i, bus)| (bus.id.clone(), bus_min(b, i), bus_min(a, i)))
            .collect(),
        _ => Vec::new(),
    };

    let added = |kind: ActionKind| -> f64 {
        outcome
            .plan
            .actions
            .iter()
            .filter(|a| a.kind == kind)
            .map(|a| a.new_rating - a.old_rating)
            .sum()
    };
    let metrics = CellMetrics {
        feeder_id: feeder.id.clone(),
        strategy,
        scenario: scenario.0,
        peak_load_kw: outcome
            .baseline_results
            .iter()
            .map(|r| (r.year, r.peak_head_kw()))
            .collect(),
        overloaded_transformers: overloaded_transformers_by_year(
            &outcome.baseline_violations,
            &params.years,
        ),
        overload_trend_pct: overload_trend(
            &outcome.baseline_violations,
            feeder.transformers.len(),
            &params.years,
        ),
        overloaded_transformer_total: {
            let mut ids: Vec<&str> = outcome
                .baseline_violations
                .iter()
                .filter(|v| v.kind == crate::upgrade::ViolationKind::TransformerOverload)
                .map(|v| v.component_id.as_str())
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids.len()
        },
        transformer_upgrade_kva: added(ActionKind::ResizeTransformer),
        line_upgrade_a: added(ActionKind::ResizeLine),
        capacitor_kvar: added(ActionKind::AddCapacitor),
        transformer_cost_usd: costed.subtotal(CostKind::Transformer),
        line_cost_usd: costed.subtotal(CostKind::Line),
        capacitor_cost_usd: costed.subtotal(CostKind::Capacitor),
        npv_usd,
    };
    Ok(CellResult {
        metrics,
        plan: costed,
        baseline_violations: outcome.baseline_violations,
        residual_violations: outcome.verification.residual,
        escalations: outcome.escalations,
        audit,
        profiles: day_profiles,
        min_voltage_by_year,
        voltage_profile,
        max_balance_error,
    })
}

/// Scenario comparison for one feeder and strategy. A reduction is `None`
/// when the baseline is zero but the compared value is not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub feeder_id: String,
    pub strategy: Strategy,
    pub peak_load_reduction_pct: Option<f64>,
    pub overload_count_reduction_pct: Option<f64>,
    pub transformer_cost_reduction_pct: Option<f64>,
    pub line_cost_reduction_pct: Option<f64>,
    pub npv_reduction_pct: Option<f64>,
}

/// (baseline − value) / baseline × 100.
pub fn reduction_pct(baseline: f64, value: f64) -> Option<f64> {
    if baseline == 0.0 {
        if value == 0.0 {
            Some(0.0)
        } else {
            None
        }
    } else {
        Some((baseline - value) / baseline * 100.0)
    }
}

/// Compares `scenario` against `baseline` for every (feeder, strategy) that
/// has the compared scenario.
pub fn compute_table(
    metrics: &[CellMetrics],
    baseline: u8,
    scenario: u8,
) -> Result<Vec<TableRow>, StudyError> {
    let mut by_key: BTreeMap<(&str, Strategy, u8), &CellMetrics> = BTreeMap::new();
    for m in metrics {
        by_key.insert((m.feeder_id.as_str(), m.strategy, m.scenario), m);
    }
    let mut rows = Vec::new();
    for (&(feeder, strategy, sc), m) in &by_key {
        if sc != scenario {
            continue;
        }
        let b = by_key.get(&(feeder, strategy, baseline)).ok_or_else(|| {
            StudyError::MissingBaseline {
                feeder: feeder.to_string(),
                strategy: strategy.as_str(),
                scenario: baseline,
            }
        })?;
        rows.push(TableRow {
            feeder_id: feeder.to_string(),
            strategy,
            peak_load_reduction_pct: reduction_pct(b.peak_kw(), m.peak_kw()),
            overload_count_reduction_pct: reduction_pct(
                b.overloaded_transformer_total as f64,
                m.overloaded_transformer_total as f64,
            ),
            transformer_cost_reduction_pct: reduction_pct(
                b.transformer_cost_usd,
                m.transformer_cost_usd,
            ),
            line_cost_reduction_pct: reduction_pct(b.line_cost_usd, m.line_cost_usd),
            npv_reduction_pct: reduction_pct(b.npv_usd, m.npv_usd),
        });
    }
    Ok(rows)
}
