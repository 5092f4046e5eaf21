//! EV charging sessions, the three charging strategies, enrollment scenarios
//! and a parametric session generator.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{CustomerClass, Feeder};
use crate::HOURS;

const EPS: f64 = 1e-12;

/// One vehicle's charging need on a representative day.
///
/// The session occupies absolute hours `plugin_hour .. plugin_hour + duration_h`;
/// hours past 23 wrap onto the early morning of the same template day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvSession {
    pub session_id: String,
    pub bus: String,
    pub plugin_hour: usize,
    pub duration_h: usize,
    pub energy_kwh: f64,
    pub max_power_kw: f64,
    #[serde(default)]
    pub enrolled: bool,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("session `{0}`: plugin_hour must be 0..=23")]
    PluginHour(String),
    #[error("session `{0}`: duration_h must be 1..=24")]
    Duration(String),
    #[error("session `{0}`: energy_kwh must be >= 0")]
    Energy(String),
    #[error("session `{0}`: max_power_kw must be > 0")]
    Power(String),
}

impl EvSession {
    /// Absolute departure hour (may exceed 23).
    pub fn depart_hour(&self) -> usize {
        self.plugin_hour + self.duration_h
    }

    /// Hour of day of the `offset`-th plugged-in hour.
    pub fn hour_of_day(&self, offset: usize) -> usize {
        (self.plugin_hour + offset) % HOURS
    }

    pub fn check(&self) -> Result<(), SessionError> {
        if self.plugin_hour >= HOURS {
            return Err(SessionError::PluginHour(self.session_id.clone()));
        }
        if !(1..=HOURS).contains(&self.duration_h) {
            return Err(SessionError::Duration(self.session_id.clone()));
        }
        if !(self.energy_kwh >= 0.0) || !self.energy_kwh.is_finite() {
            return Err(SessionError::Energy(self.session_id.clone()));
        }
        if !(self.max_power_kw > 0.0) || !self.max_power_kw.is_finite() {
            return Err(SessionError::Power(self.session_id.clone()));
        }
        Ok(())
    }
}

/// Hourly power a strategy assigns to one session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargingSchedule {
    pub session_id: String,
    pub bus: String,
    pub plugin_hour: usize,
    /// Power (kW) for each plugged-in hour, starting at `plugin_hour`.
    pub power_kw: Vec<f64>,
    pub unmet_kwh: f64,
}

impl ChargingSchedule {
    fn idle(s: &EvSession) -> Self {
        ChargingSchedule {
            session_id: s.session_id.clone(),
            bus: s.bus.clone(),
            plugin_hour: s.plugin_hour,
            power_kw: vec![0.0; s.duration_h],
            unmet_kwh: s.energy_kwh,
        }
    }

    pub fn delivered_kwh(&self) -> f64 {
        self.power_kw.iter().sum()
    }

    /// Power drawn at hour-of-day `hour` (kW).
    pub fn power_at(&self, hour: usize) -> f64 {
        self.power_kw
            .iter()
            .enumerate()
            .filter(|(i, _)| (self.plugin_hour + i) % HOURS == hour)
            .map(|(_, p)| *p)
            .sum()
    }

    /// The schedule folded onto the 24 hours of the template day.
    pub fn by_hour(&self) -> [f64; HOURS] {
        let mut out = [0.0; HOURS];
        for (i, p) in self.power_kw.iter().enumerate() {
            out[(self.plugin_hour + i) % HOURS] += p;
        }
        out
    }
}

/// Fills hours in chronological order at full power, skipping hours for
/// which `blocked` returns true.
fn greedy(s: &EvSession, blocked: impl Fn(usize) -> bool) -> ChargingSchedule {
    let mut sched = ChargingSchedule::idle(s);
    let mut remaining = s.energy_kwh;
    for i in 0..s.duration_h {
        if remaining <= 0.0 {
            break;
        }
        if blocked(s.hour_of_day(i)) {
            continue;
        }
        let p = s.max_power_kw.min(remaining);
        sched.power_kw[i] = p;
        remaining -= p;
    }
    sched.unmet_kwh = remaining.max(0.0);
    sched
}

/// Charge at full power from plug-in until the energy is met or the car leaves.
pub fn unmanaged_schedule(s: &EvSession) -> ChargingSchedule {
    greedy(s, |_| false)
}

/// Peak-price window during which enrolled vehicles pause, `[start, end)` in
/// hours of day.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TouWindow {
    pub start: usize,
    pub end: usize,
}

impl Default for TouWindow {
    fn default() -> Self {
        TouWindow { start: 17, end: 21 }
    }
}

impl TouWindow {
    pub fn contains(&self, hour: usize) -> bool {
        let h = hour % HOURS;
        if self.start <= self.end {
            (self.start..self.end).contains(&h)
        } else {
            h >= self.start || h < self.end
        }
    }
}

/// Unmanaged charging with a pause inside the TOU window for enrolled
/// vehicles. Energy that cannot be delivered before departure is left unmet.
pub fn tou_schedule(s: &EvSession, window: TouWindow) -> ChargingSchedule {
    if !s.enrolled {
        return unmanaged_schedule(s);
    }
    greedy(s, |h| window.contains(h))
}

/// Base (non-EV) demand on one grid asset and its thermal rating.
#[derive(Clone, Debug, PartialEq)]
pub struct AssetLoad {
    pub rating_kva: f64,
    pub base_kw: [f64; HOURS],
    pub base_kvar: [f64; HOURS],
}

impl AssetLoad {
    /// Largest real power the asset can carry at `hour` under `threshold` × rating.
    fn limit_kw(&self, hour: usize, threshold: f64) -> f64 {
        let s = threshold * self.rating_kva;
        let q = self.base_kvar[hour];
        let room = s * s - q * q;
        if room <= 0.0 {
            0.0
        } else {
            room.sqrt()
        }
    }

    /// Hours of day where base plus `ev_kw` exceeds `threshold` × rating.
    pub fn breach_hours(&self, ev_kw: &[f64; HOURS], threshold: f64) -> Vec<usize> {
        (0..HOURS)
            .filter(|&h| {
                let p = self.base_kw[h] + ev_kw[h];
                let q = self.base_kvar[h];
                (p * p + q * q).sqrt() > threshold * self.rating_kva * (1.0 + 1e-12) + 1e-9
            })
            .collect()
    }
}

/// Output of the load-balancing scheduler for one asset.
#[derive(Clone, Debug, PartialEq)]
pub struct LbOutcome {
    /// One schedule per input session, in input order.
    pub schedules: Vec<ChargingSchedule>,
    /// Hours of day where the asset ends above its utilization threshold.
    pub breach_hours: Vec<usize>,
    /// Enrolled energy that did not fit inside the headroom.
    pub infeasible: bool,
    /// The balanced allocation breached more hours than unmanaged charging, so
    /// the enrolled sessions were returned unmanaged.
    pub fell_back: bool,
}

pub fn sum_by_hour<'a>(schedules: impl IntoIterator<Item = &'a ChargingSchedule>) -> [f64; HOURS] {
    let mut out = [0.0; HOURS];
    for s in schedules {
        for (h, p) in s.by_hour().iter().enumerate() {
            out[h] += p;
        }
    }
    out
}

/// Load-balancing scheduler for the sessions served by one asset.
///
/// Non-enrolled sessions charge unmanaged and count as fixed load. Enrolled
/// sessions are taken earliest departure first and filled chronologically
/// from plug-in, each hour capped by charger power and the asset headroom
/// `threshold × rating − load`. If that greedy pass strands energy, an
/// augmenting-path pass reshuffles allocations so that any allocation fitting
/// the headroom is found. Energy that still does not fit is delivered anyway,
/// as late as possible, and the breached hours are reported.
pub fn lb_schedule(sessions: &[EvSession], asset: &AssetLoad, threshold: f64) -> LbOutcome {
    let mut schedules: Vec<ChargingSchedule> =
        sessions.iter().map(ChargingSchedule::idle).collect();
    let mut fixed = asset.base_kw;
    for (i, s) in sessions.iter().enumerate() {
        if !s.enrolled {
            schedules[i] = unmanaged_schedule(s);
            for (h, p) in schedules[i].by_hour().iter().enumerate() {
                fixed[h] += p;
            }
        }
    }
    let mut headroom = [0.0; HOURS];
    for h in 0..HOURS {
        headroom[h] = (asset.limit_kw(h, threshold) - fixed[h]).max(0.0);
    }

    let mut order: Vec<usize> = (0..sessions.len())
        .filter(|&i| sessions[i].enrolled)
        .collect();
    order.sort_by(|&a, &b| {
        sessions[a]
            .depart_hour()
            .cmp(&sessions[b].depart_hour())
            .then_with(|| sessions[a].session_id.cmp(&sessions[b].session_id))
    });

    // Greedy earliest-deadline-first, chronological within each window.
    let mut residual = vec![0.0; sessions.len()];
    for &i in &order {
        let s = &sessions[i];
        let mut remaining = s.energy_kwh;
        for k in 0..s.duration_h {
            if remaining <= EPS {
                break;
            }
            let h = s.hour_of_day(k);
            let p = s.max_power_kw.min(headroom[h]).min(remaining);
            if p > 0.0 {
                schedules[i].power_kw[k] = p;
                headroom[h] -= p;
                remaining -= p;
            }
        }
        residual[i] = remaining.max(0.0);
    }

    if order.iter().any(|&i| residual[i] > EPS) {
        augment(
            sessions,
            &order,
            &mut schedules,
            &mut residual,
            &mut headroom,
        );
    }
    let infeasible = order.iter().any(|&i| residual[i] > 1e-9);

    if infeasible {
        // Breach as late as possible, reusing already-breached hours first.
        let mut breached = [false; HOURS];
        for &i in &order {
            let s = &sessions[i];
            let mut candidates: Vec<usize> = (0..s.duration_h).rev().collect();
            candidates.sort_by_key(|&k| !breached[s.hour_of_day(k)]);
            for k in candidates {
                if residual[i] <= EPS {
                    break;
                }
                let spare = s.max_power_kw - schedules[i].power_kw[k];
                let p = spare.min(residual[i]);
                if p > 0.0 {
                    schedules[i].power_kw[k] += p;
                    residual[i] -= p;
                    breached[s.hour_of_day(k)] = true;
                }
            }
        }
    }
    for &i in &order {
        let delivered = schedules[i].delivered_kwh();
        schedules[i].unmet_kwh = (sessions[i].energy_kwh - delivered).max(0.0);
    }

    let mut ev = sum_by_hour(&schedules);
    let mut breach_hours = asset.breach_hours(&ev, threshold);
    let mut fell_back = false;
    if infeasible {
        let unmanaged: Vec<ChargingSchedule> = sessions.iter().map(unmanaged_schedule).collect();
        let baseline = asset.breach_hours(&sum_by_hour(&unmanaged), threshold);
        if breach_hours.len() > baseline.len() {
            schedules = unmanaged;
            ev = sum_by_hour(&schedules);
            breach_hours = asset.breach_hours(&ev, threshold);
            fell_back = true;
        }
    }
    LbOutcome {
        schedules,
        breach_hours,
        infeasible,
        fell_back,
    }
}

/// Max-flow repair over the bipartite session/hour network, starting from the
/// greedy allocation as the initial flow.
fn augment(
    sessions: &[EvSession],
    order: &[usize],
    schedules: &mut [ChargingSchedule],
    residual: &mut [f64],
    headroom: &mut [f64; HOURS],
) {
    // Nodes: 0..n sessions (only enrolled ones are used), n..n+24 hours.
    let n = sessions.len();
    #[derive(Clone, Copy)]
    enum Via {
        Start,
        Forward(usize, usize),  // session, offset: session -> hour
        Backward(usize, usize), // session, offset: hour -> session (undo)
    }
    for _round in 0..(4 * n * HOURS + 8) {
        let mut prev: Vec<Option<(usize, Via)>> = vec![None; n + HOURS];
        let mut queue = VecDeque::new();
        for &i in order {
            if residual[i] > EPS {
                prev[i] = Some((usize::MAX, Via::Start));
                queue.push_back(i);
            }
        }
        let mut sink_hour = None;
        while let Some(node) = queue.pop_front() {
            if node < n {
                let s = &sessions[node];
                for k in 0..s.duration_h {
                    let h = n + s.hour_of_day(k);
                    if prev[h].is_none() && s.max_power_kw - schedules[node].power_kw[k] > EPS {
                        prev[h] = Some((node, Via::Forward(node, k)));
                        if headroom[h - n] > EPS {
                            sink_hour = Some(h);
                            break;
                        }
                        queue.push_back(h);
                    }
                }
            } else {
                let hour = node - n;
                for &j in order {
                    if prev[j].is_some() {
                        continue;
                    }
                    let s = &sessions[j];
                    if let Some(k) = (0..s.duration_h).find(|&k| s.hour_of_day(k) == hour) {
                        if schedules[j].power_kw[k] > EPS {
                            prev[j] = Some((node, Via::Backward(j, k)));
                            queue.push_back(j);
                        }
                    }
                }
            }
            if sink_hour.is_some() {
                break;
            }
        }
        let Some(end) = sink_hour else { return };
        // Bottleneck.
        let mut amount = headroom[end - n];
        let mut node = end;
        loop {
            let (from, via) = prev[node].unwrap();
            match via {
                Via::Start => {
                    amount = amount.min(residual[node]);
                    break;
                }
                Via::Forward(i, k) => {
                    amount = amount.min(sessions[i].max_power_kw - schedules[i].power_kw[k])
                }
                Via::Backward(i, k) => amount = amount.min(schedules[i].power_kw[k]),
            }
            node = from;
        }
        // Apply.
        headroom[end - n] -= amount;
        let mut node = end;
        loop {
            let (from, via) = prev[node].unwrap();
            match via {
                Via::Start => {
                    residual[node] -= amount;
                    break;
                }
                Via::Forward(i, k) => schedules[i].power_kw[k] += amount,
                Via::Backward(i, k) => schedules[i].power_kw[k] -= amount,
            }
            node = from;
        }
    }
}

/// Enrollment scenario: 1 = none, 2 = 10 %, 3 = 30 %, 4 = 50 % by the target year.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scenario(pub u8);

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario(1), Scenario(2), Scenario(3), Scenario(4)];

    pub fn target_rate(self) -> Option<f64> {
        match self.0 {
            1 => Some(0.0),
            2 => Some(0.10),
            3 => Some(0.30),
            4 => Some(0.50),
            _ => None,
        }
    }
}

/// Linear enrollment ramp from zero in `start_year` to the scenario target in
/// `target_year`, flat afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentTrajectory {
    pub scenario: Scenario,
    pub target_rate: f64,
    pub start_year: i32,
    pub target_year: i32,
}

impl EnrollmentTrajectory {
    pub fn for_scenario(scenario: Scenario, start_year: i32, target_year: i32) -> Option<Self> {
        Some(EnrollmentTrajectory {
            scenario,
            target_rate: scenario.target_rate()?,
            start_year,
            target_year,
        })
    }

    pub fn rate(&self, year: i32) -> f64 {
        if year <= self.start_year {
            return 0.0;
        }
        if year >= self.target_year || self.target_year <= self.start_year {
            return self.target_rate;
        }
        self.target_rate * f64::from(year - self.start_year)
            / f64::from(self.target_year - self.start_year)
    }
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Uniform draw in [0, 1) fixed per (seed, vehicle id).
pub fn enrollment_draw(seed: u64, vehicle_id: &str) -> f64 {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(vehicle_id)).random::<f64>()
}

/// Marks a session enrolled when its vehicle's fixed draw falls below the
/// scenario rate for `year`. A vehicle enrolled in one year stays enrolled in
/// every later year.
pub fn apply_enrollment(
    sessions: &[EvSession],
    trajectory: &EnrollmentTrajectory,
    year: i32,
    seed: u64,
) -> Vec<EvSession> {
    let rate = trajectory.rate(year);
    sessions
        .iter()
        .map(|s| EvSession {
            enrolled: rate > 0.0 && enrollment_draw(seed, &s.session_id) < rate,
            ..s.clone()
        })
        .collect()
}

/// A named sampling distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum Distribution {
    /// Normal, clamped to `[min, max]`.
    Normal {
        mean: f64,
        sd: f64,
        min: f64,
        max: f64,
    },
    Uniform {
        min: f64,
        max: f64,
    },
    Constant {
        value: f64,
    },
}

impl Distribution {
    fn check(&self, name: &str) -> Result<(), BehaviorError> {
        let ok = match *self {
            Distribution::Normal { mean, sd, min, max } => {
                mean.is_finite() && sd >= 0.0 && sd.is_finite() && min <= max
            }
            Distribution::Uniform { min, max } => min.is_finite() && max.is_finite() && min <= max,
            Distribution::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(BehaviorError::Distribution(String::from(name)))
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Normal { mean, sd, min, max } => {
                let x = if sd > 0.0 {
                    Normal::new(mean, sd).map(|d| d.sample(rng)).unwrap_or(mean)
                } else {
                    mean
                };
                x.clamp(min, max)
            }
            Distribution::Uniform { min, max } => {
                if max > min {
                    rng.random_range(min..max)
                } else {
                    min
                }
            }
            Distribution::Constant { value } => value,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionShape {
    pub plugin_hour: Distribution,
    pub duration_h: Distribution,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargerOption {
    pub kw: f64,
    pub weight: f64,
}

/// Parameters of the synthetic session generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSpec {
    /// Relative weight of attaching a vehicle to each customer class.
    pub class_weights: BTreeMap<CustomerClass, f64>,
    /// Plug-in and dwell distributions per class; classes without an entry
    /// use the residential one.
    pub shapes: BTreeMap<CustomerClass, SessionShape>,
    pub energy_kwh: Distribution,
    pub chargers: Vec<ChargerOption>,
}

impl Default for BehaviorSpec {
    fn default() -> Self {
        let mut class_weights = BTreeMap::new();
        class_weights.insert(CustomerClass::Residential, 0.8);
        class_weights.insert(CustomerClass::Commercial, 0.2);
        let mut shapes = BTreeMap::new();
        shapes.insert(
            CustomerClass::Residential,
            SessionShape {
                plugin_hour: Distribution::Normal {
                    mean: 17.0,
                    sd: 2.5,
                    min: 0.0,
                    max: 23.0,
                },
                duration_h: Distribution::Normal {
                    mean: 12.0,
                    sd: 2.0,
                    min: 2.0,
                    max: 16.0,
                },
            },
        );
        shapes.insert(
            CustomerClass::Commercial,
            SessionShape {
                plugin_hour: Distribution::Normal {
                    mean: 9.0,
                    sd: 1.5,
                    min: 5.0,
                    max: 14.0,
                },
                duration_h: Distribution::Normal {
                    mean: 7.0,
                    sd: 1.5,
                    min: 1.0,
                    max: 10.0,
                },
            },
        );
        BehaviorSpec {
            class_weights,
            shapes,
            energy_kwh: Distribution::Normal {
                mean: 14.0,
                sd: 5.0,
                min: 2.0,
                max: 45.0,
            },
            chargers: vec![
                ChargerOption {
                    kw: 7.2,
                    weight: 0.85,
                },
                ChargerOption {
                    kw: 11.5,
                    weight: 0.15,
                },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BehaviorError {
    #[error("invalid distribution parameters for {0}")]
    Distribution(String),
    #[error("class weights must be non-negative with a positive total")]
    ClassWeights,
    #[error(
        "charger options must have positive kW and non-negative weights with a positive total"
    )]
    Chargers,
    #[error("no shape for residential sessions")]
    MissingShape,
    #[error("feeder `{0}` has no load bus of any weighted class")]
    NoLoadBuses(String),
}

impl BehaviorSpec {
    pub fn check(&self) -> Result<(), BehaviorError> {
        let total: f64 = self.class_weights.values().sum();
        if self.class_weights.values().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(BehaviorError::ClassWeights);
        }
        let ctotal: f64 = self.chargers.iter().map(|c| c.weight).sum();
        if self.chargers.is_empty()
            || self
                .chargers
                .iter()
                .any(|c| !(c.kw > 0.0) || !(c.weight >= 0.0))
            || !(ctotal > 0.0)
        {
            return Err(BehaviorError::Chargers);
        }
        if !self.shapes.contains_key(&CustomerClass::Residential) {
            return Err(BehaviorError::MissingShape);
        }
        for (class, shape) in &self.shapes {
            shape
                .plugin_hour
                .check(&format!("{} plugin_hour", class.as_str()))?;
            shape
                .duration_h
                .check(&format!("{} duration_h", class.as_str()))?;
        }
        self.energy_kwh.check("energy_kwh")
    }
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z =
        seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates sessions for vehicles `0..vehicle_count` on one representative day.
///
/// Each vehicle's home bus depends only on `(seed, vehicle)`, and its session
/// on `(seed, vehicle, day_index)`, so the sessions for a smaller fleet are a
/// prefix of those for a larger one.
pub fn generate_sessions(
    feeder: &Feeder,
    vehicle_count: usize,
    spec: &BehaviorSpec,
    day_index: u64,
    seed: u64,
) -> Result<Vec<EvSession>, BehaviorError> {
    spec.check()?;
    if vehicle_count == 0 {
        return Ok(Vec::new());
    }
    let mut buses_by_class: BTreeMap<CustomerClass, Vec<&str>> = BTreeMap::new();
    for ld in &feeder.loads {
        buses_by_class
            .entry(ld.customer_class)
            .or_default()
            .push(ld.bus.as_str());
    }
    let classes: Vec<(CustomerClass, f64)> = spec
        .class_weights
        .iter()
        .filter(|(c, w)| **w > 0.0 && buses_by_class.contains_key(c))
        .map(|(c, w)| (*c, *w))
        .collect();
    let total: f64 = classes.iter().map(|c| c.1).sum();
    if classes.is_empty() {
        return Err(BehaviorError::NoLoadBuses(feeder.id.clone()));
    }
    let charger_total: f64 = spec.chargers.iter().map(|c| c.weight).sum();
    let mut out = Vec::with_capacity(vehicle_count);
    for v in 0..vehicle_count as u64 {
        let mut home = ChaCha8Rng::seed_from_u64(mix(seed, v, u64::MAX));
        let mut x = home.random::<f64>() * total;
        let mut class = classes[classes.len() - 1].0;
        for (c, w) in &classes {
            if x < *w {
                class = *c;
                break;
            }
            x -= w;
        }
        let buses = &buses_by_class[&class];
        let bus = buses[home.random_range(0..buses.len())];
        let mut c = home.random::<f64>() * charger_total;
        let mut charger = spec.chargers[spec.chargers.len() - 1].kw;
        for opt in &spec.chargers {
            if c < opt.weight {
                charger = opt.kw;
                break;
            }
            c -= opt.weight;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, v, day_index));
        let shape = spec
            .shapes
            .get(&class)
            .unwrap_or(&spec.shapes[&CustomerClass::Residential]);
        let plugin =
            (shape.plugin_hour.sample(&mut rng).round() as i64).rem_euclid(HOURS as i64) as usize;
        let duration =
            (shape.duration_h.sample(&mut rng).round() as i64).clamp(1, HOURS as i64) as usize;
        let energy = (spec.energy_kwh.sample(&mut rng) * 100.0).round().max(0.0) / 100.0;
        out.push(EvSession {
            session_id: format!("ev{v:05}"),
            bus: String::from(bus),
            plugin_hour: plugin,
            duration_h: duration,
            energy_kwh: energy,
            max_power_kw: charger,
            enrolled: false,
        });
    }
    Ok(out)
}

/// Sums session power per bus and hour of day.
pub fn aggregate_ev_load<'a>(
    schedules: impl IntoIterator<Item = &'a ChargingSchedule>,
) -> BTreeMap<String, [f64; HOURS]> {
    let mut out: BTreeMap<String, [f64; HOURS]> = BTreeMap::new();
    for s in schedules {
        let row = out.entry(s.bus.clone()).or_insert([0.0; HOURS]);
        for (i, p) in s.power_kw.iter().enumerate() {
            row[(s.plugin_hour + i) % HOURS] += p;
        }
    }
    out
}
