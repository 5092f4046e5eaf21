//! Synthetic radial feeders and load shapes for desk-scale studies.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    transformer_ladder, Bus, CustomerClass, Feeder, LineSegment, LoadPoint, Phase, PhaseSet,
    Transformer,
};
use crate::powerflow::{DayType, TimeSeriesProfile};
use crate::HOURS;

/// Fractions of load points per customer class. Must sum to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassMix {
    pub residential: f64,
    pub commercial: f64,
    pub industrial: f64,
    pub mixed: f64,
}

impl Default for ClassMix {
    fn default() -> Self {
        ClassMix {
            residential: 1.0,
            commercial: 0.0,
            industrial: 0.0,
            mixed: 0.0,
        }
    }
}

impl ClassMix {
    pub fn weights(&self) -> [f64; 4] {
        [
            self.residential,
            self.commercial,
            self.industrial,
            self.mixed,
        ]
    }
}

/// Fractions of service transformers by phase count. Must sum to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerMix {
    pub single_phase: f64,
    pub two_phase: f64,
    pub three_phase: f64,
}

impl Default for TransformerMix {
    fn default() -> Self {
        TransformerMix {
            single_phase: 0.8,
            two_phase: 0.0,
            three_phase: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticFeederSpec {
    pub id: String,
    /// Total bus count, source and transformer secondaries included.
    pub bus_count: usize,
    pub class_mix: ClassMix,
    pub transformer_mix: TransformerMix,
    /// Primary line-to-neutral voltage (kV).
    pub primary_kv: f64,
    /// Range of primary segment lengths (miles).
    pub segment_length_mi: (f64, f64),
    /// Range of base peak load as a fraction of the serving transformer's kVA.
    pub utilization: (f64, f64),
    /// Probability that a primary bus branching off a three-phase bus becomes a
    /// single-phase lateral.
    pub lateral_share: f64,
    pub seed: u64,
}

impl Default for SyntheticFeederSpec {
    fn default() -> Self {
        SyntheticFeederSpec {
            id: String::from("synthetic"),
            bus_count: 50,
            class_mix: ClassMix::default(),
            transformer_mix: TransformerMix::default(),
            primary_kv: 7.2,
            segment_length_mi: (0.05, 0.4),
            utilization: (0.5, 0.9),
            lateral_share: 0.35,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("bus_count must be at least 2, got {0}")]
    TooFewBuses(usize),
    #[error("{0} weights must be non-negative and sum to 1 (got {1})")]
    BadMix(&'static str, f64),
    #[error("invalid range for {0}: ({1}, {2})")]
    BadRange(&'static str, f64, f64),
    #[error("primary_kv must be positive")]
    BadVoltage,
}

fn check_mix(name: &'static str, weights: &[f64]) -> Result<(), SynthError> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(SynthError::BadMix(name, sum));
    }
    Ok(())
}

fn check_range(name: &'static str, r: (f64, f64), lo: f64) -> Result<(), SynthError> {
    if !(r.0 > lo && r.1 >= r.0 && r.1.is_finite()) {
        return Err(SynthError::BadRange(name, r.0, r.1));
    }
    Ok(())
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn sample<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

const TRUNK: (f64, f64, f64) = (0.306, 0.627, 530.0);
const LATERAL: (f64, f64, f64) = (0.888, 0.80, 230.0);

fn candidate_sizes(class: CustomerClass, phase_count: u8) -> &'static [f64] {
    match (phase_count >= 3, class) {
        (false, CustomerClass::Residential) => &[25.0, 37.5, 50.0],
        (false, CustomerClass::Commercial) => &[50.0, 75.0, 100.0],
        (false, _) => &[37.5, 50.0, 75.0, 100.0],
        (true, CustomerClass::Residential) => &[75.0, 150.0],
        (true, CustomerClass::Commercial) => &[150.0, 225.0, 300.0],
        (true, CustomerClass::Industrial) => &[300.0, 500.0, 750.0],
        (true, CustomerClass::Mixed) => &[150.0, 225.0, 300.0],
    }
}

fn power_factor(class: CustomerClass) -> f64 {
    match class {
        CustomerClass::Residential => 0.95,
        CustomerClass::Commercial => 0.9,
        CustomerClass::Industrial => 0.85,
        CustomerClass::Mixed => 0.92,
    }
}

/// Builds a deterministic radial feeder from `spec`.
///
/// Roughly half of the buses are primary nodes (source included) and the rest
/// are service-transformer secondaries, each carrying one load point.
pub fn generate_synthetic_feeder(spec: &SyntheticFeederSpec) -> Result<Feeder, SynthError> {
    if spec.bus_count < 2 {
        return Err(SynthError::TooFewBuses(spec.bus_count));
    }
    check_mix("class_mix", &spec.class_mix.weights())?;
    let tx_weights = [
        spec.transformer_mix.single_phase,
        spec.transformer_mix.two_phase,
        spec.transformer_mix.three_phase,
    ];
    check_mix("transformer_mix", &tx_weights)?;
    check_range("segment_length_mi", spec.segment_length_mi, 0.0)?;
    check_range("utilization", spec.utilization, 0.0)?;
    if !(spec.primary_kv > 0.0) {
        return Err(SynthError::BadVoltage);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let transformer_count = spec.bus_count / 2;
    let primary_count = spec.bus_count - transformer_count;

    let mut feeder = Feeder {
        id: spec.id.clone(),
        ..Feeder::default()
    };
    feeder.buses.push(Bus {
        id: String::from("src"),
        phases: PhaseSet::ABC,
        nominal_voltage_kv: spec.primary_kv,
        is_source: true,
    });
    let mut primary_phases = Vec::with_capacity(primary_count);
    primary_phases.push(PhaseSet::ABC);
    for i in 1..primary_count {
        let parent = if i == 1 || rng.random::<f64>() < 0.6 {
            i - 1
        } else {
            rng.random_range(0..i)
        };
        let parent_phases = primary_phases[parent];
        let phases = if parent_phases == PhaseSet::ABC
            && i > 2
            && rng.random::<f64>() < spec.lateral_share
        {
            PhaseSet::single(Phase::ALL[rng.random_range(0..3)])
        } else {
            parent_phases
        };
        let (r, x, amp) = if phases == PhaseSet::ABC {
            TRUNK
        } else {
            LATERAL
        };
        let parent_id = feeder.buses[parent].id.clone();
        let id = format!("p{i}");
        feeder.lines.push(LineSegment {
            id: format!("l{i}"),
            from_bus: parent_id,
            to_bus: id.clone(),
            phases,
            resistance_ohm_per_mi: r,
            reactance_ohm_per_mi: x,
            length_mi: round3(sample(&mut rng, spec.segment_length_mi)),
            ampacity_a: amp,
        });
        feeder.buses.push(Bus {
            id,
            phases,
            nominal_voltage_kv: spec.primary_kv,
            is_source: false,
        });
        primary_phases.push(phases);
    }

    let class_weights = spec.class_mix.weights();
    for k in 0..transformer_count {
        let host = if primary_count == 1 {
            0
        } else {
            rng.random_range(1..primary_count)
        };
        let host_phases = primary_phases[host];
        let class = CustomerClass::ALL[pick_weighted(&mut rng, &class_weights)];
        let mut phase_count = [1u8, 2, 3][pick_weighted(&mut rng, &tx_weights)];
        if host_phases.len() < phase_count as usize {
            phase_count = host_phases.len() as u8;
        }
        let phases = match phase_count {
            3 => PhaseSet::ABC,
            2 => {
                let skip = Phase::ALL[rng.random_range(0..3)];
                let mut set = PhaseSet::EMPTY;
                for p in Phase::ALL.into_iter().filter(|p| *p != skip) {
                    set.insert(p);
                }
                set
            }
            _ => {
                let choices: Vec<Phase> = host_phases.iter().collect();
                PhaseSet::single(*choices.choose(&mut rng).unwrap_or(&Phase::A))
            }
        };
        let sizes = candidate_sizes(class, phase_count);
        let rating = *sizes
            .choose(&mut rng)
            .unwrap_or(&transformer_ladder(phase_count)[0]);
        let secondary_kv = if phase_count == 3 { 0.277 } else { 0.12 };
        let pf = power_factor(class);
        let util = sample(&mut rng, spec.utilization);
        let sec = format!("t{k}_sec");
        feeder.transformers.push(Transformer {
            id: format!("t{k}"),
            from_bus: feeder.buses[host].id.clone(),
            to_bus: sec.clone(),
            phase_count,
            rating_kva: rating,
            impedance_pct: if phase_count == 3 { 4.0 } else { 2.5 },
            secondary_voltage_kv: secondary_kv,
        });
        feeder.buses.push(Bus {
            id: sec.clone(),
            phases,
            nominal_voltage_kv: secondary_kv,
            is_source: false,
        });
        feeder.loads.push(LoadPoint {
            id: format!("ld{k}"),
            bus: sec,
            customer_class: class,
            peak_kw: round3(rating * pf * util),
            power_factor: pf,
            profile_id: String::from(class.as_str()),
        });
    }
    Ok(feeder)
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Hour-of-day shape for each class, normalized so the summer peak is 1.0.
fn class_shape(class: CustomerClass) -> [f64; HOURS] {
    match class {
        // Morning shoulder, evening peak at 18:00.
        CustomerClass::Residential => [
            0.42, 0.38, 0.36, 0.35, 0.36, 0.42, 0.55, 0.65, 0.62, 0.56, 0.53, 0.52, 0.53, 0.55,
            0.58, 0.64, 0.74, 0.88, 1.00, 0.97, 0.90, 0.80, 0.66, 0.52,
        ],
        CustomerClass::Commercial => [
            0.35, 0.33, 0.32, 0.32, 0.34, 0.40, 0.52, 0.70, 0.86, 0.95, 0.99, 1.00, 1.00, 0.99,
            0.97, 0.93, 0.86, 0.74, 0.60, 0.52, 0.46, 0.42, 0.39, 0.37,
        ],
        CustomerClass::Industrial => [
            0.62, 0.60, 0.60, 0.60, 0.62, 0.68, 0.80, 0.92, 0.98, 1.00, 1.00, 1.00, 0.98, 1.00,
            1.00, 0.98, 0.92, 0.82, 0.74, 0.70, 0.68, 0.66, 0.64, 0.63,
        ],
        CustomerClass::Mixed => [
            0.40, 0.37, 0.35, 0.35, 0.36, 0.42, 0.54, 0.68, 0.74, 0.76, 0.77, 0.77, 0.78, 0.78,
            0.79, 0.80, 0.82, 0.90, 1.00, 0.96, 0.88, 0.78, 0.64, 0.50,
        ],
    }
}

fn day_scale(day: DayType) -> f64 {
    match day {
        DayType::Summer => 1.0,
        DayType::Winter => 0.9,
        DayType::Shoulder => 0.75,
    }
}

/// One profile per customer class and day type, with `profile_id` equal to
/// the class name.
pub fn standard_profiles() -> Vec<TimeSeriesProfile> {
    let mut out = Vec::new();
    for class in CustomerClass::ALL {
        for day in DayType::ALL {
            let shape = class_shape(class);
            let mut values = [0.0; HOURS];
            for h in 0..HOURS {
                values[h] = round3(shape[h] * day_scale(day));
            }
            out.push(TimeSeriesProfile {
                profile_id: String::from(class.as_str()),
                day_type: day,
                values,
            });
        }
    }
    out
}

/// Specs for a corpus of `count` feeders with randomized size, customer mix,
/// transformer mix and line lengths. Ids are `feeder_0000`, `feeder_0001`, ...
pub fn random_feeder_specs(
    count: usize,
    seed: u64,
    bus_range: (usize, usize),
) -> Vec<SyntheticFeederSpec> {
    let lo = bus_range.0.max(2);
    let hi = bus_range.1.max(lo);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let raw = [
                rng.random::<f64>() * 4.0 + 0.5,
                rng.random::<f64>(),
                rng.random::<f64>() * 0.5,
                rng.random::<f64>() * 0.5,
            ];
            let dominant = rng.random_range(0..4);
            let mut w = raw;
            w[dominant] += 3.0;
            let total: f64 = w.iter().sum();
            let w = w.map(|x| x / total);
            let class_mix = ClassMix {
                residential: w[0],
                commercial: w[1],
                industrial: w[2],
                mixed: 1.0 - w[0] - w[1] - w[2],
            };
            let three = 0.1 + rng.random::<f64>() * 0.4;
            let two = rng.random::<f64>() * 0.1;
            let lo_len = 0.03 + rng.random::<f64>() * 0.1;
            SyntheticFeederSpec {
                id: format!("feeder_{i:04}"),
                bus_count: rng.random_range(lo..=hi),
                class_mix,
                transformer_mix: TransformerMix {
                    single_phase: 1.0 - three - two,
                    two_phase: two,
                    three_phase: three,
                },
                segment_length_mi: (lo_len, lo_len + 0.1 + rng.random::<f64>() * 0.6),
                lateral_share: 0.2 + rng.random::<f64>() * 0.3,
                seed: rng.random(),
                ..SyntheticFeederSpec::default()
            }
        })
        .collect()
}
