//! Synthetic corpus generation, including the shipped demo study.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use evgrid_core::charging::{generate_sessions, BehaviorSpec};
use evgrid_core::economics::{CostKind, CostRow, CostTable};
use evgrid_core::model::{transformer_ladder, validate, Feeder};
use evgrid_core::powerflow::{DayType, ProfileStore};
use evgrid_core::study::FleetGrowth;
use evgrid_core::synth::{
    generate_synthetic_feeder, random_feeder_specs, standard_profiles, ClassMix,
    SyntheticFeederSpec, TransformerMix,
};
use evgrid_core::upgrade::{CAPACITOR_LADDER_KVAR, LINE_AMPACITY_LADDER_A};
use serde::{Deserialize, Serialize};

use crate::config::session_file_name;
use crate::error::{Error, Result};
use crate::io;

pub const PLACEHOLDER_COST_NOTE: [&str; 3] = [
    "PLACEHOLDER COST TABLE - NOT AUTHORITATIVE.",
    "Illustrative unit prices for exercising the pipeline; replace with utility cost data before drawing conclusions.",
    "Line rows are per mile of conductor.",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    /// Number of randomized feeders.
    pub count: usize,
    /// Inclusive bus-count range of randomized feeders.
    pub bus_range: (usize, usize),
    /// Also emit the seven demo feeders.
    pub demo: bool,
    /// Explicit feeder specs, emitted after the demo and randomized ones.
    pub feeders: Vec<SyntheticFeederSpec>,
    /// EV fleet growth written into the generated study config; session files
    /// hold enough vehicles for its largest year.
    pub fleet: FleetGrowth,
    pub years: (i32, i32),
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            count: 0,
            bus_range: (10, 60),
            demo: false,
            feeders: Vec::new(),
            fleet: FleetGrowth::Linear {
                start_per_mw: 20.0,
                end_per_mw: 300.0,
            },
            years: (2022, 2035),
        }
    }
}

pub fn read_corpus_spec(path: &Path) -> Result<CorpusSpec> {
    toml::from_str(&io::read_text(path)?)
        .map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn spec(
    id: &str,
    bus_count: usize,
    class_mix: ClassMix,
    three_phase: f64,
    segment: (f64, f64),
    lateral: f64,
    seed: u64,
) -> SyntheticFeederSpec {
    SyntheticFeederSpec {
        id: id.to_string(),
        bus_count,
        class_mix,
        transformer_mix: TransformerMix {
            single_phase: 1.0 - three_phase,
            two_phase: 0.0,
            three_phase,
        },
        segment_length_mi: segment,
        lateral_share: lateral,
        seed,
        ..SyntheticFeederSpec::default()
    }
}

fn mix(residential: f64, commercial: f64, industrial: f64, mixed: f64) -> ClassMix {
    ClassMix {
        residential,
        commercial,
        industrial,
        mixed,
    }
}

/// The seven demo feeders. The first is the residential evening-peak feeder.
pub fn demo_feeder_specs() -> Vec<SyntheticFeederSpec> {
    vec![
        spec(
            "feeder1_res_evening",
            60,
            mix(1.0, 0.0, 0.0, 0.0),
            0.2,
            (0.05, 0.4),
            0.35,
            11,
        ),
        spec(
            "feeder2_res_rural",
            40,
            mix(0.9, 0.0, 0.0, 0.1),
            0.1,
            (0.3, 1.0),
            0.5,
            22,
        ),
        spec(
            "feeder3_commercial",
            40,
            mix(0.3, 0.6, 0.0, 0.1),
            0.5,
            (0.05, 0.3),
            0.2,
            33,
        ),
        spec(
            "feeder4_mixed",
            50,
            mix(0.5, 0.2, 0.1, 0.2),
            0.3,
            (0.05, 0.5),
            0.35,
            44,
        ),
        spec(
            "feeder5_industrial",
            30,
            mix(0.2, 0.3, 0.5, 0.0),
            0.7,
            (0.05, 0.3),
            0.1,
            55,
        ),
        spec(
            "feeder6_res_dense",
            70,
            mix(1.0, 0.0, 0.0, 0.0),
            0.15,
            (0.03, 0.15),
            0.3,
            66,
        ),
        spec(
            "feeder7_mixed_lateral",
            45,
            mix(0.6, 0.2, 0.0, 0.2),
            0.2,
            (0.1, 0.6),
            0.6,
            77,
        ),
    ]
}

/// Placeholder prices covering every ladder size the planner can emit.
pub fn placeholder_costs() -> CostTable {
    let mut rows = Vec::new();
    let mut sizes: Vec<f64> = [1u8, 2, 3]
        .iter()
        .flat_map(|p| transformer_ladder(*p).iter().copied())
        .collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    for s in sizes {
        rows.push(CostRow {
            kind: CostKind::Transformer,
            size: s,
            unit_cost_usd: 2_000.0 + 60.0 * s,
            per_mile: false,
        });
    }
    for a in LINE_AMPACITY_LADDER_A {
        rows.push(CostRow {
            kind: CostKind::Line,
            size: a,
            unit_cost_usd: 100_000.0 + 300.0 * a,
            per_mile: true,
        });
    }
    for c in CAPACITOR_LADDER_KVAR {
        rows.push(CostRow {
            kind: CostKind::Capacitor,
            size: c,
            unit_cost_usd: 5_000.0 + 10.0 * c,
            per_mile: false,
        });
    }
    CostTable::new(rows).expect("placeholder costs are positive")
}

pub fn standard_profile_store() -> ProfileStore {
    let mut store = ProfileStore::new();
    for p in standard_profiles() {
        store.insert(p).expect("standard profiles are valid");
    }
    store
}

/// A generated corpus held in memory as relative path → bytes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub files: BTreeMap<PathBuf, Vec<u8>>,
    pub feeders: Vec<Feeder>,
}

impl Corpus {
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        for (rel, bytes) in &self.files {
            io::write_file(&out_dir.join(rel), bytes)?;
        }
        Ok(())
    }
}

fn study_toml(feeders: &[Feeder], spec: &CorpusSpec, seed: u64) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("# Study over the generated corpus. Paths are relative to this file.\n");
    out.push_str(&format!("seed = {seed}\n"));
    out.push_str(&format!(
        "years = {{ start = {}, end = {} }}\n",
        spec.years.0, spec.years.1
    ));
    out.push_str("strategies = [\"unmanaged\", \"tou\", \"lb\"]\n");
    out.push_str("scenarios = [1, 2, 3, 4]\n");
    out.push_str("day_types = [\"winter\", \"summer\", \"shoulder\"]\n");
    out.push_str("feeders = [\n");
    for f in feeders {
        out.push_str(&format!("    \"feeders/{}.json\",\n", f.id));
    }
    out.push_str("]\n");
    out.push_str("profiles = \"profiles.csv\"\n");
    out.push_str("costs = \"costs.csv\"\n");
    out.push_str("sessions_dir = \"sessions\"\n");
    out.push_str("discount_rate = 0.03\n\n");
    let fleet = toml::to_string(&spec.fleet).expect("fleet serializes");
    out.push_str("[fleet]\n");
    out.push_str(&fleet);
    out.push_str("\n[charging]\ntou_start = 17\ntou_end = 21\nlb_threshold = 0.9\n");
    out.push_str("\n[clustering]\nenabled = true\nk_min = 1\nk_max = 6\n");
    out.into_bytes()
}

/// Builds every file of a corpus. Feeders come out in the order demo,
/// randomized, explicit; each one is checked against the validator.
pub fn generate_corpus(spec: &CorpusSpec, seed: u64) -> Result<Corpus> {
    let mut specs = Vec::new();
    if spec.demo {
        specs.extend(demo_feeder_specs());
    }
    specs.extend(random_feeder_specs(spec.count, seed, spec.bus_range));
    specs.extend(spec.feeders.iter().cloned());

    let mut corpus = Corpus::default();
    let mut seen = std::collections::BTreeSet::new();
    let behavior = BehaviorSpec::default();
    let years: Vec<i32> = (spec.years.0..=spec.years.1).collect();
    if years.is_empty() {
        return Err(Error::Usage("corpus years are empty".into()));
    }
    for s in &specs {
        if !seen.insert(s.id.clone()) {
            return Err(Error::Usage(format!(
                "duplicate feeder id `{}` in corpus spec",
                s.id
            )));
        }
        let feeder = generate_synthetic_feeder(s)
            .map_err(|e| Error::Usage(format!("feeder `{}`: {e}", s.id)))?;
        let issues = validate(&feeder);
        if let Some(i) = issues.first() {
            return Err(Error::domain(format!("feeder `{}`", s.id), i));
        }
        corpus.files.insert(
            PathBuf::from(format!("feeders/{}.json", feeder.id)),
            io::feeder_json(&feeder),
        );
        let vehicles = spec.fleet.max_vehicles(&feeder, &years);
        for (i, day) in DayType::ALL.iter().enumerate() {
            let sessions = generate_sessions(&feeder, vehicles, &behavior, i as u64, seed)
                .map_err(|e| Error::domain(format!("sessions for `{}`", feeder.id), e))?;
            corpus.files.insert(
                PathBuf::from("sessions").join(session_file_name(&feeder.id, *day)),
                io::sessions_csv(&sessions),
            );
        }
        corpus.feeders.push(feeder);
    }
    corpus.files.insert(
        PathBuf::from("profiles.csv"),
        io::profiles_csv(&standard_profile_store()),
    );
    corpus.files.insert(
        PathBuf::from("costs.csv"),
        io::costs_csv(&placeholder_costs(), &PLACEHOLDER_COST_NOTE),
    );
    corpus.files.insert(
        PathBuf::from("behavior.toml"),
        toml::to_string(&behavior)
            .expect("behavior serializes")
            .into_bytes(),
    );
    corpus.files.insert(
        PathBuf::from("study.toml"),
        study_toml(&corpus.feeders, spec, seed),
    );
    Ok(corpus)
}
