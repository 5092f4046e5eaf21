//! Study configuration (TOML). Relative paths inside a config resolve against
//! the directory that contains the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use evgrid_core::charging::{BehaviorSpec, Scenario, TouWindow};
use evgrid_core::clustering::ClusterOptions;
use evgrid_core::powerflow::{DayType, SolverOptions};
use evgrid_core::study::{FleetGrowth, Strategy, StudyParams};
use evgrid_core::upgrade::PlannerOptions;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChargingConfig {
    pub tou_start: usize,
    pub tou_end: usize,
    pub lb_threshold: f64,
}

impl Default for ChargingConfig {
    fn default() -> Self {
        let w = TouWindow::default();
        ChargingConfig {
            tou_start: w.start,
            tou_end: w.end,
            lb_threshold: 0.9,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnrollmentConfig {
    /// Defaults to the first study year.
    pub start_year: Option<i32>,
    /// Defaults to the last study year.
    pub target_year: Option<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub enabled: bool,
    pub variance_target: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let o = ClusterOptions::default();
        ClusteringConfig {
            enabled: false,
            variance_target: o.variance_target,
            k_min: o.k_min,
            k_max: o.k_max,
            restarts: o.restarts,
        }
    }
}

/// Raw file contents. See [`StudyConfig`] for the resolved form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_years")]
    pub years: YearRange,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<u8>,
    #[serde(default = "default_days")]
    pub day_types: Vec<String>,
    pub feeders: Vec<PathBuf>,
    pub profiles: PathBuf,
    pub costs: PathBuf,
    /// Directory of `{feeder}_{day}.csv` session files. When absent, sessions
    /// are generated from `behavior`.
    #[serde(default)]
    pub sessions_dir: Option<PathBuf>,
    #[serde(default)]
    pub behavior: Option<PathBuf>,
    pub fleet: FleetGrowth,
    #[serde(default)]
    pub charging: ChargingConfig,
    #[serde(default)]
    pub enrollment: EnrollmentConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub planner: PlannerOptions,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default = "default_rate")]
    pub discount_rate: f64,
    #[serde(default)]
    pub base_year: Option<i32>,
    /// Decimal places in the scenario comparison table.
    #[serde(default = "default_decimals")]
    pub table_decimals: usize,
}

fn default_years() -> YearRange {
    YearRange {
        start: 2022,
        end: 2035,
    }
}
fn default_strategies() -> Vec<String> {
    Strategy::ALL
        .iter()
        .map(|s| s.as_str().to_string())
        .collect()
}
fn default_scenarios() -> Vec<u8> {
    vec![1, 2, 3, 4]
}
fn default_days() -> Vec<String> {
    DayType::ALL
        .iter()
        .map(|d| d.as_str().to_string())
        .collect()
}
fn default_rate() -> f64 {
    0.03
}
fn default_decimals() -> usize {
    1
}

/// Seeds derived from the master seed, one per random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub sessions: u64,
    pub enrollment: u64,
    pub clustering: u64,
}

impl Seeds {
    pub fn from_master(master: u64) -> Self {
        Seeds {
            master,
            sessions: master,
            enrollment: master ^ 0x656e_726f_6c6c,
            clustering: master.wrapping_add(1),
        }
    }
}

/// Where a feeder's sessions come from.
#[derive(Clone, Debug, PartialEq)]
pub enum SessionSource {
    Files(PathBuf),
    Generated(BehaviorSpec),
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub path: PathBuf,
    pub file: ConfigFile,
    pub strategies: Vec<Strategy>,
    pub scenarios: Vec<Scenario>,
    pub seeds: Seeds,
    pub params: StudyParams,
    pub feeders: Vec<PathBuf>,
    pub profiles: PathBuf,
    pub costs: PathBuf,
    pub sessions: SessionSource,
    /// Every input file the run reads, config first.
    pub inputs: Vec<PathBuf>,
}

fn usage(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Usage(format!("{}: {msg}", path.display()))
}

pub fn read_behavior(path: &Path) -> Result<BehaviorSpec> {
    let spec: BehaviorSpec =
        toml::from_str(&io::read_text(path)?).map_err(|e| Error::format(path, e))?;
    spec.check().map_err(|e| Error::format(path, e))?;
    Ok(spec)
}

impl StudyConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = io::read_text(path)?;
        let file: ConfigFile = toml::from_str(&text).map_err(|e| usage(path, e))?;
        Self::resolve(path, file, seed_override)
    }

    pub fn resolve(path: &Path, file: ConfigFile, seed_override: Option<u64>) -> Result<Self> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let rel = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };

        let mut strategies = Vec::new();
        for s in &file.strategies {
            let st = Strategy::parse(s).ok_or_else(|| {
                usage(
                    path,
                    format!("unknown strategy `{s}` (expected unmanaged, tou or lb)"),
                )
            })?;
            if !strategies.contains(&st) {
                strategies.push(st);
            }
        }
        let mut scenarios = Vec::new();
        for &n in &file.scenarios {
            if Scenario(n).target_rate().is_none() {
                return Err(usage(path, format!("unknown scenario {n} (expected 1-4)")));
            }
            if !scenarios.contains(&Scenario(n)) {
                scenarios.push(Scenario(n));
            }
        }
        let mut day_types = Vec::new();
        for d in &file.day_types {
            let day =
                DayType::parse(d).ok_or_else(|| usage(path, format!("unknown day type `{d}`")))?;
            if !day_types.contains(&day) {
                day_types.push(day);
            }
        }
        if strategies.is_empty() || scenarios.is_empty() || day_types.is_empty() {
            return Err(usage(
                path,
                "strategies, scenarios and day_types must be non-empty",
            ));
        }
        strategies.sort();
        scenarios.sort();
        if file.years.end < file.years.start {
            return Err(usage(path, "years.end precedes years.start"));
        }
        if file.charging.tou_start >= 24 || file.charging.tou_end > 24 {
            return Err(usage(path, "TOU window hours must lie in 0..24"));
        }
        if !(file.charging.lb_threshold > 0.0) {
            return Err(usage(path, "lb_threshold must be positive"));
        }

        let seeds = Seeds::from_master(seed_override.unwrap_or(file.seed));
        let years: Vec<i32> = (file.years.start..=file.years.end).collect();
        let params = StudyParams {
            years: years.clone(),
            day_types,
            tou_window: TouWindow {
                start: file.charging.tou_start,
                end: file.charging.tou_end,
            },
            lb_threshold: file.charging.lb_threshold,
            enrollment_start_year: file.enrollment.start_year.unwrap_or(file.years.start),
            enrollment_target_year: file.enrollment.target_year.unwrap_or(file.years.end),
            enrollment_seed: seeds.enrollment,
            solver: file.solver,
            planner: file.planner.clone(),
            discount_rate: file.discount_rate,
            base_year: file.base_year.unwrap_or(file.years.start),
        };
        params.check().map_err(|e| usage(path, e))?;

        let feeders: Vec<PathBuf> = file.feeders.iter().map(|p| rel(p)).collect();
        let profiles = rel(&file.profiles);
        let costs = rel(&file.costs);
        let mut inputs = vec![path.to_path_buf()];
        inputs.extend(feeders.iter().cloned());
        inputs.push(profiles.clone());
        inputs.push(costs.clone());
        let sessions = match (&file.sessions_dir, &file.behavior) {
            (Some(_), Some(_)) => {
                return Err(usage(path, "set either sessions_dir or behavior, not both"))
            }
            (Some(dir), None) => SessionSource::Files(rel(dir)),
            (None, Some(b)) => {
                let bp = rel(b);
                inputs.push(bp.clone());
                SessionSource::Generated(read_behavior(&bp)?)
            }
            (None, None) => SessionSource::Generated(BehaviorSpec::default()),
        };
        Ok(StudyConfig {
            path: path.to_path_buf(),
            file,
            strategies,
            scenarios,
            seeds,
            params,
            feeders,
            profiles,
            costs,
            sessions,
            inputs,
        })
    }

    pub fn cluster_options(&self) -> ClusterOptions {
        let c = &self.file.clustering;
        ClusterOptions {
            variance_target: c.variance_target,
            k_min: c.k_min,
            k_max: c.k_max,
            fixed_k: None,
            restarts: c.restarts,
            seed: self.seeds.clustering,
        }
    }

    /// Vehicle count per study year for one feeder.
    pub fn counts(&self, feeder: &evgrid_core::model::Feeder) -> BTreeMap<i32, usize> {
        self.params
            .years
            .iter()
            .map(|&y| (y, self.file.fleet.vehicles(feeder, &self.params.years, y)))
            .collect()
    }
}

/// File name of a feeder's session file for one day.
pub fn session_file_name(feeder_id: &str, day: DayType) -> String {
    format!("{feeder_id}_{}.csv", day.as_str())
}
