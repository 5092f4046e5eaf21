//! Study runner: loads a config, fans the (feeder × strategy × scenario) grid
//! out over a thread pool and writes the run directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use evgrid_core::charging::{
    generate_sessions, sum_by_hour, unmanaged_schedule, EvSession, Scenario,
};
use evgrid_core::clustering::{cluster_feeders, extract_features, ClusterReport, FeederFeatures};
use evgrid_core::economics::CostTable;
use evgrid_core::model::{validate, Feeder};
use evgrid_core::powerflow::{DayType, ProfileStore};
use evgrid_core::study::{compute_table, run_cell, CellMetrics, CellResult, FleetInput, Strategy};
use evgrid_core::HOURS;
use rayon::prelude::*;

use crate::config::{session_file_name, SessionSource, StudyConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::manifest::{
    display_path, sha256_hex, Artifacts, FileDigest, Manifest, MANIFEST_FILE, SCHEMA_VERSION,
};
use crate::report;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
}

pub struct Inputs {
    pub feeders: Vec<Feeder>,
    pub profiles: ProfileStore,
    pub costs: CostTable,
    pub fleets: Vec<FleetInput>,
    /// Session files read from disk, in load order.
    pub session_files: Vec<PathBuf>,
}

pub struct RunOutcome {
    pub manifest: Manifest,
    pub metrics: Vec<CellMetrics>,
    pub cluster: Option<ClusterReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub feeder: usize,
    pub strategy: Strategy,
    pub scenario: Scenario,
}

/// Directory of one cell's artifacts, relative to the run directory.
pub fn cell_dir(feeder_id: &str, strategy: Strategy, scenario: Scenario) -> PathBuf {
    PathBuf::from("cells")
        .join(feeder_id)
        .join(strategy.as_str())
        .join(format!("scenario{}", scenario.0))
}

/// Reads, validates and expands every input named by the config. Generated
/// sessions are added to `artifacts` under `sessions/`.
pub fn load_inputs(cfg: &StudyConfig, artifacts: &mut Artifacts) -> Result<Inputs> {
    let mut feeders = Vec::with_capacity(cfg.feeders.len());
    for path in &cfg.feeders {
        let feeder = io::read_feeder(path)?;
        let issues = validate(&feeder);
        if !issues.is_empty() {
            let text: Vec<String> = issues.iter().map(ToString::to_string).collect();
            return Err(Error::domain(
                format!("feeder {}", path.display()),
                text.join("; "),
            ));
        }
        if feeders.iter().any(|f: &Feeder| f.id == feeder.id) {
            return Err(Error::format(
                path,
                format!("duplicate feeder id `{}`", feeder.id),
            ));
        }
        feeders.push(feeder);
    }
    let profiles = io::read_profiles(&cfg.profiles)?;
    let costs = io::read_costs(&cfg.costs)?;

    let mut fleets = Vec::with_capacity(feeders.len());
    let mut session_files = Vec::new();
    for feeder in &feeders {
        let counts = cfg.counts(feeder);
        let needed = counts.values().copied().max().unwrap_or(0);
        let mut sessions = BTreeMap::new();
        for (i, &day) in cfg.params.day_types.iter().enumerate() {
            let list: Vec<EvSession> = match &cfg.sessions {
                SessionSource::Files(dir) => {
                    let path = dir.join(session_file_name(&feeder.id, day));
                    let list = io::read_sessions(&path)?;
                    if list.len() < needed {
                        return Err(Error::format(
                            &path,
                            format!("{} sessions but the fleet needs {needed}", list.len()),
                        ));
                    }
                    session_files.push(path);
                    list
                }
                SessionSource::Generated(spec) => {
                    let day_index = DayType::ALL.iter().position(|d| *d == day).unwrap_or(i) as u64;
                    let list =
                        generate_sessions(feeder, needed, spec, day_index, cfg.seeds.sessions)
                            .map_err(|e| {
                                Error::domain(format!("sessions for feeder `{}`", feeder.id), e)
                            })?;
                    artifacts.add(
                        PathBuf::from("sessions").join(session_file_name(&feeder.id, day)),
                        io::sessions_csv(&list),
                    );
                    list
                }
            };
            sessions.insert(day, list);
        }
        fleets.push(FleetInput { sessions, counts });
    }
    Ok(Inputs {
        feeders,
        profiles,
        costs,
        fleets,
        session_files,
    })
}

/// Clustering features with the last study year's fleet charging unmanaged.
pub fn corpus_features(cfg: &StudyConfig, inputs: &Inputs) -> Result<Vec<FeederFeatures>> {
    let last = *cfg.params.years.last().expect("years checked non-empty");
    inputs
        .feeders
        .iter()
        .zip(&inputs.fleets)
        .map(|(feeder, fleet)| {
            let count = fleet.counts.get(&last).copied().unwrap_or(0);
            let ev: Vec<[f64; HOURS]> = fleet
                .sessions
                .values()
                .map(|list| {
                    let schedules: Vec<_> = list[..count.min(list.len())]
                        .iter()
                        .map(unmanaged_schedule)
                        .collect();
                    sum_by_hour(&schedules)
                })
                .collect();
            extract_features(feeder, &inputs.profiles, &ev)
                .map_err(|e| Error::domain(format!("features of `{}`", feeder.id), e))
        })
        .collect()
}

fn digests(paths: &[PathBuf], base: &Path) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            let bytes = io::read_bytes(p)?;
            Ok(FileDigest {
                path: display_path(p, base),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
                schema: None,
            })
        })
        .collect()
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))
}

/// Runs the whole study described by the config at `config_path`.
pub fn run_study(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let cfg = StudyConfig::load(config_path, opts.seed)?;
    let base = config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let config_bytes = io::read_bytes(config_path)?;
    let mut manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        schema_version: SCHEMA_VERSION,
        config: display_path(config_path, &base),
        config_sha256: sha256_hex(&config_bytes),
        seeds: cfg.seeds,
        inputs: Vec::new(),
        outputs: Vec::new(),
        notes: vec!["peak_load_kw is the annual maximum of feeder-head real power over the representative days".into()],
        complete: false,
        error: None,
    };
    let pool = thread_pool(opts.jobs)?;
    let mut artifacts = Artifacts::default();
    let result = execute(&cfg, &pool, &mut artifacts, &mut manifest);
    let outcome = match result {
        Ok((metrics, cluster)) => {
            manifest.complete = true;
            Ok((metrics, cluster))
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            Err(e)
        }
    };
    if manifest.inputs.is_empty() {
        manifest.inputs = digests(&cfg.inputs, &base).unwrap_or_default();
    }
    manifest.outputs = artifacts.write(&opts.out_dir)?;
    io::write_file(&opts.out_dir.join(MANIFEST_FILE), &manifest.to_json())?;
    let (metrics, cluster) = outcome?;
    Ok(RunOutcome {
        manifest,
        metrics,
        cluster,
    })
}

type Executed = (Vec<CellMetrics>, Option<ClusterReport>);

fn execute(
    cfg: &StudyConfig,
    pool: &rayon::ThreadPool,
    artifacts: &mut Artifacts,
    manifest: &mut Manifest,
) -> Result<Executed> {
    let inputs = load_inputs(cfg, artifacts)?;
    let base = cfg.path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut read = cfg.inputs.clone();
    read.extend(inputs.session_files.iter().cloned());
    manifest.inputs = digests(&read, &base)?;

    let mut cluster = None;
    if cfg.file.clustering.enabled {
        if inputs.feeders.len() >= 3 {
            let features = corpus_features(cfg, &inputs)?;
            artifacts.add("features.csv", io::features_csv(&features));
            let report = cluster_feeders(&features, &cfg.cluster_options())
                .map_err(|e| Error::domain("clustering", e))?;
            artifacts.add("clusters.csv", io::clusters_csv(&report));
            artifacts.add("elbow.csv", io::elbow_csv(&report));
            cluster = Some(report);
        } else {
            manifest
                .notes
                .push("clustering skipped: fewer than 3 feeders".into());
        }
    }

    let mut keys = Vec::new();
    for feeder in 0..inputs.feeders.len() {
        for &strategy in &cfg.strategies {
            for &scenario in &cfg.scenarios {
                keys.push(CellKey {
                    feeder,
                    strategy,
                    scenario,
                });
            }
        }
    }
    let results: Vec<std::result::Result<CellResult, Error>> = pool.install(|| {
        keys.par_iter()
            .map(|k| {
                let feeder = &inputs.feeders[k.feeder];
                run_cell(
                    feeder,
                    &inputs.profiles,
                    &inputs.fleets[k.feeder],
                    k.strategy,
                    k.scenario,
                    &cfg.params,
                    &inputs.costs,
                )
                .map_err(|e| {
                    Error::domain(
                        format!(
                            "feeder `{}`, strategy {}, scenario {}",
                            feeder.id,
                            k.strategy.as_str(),
                            k.scenario.0
                        ),
                        e,
                    )
                })
            })
            .collect()
    });
    let mut done = Vec::with_capacity(results.len());
    let mut first_error = None;
    for r in results {
        match r {
            Ok(c) => done.push(c),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    for r in &done {
        let m = &r.metrics;
        let dir = cell_dir(&m.feeder_id, m.strategy, Scenario(m.scenario));
        artifacts.add(dir.join("metrics.csv"), report::cell_metrics_csv(r));
        artifacts.add(dir.join("plan.csv"), io::plan_csv(&r.plan));
        artifacts.add(
            dir.join("violations.csv"),
            io::violations_csv(&r.baseline_violations),
        );
    }
    if let Some(e) = first_error {
        return Err(e);
    }

    let refs: Vec<&CellResult> = done.iter().collect();
    let metrics: Vec<CellMetrics> = done.iter().map(|r| r.metrics.clone()).collect();
    artifacts.add("metrics.csv", report::metrics_table(&refs).to_csv());
    artifacts.add("summary.csv", report::summary_table(&metrics).to_csv());
    artifacts.add("audit.csv", report::audit_table(&refs).to_csv());
    let mut cells_json = serde_json::to_vec_pretty(&metrics).expect("metrics serialize");
    cells_json.push(b'\n');
    artifacts.add("cells.json", cells_json);
    if cfg.scenarios.contains(&Scenario(1)) && cfg.scenarios.contains(&Scenario(4)) {
        let rows =
            compute_table(&metrics, 1, 4).map_err(|e| Error::domain("comparison table", e))?;
        artifacts.add(
            "table.csv",
            report::comparison_table(&rows, cfg.file.table_decimals).to_csv(),
        );
    } else {
        manifest
            .notes
            .push("table.csv skipped: scenarios 1 and 4 are not both selected".into());
    }
    artifacts.add(
        "plots/load_profiles.csv",
        report::load_profile_plot(&refs).to_csv(),
    );
    artifacts.add(
        "plots/upgrade_capacity.csv",
        report::upgrade_capacity_plot(&metrics).to_csv(),
    );
    artifacts.add(
        "plots/overload_trend.csv",
        report::overload_trend_plot(&metrics).to_csv(),
    );
    artifacts.add(
        "plots/voltage_profile.csv",
        report::voltage_profile_plot(&refs).to_csv(),
    );
    artifacts.add(
        "plots/voltage_by_year.csv",
        report::voltage_by_year_plot(&refs).to_csv(),
    );
    artifacts.add("plots/npv.csv", report::npv_plot(&refs).to_csv());
    Ok((metrics, cluster))
}
