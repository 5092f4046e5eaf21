//! Subcommand implementations behind the `evgrid` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use evgrid_core::clustering::{cluster_feeders, ClusterOptions, ClusterReport};
use evgrid_core::model::validate;
use evgrid_core::study::{compute_table, CellMetrics};

use crate::config::StudyConfig;
use crate::corpus::{generate_corpus, read_corpus_spec, CorpusSpec};
use crate::error::{Error, Result};
use crate::io;
use crate::report;
use crate::runner::{corpus_features, load_inputs, run_study, RunOptions};

#[derive(Debug, Parser)]
#[command(
    name = "evgrid",
    version,
    about = "Distribution feeder studies of EV smart charging"
)]
pub struct Cli {
    /// Master random seed; overrides the seed in a config or corpus spec.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the study grid (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check feeder files against the model invariants.
    Validate {
        #[arg(required = true)]
        feeders: Vec<PathBuf>,
    },
    /// Write a synthetic corpus: feeders, sessions, profiles, costs and a study config.
    Generate(GenerateArgs),
    /// Cluster feeders and pick representatives.
    Cluster(ClusterArgs),
    /// Run a study config end to end.
    Run { config: PathBuf },
    /// Build a scenario comparison table from a finished run.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Corpus spec (TOML).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of randomized feeders; overrides the spec.
    #[arg(long)]
    pub count: Option<usize>,
    /// Include the seven demo feeders.
    #[arg(long)]
    pub demo: bool,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Feature table (CSV) with one row per feeder.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub features: Option<PathBuf>,
    /// Study config whose feeders are clustered.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long, default_value_t = 10)]
    pub k_max: usize,
    /// Use this k instead of the elbow search.
    #[arg(long)]
    pub k: Option<usize>,
    /// Share of variance the retained principal components must explain.
    #[arg(long, default_value_t = 0.95)]
    pub variance: f64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory (defaults to --out-dir).
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub baseline: u8,
    #[arg(long, default_value_t = 4)]
    pub scenario: u8,
    #[arg(long, default_value_t = 1)]
    pub decimals: usize,
}

/// Text printed to stdout on success, or the error with its exit code.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Validate { feeders } => cmd_validate(feeders),
        Command::Generate(a) => {
            let out = cli
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("corpus"));
            cmd_generate(a, cli.seed, &out)
        }
        Command::Cluster(a) => {
            let out = cli
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("cluster"));
            cmd_cluster(a, cli.seed, &out)
        }
        Command::Run { config } => {
            let stem = config
                .file_stem()
                .map_or_else(|| "study".into(), |s| s.to_string_lossy().into_owned());
            let out = cli
                .out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("runs").join(stem));
            cmd_run(
                config,
                &RunOptions {
                    seed: cli.seed,
                    jobs: cli.jobs,
                    out_dir: out,
                },
            )
        }
        Command::Report(a) => {
            let dir = a
                .run_dir
                .clone()
                .or_else(|| cli.out_dir.clone())
                .ok_or_else(|| Error::Usage("report needs --run-dir or --out-dir".into()))?;
            cmd_report(a, &dir)
        }
    }
}

/// Validates every file. Unreadable or unparsable files win over invalid ones
/// when choosing the error.
pub fn cmd_validate(paths: &[PathBuf]) -> Result<String> {
    let mut out = String::new();
    let mut io_error = None;
    let mut invalid = Vec::new();
    for path in paths {
        match io::read_feeder(path) {
            Err(e) => {
                out.push_str(&format!("{}: ERROR {e}\n", path.display()));
                io_error.get_or_insert(e);
            }
            Ok(feeder) => {
                let issues = validate(&feeder);
                if issues.is_empty() {
                    out.push_str(&format!(
                        "{}: ok ({} buses)\n",
                        path.display(),
                        feeder.buses.len()
                    ));
                } else {
                    for i in &issues {
                        out.push_str(&format!("{}: {i}\n", path.display()));
                    }
                    invalid.push(path.display().to_string());
                }
            }
        }
    }
    if let Some(e) = io_error {
        eprint!("{out}");
        return Err(e);
    }
    if !invalid.is_empty() {
        eprint!("{out}");
        return Err(Error::domain(
            "validate",
            format!(
                "{} invalid feeder file(s): {}",
                invalid.len(),
                invalid.join(", ")
            ),
        ));
    }
    Ok(out)
}

pub fn cmd_generate(args: &GenerateArgs, seed: Option<u64>, out_dir: &Path) -> Result<String> {
    let mut spec = match &args.spec {
        Some(p) => read_corpus_spec(p)?,
        None => CorpusSpec::default(),
    };
    if let Some(n) = args.count {
        spec.count = n;
    }
    spec.demo |= args.demo;
    let corpus = generate_corpus(&spec, seed.unwrap_or(0))?;
    corpus.write(out_dir)?;
    Ok(format!(
        "wrote {} feeders ({} files) to {}\n",
        corpus.feeders.len(),
        corpus.files.len(),
        out_dir.display()
    ))
}

fn describe_clusters(report: &ClusterReport) -> String {
    let mut out = String::new();
    if let Some(e) = &report.elbow {
        out.push_str("k  wcss\n");
        for (k, w) in e.ks.iter().zip(&e.wcss) {
            out.push_str(&format!("{k:<2} {w:.6}\n"));
        }
    }
    out.push_str(&format!("chosen k = {}\n", report.model.k));
    out.push_str(&format!(
        "principal components kept = {}\n",
        report.pca.components.len()
    ));
    for (c, rep) in report.representatives.iter().enumerate() {
        let members = report.rows.iter().filter(|r| r.cluster == c).count();
        out.push_str(&format!(
            "cluster {c}: {members} feeders, representative {}\n",
            rep.as_deref().unwrap_or("-")
        ));
    }
    out
}

pub fn cmd_cluster(args: &ClusterArgs, seed: Option<u64>, out_dir: &Path) -> Result<String> {
    let (features, config_seed) = match (&args.features, &args.config) {
        (Some(p), _) => (io::read_features(p)?, 0),
        (None, Some(c)) => {
            let cfg = StudyConfig::load(c, seed)?;
            let mut scratch = crate::manifest::Artifacts::default();
            let inputs = load_inputs(&cfg, &mut scratch)?;
            (corpus_features(&cfg, &inputs)?, cfg.seeds.clustering)
        }
        (None, None) => return Err(Error::Usage("cluster needs --features or --config".into())),
    };
    if features.len() < 3 {
        return Err(Error::domain(
            "cluster",
            format!("need at least 3 feeders, got {}", features.len()),
        ));
    }
    let opts = ClusterOptions {
        variance_target: args.variance,
        k_min: args.k_min,
        k_max: args.k_max,
        fixed_k: args.k,
        restarts: args.restarts,
        seed: seed.unwrap_or(config_seed),
    };
    let report = cluster_feeders(&features, &opts).map_err(|e| Error::domain("cluster", e))?;
    io::write_file(&out_dir.join("clusters.csv"), &io::clusters_csv(&report))?;
    io::write_file(&out_dir.join("elbow.csv"), &io::elbow_csv(&report))?;
    io::write_file(&out_dir.join("features.csv"), &io::features_csv(&features))?;
    Ok(describe_clusters(&report))
}

pub fn cmd_run(config: &Path, opts: &RunOptions) -> Result<String> {
    let outcome = run_study(config, opts)?;
    let mut out = format!(
        "ran {} cells; {} outputs in {}\n",
        outcome.metrics.len(),
        outcome.manifest.outputs.len(),
        opts.out_dir.display()
    );
    if let Some(c) = &outcome.cluster {
        out.push_str(&describe_clusters(c));
    }
    let table = opts.out_dir.join("table.csv");
    if table.exists() {
        out.push_str(&io::read_text(&table)?);
    }
    Ok(out)
}

pub fn cmd_report(args: &ReportArgs, run_dir: &Path) -> Result<String> {
    let path = run_dir.join("cells.json");
    let metrics: Vec<CellMetrics> =
        serde_json::from_str(&io::read_text(&path)?).map_err(|e| Error::format(&path, e))?;
    let rows = compute_table(&metrics, args.baseline, args.scenario)
        .map_err(|e| Error::domain("report", e))?;
    let table = report::comparison_table(&rows, args.decimals);
    let name = format!("table_s{}_vs_s{}.csv", args.baseline, args.scenario);
    io::write_file(&run_dir.join(&name), &table.to_csv())?;
    Ok(report::render(&table))
}
