//! File formats: feeder JSON and the CSV tables read or written by the CLI.
//!
//! Every writer renders into memory so callers can hash the bytes before they
//! hit disk. Floats use Rust's shortest round-trip formatting, which keeps the
//! output stable across runs and platforms.

use std::fs;
use std::path::Path;

use evgrid_core::charging::EvSession;
use evgrid_core::clustering::{ClusterReport, FeederFeatures, FEATURE_NAMES};
use evgrid_core::economics::{CostKind, CostRow, CostTable, CostedPlan};
use evgrid_core::model::Feeder;
use evgrid_core::powerflow::{DayType, ProfileStore, TimeSeriesProfile};
use evgrid_core::upgrade::Violation;
use evgrid_core::HOURS;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_feeder(path: &Path) -> Result<Feeder> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e))
}

pub fn feeder_json(feeder: &Feeder) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(feeder).expect("feeder serializes");
    out.push(b'\n');
    out
}

fn reader(text: &str) -> csv::Reader<std::io::Cursor<Vec<u8>>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(std::io::Cursor::new(text.as_bytes().to_vec()))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory csv writer")
}

fn hour_headers() -> Vec<String> {
    (0..HOURS).map(|h| format!("h{h:02}")).collect()
}

/// `profile_id,day_type,h00..h23`, values in per-unit of the load's peak.
pub fn read_profiles(path: &Path) -> Result<ProfileStore> {
    let text = read_text(path)?;
    let mut rdr = reader(&text);
    let mut store = ProfileStore::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e))?;
        let line = i + 2;
        if rec.len() != 2 + HOURS {
            return Err(Error::format(
                path,
                format!(
                    "row {line}: expected {} columns, found {}",
                    2 + HOURS,
                    rec.len()
                ),
            ));
        }
        let day = DayType::parse(&rec[1]).ok_or_else(|| {
            Error::format(path, format!("row {line}: unknown day type `{}`", &rec[1]))
        })?;
        let mut values = [0.0; HOURS];
        for (h, v) in values.iter_mut().enumerate() {
            *v = rec[2 + h].parse().map_err(|_| {
                Error::format(path, format!("row {line}: bad value `{}`", &rec[2 + h]))
            })?;
        }
        store
            .insert(TimeSeriesProfile {
                profile_id: rec[0].to_string(),
                day_type: day,
                values,
            })
            .map_err(|e| Error::format(path, format!("row {line}: {e}")))?;
    }
    Ok(store)
}

pub fn profiles_csv(profiles: &ProfileStore) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["profile_id".to_string(), "day_type".to_string()];
    header.extend(hour_headers());
    w.write_record(&header).unwrap();
    for p in profiles.iter() {
        let mut row = vec![p.profile_id.clone(), p.day_type.as_str().to_string()];
        row.extend(p.values.iter().map(|v| v.to_string()));
        w.write_record(&row).unwrap();
    }
    finish(w)
}

pub fn read_sessions(path: &Path) -> Result<Vec<EvSession>> {
    let text = read_text(path)?;
    let mut rdr = reader(&text);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<EvSession>().enumerate() {
        let s = rec.map_err(|e| Error::format(path, e))?;
        s.check()
            .map_err(|e| Error::format(path, format!("row {}: {e}", i + 2)))?;
        out.push(s);
    }
    Ok(out)
}

pub fn sessions_csv(sessions: &[EvSession]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record([
        "session_id",
        "bus",
        "plugin_hour",
        "duration_h",
        "energy_kwh",
        "max_power_kw",
        "enrolled",
    ])
    .unwrap();
    for s in sessions {
        w.serialize(s).unwrap();
    }
    finish(w)
}

#[derive(Deserialize)]
struct CostRecord {
    kind: String,
    size: f64,
    unit_cost_usd: f64,
    #[serde(default)]
    per_mile: Option<bool>,
}

/// `kind,size,unit_cost_usd,per_mile`; lines starting with `#` are comments.
pub fn read_costs(path: &Path) -> Result<CostTable> {
    let text = read_text(path)?;
    let mut rdr = reader(&text);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<CostRecord>().enumerate() {
        let r = rec.map_err(|e| Error::format(path, e))?;
        let kind = CostKind::parse(&r.kind).ok_or_else(|| {
            Error::format(path, format!("row {}: unknown kind `{}`", i + 2, r.kind))
        })?;
        rows.push(CostRow {
            kind,
            size: r.size,
            unit_cost_usd: r.unit_cost_usd,
            per_mile: r.per_mile.unwrap_or(false),
        });
    }
    CostTable::new(rows).map_err(|e| Error::format(path, e))
}

pub fn costs_csv(table: &CostTable, preamble: &[&str]) -> Vec<u8> {
    let mut out = Vec::new();
    for line in preamble {
        out.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "size", "unit_cost_usd", "per_mile"])
        .unwrap();
    for r in table.rows() {
        w.write_record([
            r.kind.as_str().to_string(),
            r.size.to_string(),
            r.unit_cost_usd.to_string(),
            r.per_mile.to_string(),
        ])
        .unwrap();
    }
    out.extend(finish(w));
    out
}

pub fn read_features(path: &Path) -> Result<Vec<FeederFeatures>> {
    let text = read_text(path)?;
    let mut rdr = reader(&text);
    let header = rdr.headers().map_err(|e| Error::format(path, e))?.clone();
    let expected: Vec<&str> = std::iter::once("feeder_id").chain(FEATURE_NAMES).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::format(
            path,
            format!("header must be `{}`", expected.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e))?;
        let values: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, format!("row {}: non-numeric feature", i + 2)))?;
        out.push(
            FeederFeatures::from_vector(rec[0].to_string(), &values)
                .map_err(|e| Error::format(path, format!("row {}: {e}", i + 2)))?,
        );
    }
    Ok(out)
}

pub fn features_csv(features: &[FeederFeatures]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("feeder_id").chain(FEATURE_NAMES))
        .unwrap();
    for f in features {
        w.write_record(
            std::iter::once(f.feeder_id.clone()).chain(f.to_vector().iter().map(|v| v.to_string())),
        )
        .unwrap();
    }
    finish(w)
}

pub fn clusters_csv(report: &ClusterReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "feeder_id",
        "cluster",
        "distance_to_centroid",
        "is_representative",
    ])
    .unwrap();
    for r in &report.rows {
        w.write_record([
            r.feeder_id.clone(),
            r.cluster.to_string(),
            r.distance_to_centroid.to_string(),
            r.is_representative.to_string(),
        ])
        .unwrap();
    }
    finish(w)
}

pub fn elbow_csv(report: &ClusterReport) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "wcss", "chosen"]).unwrap();
    if let Some(e) = &report.elbow {
        for (k, v) in e.ks.iter().zip(&e.wcss) {
            w.write_record([k.to_string(), v.to_string(), (*k == e.chosen_k).to_string()])
                .unwrap();
        }
    }
    finish(w)
}

pub fn plan_csv(plan: &CostedPlan) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "component_id",
        "action",
        "year",
        "old_rating",
        "new_rating",
        "quantity",
        "unit_cost_usd",
        "cost_usd",
    ])
    .unwrap();
    for a in &plan.actions {
        w.write_record([
            a.component_id.clone(),
            a.kind.as_str().to_string(),
            a.year.to_string(),
            a.old_rating.to_string(),
            a.new_rating.to_string(),
            a.quantity.to_string(),
            a.unit_cost_usd.to_string(),
            (a.unit_cost_usd * f64::from(a.quantity.max(1))).to_string(),
        ])
        .unwrap();
    }
    finish(w)
}

pub fn violations_csv(violations: &[Violation]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "component_id",
        "kind",
        "year",
        "day_type",
        "hour",
        "magnitude",
    ])
    .unwrap();
    for v in violations {
        w.write_record([
            v.component_id.clone(),
            v.kind.as_str().to_string(),
            v.year.to_string(),
            v.day_type.as_str().to_string(),
            v.hour.to_string(),
            v.magnitude.to_string(),
        ])
        .unwrap();
    }
    finish(w)
}

/// Generic tidy table: a header plus rows of already-formatted cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).unwrap();
        for r in &self.rows {
            w.write_record(r).unwrap();
        }
        finish(w)
    }
}
