//! Upgrade costing and net present value.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float as _;
use serde::{Deserialize, Serialize};

use crate::model::Feeder;
use crate::upgrade::{ActionKind, UpgradeAction, UpgradePlan};

pub const DEFAULT_DISCOUNT_RATE: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Transformer,
    Line,
    Capacitor,
}

impl CostKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CostKind::Transformer => "transformer",
            CostKind::Line => "line",
            CostKind::Capacitor => "capacitor",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "transformer" => Some(CostKind::Transformer),
            "line" => Some(CostKind::Line),
            "capacitor" => Some(CostKind::Capacitor),
            _ => None,
        }
    }

    pub fn of(action: ActionKind) -> Self {
        match action {
            ActionKind::ResizeTransformer => CostKind::Transformer,
            ActionKind::ResizeLine => CostKind::Line,
            ActionKind::AddCapacitor => CostKind::Capacitor,
        }
    }
}

/// One price point: equipment of `kind` up to `size` (kVA, A or kvar).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub kind: CostKind,
    pub size: f64,
    pub unit_cost_usd: f64,
    /// The price is per mile of line rather than per unit.
    #[serde(default)]
    pub per_mile: bool,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EconError {
    #[error("cost row {kind} {size}: unit cost must be positive and size non-negative")]
    BadRow { kind: &'static str, size: f64 },
    #[error("no {kind} cost entry covers size {size}")]
    MissingCost { kind: &'static str, size: f64 },
    #[error("line `{0}` not found in feeder")]
    UnknownLine(String),
    #[error("discount rate must be greater than -1, got {0}")]
    Rate(f64),
    #[error("base year {base} is after the first cost year {first}")]
    BaseYear { base: i32, first: i32 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    rows: Vec<CostRow>,
}

impl CostTable {
    pub fn new(mut rows: Vec<CostRow>) -> Result<Self, EconError> {
        for r in &rows {
            if !(r.unit_cost_usd > 0.0) || !(r.size >= 0.0) {
                return Err(EconError::BadRow {
                    kind: r.kind.as_str(),
                    size: r.size,
                });
            }
        }
        rows.sort_by(|a, b| a.kind.cmp(&b.kind).then(a.size.total_cmp(&b.size)));
        Ok(CostTable { rows })
    }

    pub fn rows(&self) -> &[CostRow] {
        &self.rows
    }

    /// Smallest bucket of `kind` that is at least `size`.
    pub fn lookup(&self, kind: CostKind, size: f64) -> Result<&CostRow, EconError> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.size >= size * (1.0 - 1e-9))
            .ok_or(EconError::MissingCost {
                kind: kind.as_str(),
                size,
            })
    }
}

/// Costed plan: the actions with unit costs filled in, yearly totals and
/// per-kind subtotals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostedPlan {
    pub actions: Vec<UpgradeAction>,
    pub stream: BTreeMap<i32, f64>,
    pub subtotals: BTreeMap<CostKind, f64>,
}

impl CostedPlan {
    pub fn total(&self) -> f64 {
        self.stream.values().sum()
    }

    pub fn subtotal(&self, kind: CostKind) -> f64 {
        self.subtotals.get(&kind).copied().unwrap_or(0.0)
    }
}

/// Total cost of one action: unit price × units, with line prices scaled by length.
pub fn action_cost(
    action: &UpgradeAction,
    feeder: &Feeder,
    table: &CostTable,
) -> Result<f64, EconError> {
    let kind = CostKind::of(action.kind);
    let row = table.lookup(kind, action.unit_rating())?;
    let mut unit = row.unit_cost_usd;
    if kind == CostKind::Line && row.per_mile {
        let line = feeder
            .lines
            .iter()
            .find(|l| l.id == action.component_id)
            .ok_or_else(|| EconError::UnknownLine(action.component_id.clone()))?;
        unit *= line.length_mi;
    }
    Ok(unit)
}

/// Prices every action. `years` seeds the stream with zeros so that years
/// without spending still appear.
pub fn cost_plan(
    plan: &UpgradePlan,
    feeder: &Feeder,
    table: &CostTable,
    years: &[i32],
) -> Result<CostedPlan, EconError> {
    let mut stream: BTreeMap<i32, f64> = years.iter().map(|y| (*y, 0.0)).collect();
    let mut subtotals: BTreeMap<CostKind, f64> =
        [CostKind::Transformer, CostKind::Line, CostKind::Capacitor]
            .into_iter()
            .map(|k| (k, 0.0))
            .collect();
    let mut actions = Vec::with_capacity(plan.actions.len());
    for a in &plan.actions {
        let unit = action_cost(a, feeder, table)?;
        let total = unit * f64::from(a.quantity.max(1));
        *stream.entry(a.year).or_insert(0.0) += total;
        *subtotals.entry(CostKind::of(a.kind)).or_insert(0.0) += total;
        let mut costed = a.clone();
        costed.unit_cost_usd = unit;
        actions.push(costed);
    }
    Ok(CostedPlan {
        actions,
        stream,
        subtotals,
    })
}

/// Σ cost(y) / (1 + r)^(y − base_year).
pub fn npv(stream: &BTreeMap<i32, f64>, rate: f64, base_year: i32) -> Result<f64, EconError> {
    if !(rate > -1.0) || !rate.is_finite() {
        return Err(EconError::Rate(rate));
    }
    if let Some((&first, _)) = stream.iter().next() {
        if base_year > first {
            return Err(EconError::BaseYear {
                base: base_year,
                first,
            });
        }
    }
    Ok(stream
        .iter()
        .map(|(y, c)| c / (1.0 + rate).powi(y - base_year))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn stream(items: &[(i32, f64)]) -> BTreeMap<i32, f64> {
        items.iter().copied().collect()
    }

    #[test]
    fn npv_examples() {
        assert_eq!(npv(&stream(&[(2022, 1000.0)]), 0.03, 2022).unwrap(), 1000.0);
        let v = npv(&stream(&[(2025, 1000.0)]), 0.03, 2022).unwrap();
        assert!((v - 1000.0 / (1.03f64 * 1.03 * 1.03)).abs() < 1e-9);
        assert!((v - 915.141_6).abs() < 1e-4);
        assert_eq!(
            npv(&stream(&[(2025, 1.0), (2030, 2.0)]), 0.0, 2022).unwrap(),
            3.0
        );
        assert!(npv(&stream(&[(2025, 1.0)]), -1.0, 2022).is_err());
        assert!(npv(&stream(&[(2021, 1.0)]), 0.03, 2022).is_err());
    }

    #[test]
    fn lookup_takes_smallest_covering_bucket() {
        let t = CostTable::new(vec![
            CostRow {
                kind: CostKind::Transformer,
                size: 100.0,
                unit_cost_usd: 9000.0,
                per_mile: false,
            },
            CostRow {
                kind: CostKind::Transformer,
                size: 50.0,
                unit_cost_usd: 5000.0,
                per_mile: false,
            },
        ])
        .unwrap();
        assert_eq!(
            t.lookup(CostKind::Transformer, 50.0).unwrap().unit_cost_usd,
            5000.0
        );
        assert_eq!(
            t.lookup(CostKind::Transformer, 75.0).unwrap().unit_cost_usd,
            9000.0
        );
        assert!(t.lookup(CostKind::Transformer, 167.0).is_err());
        assert!(t.lookup(CostKind::Capacitor, 50.0).is_err());
        assert!(CostTable::new(vec![CostRow {
            kind: CostKind::Line,
            size: 1.0,
            unit_cost_usd: 0.0,
            per_mile: true
        }])
        .is_err());
    }
}
