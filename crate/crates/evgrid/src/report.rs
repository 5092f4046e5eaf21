//! Tidy CSV tables derived from finished study cells: per-cell metrics,
//! cross-cell summaries, the scenario comparison table and plot data.

use evgrid_core::economics::CostKind;
use evgrid_core::study::{CellMetrics, CellResult, TableRow};

use crate::io::Table;

pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    x.to_string()
}

fn rounded(x: Option<f64>, decimals: usize) -> String {
    match x {
        Some(v) => {
            let s = format!("{v:.decimals$}");
            if s.trim_start_matches('-')
                .chars()
                .all(|c| c == '0' || c == '.')
            {
                s.trim_start_matches('-').to_string()
            } else {
                s
            }
        }
        None => "NA".to_string(),
    }
}

fn labels(m: &CellMetrics) -> Vec<String> {
    vec![
        m.feeder_id.clone(),
        m.strategy.as_str().to_string(),
        m.scenario.to_string(),
    ]
}

/// Year-by-year metrics of one cell. Carries no feeder, strategy or scenario
/// labels, so cells with identical results produce identical bytes.
pub fn cell_metrics_csv(r: &CellResult) -> Vec<u8> {
    let mut t = Table::new(&[
        "year",
        "peak_load_kw",
        "overloaded_transformers",
        "cumulative_overloaded_pct",
        "min_voltage_before_pu",
        "min_voltage_after_pu",
        "upgrade_cost_usd",
    ]);
    let m = &r.metrics;
    for (i, (year, peak)) in m.peak_load_kw.iter().enumerate() {
        let (_, before, after) = r.min_voltage_by_year[i];
        t.push(vec![
            year.to_string(),
            num(*peak),
            m.overloaded_transformers[i].1.to_string(),
            num(m.overload_trend_pct[i].1),
            num(before),
            num(after),
            num(r.plan.stream.get(year).copied().unwrap_or(0.0)),
        ]);
    }
    t.to_csv()
}

pub fn metrics_table(results: &[&CellResult]) -> Table {
    let mut t = Table::new(&[
        "feeder_id",
        "strategy",
        "scenario",
        "year",
        "peak_load_kw",
        "overloaded_transformers",
        "cumulative_overloaded_pct",
    ]);
    for r in results {
        let m = &r.metrics;
        for (i, (year, peak)) in m.peak_load_kw.iter().enumerate() {
            let mut row = labels(m);
            row.extend([
                year.to_string(),
                num(*peak),
                m.overloaded_transformers[i].1.to_string(),
                num(m.overload_trend_pct[i].1),
            ]);
            t.push(row);
        }
    }
    t
}

pub fn summary_table(metrics: &[CellMetrics]) -> Table {
    let mut t = Table::new(&[
        "feeder_id",
        "strategy",
        "scenario",
        "peak_load_kw",
        "overloaded_transformer_total",
        "transformer_upgrade_kva",
        "line_upgrade_a",
        "capacitor_kvar",
        "transformer_cost_usd",
        "line_cost_usd",
        "capacitor_cost_usd",
        "total_cost_usd",
        "npv_usd",
    ]);
    for m in metrics {
        let mut row = labels(m);
        row.extend([
            num(m.peak_kw()),
            m.overloaded_transformer_total.to_string(),
            num(m.transformer_upgrade_kva),
            num(m.line_upgrade_a),
            num(m.capacitor_kvar),
            num(m.transformer_cost_usd),
            num(m.line_cost_usd),
            num(m.capacitor_cost_usd),
            num(m.total_cost_usd()),
            num(m.npv_usd),
        ]);
        t.push(row);
    }
    t
}

pub fn audit_table(results: &[&CellResult]) -> Table {
    let mut t = Table::new(&[
        "feeder_id",
        "strategy",
        "scenario",
        "sessions",
        "enrolled",
        "max_energy_residual_kwh",
        "max_window_power_kw",
        "unmet_kwh",
        "lb_infeasible_assets",
        "lb_fallbacks",
        "max_balance_error",
        "residual_violations",
        "escalations",
    ]);
    for r in results {
        let a = &r.audit;
        let mut row = labels(&r.metrics);
        row.extend([
            a.sessions.to_string(),
            a.enrolled.to_string(),
            num(a.max_energy_residual_kwh),
            num(a.max_window_power_kw),
            num(a.unmet_kwh),
            a.lb_infeasible_assets.to_string(),
            a.lb_fallbacks.to_string(),
            num(r.max_balance_error),
            r.residual_violations.len().to_string(),
            r.escalations.join("; "),
        ]);
        t.push(row);
    }
    t
}

/// Scenario comparison with reductions rounded to `decimals`; `NA` marks a
/// zero baseline against a non-zero value.
pub fn comparison_table(rows: &[TableRow], decimals: usize) -> Table {
    let mut t = Table::new(&[
        "feeder_id",
        "strategy",
        "peak_load_reduction_pct",
        "overload_count_reduction_pct",
        "transformer_cost_reduction_pct",
        "line_cost_reduction_pct",
        "npv_reduction_pct",
    ]);
    for r in rows {
        t.push(vec![
            r.feeder_id.clone(),
            r.strategy.as_str().to_string(),
            rounded(r.peak_load_reduction_pct, decimals),
            rounded(r.overload_count_reduction_pct, decimals),
            rounded(r.transformer_cost_reduction_pct, decimals),
            rounded(r.line_cost_reduction_pct, decimals),
            rounded(r.npv_reduction_pct, decimals),
        ]);
    }
    t
}

/// Final-year hourly feeder profiles, one row per (cell, day, hour).
pub fn load_profile_plot(results: &[&CellResult]) -> Table {
    let mut t = Table::new(&[
        "feeder_id",
        "strategy",
        "scenario",
        "year",
        "day_type",
        "hour",
        "base_kw",
        "ev_kw",
        "total_kw",
    ]);
    for r in results {
        let Some(last) = r.profiles.iter().map(|p| p.year).max() else {
            continue;
        };
        for p in r.profiles.iter().filter(|p| p.year == last) {
            for h in 0..evgrid_core::HOURS {
                let mut row = labels(&r.metrics);
                row.extend([
                    p.year.to_string(),
                    p.day_type.as_str().to_string(),
                    h.to_string(),
                    num(p.base_kw[h]),
                    num(p.ev_kw[h]),
                    num(p.head_kw[h]),
                ]);
                t.push(row);
            }
        }
    }
    t
}

pub fn upgrade_capacity_plot(metrics: &[CellMetrics]) -> Table {
    let mut t = Table::new(&[
        "feeder_id",
        "strategy",
        "scenario",
        "transformer_upgrade_kva",
        "line_upgrade_a",
        "capacitor_kvar",
    ]);
    for m in metrics {
        let mut row = labels(m);
        row.extend([
            num(m.transformer_upgrade_kva),
            num(m.line_upgrade_a),
            num(m.capacitor_kvar),
        ]);
        t.push(row);
    }
    t
}

pub fn overload_trend_plot(metrics: &[CellMetrics]) -> Table {
    let mut t = Table::new(&[
        "feeder_id",
        "strategy",
        "scenario",
        "year",
        "overloaded_transformers",
        "cumulative_overloaded_pct",
    ]);
    for m in metrics {
        for (i, (year, pct)) in m.overload_trend_pct.iter().enumerate() {
            let mut row = labels(m);
            row.extend([
                year.to_string(),
                m.overloaded_transformers[i].1.to_string(),
                num(*pct),
            ]);
            t.push(row);
        }
    }
    t
}

pub fn voltage_profile_plot(results: &[&CellResult]) -> Table {
    let mut t = Table::new(&[
        "feeder_id",
        "strategy",
        "scenario",
        "bus_id",
        "min_voltage_before_pu",
        "min_voltage_after_pu",
    ]);
    for r in results {
        for (bus, before, after) in &r.voltage_profile {
            let mut row = labels(&r.metrics);
            row.extend([bus.clone(), num(*before), num(*after)]);
            t.push(row);
        }
    }
    t
}

pub fn voltage_by_year_plot(results: &[&CellResult]) -> Table {
    let mut t = Table::new(&[
        "feeder_id",
        "strategy",
        "scenario",
        "year",
        "min_voltage_before_pu",
        "min_voltage_after_pu",
    ]);
    for r in results {
        for (year, before, after) in &r.min_voltage_by_year {
            let mut row = labels(&r.metrics);
            row.extend([year.to_string(), num(*before), num(*after)]);
            t.push(row);
        }
    }
    t
}

pub fn npv_plot(results: &[&CellResult]) -> Table {
    let mut t = Table::new(&[
        "feeder_id",
        "strategy",
        "scenario",
        "transformer_cost_usd",
        "line_cost_usd",
        "capacitor_cost_usd",
        "npv_usd",
    ]);
    for r in results {
        let mut row = labels(&r.metrics);
        row.extend([
            num(r.plan.subtotal(CostKind::Transformer)),
            num(r.plan.subtotal(CostKind::Line)),
            num(r.plan.subtotal(CostKind::Capacitor)),
            num(r.metrics.npv_usd),
        ]);
        t.push(row);
    }
    t
}

/// Plain-text rendering of a table for the terminal.
pub fn render(table: &Table) -> String {
    let mut widths: Vec<usize> = table.header.iter().map(|h| h.len()).collect();
    for r in &table.rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(table.header.clone());
    out.push('\n');
    for r in &table.rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}
