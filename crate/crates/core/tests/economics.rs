use std::collections::BTreeMap;

use evgrid_core::economics::{cost_plan, npv, CostKind, CostRow, CostTable};
use evgrid_core::synth::{generate_synthetic_feeder, SyntheticFeederSpec};
use evgrid_core::upgrade::{ActionKind, UpgradeAction, UpgradePlan};
use proptest::prelude::*;

fn table() -> CostTable {
    let mut rows = Vec::new();
    for (size, cost) in [
        (25.0, 3_000.0),
        (50.0, 4_500.0),
        (100.0, 7_000.0),
        (167.0, 11_000.0),
        (500.0, 30_000.0),
    ] {
        rows.push(CostRow {
            kind: CostKind::Transformer,
            size,
            unit_cost_usd: cost,
            per_mile: false,
        });
    }
    for (size, cost) in [(230.0, 150_000.0), (400.0, 210_000.0), (900.0, 320_000.0)] {
        rows.push(CostRow {
            kind: CostKind::Line,
            size,
            unit_cost_usd: cost,
            per_mile: true,
        });
    }
    for (size, cost) in [(150.0, 9_000.0), (600.0, 18_000.0)] {
        rows.push(CostRow {
            kind: CostKind::Capacitor,
            size,
            unit_cost_usd: cost,
            per_mile: false,
        });
    }
    CostTable::new(rows).unwrap()
}

fn action(id: &str, kind: ActionKind, year: i32, rating: f64, quantity: u32) -> UpgradeAction {
    UpgradeAction {
        component_id: id.into(),
        kind,
        year,
        old_rating: 0.0,
        new_rating: rating,
        quantity,
        unit_cost_usd: 0.0,
    }
}

#[test]
fn cost_plan_examples() {
    let feeder = generate_synthetic_feeder(&SyntheticFeederSpec {
        id: "c".into(),
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let years: Vec<i32> = (2022..=2035).collect();
    let t = table();

    let empty = cost_plan(&UpgradePlan::default(), &feeder, &t, &years).unwrap();
    assert_eq!(empty.stream.len(), years.len());
    assert!(empty.stream.values().all(|c| *c == 0.0));

    let one = UpgradePlan {
        actions: vec![action(
            &feeder.transformers[0].id,
            ActionKind::ResizeTransformer,
            2025,
            100.0,
            1,
        )],
    };
    let c = cost_plan(&one, &feeder, &t, &years).unwrap();
    assert_eq!(c.stream[&2025], 7_000.0);
    assert_eq!(c.total(), 7_000.0);

    let l0 = &feeder.lines[0];
    let l1 = &feeder.lines[1];
    let mixed = UpgradePlan {
        actions: vec![
            action(
                &feeder.transformers[0].id,
                ActionKind::ResizeTransformer,
                2025,
                75.0,
                1,
            ),
            action(
                &feeder.transformers[1].id,
                ActionKind::ResizeTransformer,
                2030,
                1000.0,
                2,
            ),
            action(&l0.id, ActionKind::ResizeLine, 2025, 310.0, 1),
            action(&l1.id, ActionKind::ResizeLine, 2033, 900.0, 1),
            action("cap:p3:1", ActionKind::AddCapacitor, 2030, 300.0, 1),
        ],
    };
    let got = cost_plan(&mixed, &feeder, &t, &years).unwrap();
    // Spreadsheet-style recount.
    let mut expected: BTreeMap<i32, f64> = years.iter().map(|y| (*y, 0.0)).collect();
    *expected.get_mut(&2025).unwrap() += 7_000.0 + 210_000.0 * l0.length_mi;
    *expected.get_mut(&2030).unwrap() += 2.0 * 30_000.0 + 18_000.0;
    *expected.get_mut(&2033).unwrap() += 320_000.0 * l1.length_mi;
    for (y, v) in &expected {
        assert!((got.stream[y] - v).abs() < 1e-6, "{y}");
    }
    assert!((got.subtotal(CostKind::Transformer) - 67_000.0).abs() < 1e-9);
    assert!((got.subtotal(CostKind::Capacitor) - 18_000.0).abs() < 1e-9);
    assert_eq!(got.actions[1].unit_cost_usd, 30_000.0);

    let missing = UpgradePlan {
        actions: vec![action("cap:x:1", ActionKind::AddCapacitor, 2030, 1200.0, 1)],
    };
    assert!(cost_plan(&missing, &feeder, &t, &years).is_err());
}

fn arb_stream() -> impl Strategy<Value = BTreeMap<i32, f64>> {
    prop::collection::btree_map(2022i32..=2035, 0.0f64..1e6, 0..10)
}

proptest! {
    #[test]
    fn npv_is_linear(a in arb_stream(), b in arb_stream(), r in 0.0f64..0.2) {
        let mut sum = a.clone();
        for (y, c) in &b {
            *sum.entry(*y).or_insert(0.0) += c;
        }
        let lhs = npv(&sum, r, 2022).unwrap();
        let rhs = npv(&a, r, 2022).unwrap() + npv(&b, r, 2022).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn npv_decreasing_in_rate(year in 2023i32..=2035, cost in 1.0f64..1e6, r in 0.0f64..0.2, dr in 1e-4f64..0.1) {
        let s: BTreeMap<i32, f64> = [(year, cost)].into_iter().collect();
        prop_assert!(npv(&s, r + dr, 2022).unwrap() < npv(&s, r, 2022).unwrap());
    }

    #[test]
    fn deferral_lowers_npv(year in 2022i32..2035, delay in 1i32..5, cost in 1.0f64..1e6, r in 1e-3f64..0.2) {
        let early: BTreeMap<i32, f64> = [(year, cost)].into_iter().collect();
        let late: BTreeMap<i32, f64> = [(year + delay, cost)].into_iter().collect();
        prop_assert!(npv(&late, r, 2022).unwrap() < npv(&early, r, 2022).unwrap());
    }
}
