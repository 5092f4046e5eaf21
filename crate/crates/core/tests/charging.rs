mod common;

use evgrid_core::charging::{
    lb_schedule, sum_by_hour, tou_schedule, unmanaged_schedule, AssetLoad, EvSession, TouWindow,
};
use evgrid_core::HOURS;
use proptest::prelude::*;

fn arb_session(id: usize) -> impl Strategy<Value = EvSession> {
    (
        0usize..24,
        1usize..=24,
        0.0f64..60.0,
        prop::sample::select(vec![3.3, 7.2, 11.5]),
        any::<bool>(),
    )
        .prop_map(
            move |(plugin, duration, energy, power, enrolled)| EvSession {
                session_id: format!("ev{id:03}"),
                bus: "b".into(),
                plugin_hour: plugin,
                duration_h: duration,
                energy_kwh: energy,
                max_power_kw: power,
                enrolled,
            },
        )
}

fn arb_sessions() -> impl Strategy<Value = Vec<EvSession>> {
    (1usize..8).prop_flat_map(|n| (0..n).map(arb_session).collect::<Vec<_>>())
}

fn arb_asset() -> impl Strategy<Value = AssetLoad> {
    (
        10.0f64..100.0,
        prop::array::uniform24(0.0f64..1.0),
        0.0f64..0.3,
    )
        .prop_map(|(rating, shape, q)| {
            let mut base_kw = [0.0; HOURS];
            let mut base_kvar = [0.0; HOURS];
            for h in 0..HOURS {
                base_kw[h] = rating * 0.8 * shape[h];
                base_kvar[h] = base_kw[h] * q;
            }
            AssetLoad {
                rating_kva: rating,
                base_kw,
                base_kvar,
            }
        })
}

fn check_schedule_bounds(s: &EvSession, power: &[f64], unmet: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(power.len(), s.duration_h);
    for p in power {
        prop_assert!(*p >= -1e-12 && *p <= s.max_power_kw + 1e-9);
    }
    let delivered: f64 = power.iter().sum();
    prop_assert!((delivered + unmet - s.energy_kwh).abs() < 1e-9);
    Ok(())
}

proptest! {
    #[test]
    fn unmanaged_and_tou_conserve_energy(s in arb_session(0)) {
        let u = unmanaged_schedule(&s);
        check_schedule_bounds(&s, &u.power_kw, u.unmet_kwh)?;
        let t = tou_schedule(&s, TouWindow::default());
        check_schedule_bounds(&s, &t.power_kw, t.unmet_kwh)?;
        if s.enrolled {
            for h in 17..21 {
                prop_assert_eq!(t.power_at(h), 0.0);
            }
        }
        prop_assert!(t.unmet_kwh >= u.unmet_kwh - 1e-12);
    }

    #[test]
    fn lb_bounds_and_dominance(sessions in arb_sessions(), asset in arb_asset()) {
        let out = lb_schedule(&sessions, &asset, 0.9);
        prop_assert_eq!(out.schedules.len(), sessions.len());
        for (s, sched) in sessions.iter().zip(&out.schedules) {
            check_schedule_bounds(s, &sched.power_kw, sched.unmet_kwh)?;
            prop_assert!(sched.unmet_kwh <= unmanaged_schedule(s).unmet_kwh + 1e-9);
            if !s.enrolled {
                prop_assert_eq!(sched, &unmanaged_schedule(s));
            }
        }
        let unmanaged: Vec<_> = sessions.iter().map(unmanaged_schedule).collect();
        let base_breaches = asset.breach_hours(&sum_by_hour(&unmanaged), 0.9).len();
        prop_assert!(out.breach_hours.len() <= base_breaches);
        prop_assert_eq!(out.breach_hours.clone(), asset.breach_hours(&sum_by_hour(&out.schedules), 0.9));
        prop_assert_eq!(&out, &lb_schedule(&sessions, &asset, 0.9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]
    #[test]
    fn lb_matches_exhaustive_feasibility(
        raw in prop::collection::vec((0usize..6, 1usize..=4, 0u32..=6, 1u32..=3), 1..=4),
        head in prop::array::uniform8(0u32..=4),
    ) {
        // Sessions live in hours 10..18; outside that window headroom is huge.
        let sessions: Vec<(usize, usize, u32, u32)> = raw
            .iter()
            .map(|&(s, d, e, p)| {
                let d = d.min(8 - s);
                (s, d, e.min(p * d as u32), p)
            })
            .collect();
        let rating = 100.0;
        let mut base_kw = [0.0; HOURS];
        for (h, room) in head.iter().enumerate() {
            base_kw[10 + h] = 0.9 * rating - f64::from(*room);
        }
        let asset = AssetLoad { rating_kva: rating, base_kw, base_kvar: [0.0; HOURS] };
        let evs: Vec<EvSession> = sessions
            .iter()
            .enumerate()
            .map(|(i, &(s, d, e, p))| EvSession {
                session_id: format!("s{i}"),
                bus: "b".into(),
                plugin_hour: 10 + s,
                duration_h: d,
                energy_kwh: f64::from(e),
                max_power_kw: f64::from(p),
                enrolled: true,
            })
            .collect();
        let mut h = head;
        let oracle = common::alloc_oracle::feasible(&sessions, &mut h, 0);
        let out = lb_schedule(&evs, &asset, 0.9);
        prop_assert_eq!(!out.infeasible, oracle);
        if oracle {
            prop_assert!(out.breach_hours.is_empty());
            for s in &out.schedules {
                prop_assert!(s.unmet_kwh < 1e-9);
            }
        }
    }
}

#[test]
fn generator_prefix_and_class_share() {
    use evgrid_core::charging::{generate_sessions, BehaviorSpec};
    use evgrid_core::synth::{generate_synthetic_feeder, ClassMix, SyntheticFeederSpec};
    use evgrid_core::CustomerClass;

    let spec = SyntheticFeederSpec {
        id: "gen".into(),
        bus_count: 40,
        class_mix: ClassMix {
            residential: 0.6,
            commercial: 0.4,
            industrial: 0.0,
            mixed: 0.0,
        },
        seed: 5,
        ..Default::default()
    };
    let feeder = generate_synthetic_feeder(&spec).unwrap();
    let behavior = BehaviorSpec::default();
    let big = generate_sessions(&feeder, 2000, &behavior, 0, 9).unwrap();
    let small = generate_sessions(&feeder, 300, &behavior, 0, 9).unwrap();
    assert_eq!(&big[..300], &small[..]);
    assert_eq!(
        big,
        generate_sessions(&feeder, 2000, &behavior, 0, 9).unwrap()
    );

    let residential: std::collections::BTreeSet<&str> = feeder
        .loads
        .iter()
        .filter(|l| l.customer_class == CustomerClass::Residential)
        .map(|l| l.bus.as_str())
        .collect();
    let share = big
        .iter()
        .filter(|s| residential.contains(s.bus.as_str()))
        .count() as f64
        / big.len() as f64;
    let sigma = (0.8f64 * 0.2 / 2000.0).sqrt();
    assert!((share - 0.8).abs() < 4.0 * sigma, "share {share}");
    for s in &big {
        s.check().unwrap();
    }
    let other_day = generate_sessions(&feeder, 2000, &behavior, 1, 9).unwrap();
    assert!(big
        .iter()
        .zip(&other_day)
        .all(|(a, b)| a.bus == b.bus && a.session_id == b.session_id));
}
