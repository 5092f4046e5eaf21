use evgrid_core::clustering::{
    adjusted_rand_index, cluster_feeders, elbow_select, extract_features, fit_pca, kmeans,
    ClusterOptions, FeederFeatures,
};
use evgrid_core::powerflow::{DayType, ProfileStore};
use evgrid_core::synth::{generate_synthetic_feeder, standard_profiles, SyntheticFeederSpec};
use evgrid_core::HOURS;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn blobs(seed: u64, per: usize, dim: usize, centers: &[f64]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..per {
            pts.push(
                (0..dim)
                    .map(|d| c * (1.0 + d as f64 * 0.5) + noise.sample(&mut rng))
                    .collect(),
            );
            labels.push(label);
        }
    }
    (pts, labels)
}

#[test]
fn blobs_recovered_exactly() {
    let (pts, labels) = blobs(11, 30, 4, &[0.0, 10.0, 20.0]);
    let model = kmeans(&pts, 3, 7, 10).unwrap();
    assert_eq!(adjusted_rand_index(&model.assignments, &labels), 1.0);
    let range: Vec<usize> = (1..=8).collect();
    let elbow = elbow_select(&pts, &range, 7, 10).unwrap();
    assert_eq!(elbow.chosen_k, 3, "{:?}", elbow.wcss);
    assert!(elbow.wcss.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn uniform_cloud_curve_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
        .collect();
    let range: Vec<usize> = (1..=8).collect();
    let elbow = elbow_select(&pts, &range, 2, 10).unwrap();
    assert!(elbow.wcss.windows(2).all(|w| w[1] <= w[0]));
    assert!(range[1..7].contains(&elbow.chosen_k));
}

#[test]
fn wcss_non_increasing_within_run() {
    let (pts, _) = blobs(3, 25, 3, &[0.0, 4.0, 6.0, 9.0]);
    for k in 1..=6 {
        let model = kmeans(&pts, k, 5, 4).unwrap();
        for w in model.wcss_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}

#[test]
fn pca_full_rank_round_trip_and_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            (0..5)
                .map(|d| rng.random::<f64>() * (d as f64 + 1.0))
                .collect()
        })
        .collect();
    let pca = fit_pca(&pts, 1.0).unwrap();
    assert_eq!(pca.components.len(), 5);
    for i in 0..5 {
        for j in 0..5 {
            let dot: f64 = pca.components[i]
                .iter()
                .zip(&pca.components[j])
                .map(|(a, b)| a * b)
                .sum();
            assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
        }
    }
    assert!(pca.explained_variance_ratio.iter().sum::<f64>() <= 1.0 + 1e-12);
    for p in &pts {
        let back = pca.inverse_standardized(&pca.transform(p));
        let z = pca.standardize(p);
        for (a, b) in back.iter().zip(&z) {
            assert!((a - b).abs() < 1e-8);
        }
        let raw = pca.inverse_transform(&pca.transform(p));
        for (a, b) in raw.iter().zip(p) {
            assert!((a - b).abs() < 1e-8);
        }
    }
    assert!(fit_pca(&pts[..1], 0.95).is_err());
}

fn corpus() -> (Vec<FeederFeatures>, ProfileStore) {
    let mut profiles = ProfileStore::new();
    for p in standard_profiles() {
        profiles.insert(p).unwrap();
    }
    let feats = (0..12u64)
        .map(|i| {
            let spec = SyntheticFeederSpec {
                id: format!("f{i:02}"),
                bus_count: 10 + 6 * (i as usize % 4),
                seed: i,
                ..Default::default()
            };
            let feeder = generate_synthetic_feeder(&spec).unwrap();
            extract_features(&feeder, &profiles, &[[i as f64 * 3.0; HOURS]]).unwrap()
        })
        .collect();
    (feats, profiles)
}

#[test]
fn pipeline_deterministic_and_scale_robust() {
    let (feats, _) = corpus();
    let opts = ClusterOptions {
        k_max: 6,
        seed: 42,
        ..Default::default()
    };
    let a = cluster_feeders(&feats, &opts).unwrap();
    let mut shuffled = feats.clone();
    shuffled.reverse();
    let b = cluster_feeders(&shuffled, &opts).unwrap();
    assert_eq!(a, b);
    for r in &a.representatives {
        assert!(r.is_some());
    }
    let scaled: Vec<FeederFeatures> = feats
        .iter()
        .map(|f| FeederFeatures {
            peak_base_load_kw: f.peak_base_load_kw * 1000.0,
            ..f.clone()
        })
        .collect();
    let c = cluster_feeders(&scaled, &opts).unwrap();
    assert_eq!(a.model.assignments, c.model.assignments);
    assert_eq!(a.representatives, c.representatives);
}

#[test]
fn features_match_recount() {
    let mut profiles = ProfileStore::new();
    for p in standard_profiles() {
        profiles.insert(p).unwrap();
    }
    let feeder = generate_synthetic_feeder(&SyntheticFeederSpec {
        id: "s1".into(),
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let f = extract_features(&feeder, &profiles, &[]).unwrap();
    assert_eq!(f.peak_ev_load_kw, 0.0);

    let mut tx = [0u32; 3];
    let mut cap = 0.0;
    for t in &feeder.transformers {
        tx[t.phase_count as usize - 1] += 1;
        cap += t.rating_kva;
    }
    let mut lines = [0u32; 3];
    for l in &feeder.lines {
        lines[l.phases.to_string().len() - 1] += 1;
    }
    let mut peak: f64 = 0.0;
    for day in DayType::ALL {
        for h in 0..HOURS {
            let total: f64 = feeder
                .loads
                .iter()
                .map(|l| l.peak_kw * profiles.get(&l.profile_id, day).unwrap()[h])
                .sum();
            peak = peak.max(total);
        }
    }
    assert_eq!(f.transformer_phase_counts, tx);
    assert_eq!(f.line_phase_counts, lines);
    assert!((f.total_transformer_capacity_kva - cap).abs() < 1e-9);
    assert!((f.peak_base_load_kw - peak).abs() < 1e-9);
    let v = f.to_vector();
    assert_eq!(
        FeederFeatures::from_vector(f.feeder_id.clone(), &v).unwrap(),
        f
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn assignments_are_single_move_optimal(
        pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 4..30),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        let k = k.min(pts.len());
        let model = kmeans(&pts, k, seed, 3).unwrap();
        prop_assert_eq!(&model, &kmeans(&pts, k, seed, 3).unwrap());
        let wcss = |assign: &[usize]| -> f64 {
            let mut total = 0.0;
            for c in 0..k {
                let members: Vec<&Vec<f64>> = pts.iter().zip(assign).filter(|(_, a)| **a == c).map(|(p, _)| p).collect();
                if members.is_empty() { continue; }
                for d in 0..2 {
                    let mean = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
                    total += members.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>();
                }
            }
            total
        };
        let base = wcss(&model.assignments);
        prop_assert!((base - model.wcss).abs() <= 1e-9 * base.max(1.0));
        for i in 0..pts.len() {
            for c in 0..k {
                if c == model.assignments[i] { continue; }
                let mut moved = model.assignments.clone();
                moved[i] = c;
                prop_assert!(wcss(&moved) >= base - 1e-9 * base.max(1.0));
            }
            let nearest = (0..k).min_by(|&a, &b| {
                let da: f64 = pts[i].iter().zip(&model.centroids[a]).map(|(x, y)| (x - y).powi(2)).sum();
                let db: f64 = pts[i].iter().zip(&model.centroids[b]).map(|(x, y)| (x - y).powi(2)).sum();
                da.total_cmp(&db)
            }).unwrap();
            let dn: f64 = pts[i].iter().zip(&model.centroids[nearest]).map(|(x, y)| (x - y).powi(2)).sum();
            let da: f64 = pts[i].iter().zip(&model.centroids[model.assignments[i]]).map(|(x, y)| (x - y).powi(2)).sum();
            prop_assert!(da <= dn + 1e-9);
        }
    }
}
