//! Feeder feature extraction, PCA, k-means and representative selection.
//!
//! The numeric feature vector always uses the column order in [`FEATURE_NAMES`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::symmetric_eigen;
use crate::model::{CustomerClass, Feeder};
use crate::powerflow::{DayType, ProfileStore};
use crate::HOURS;

pub const FEATURE_COUNT: usize = 14;

/// Column order of [`FeederFeatures::to_vector`].
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "voltage_level_kv",
    "peak_base_load_kw",
    "peak_ev_load_kw",
    "total_transformer_capacity_kva",
    "transformers_1ph",
    "transformers_2ph",
    "transformers_3ph",
    "lines_1ph",
    "lines_2ph",
    "lines_3ph",
    "residential_kw",
    "commercial_kw",
    "industrial_kw",
    "mixed_kw",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeederFeatures {
    pub feeder_id: String,
    pub voltage_level_kv: f64,
    pub peak_base_load_kw: f64,
    pub peak_ev_load_kw: f64,
    pub total_transformer_capacity_kva: f64,
    /// Counts of 1-, 2- and 3-phase transformers.
    pub transformer_phase_counts: [u32; 3],
    /// Counts of 1-, 2- and 3-phase line segments.
    pub line_phase_counts: [u32; 3],
    /// Connected kW per customer class, in [`CustomerClass::ALL`] order.
    pub class_load_kw: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("load `{load}` references missing profile `{profile}` for {day:?}")]
    MissingProfile {
        load: String,
        profile: String,
        day: DayType,
    },
    #[error("feeder has no source bus")]
    NoSource,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("feature vectors must all have the same length")]
    Ragged,
    #[error("k = {k} is outside 1..={points}")]
    BadK { k: usize, points: usize },
    #[error("k range must be ascending with at least 3 values inside 1..={points}")]
    BadRange { points: usize },
    #[error("feature vector has {0} columns, expected {FEATURE_COUNT}")]
    Width(usize),
}

impl FeederFeatures {
    pub fn to_vector(&self) -> [f64; FEATURE_COUNT] {
        let t = self.transformer_phase_counts;
        let l = self.line_phase_counts;
        let c = self.class_load_kw;
        [
            self.voltage_level_kv,
            self.peak_base_load_kw,
            self.peak_ev_load_kw,
            self.total_transformer_capacity_kva,
            f64::from(t[0]),
            f64::from(t[1]),
            f64::from(t[2]),
            f64::from(l[0]),
            f64::from(l[1]),
            f64::from(l[2]),
            c[0],
            c[1],
            c[2],
            c[3],
        ]
    }

    pub fn from_vector(feeder_id: String, v: &[f64]) -> Result<Self, ClusterError> {
        if v.len() != FEATURE_COUNT {
            return Err(ClusterError::Width(v.len()));
        }
        let count = |x: f64| x.round().max(0.0) as u32;
        Ok(FeederFeatures {
            feeder_id,
            voltage_level_kv: v[0],
            peak_base_load_kw: v[1],
            peak_ev_load_kw: v[2],
            total_transformer_capacity_kva: v[3],
            transformer_phase_counts: [count(v[4]), count(v[5]), count(v[6])],
            line_phase_counts: [count(v[7]), count(v[8]), count(v[9])],
            class_load_kw: [v[10], v[11], v[12], v[13]],
        })
    }
}

/// Builds the feature vector of one feeder.
///
/// `ev_feeder_kw` holds the feeder-total unmanaged EV demand for each
/// representative day (any number of rows, including none).
pub fn extract_features(
    feeder: &Feeder,
    profiles: &ProfileStore,
    ev_feeder_kw: &[[f64; HOURS]],
) -> Result<FeederFeatures, ClusterError> {
    let source = feeder.source().ok_or(ClusterError::NoSource)?;
    let mut peak_base: f64 = 0.0;
    for day in DayType::ALL {
        let mut total = [0.0; HOURS];
        for ld in &feeder.loads {
            let shape =
                profiles
                    .get(&ld.profile_id, day)
                    .ok_or_else(|| ClusterError::MissingProfile {
                        load: ld.id.clone(),
                        profile: ld.profile_id.clone(),
                        day,
                    })?;
            for h in 0..HOURS {
                total[h] += ld.peak_kw * shape[h];
            }
        }
        peak_base = total.iter().fold(peak_base, |m, x| m.max(*x));
    }
    let peak_ev = ev_feeder_kw.iter().flatten().fold(0.0f64, |m, x| m.max(*x));

    let mut transformer_phase_counts = [0u32; 3];
    let mut capacity = 0.0;
    for t in &feeder.transformers {
        let idx = usize::from(t.phase_count.clamp(1, 3)) - 1;
        transformer_phase_counts[idx] += 1;
        capacity += t.rating_kva;
    }
    let mut line_phase_counts = [0u32; 3];
    for l in &feeder.lines {
        let n = l.phases.len().clamp(1, 3);
        line_phase_counts[n - 1] += 1;
    }
    let mut class_load_kw = [0.0; 4];
    for ld in &feeder.loads {
        class_load_kw[ld.customer_class.index()] += ld.peak_kw;
    }
    debug_assert_eq!(CustomerClass::ALL.len(), 4);

    Ok(FeederFeatures {
        feeder_id: feeder.id.clone(),
        voltage_level_kv: source.nominal_voltage_kv,
        peak_base_load_kw: peak_base,
        peak_ev_load_kw: peak_ev,
        total_transformer_capacity_kva: capacity,
        transformer_phase_counts,
        line_phase_counts,
        class_load_kw,
    })
}

/// Z-score standardization followed by a principal-component projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Indices of the input features that carry variance; the others were dropped.
    pub kept_features: Vec<usize>,
    /// Retained components as orthonormal rows over the kept features.
    pub components: Vec<Vec<f64>>,
    /// Share of total standardized variance explained by each retained component.
    pub explained_variance_ratio: Vec<f64>,
}

pub fn fit_pca(vectors: &[Vec<f64>], variance_target: f64) -> Result<PcaModel, ClusterError> {
    let n = vectors.len();
    if n < 2 {
        return Err(ClusterError::TooFewSamples(n));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(ClusterError::Ragged);
    }
    let mut means = vec![0.0; dim];
    let mut scales = vec![0.0; dim];
    for j in 0..dim {
        let mean = vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64;
        let var = vectors
            .iter()
            .map(|v| (v[j] - mean) * (v[j] - mean))
            .sum::<f64>()
            / n as f64;
        means[j] = mean;
        scales[j] = var.sqrt();
    }
    let kept_features: Vec<usize> = (0..dim)
        .filter(|&j| scales[j] > 1e-12 * means[j].abs().max(1.0))
        .collect();
    let m = kept_features.len();
    let z: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| {
            kept_features
                .iter()
                .map(|&j| (v[j] - means[j]) / scales[j])
                .collect()
        })
        .collect();
    let mut cov = vec![vec![0.0; m]; m];
    for row in &z {
        for a in 0..m {
            for b in a..m {
                cov[a][b] += row[a] * row[b] / n as f64;
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            cov[a][b] = cov[b][a];
        }
    }
    let (values, mut vectors_out) = symmetric_eigen(&cov);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    for row in vectors_out.iter_mut() {
        let pivot = row.iter().copied().fold(0.0f64, |best, x| {
            if x.abs() > best.abs() + 1e-12 {
                x
            } else {
                best
            }
        });
        if pivot < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let mut components = Vec::new();
    let mut explained_variance_ratio = Vec::new();
    let mut cumulative = 0.0;
    for (value, row) in values.iter().zip(vectors_out) {
        if total <= 0.0 || cumulative >= variance_target - 1e-12 {
            break;
        }
        let ratio = value.max(0.0) / total;
        cumulative += ratio;
        components.push(row);
        explained_variance_ratio.push(ratio);
    }
    Ok(PcaModel {
        means,
        scales,
        kept_features,
        components,
        explained_variance_ratio,
    })
}

impl PcaModel {
    pub fn standardize(&self, v: &[f64]) -> Vec<f64> {
        self.kept_features
            .iter()
            .map(|&j| (v[j] - self.means[j]) / self.scales[j])
            .collect()
    }

    pub fn transform(&self, v: &[f64]) -> Vec<f64> {
        let z = self.standardize(v);
        self.components
            .iter()
            .map(|c| c.iter().zip(&z).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maps reduced coordinates back to standardized feature space.
    pub fn inverse_standardized(&self, reduced: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.kept_features.len()];
        for (c, r) in self.components.iter().zip(reduced) {
            for (zi, ci) in z.iter_mut().zip(c) {
                *zi += r * ci;
            }
        }
        z
    }

    /// Maps reduced coordinates back to raw features; dropped features take their mean.
    pub fn inverse_transform(&self, reduced: &[f64]) -> Vec<f64> {
        let z = self.inverse_standardized(reduced);
        let mut out = self.means.clone();
        for (zi, &j) in z.iter().zip(&self.kept_features) {
            out[j] = self.means[j] + zi * self.scales[j];
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index of each input point.
    pub assignments: Vec<usize>,
    pub wcss: f64,
    pub seed: u64,
    /// WCSS after each Lloyd iteration of the winning restart.
    pub wcss_history: Vec<f64>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(p, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn means_of(points: &[Vec<f64>], assignments: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            s.iter_mut().for_each(|x| *x /= n as f64);
        }
    }
    (sums, counts)
}

fn wcss_of(points: &[Vec<f64>], assignments: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| dist2(p, &centroids[a]))
        .sum()
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut x = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if x < *d {
                    chosen = i;
                    break;
                }
                x -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &points[pick]));
        }
    }
    centroids
}

/// Single-point moves that lower WCSS, repeated until none remain.
fn refine(points: &[Vec<f64>], assignments: &mut [usize], k: usize) {
    for _pass in 0..1000 {
        let (centroids, counts) = means_of(points, assignments, k);
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let a = assignments[i];
            if counts[a] <= 1 {
                continue;
            }
            let na = counts[a] as f64;
            let removal = na / (na - 1.0) * dist2(p, &centroids[a]);
            let mut best: Option<(usize, f64)> = None;
            for b in (0..k).filter(|&b| b != a) {
                let nb = counts[b] as f64;
                let add = nb / (nb + 1.0) * dist2(p, &centroids[b]);
                let gain = removal - add;
                if gain > 1e-12 * removal.max(1e-300) && best.is_none_or(|(_, g)| gain > g) {
                    best = Some((b, gain));
                }
            }
            if let Some((b, _)) = best {
                assignments[i] = b;
                moved = true;
                break;
            }
        }
        if !moved {
            return;
        }
    }
}

fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng, max_iter: usize) -> ClusterModel {
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let (mut next, counts) = means_of(points, &assignments, k);
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .max_by(|&i, &j| {
                        dist2(&points[i], &next[assignments[i]])
                            .total_cmp(&dist2(&points[j], &next[assignments[j]]))
                            .then(j.cmp(&i))
                    })
                    .unwrap_or(0);
                next[c] = points[far].clone();
                assignments[far] = c;
            }
        }
        centroids = means_of(points, &assignments, k).0;
        history.push(wcss_of(points, &assignments, &centroids));
        let updated: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if updated == assignments {
            break;
        }
        assignments = updated;
    }
    refine(points, &mut assignments, k);
    let (centroids, _) = means_of(points, &assignments, k);
    let wcss = wcss_of(points, &assignments, &centroids);
    history.push(wcss);
    ClusterModel {
        k,
        centroids,
        assignments,
        wcss,
        seed: 0,
        wcss_history: history,
    }
}

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_LLOYD_ITERATIONS: usize = 300;

/// Best-of-`restarts` k-means with k-means++ seeding.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterModel, ClusterError> {
    if k == 0 || k > points.len() {
        return Err(ClusterError::BadK {
            k,
            points: points.len(),
        });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(ClusterError::Ragged);
    }
    let mut best: Option<ClusterModel> = None;
    for r in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let model = lloyd(points, k, &mut rng, MAX_LLOYD_ITERATIONS);
        if best
            .as_ref()
            .is_none_or(|b| model.wcss < b.wcss * (1.0 - 1e-12) - 1e-300)
        {
            best = Some(model);
        }
    }
    let mut model = best.expect("at least one restart");
    model.seed = seed;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    pub ks: Vec<usize>,
    pub wcss: Vec<f64>,
    pub chosen_k: usize,
}

/// Picks k at the sharpest bend of the WCSS curve, measured as the largest
/// second difference of `ln(WCSS)`. Ties go to the smallest k.
pub fn elbow_select(
    points: &[Vec<f64>],
    k_range: &[usize],
    seed: u64,
    restarts: usize,
) -> Result<ElbowResult, ClusterError> {
    let n = points.len();
    let ascending = k_range.windows(2).all(|w| w[1] == w[0] + 1);
    if k_range.len() < 3 || !ascending || k_range[0] == 0 || k_range[k_range.len() - 1] > n {
        return Err(ClusterError::BadRange { points: n });
    }
    let mut wcss = Vec::with_capacity(k_range.len());
    for &k in k_range {
        wcss.push(kmeans(points, k, seed, restarts)?.wcss);
    }
    for i in 1..wcss.len() {
        if wcss[i] > wcss[i - 1] {
            wcss[i] = wcss[i - 1];
        }
    }
    let floor = (wcss[0] * 1e-12).max(1e-300);
    let logs: Vec<f64> = wcss.iter().map(|w| w.max(floor).ln()).collect();
    let mut chosen = k_range[1];
    let mut best = f64::NEG_INFINITY;
    for i in 1..logs.len() - 1 {
        let d2 = logs[i - 1] - 2.0 * logs[i] + logs[i + 1];
        if d2 > best + 1e-9 {
            best = d2;
            chosen = k_range[i];
        }
    }
    Ok(ElbowResult {
        ks: k_range.to_vec(),
        wcss,
        chosen_k: chosen,
    })
}

/// Per cluster, the member closest to the centroid; ties go to the smaller id.
/// Empty clusters get `None`.
pub fn select_representatives(
    model: &ClusterModel,
    points: &[Vec<f64>],
    ids: &[String],
) -> Vec<Option<usize>> {
    let mut reps: Vec<Option<(usize, f64)>> = vec![None; model.k];
    for (i, p) in points.iter().enumerate() {
        let c = model.assignments[i];
        let d = dist2(p, &model.centroids[c]).sqrt();
        let better = match reps[c] {
            None => true,
            Some((j, best)) => {
                let tol = 1e-12 * best.max(1.0);
                d < best - tol || ((d - best).abs() <= tol && ids[i] < ids[j])
            }
        };
        if better {
            reps[c] = Some((i, d));
        }
    }
    reps.into_iter().map(|r| r.map(|(i, _)| i)).collect()
}

/// Adjusted Rand index between two labelings of the same points.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&x| c2(x)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterOptions {
    pub variance_target: f64,
    pub k_min: usize,
    pub k_max: usize,
    /// Skip the elbow search and use this k.
    pub fixed_k: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            variance_target: 0.95,
            k_min: 1,
            k_max: 10,
            fixed_k: None,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub feeder_id: String,
    pub cluster: usize,
    pub distance_to_centroid: f64,
    pub is_representative: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub pca: PcaModel,
    pub elbow: Option<ElbowResult>,
    pub model: ClusterModel,
    /// Representative feeder id per cluster.
    pub representatives: Vec<Option<String>>,
    /// One row per feeder, sorted by feeder id.
    pub rows: Vec<ClusterRow>,
}

/// Full pipeline: standardize, project, choose k, cluster, pick representatives.
/// Feeders are processed in id order, so the result does not depend on input order.
pub fn cluster_feeders(
    features: &[FeederFeatures],
    options: &ClusterOptions,
) -> Result<ClusterReport, ClusterError> {
    let mut sorted: Vec<&FeederFeatures> = features.iter().collect();
    sorted.sort_by(|a, b| a.feeder_id.cmp(&b.feeder_id));
    let ids: Vec<String> = sorted.iter().map(|f| f.feeder_id.clone()).collect();
    let raw: Vec<Vec<f64>> = sorted.iter().map(|f| f.to_vector().to_vec()).collect();
    let pca = fit_pca(&raw, options.variance_target)?;
    let reduced: Vec<Vec<f64>> = raw.iter().map(|v| pca.transform(v)).collect();
    let n = reduced.len();
    let (k, elbow) = match options.fixed_k {
        Some(k) => (k, None),
        None => {
            let hi = options.k_max.min(n);
            let lo = options.k_min.max(1);
            if hi < lo + 2 {
                return Err(ClusterError::BadRange { points: n });
            }
            let range: Vec<usize> = (lo..=hi).collect();
            let e = elbow_select(&reduced, &range, options.seed, options.restarts)?;
            (e.chosen_k, Some(e))
        }
    };
    let model = kmeans(&reduced, k, options.seed, options.restarts)?;
    let reps = select_representatives(&model, &reduced, &ids);
    let rows = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let c = model.assignments[i];
            ClusterRow {
                feeder_id: id.clone(),
                cluster: c,
                distance_to_centroid: dist2(&reduced[i], &model.centroids[c]).sqrt(),
                is_representative: reps[c] == Some(i),
            }
        })
        .collect();
    Ok(ClusterReport {
        pca,
        elbow,
        representatives: reps.iter().map(|r| r.map(|i| ids[i].clone())).collect(),
        model,
        rows,
    })
}
