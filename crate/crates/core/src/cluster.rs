//! Clustering of event feature vectors: z-score normalisation, seeded
//! k-means++ with Lloyd iterations, silhouette and Calinski-Harabasz scores,
//! and selection of the number of clusters.

use std::io::Write;
use std::ops::RangeInclusive;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventFeatures;

pub const MAX_ITERATIONS: usize = 300;
pub const SHIFT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_RESTARTS: usize = 10;

/// Z-scored feature rows plus what is needed to undo the transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    /// Normalised rows.
    pub rows: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    /// Population standard deviations.
    pub stds: Vec<f64>,
    /// Columns with no variance; their normalised values are all 0.
    pub zero_variance: Vec<bool>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.zero_variance[j] {
                    self.means[j]
                } else {
                    v * self.stds[j] + self.means[j]
                }
            })
            .collect()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Z-scores every column with the population standard deviation. Columns
/// are named `x0`, `x1`, ...
pub fn normalize(rows: &[Vec<f64>]) -> Result<FeatureMatrix> {
    let dim = rows.first().map_or(0, Vec::len);
    let names: Vec<String> = (0..dim).map(|j| format!("x{j}")).collect();
    normalize_named(rows, names)
}

pub fn normalize_events(features: &[EventFeatures]) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<f64>> = features.iter().map(|f| f.to_array().to_vec()).collect();
    normalize_named(&rows, EventFeatures::NAMES.iter().map(|s| s.to_string()).collect())
}

pub fn normalize_named(rows: &[Vec<f64>], names: Vec<String>) -> Result<FeatureMatrix> {
    if rows.len() < 2 {
        return Err(Error::Cluster(format!(
            "normalisation needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    let dim = names.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::Cluster(format!("row {i} has {} columns, expected {dim}", r.len())));
        }
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::Cluster(format!("row {i} column {} is not finite", names[j])));
        }
    }
    let n = rows.len() as f64;
    let mut means = vec![0.0; dim];
    let mut stds = vec![0.0; dim];
    let mut zero_variance = vec![false; dim];
    for j in 0..dim {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
        means[j] = m;
        stds[j] = var.sqrt();
        // Rounding in the mean leaves a residue for constant columns.
        zero_variance[j] = stds[j] <= 1e-12 * m.abs().max(1e-300);
    }
    let z = rows
        .iter()
        .map(|r| {
            (0..dim)
                .map(|j| {
                    if zero_variance[j] {
                        0.0
                    } else {
                        (r[j] - means[j]) / stds[j]
                    }
                })
                .collect()
        })
        .collect();
    Ok(FeatureMatrix {
        names,
        rows: z,
        means,
        stds,
        zero_variance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    /// Normalised space.
    pub centroids: Vec<Vec<f64>>,
    /// Original feature units.
    pub centroids_raw: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
    /// `None` when fewer than two clusters.
    pub silhouette: Option<f64>,
    /// `None` unless 1 < k < n.
    pub calinski_harabasz: Option<ChScore>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChScore {
    /// `f64::MAX` when the within-cluster sum of squares is zero.
    pub value: f64,
    pub degenerate: bool,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let d = dist2(p, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc >= target {
                    pick = Some(i);
                    break;
                }
            }
            // Round-off can leave the target just above the final sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // Every remaining point coincides with a centre.
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

struct Run {
    centroids: Vec<Vec<f64>>,
    labels: Vec<usize>,
    inertia: f64,
    trace: Vec<f64>,
    iterations: usize,
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, p) in points.iter().enumerate() {
        let (c, d) = nearest(p, centroids);
        labels[i] = c;
        inertia += d;
    }
    inertia
}

/// Moves the point farthest from its centroid into each empty cluster.
/// Donor clusters keep at least one point.
fn repair_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], labels: &mut [usize], k: usize) -> bool {
    let mut repaired = false;
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return repaired;
        };
        let far = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .map(|i| (i, dist2(&points[i], &centroids[labels[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            })
            .map(|(i, _)| i)
            .expect("k <= n leaves a donor cluster");
        labels[far] = empty;
        centroids[empty] = points[far].clone();
        repaired = true;
    }
}

fn update(points: &[Vec<f64>], labels: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= c as f64;
        }
    }
    sums
}

fn inertia_of(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| dist2(p, &centroids[l]))
        .sum()
}

fn lloyd(points: &[Vec<f64>], k: usize, seed: u64) -> Run {
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(points, k, &mut rng);
    let mut labels = vec![0; points.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut inertia = assign(points, &centroids, &mut labels);
        if repair_empty(points, &mut centroids, &mut labels, k) {
            inertia = inertia_of(points, &centroids, &labels);
        }
        let next = update(points, &labels, k, dim);
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| dist(a, b))
            .fold(0.0, f64::max);
        centroids = next;
        trace.push(inertia);
        if shift < SHIFT_TOLERANCE || iterations >= MAX_ITERATIONS {
            break;
        }
    }
    // Final labels consistent with the final centroids.
    assign(points, &centroids, &mut labels);
    if repair_empty(points, &mut centroids, &mut labels, k) {
        centroids = update(points, &labels, k, dim);
    }
    let inertia = inertia_of(points, &centroids, &labels);
    Run {
        centroids,
        labels,
        inertia,
        trace,
        iterations,
    }
}

/// Renumbers clusters in order of first appearance.
fn canonical(run: &mut Run, k: usize) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &run.labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    let mut centroids = vec![Vec::new(); k];
    for (old, &new) in map.iter().enumerate() {
        centroids[new] = std::mem::take(&mut run.centroids[old]);
    }
    run.centroids = centroids;
    for l in run.labels.iter_mut() {
        *l = map[*l];
    }
}

fn check_k(matrix: &FeatureMatrix, k: usize) -> Result<()> {
    if k == 0 || k > matrix.len() {
        return Err(Error::Cluster(format!(
            "k = {k} must be within 1..={}",
            matrix.len()
        )));
    }
    Ok(())
}

fn finish(matrix: &FeatureMatrix, mut run: Run, k: usize, seed: u64) -> ClusterModel {
    canonical(&mut run, k);
    let mut sizes = vec![0; k];
    for &l in &run.labels {
        sizes[l] += 1;
    }
    let silhouette = (k >= 2).then(|| silhouette(matrix, &run.labels).ok()).flatten();
    let calinski_harabasz = calinski_harabasz(matrix, &run.labels).ok();
    ClusterModel {
        k,
        centroids_raw: run.centroids.iter().map(|c| matrix.denormalize(c)).collect(),
        centroids: run.centroids,
        labels: run.labels,
        sizes,
        inertia: run.inertia,
        inertia_trace: run.trace,
        iterations: run.iterations,
        silhouette,
        calinski_harabasz,
        seed,
    }
}

/// One k-means++ initialisation followed by Lloyd iterations.
pub fn kmeans(matrix: &FeatureMatrix, k: usize, seed: u64) -> Result<ClusterModel> {
    check_k(matrix, k)?;
    let run = lloyd(&matrix.rows, k, seed);
    Ok(finish(matrix, run, k, seed))
}

/// Seeds for `restarts` runs derived from `seed`.
pub fn restart_seeds(seed: u64, restarts: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..restarts).map(|_| rng.next_u64()).collect()
}

/// Best of `restarts` seeded runs by inertia; ties go to the earlier run.
pub fn kmeans_restarts(matrix: &FeatureMatrix, k: usize, seed: u64, restarts: usize) -> Result<ClusterModel> {
    check_k(matrix, k)?;
    if restarts == 0 {
        return Err(Error::Cluster("at least one restart is required".into()));
    }
    let runs: Vec<Run> = restart_seeds(seed, restarts)
        .into_par_iter()
        .map(|s| lloyd(&matrix.rows, k, s))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.inertia < a.inertia { b } else { a })
        .unwrap();
    Ok(finish(matrix, best, k, seed))
}

fn groups(labels: &[usize]) -> Result<Vec<Vec<usize>>> {
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut g = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        g[l].push(i);
    }
    if let Some(c) = g.iter().position(Vec::is_empty) {
        return Err(Error::Cluster(format!("cluster {c} is empty")));
    }
    Ok(g)
}

/// Mean silhouette with Euclidean distance. Members of singleton clusters
/// score 0; a point with zero intra-cluster distance scores 1 unless the
/// nearest other cluster is also at distance 0.
pub fn silhouette(matrix: &FeatureMatrix, labels: &[usize]) -> Result<f64> {
    Ok(mean_of(&silhouette_samples(matrix, labels)?))
}

pub fn silhouette_samples(matrix: &FeatureMatrix, labels: &[usize]) -> Result<Vec<f64>> {
    if labels.len() != matrix.len() {
        return Err(Error::Cluster("one label per row is required".into()));
    }
    let g = groups(labels)?;
    if g.len() < 2 {
        return Err(Error::Cluster("silhouette needs at least 2 clusters".into()));
    }
    let pts = &matrix.rows;
    let s = (0..pts.len())
        .map(|i| {
            let own = &g[labels[i]];
            if own.len() == 1 {
                return 0.0;
            }
            let a = own.iter().filter(|&&j| j != i).map(|&j| dist(&pts[i], &pts[j])).sum::<f64>()
                / (own.len() - 1) as f64;
            let b = g
                .iter()
                .enumerate()
                .filter(|(c, _)| *c != labels[i])
                .map(|(_, m)| m.iter().map(|&j| dist(&pts[i], &pts[j])).sum::<f64>() / m.len() as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    Ok(s)
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Between-cluster dispersion over within-cluster dispersion, each divided
/// by its degrees of freedom.
pub fn calinski_harabasz(matrix: &FeatureMatrix, labels: &[usize]) -> Result<ChScore> {
    if labels.len() != matrix.len() {
        return Err(Error::Cluster("one label per row is required".into()));
    }
    let g = groups(labels)?;
    let (n, k) = (matrix.len(), g.len());
    if !(1 < k && k < n) {
        return Err(Error::Cluster(format!("Calinski-Harabasz needs 1 < k < n, got k = {k}, n = {n}")));
    }
    let dim = matrix.dim();
    let pts = &matrix.rows;
    let overall: Vec<f64> = (0..dim).map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
    let mut between = 0.0;
    let mut within = 0.0;
    for members in &g {
        let c: Vec<f64> = (0..dim)
            .map(|j| members.iter().map(|&i| pts[i][j]).sum::<f64>() / members.len() as f64)
            .collect();
        between += members.len() as f64 * dist2(&c, &overall);
        within += members.iter().map(|&i| dist2(&pts[i], &c)).sum::<f64>();
    }
    if within == 0.0 {
        return Ok(ChScore {
            value: f64::MAX,
            degenerate: true,
        });
    }
    Ok(ChScore {
        value: (between / (k - 1) as f64) / (within / (n - k) as f64),
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub inertia: f64,
    pub silhouette: f64,
    pub calinski_harabasz: f64,
    pub ch_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub model: ClusterModel,
    pub scores: Vec<KScore>,
}

/// Runs [`kmeans_restarts`] with [`DEFAULT_RESTARTS`] for every k and keeps
/// the highest silhouette; ties go to the higher Calinski-Harabasz score,
/// then to the smaller k.
pub fn select_k(matrix: &FeatureMatrix, k_range: RangeInclusive<usize>, seed: u64) -> Result<KSelection> {
    if k_range.is_empty() {
        return Err(Error::Cluster("empty k range".into()));
    }
    let n = matrix.len();
    if *k_range.start() < 2 || *k_range.end() + 1 > n {
        return Err(Error::Cluster(format!(
            "k range {}..={} must lie within 2..={}",
            k_range.start(),
            k_range.end(),
            n.saturating_sub(1)
        )));
    }
    let mut best: Option<ClusterModel> = None;
    let mut scores = Vec::new();
    for k in k_range {
        let model = kmeans_restarts(matrix, k, seed, DEFAULT_RESTARTS)?;
        let sil = model.silhouette.unwrap_or(f64::NEG_INFINITY);
        let ch = model.calinski_harabasz.map_or(f64::NEG_INFINITY, |c| c.value);
        scores.push(KScore {
            k,
            inertia: model.inertia,
            silhouette: sil,
            calinski_harabasz: ch,
            ch_degenerate: model.calinski_harabasz.is_some_and(|c| c.degenerate),
        });
        let better = match &best {
            None => true,
            Some(b) => {
                let bs = b.silhouette.unwrap_or(f64::NEG_INFINITY);
                let bc = b.calinski_harabasz.map_or(f64::NEG_INFINITY, |c| c.value);
                sil > bs || (sil == bs && ch > bc)
            }
        };
        if better {
            best = Some(model);
        }
    }
    Ok(KSelection {
        model: best.unwrap(),
        scores,
    })
}

/// Post-hoc event type labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SdeType {
    SeverePowerDeficit,
    PowerDeficit,
    Cascading,
    EnergyDeficit,
}

impl SdeType {
    pub const ORDER: [SdeType; 4] = [
        SdeType::SeverePowerDeficit,
        SdeType::PowerDeficit,
        SdeType::Cascading,
        SdeType::EnergyDeficit,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SdeType::SeverePowerDeficit => "S",
            SdeType::PowerDeficit => "P",
            SdeType::Cascading => "C",
            SdeType::EnergyDeficit => "E",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SdeType::SeverePowerDeficit => "severe power deficit",
            SdeType::PowerDeficit => "power deficit",
            SdeType::Cascading => "cascading",
            SdeType::EnergyDeficit => "energy deficit",
        }
    }
}

/// Names clusters by ordering their centroids by peak back-up discharge
/// (descending) and then duration (ascending). Clusters beyond the fourth
/// stay unnamed.
pub fn name_clusters(matrix: &FeatureMatrix, model: &ClusterModel) -> Result<Vec<Option<SdeType>>> {
    let fc = matrix
        .column("max_fc_discharge_gw")
        .ok_or_else(|| Error::Cluster("no max_fc_discharge_gw column".into()))?;
    let dur = matrix
        .column("duration_h")
        .ok_or_else(|| Error::Cluster("no duration_h column".into()))?;
    let mut order: Vec<usize> = (0..model.k).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&model.centroids_raw[a], &model.centroids_raw[b]);
        cb[fc].total_cmp(&ca[fc]).then(ca[dur].total_cmp(&cb[dur])).then(a.cmp(&b))
    });
    let mut names = vec![None; model.k];
    for (rank, &c) in order.iter().enumerate() {
        names[c] = SdeType::ORDER.get(rank).copied();
    }
    Ok(names)
}

/// `k,inertia,silhouette,calinski_harabasz,ch_degenerate`
pub fn write_scores_csv<W: Write>(writer: W, scores: &[KScore]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "inertia", "silhouette", "calinski_harabasz", "ch_degenerate"])?;
    for s in scores {
        w.write_record([
            s.k.to_string(),
            s.inertia.to_string(),
            s.silhouette.to_string(),
            s.calinski_harabasz.to_string(),
            s.ch_degenerate.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// One row per cluster with its type tag, size and centroid in original
/// units.
pub fn write_centroids_csv<W: Write>(
    writer: W,
    matrix: &FeatureMatrix,
    model: &ClusterModel,
    names: &[Option<SdeType>],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["cluster".to_string(), "type".into(), "size".into()];
    header.extend(matrix.names.iter().cloned());
    w.write_record(&header)?;
    for c in 0..model.k {
        let mut row = vec![
            c.to_string(),
            names.get(c).copied().flatten().map_or("", SdeType::tag).to_string(),
            model.sizes[c].to_string(),
        ];
        row.extend(model.centroids_raw[c].iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
