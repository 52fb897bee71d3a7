//! Multi-restart Lloyd k-means on coefficient rows, with elbow selection.

use ndarray::Array2;
use rand::prelude::*;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const MAX_LLOYD_ITERATIONS: usize = 300;

/// One clustering of the n rows into g groups.
#[derive(Debug, Clone)]
pub struct ClusterResult {
    /// Cluster ids in 1..=g, one per row.
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    pub wss: f64,
    pub g: usize,
    pub restarts_used: usize,
    pub seed: u64,
}

/// WSS as a function of the candidate cluster count.
#[derive(Debug, Clone)]
pub struct ElbowCurve {
    pub g_values: Vec<usize>,
    pub wss_values: Vec<f64>,
}

fn squared_distance(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Assign each row to its nearest centroid (ties toward the lower id).
fn assign(points: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, f64) {
    let mut assignments = Vec::with_capacity(points.nrows());
    let mut wss = 0.0;
    for row in points.rows() {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.rows().into_iter().enumerate() {
            let d = squared_distance(row, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignments.push(best);
        wss += best_d;
    }
    (assignments, wss)
}

fn recompute_centroids(points: &Array2<f64>, assignments: &[usize], g: usize) -> Array2<f64> {
    let d = points.ncols();
    let mut centroids = Array2::zeros((g, d));
    let mut counts = vec![0usize; g];
    for (i, &c) in assignments.iter().enumerate() {
        counts[c] += 1;
        let mut row = centroids.row_mut(c);
        row += &points.row(i);
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            let mut row = centroids.row_mut(c);
            row /= count as f64;
        }
    }
    centroids
}

/// Move the point farthest from its centroid into each empty cluster.
fn repair_empty_clusters(points: &Array2<f64>, assignments: &mut [usize], g: usize) {
    loop {
        let mut counts = vec![0usize; g];
        for &c in assignments.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let centroids = recompute_centroids(points, assignments, g);
        let mut farthest = 0usize;
        let mut farthest_d = -1.0;
        for (i, row) in points.rows().into_iter().enumerate() {
            if counts[assignments[i]] <= 1 {
                continue;
            }
            let d = squared_distance(row, centroids.row(assignments[i]));
            if d > farthest_d {
                farthest_d = d;
                farthest = i;
            }
        }
        assignments[farthest] = empty;
    }
}

/// Single Lloyd run from seeded initial centroids (g distinct rows).
/// `trace`, when supplied, records the WSS after every assignment step.
fn lloyd_run_traced(
    points: &Array2<f64>,
    g: usize,
    seed: u64,
    mut trace: Option<&mut Vec<f64>>,
) -> (Vec<usize>, Array2<f64>, f64) {
    let n = points.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = sample(&mut rng, n, g);
    let mut centroids = Array2::zeros((g, points.ncols()));
    for (c, i) in chosen.into_iter().enumerate() {
        centroids.row_mut(c).assign(&points.row(i));
    }

    let (mut assignments, mut wss) = assign(points, &centroids);
    if let Some(t) = trace.as_deref_mut() {
        t.push(wss);
    }
    for _ in 0..MAX_LLOYD_ITERATIONS {
        repair_empty_clusters(points, &mut assignments, g);
        centroids = recompute_centroids(points, &assignments, g);
        let (next_assignments, next_wss) = assign(points, &centroids);
        let stable = next_assignments == assignments;
        assignments = next_assignments;
        wss = next_wss;
        if let Some(t) = trace.as_deref_mut() {
            t.push(wss);
        }
        if stable {
            break;
        }
    }
    // iteration cap without stability can leave an empty cluster; patch it up
    // and score the partition as-is
    let mut counts = vec![0usize; g];
    for &c in &assignments {
        counts[c] += 1;
    }
    if counts.contains(&0) {
        repair_empty_clusters(points, &mut assignments, g);
        centroids = recompute_centroids(points, &assignments, g);
        wss = assignments
            .iter()
            .enumerate()
            .map(|(i, &c)| squared_distance(points.row(i), centroids.row(c)))
            .sum();
    }
    (assignments, centroids, wss)
}

fn lloyd_run(points: &Array2<f64>, g: usize, seed: u64) -> (Vec<usize>, Array2<f64>, f64) {
    lloyd_run_traced(points, g, seed, None)
}

/// WSS recorded after every assignment step of one seeded Lloyd run. The
/// sequence is non-increasing; exposed so that can be audited externally.
pub fn lloyd_wss_trace(points: &Array2<f64>, g: usize, seed: u64) -> Result<Vec<f64>> {
    let n = points.nrows();
    if g == 0 || g > n {
        return Err(Error::TooManyClusters { g, n });
    }
    let mut trace = Vec::new();
    lloyd_run_traced(points, g, seed, Some(&mut trace));
    Ok(trace)
}

/// Best-of-restarts k-means; restart seeds derive from `seed + index` and the
/// minimal-WSS reduction breaks ties toward the lowest restart index.
pub fn kmeans_best_of(points: &Array2<f64>, g: usize, restarts: usize, seed: u64) -> Result<ClusterResult> {
    let n = points.nrows();
    if g == 0 || g > n {
        return Err(Error::TooManyClusters { g, n });
    }
    let best = (0..restarts)
        .into_par_iter()
        .map(|idx| {
            let (assignments, centroids, wss) = lloyd_run(points, g, seed.wrapping_add(idx as u64));
            (idx, assignments, centroids, wss)
        })
        .min_by(|a, b| {
            a.3.partial_cmp(&b.3)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        })
        .expect("restarts >= 1");

    let (_, assignments, centroids, wss) = best;
    Ok(ClusterResult {
        assignments: assignments.iter().map(|&c| c + 1).collect(),
        centroids,
        wss,
        g,
        restarts_used: restarts,
        seed,
    })
}

/// WSS curve over candidate g plus the automated elbow suggestion: the
/// interior candidate maximizing the WSS-normalized second difference.
/// The full curve is always returned so a human can override.
pub fn elbow_scan(
    points: &Array2<f64>,
    g_candidates: &[usize],
    restarts: usize,
    seed: u64,
) -> Result<(ElbowCurve, Option<usize>)> {
    let mut wss_values = Vec::with_capacity(g_candidates.len());
    for &g in g_candidates {
        wss_values.push(kmeans_best_of(points, g, restarts, seed)?.wss);
    }
    let curve = ElbowCurve {
        g_values: g_candidates.to_vec(),
        wss_values,
    };
    let suggestion = suggest_elbow(&curve);
    Ok((curve, suggestion))
}

/// Elbow from a WSS curve: maximize the second difference of WSS normalized
/// by the local WSS level, over interior candidates. Ties break toward the
/// smallest g.
pub fn suggest_elbow(curve: &ElbowCurve) -> Option<usize> {
    let k = curve.g_values.len();
    if k < 3 {
        return None;
    }
    let mut best_g = None;
    let mut best_score = f64::NEG_INFINITY;
    for i in 1..k - 1 {
        let second_diff =
            curve.wss_values[i - 1] - 2.0 * curve.wss_values[i] + curve.wss_values[i + 1];
        let score = second_diff / curve.wss_values[i].max(f64::MIN_POSITIVE);
        if score > best_score + 1e-12 {
            best_score = score;
            best_g = Some(curve.g_values[i]);
        }
    }
    best_g
}

/// Total WSS as computed independently from a partition (for tests and audit).
pub fn partition_wss(points: &Array2<f64>, assignments: &[usize], g: usize) -> f64 {
    let zero_based: Vec<usize> = assignments.iter().map(|&c| c - 1).collect();
    let centroids = recompute_centroids(points, &zero_based, g);
    zero_based
        .iter()
        .enumerate()
        .map(|(i, &c)| squared_distance(points.row(i), centroids.row(c)))
        .sum()
}
