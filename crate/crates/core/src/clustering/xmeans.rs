//! XMeans: k-means with BIC-guided centroid splitting, capped at `max_k`.

use std::f64::consts::PI;

use super::kmeans::{lloyd, nearest, plus_plus, squared_distance, KMeansResult, WeightedSet};
use crate::seed;

/// Lower bound on the pooled variance estimate; keeps the log-likelihood
/// finite for clusters made of duplicate points.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// 2-means restarts per split attempt; the lowest-inertia split is scored.
const SPLIT_RESTARTS: u64 = 4;

/// Bayesian information criterion of a hard clustering under the
/// identical-variance spherical Gaussian model (higher is better).
///
/// `labels[i]` indexes `centroids` for distinct point `i` of `set`.
pub(crate) fn bic(set: &WeightedSet, centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = centroids.len();
    let dims = set.dims() as f64;
    let total: f64 = set.weights.iter().sum();
    if total <= k as f64 {
        return f64::NEG_INFINITY;
    }
    let mut mass = vec![0.0; k];
    let mut sse = 0.0;
    for ((p, &w), &l) in set.points.iter().zip(&set.weights).zip(labels) {
        mass[l] += w;
        sse += w * squared_distance(p, &centroids[l]);
    }
    let variance = (sse / (dims * (total - k as f64))).max(VARIANCE_FLOOR);
    let mut log_likelihood: f64 = mass
        .iter()
        .filter(|&&m| m > 0.0)
        .map(|&m| m * m.ln() - m * total.ln())
        .sum();
    log_likelihood -= total * dims / 2.0 * (2.0 * PI * variance).ln();
    log_likelihood -= sse / (2.0 * variance);
    let params = (k as f64 - 1.0) + dims * k as f64 + 1.0;
    log_likelihood - params / 2.0 * total.ln()
}

fn assign_all(set: &WeightedSet, centroids: &[Vec<f64>]) -> Vec<usize> {
    set.points.iter().map(|p| nearest(p, centroids).0).collect()
}

/// Lowest-inertia 2-means partition of `sub` over a few k-means++ restarts.
fn best_split(sub: &WeightedSet, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut best: Option<(f64, Vec<Vec<f64>>, Vec<usize>)> = None;
    for restart in 0..SPLIT_RESTARTS {
        let mut rng = seed::rng(seed::derive(seed, &[restart]));
        let init = plus_plus(sub, 2, &mut rng);
        let (centroids, labels, history) = lloyd(sub, init);
        let inertia = history.last().copied().unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|b| inertia < b.0) {
            best = Some((inertia, centroids, labels));
        }
    }
    let (_, centroids, labels) = best.unwrap();
    (centroids, labels)
}

struct Split {
    gain: f64,
    cluster: usize,
    children: Vec<Vec<f64>>,
}

/// Searches `k` in `[1, max_k]` by repeatedly trying to 2-split every
/// cluster and keeping the splits whose local BIC beats the parent's.
///
/// A split is only considered when both children hold more points than the
/// dimensionality, i.e. more than the parameters of their centroid. Without
/// this, small groups of near-duplicate one-hot vectors (typos, rare values)
/// get tiny variance estimates and are split off until the cap is reached.
///
/// When more splits qualify than the cap allows, the largest BIC gains win.
/// The final partition is refined with Lloyd iterations over all points.
pub fn xmeans(points: &[Vec<f64>], max_k: usize, seed: u64) -> KMeansResult {
    assert!(max_k >= 1, "max_k must be at least 1");
    if points.is_empty() {
        return KMeansResult {
            centroids: Vec::new(),
            labels: Vec::new(),
            inertia_history: Vec::new(),
        };
    }
    let set = WeightedSet::from_points(points);
    let (mut centroids, mut labels, mut history) = lloyd(&set, vec![set.mean()]);

    let mut round = 0u64;
    while centroids.len() < max_k {
        let mut splits = Vec::new();
        for (j, centroid) in centroids.iter().enumerate() {
            let members: Vec<usize> = (0..set.len()).filter(|&i| labels[i] == j).collect();
            if members.len() < 2 {
                continue;
            }
            let sub = set.subset(&members);
            let parent_bic = bic(&sub, std::slice::from_ref(centroid), &vec![0; sub.len()]);
            let (children, child_labels) = best_split(&sub, seed::derive(seed, &[round, j as u64]));
            if children.len() < 2 {
                continue;
            }
            let mut child_mass = [0.0; 2];
            for (&l, &w) in child_labels.iter().zip(&sub.weights) {
                child_mass[l] += w;
            }
            if child_mass.iter().any(|&m| m <= sub.dims() as f64) {
                continue;
            }
            let child_bic = bic(&sub, &children, &child_labels);
            if child_bic > parent_bic {
                splits.push(Split {
                    gain: child_bic - parent_bic,
                    cluster: j,
                    children,
                });
            }
        }
        if splits.is_empty() {
            break;
        }
        splits.sort_by(|a, b| b.gain.total_cmp(&a.gain).then(a.cluster.cmp(&b.cluster)));
        splits.truncate(max_k - centroids.len());

        let mut next = centroids.clone();
        for split in splits {
            let mut children = split.children.into_iter();
            next[split.cluster] = children.next().unwrap();
            next.extend(children);
        }
        let (refined, refined_labels, refined_history) = lloyd(&set, next);
        centroids = refined;
        labels = refined_labels;
        history = refined_history;
        round += 1;
    }

    // Lloyd may leave labels one step behind the last centroid update when it
    // stops at the iteration cap.
    let labels = assign_all(&set, &centroids);
    KMeansResult {
        centroids,
        labels: set.expand_labels(&labels),
        inertia_history: history,
    }
}
