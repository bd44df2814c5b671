//! Lloyd's k-means with k-means++ seeding over weighted distinct points.
//!
//! One-hot attribute vectors repeat heavily, so points are collapsed into
//! distinct locations with multiplicities before clustering. Weighted Lloyd
//! iterations on the collapsed set give the same partition as plain Lloyd on
//! the original points.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::seed;

pub(crate) const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    /// Index into `centroids` for every input point.
    pub labels: Vec<usize>,
    /// Weighted sum of squared distances after every assignment step.
    pub inertia_history: Vec<f64>,
}

impl KMeansResult {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

/// Distinct points with multiplicities, plus the map back to the input order.
#[derive(Debug, Clone)]
pub(crate) struct WeightedSet {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub origin: Vec<usize>,
}

impl WeightedSet {
    pub fn from_points(points: &[Vec<f64>]) -> WeightedSet {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut set = WeightedSet {
            points: Vec::new(),
            weights: Vec::new(),
            origin: Vec::with_capacity(points.len()),
        };
        for p in points {
            let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
            let slot = *index.entry(key).or_insert_with(|| {
                set.points.push(p.clone());
                set.weights.push(0.0);
                set.points.len() - 1
            });
            set.weights[slot] += 1.0;
            set.origin.push(slot);
        }
        set
    }

    pub fn subset(&self, members: &[usize]) -> WeightedSet {
        WeightedSet {
            points: members.iter().map(|&i| self.points[i].clone()).collect(),
            weights: members.iter().map(|&i| self.weights[i]).collect(),
            origin: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn dims(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.dims()];
        let mut total = 0.0;
        for (p, &w) in self.points.iter().zip(&self.weights) {
            for (s, x) in sum.iter_mut().zip(p) {
                *s += w * x;
            }
            total += w;
        }
        sum.iter_mut().for_each(|s| *s /= total);
        sum
    }

    pub fn expand_labels(&self, distinct_labels: &[usize]) -> Vec<usize> {
        self.origin.iter().map(|&o| distinct_labels[o]).collect()
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by Euclidean distance; ties go to the lowest index.
pub(crate) fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub(crate) fn plus_plus(set: &WeightedSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    fn sample(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
        let total: f64 = weights.iter().sum();
        let mut target = rng.gen::<f64>() * total;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                if target < w {
                    return i;
                }
                target -= w;
            }
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    let mut centroids = vec![set.points[sample(&set.weights, rng)].clone()];
    let mut dist: Vec<f64> = set
        .points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let scores: Vec<f64> = dist.iter().zip(&set.weights).map(|(d, w)| d * w).collect();
        if scores.iter().all(|&s| s == 0.0) {
            break;
        }
        let chosen = set.points[sample(&scores, rng)].clone();
        for (d, p) in dist.iter_mut().zip(&set.points) {
            *d = d.min(squared_distance(p, &chosen));
        }
        centroids.push(chosen);
    }
    centroids
}

/// Weighted Lloyd iterations from the given centroids. Returns labels over
/// the distinct points of `set`.
pub(crate) fn lloyd(
    set: &WeightedSet,
    mut centroids: Vec<Vec<f64>>,
) -> (Vec<Vec<f64>>, Vec<usize>, Vec<f64>) {
    let n = set.len();
    let k = centroids.len();
    let dims = set.dims();
    let mut labels = vec![usize::MAX; n];
    let mut distances = vec![0.0; n];
    let mut history = Vec::new();

    for iteration in 0..MAX_ITERATIONS {
        let mut changed = false;
        let mut inertia = 0.0;
        for i in 0..n {
            let (j, d) = nearest(&set.points[i], &centroids);
            inertia += set.weights[i] * d;
            distances[i] = d;
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
        }
        history.push(inertia);
        if !changed && iteration > 0 {
            break;
        }

        let mut sums = vec![vec![0.0; dims]; k];
        let mut mass = vec![0.0; k];
        for ((&j, &w), p) in labels.iter().zip(&set.weights).zip(&set.points) {
            mass[j] += w;
            for (s, x) in sums[j].iter_mut().zip(p) {
                *s += w * x;
            }
        }
        let mut far: Vec<usize> = (0..n).collect();
        far.sort_by(|&a, &b| distances[b].total_cmp(&distances[a]).then(a.cmp(&b)));
        let mut far = far.into_iter();
        for j in 0..k {
            if mass[j] > 0.0 {
                centroids[j] = sums[j].iter().map(|s| s / mass[j]).collect();
            } else if let Some(i) = far.next() {
                // Empty cluster: move it onto the worst-served point.
                centroids[j] = set.points[i].clone();
            }
        }
    }
    (centroids, labels, history)
}

/// Clusters `points` into at most `k` groups.
///
/// `k` is reduced to the number of distinct points when it exceeds it. Seeding
/// uses k-means++ driven by `seed`, so results are reproducible.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> KMeansResult {
    assert!(k >= 1, "k must be at least 1");
    if points.is_empty() {
        return KMeansResult {
            centroids: Vec::new(),
            labels: Vec::new(),
            inertia_history: Vec::new(),
        };
    }
    let set = WeightedSet::from_points(points);
    let k = k.min(set.len());
    let mut rng = seed::rng(seed);
    let init = plus_plus(&set, k, &mut rng);
    let (centroids, labels, inertia_history) = lloyd(&set, init);
    KMeansResult {
        centroids,
        labels: set.expand_labels(&labels),
        inertia_history,
    }
}
