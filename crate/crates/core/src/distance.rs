//! Dense pairwise distances, k-nearest-neighbor sets and the kNN-set
//! Jaccard distance fed to DBSCAN.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DcccError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Cosine,
    Jaccard,
}

/// Symmetric N x N dissimilarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub values: Array2<f64>,
    pub metric: Metric,
}

impl DistanceMatrix {
    /// Wraps a precomputed matrix after checking it is square, symmetric
    /// (to 1e-9), non-negative and zero on the diagonal.
    pub fn from_values(values: Array2<f64>, metric: Metric) -> Result<Self> {
        let d = DistanceMatrix { values, metric };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.values.dim();
        if n != m {
            return Err(DcccError::Contract(format!("distance matrix is {n}x{m}, not square")));
        }
        for i in 0..n {
            let dii = self.values[[i, i]];
            if dii != 0.0 {
                return Err(DcccError::Contract(format!("diagonal entry {i} is {dii}, expected 0")));
            }
            for j in (i + 1)..n {
                let (a, b) = (self.values[[i, j]], self.values[[j, i]]);
                if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < 0.0 {
                    return Err(DcccError::Contract(format!(
                        "entry ({i},{j}) is negative or non-finite"
                    )));
                }
                if (a - b).abs() > 1e-9 {
                    return Err(DcccError::Contract(format!(
                        "matrix is asymmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_finite(f: ArrayView2<'_, f64>) -> Result<()> {
    if let Some(pos) = f.iter().position(|v| !v.is_finite()) {
        return Err(DcccError::Numerical(format!(
            "non-finite feature in row {}",
            pos / f.ncols().max(1)
        )));
    }
    Ok(())
}

/// Euclidean or cosine distances between feature rows. Cosine assumes the
/// rows are unit-norm and is computed as `1 - f_i . f_j`.
pub fn pairwise_distance(f: ArrayView2<'_, f64>, metric: Metric) -> Result<DistanceMatrix> {
    let n = f.nrows();
    if n < 2 {
        return Err(DcccError::Contract(format!("need at least 2 rows, got {n}")));
    }
    check_finite(f)?;
    let entry: fn(ndarray::ArrayView1<f64>, ndarray::ArrayView1<f64>) -> f64 = match metric {
        Metric::Euclidean => |a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        },
        Metric::Cosine => |a, b| (1.0 - a.dot(&b)).max(0.0),
        Metric::Jaccard => {
            return Err(DcccError::Contract(
                "jaccard distances need a neighbor count; use jaccard_distance".into(),
            ))
        }
    };
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| entry(f.row(i), f.row(j))).collect())
        .collect();
    let mut values = Array2::zeros((n, n));
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(DistanceMatrix { values, metric })
}

/// Per-instance k nearest neighbors, self excluded, nearest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborSets {
    pub k: usize,
    pub neighbors: Vec<Vec<usize>>,
}

/// Ties in distance are broken by ascending index.
pub fn knn_sets(d: &DistanceMatrix, k: usize) -> Result<NeighborSets> {
    if k == 0 {
        return Err(DcccError::Contract("k must be at least 1".into()));
    }
    let n = d.len();
    let take = k.min(n.saturating_sub(1));
    let neighbors = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)).then(a.cmp(&b)));
            others.truncate(take);
            others
        })
        .collect();
    Ok(NeighborSets { k, neighbors })
}

/// `1 - |S_i ∩ S_j| / |S_i ∪ S_j|` where `S_i` is the neighbor list of `i`
/// together with `i` itself.
pub fn jaccard_from_neighbors(sets: &NeighborSets) -> DistanceMatrix {
    let n = sets.neighbors.len();
    let closed: Vec<Vec<usize>> = sets
        .neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let mut s = nb.clone();
            s.push(i);
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let inter = sorted_intersection_len(&closed[i], &closed[j]);
                    let union = closed[i].len() + closed[j].len() - inter;
                    1.0 - inter as f64 / union as f64
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((n, n));
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    DistanceMatrix {
        values,
        metric: Metric::Jaccard,
    }
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// kNN-set Jaccard distance with cosine as the base metric.
pub fn jaccard_distance(f: ArrayView2<'_, f64>, k: usize) -> Result<DistanceMatrix> {
    let cosine = pairwise_distance(f, Metric::Cosine)?;
    let sets = knn_sets(&cosine, k)?;
    Ok(jaccard_from_neighbors(&sets))
}
