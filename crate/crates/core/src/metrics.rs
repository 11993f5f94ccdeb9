//! Retrieval (mAP, CMC), clustering agreement (NMI, ARI) and intra/inter
//! identity distance statistics.

use std::collections::HashMap;

use ndarray::ArrayView2;
use serde::Serialize;

use crate::clustering::PseudoLabeling;
use crate::error::{DcccError, Result};

pub const CMC_RANKS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetrievalResult {
    pub map: f64,
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
    /// Queries that contributed to the averages.
    pub valid_queries: usize,
    /// Queries with no relevant gallery item after camera filtering.
    pub skipped_queries: usize,
}

/// Ranked relevance flags of one query: gallery sorted by descending cosine
/// similarity (ties by ascending index), same-id-same-camera items removed.
fn ranked_relevance(
    q: ndarray::ArrayView1<'_, f64>,
    gallery: ArrayView2<'_, f64>,
    q_id: usize,
    q_cam: usize,
    g_ids: &[usize],
    g_cams: &[usize],
) -> Vec<bool> {
    let sims: Vec<f64> = gallery.rows().into_iter().map(|g| q.dot(&g)).collect();
    let mut order: Vec<usize> = (0..sims.len()).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .filter(|&j| !(g_ids[j] == q_id && g_cams[j] == q_cam))
        .map(|j| g_ids[j] == q_id)
        .collect()
}

/// Average precision of a ranked relevance list; `None` when nothing is
/// relevant.
pub fn average_precision(relevant: &[bool]) -> Option<f64> {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &rel) in relevant.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    (hits > 0).then(|| sum / hits as f64)
}

pub fn evaluate_retrieval(
    query: ArrayView2<'_, f64>,
    gallery: ArrayView2<'_, f64>,
    q_ids: &[usize],
    g_ids: &[usize],
    q_cams: &[usize],
    g_cams: &[usize],
) -> Result<RetrievalResult> {
    if query.nrows() == 0 || gallery.nrows() == 0 {
        return Err(DcccError::Contract("query and gallery must be non-empty".into()));
    }
    if q_ids.len() != query.nrows() || q_cams.len() != query.nrows() {
        return Err(DcccError::Contract("query labels do not match query features".into()));
    }
    if g_ids.len() != gallery.nrows() || g_cams.len() != gallery.nrows() {
        return Err(DcccError::Contract("gallery labels do not match gallery features".into()));
    }
    if query.ncols() != gallery.ncols() {
        return Err(DcccError::Contract("query and gallery dimensions differ".into()));
    }
    let mut ap_sum = 0.0;
    let mut cmc_hits = [0usize; 3];
    let mut valid = 0usize;
    for (i, q) in query.rows().into_iter().enumerate() {
        let rel = ranked_relevance(q, gallery, q_ids[i], q_cams[i], g_ids, g_cams);
        let Some(ap) = average_precision(&rel) else {
            continue;
        };
        valid += 1;
        ap_sum += ap;
        let first = rel.iter().position(|&r| r).expect("ap implies a hit");
        for (slot, &k) in CMC_RANKS.iter().enumerate() {
            if first < k {
                cmc_hits[slot] += 1;
            }
        }
    }
    if valid == 0 {
        return Err(DcccError::Degenerate("no query has a valid relevant gallery item".into()));
    }
    let v = valid as f64;
    Ok(RetrievalResult {
        map: ap_sum / v,
        r1: cmc_hits[0] as f64 / v,
        r5: cmc_hits[1] as f64 / v,
        r10: cmc_hits[2] as f64 / v,
        valid_queries: valid,
        skipped_queries: query.nrows() - valid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterQuality {
    /// Absent when every instance is an outlier.
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub num_clusters: usize,
    pub num_outliers: usize,
}

fn comb2(n: f64) -> f64 {
    n * (n - 1.0) / 2.0
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// NMI (arithmetic-mean normalization) and ARI of two labelings of the same
/// instances.
pub fn nmi_ari(pred: &[usize], truth: &[usize]) -> Result<(f64, f64)> {
    if pred.len() != truth.len() {
        return Err(DcccError::Contract(format!(
            "{} predictions for {} ground-truth labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(DcccError::Contract("no labels to compare".into()));
    }
    let n = pred.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut a: HashMap<usize, usize> = HashMap::new();
    let mut b: HashMap<usize, usize> = HashMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *joint.entry((p, t)).or_default() += 1;
        *a.entry(p).or_default() += 1;
        *b.entry(t).or_default() += 1;
    }
    // sort for a fixed summation order
    let mut joint: Vec<_> = joint.into_iter().collect();
    joint.sort_unstable();
    let mut a: Vec<_> = a.into_iter().collect();
    a.sort_unstable();
    let mut b: Vec<_> = b.into_iter().collect();
    b.sort_unstable();
    let a_count: HashMap<usize, usize> = a.iter().copied().collect();
    let b_count: HashMap<usize, usize> = b.iter().copied().collect();

    let h_a = entropy(a.iter().map(|x| x.1), n);
    let h_b = entropy(b.iter().map(|x| x.1), n);
    let mut mi = 0.0;
    for &((p, t), nij) in &joint {
        let nij = nij as f64;
        mi += nij / n * (n * nij / (a_count[&p] as f64 * b_count[&t] as f64)).ln();
    }
    let nmi = if h_a == 0.0 && h_b == 0.0 {
        1.0
    } else {
        (mi / ((h_a + h_b) / 2.0)).clamp(0.0, 1.0)
    };

    let index: f64 = joint.iter().map(|x| comb2(x.1 as f64)).sum();
    let sum_a: f64 = a.iter().map(|x| comb2(x.1 as f64)).sum();
    let sum_b: f64 = b.iter().map(|x| comb2(x.1 as f64)).sum();
    let expected = sum_a * sum_b / comb2(n).max(f64::MIN_POSITIVE);
    let max_index = (sum_a + sum_b) / 2.0;
    let ari = if max_index == expected {
        1.0
    } else {
        (index - expected) / (max_index - expected)
    };
    Ok((nmi, ari))
}

/// NMI/ARI of the pseudo-labels against ground truth over non-outliers.
pub fn clustering_quality(pseudo: &PseudoLabeling, truth: &[usize]) -> Result<ClusterQuality> {
    if pseudo.len() != truth.len() {
        return Err(DcccError::Contract(format!(
            "{} pseudo-labels for {} ground-truth labels",
            pseudo.len(),
            truth.len()
        )));
    }
    let (pred, gt): (Vec<usize>, Vec<usize>) = pseudo
        .assignment
        .iter()
        .zip(truth)
        .filter_map(|(a, &t)| a.map(|c| (c, t)))
        .unzip();
    let (nmi, ari) = if pred.is_empty() {
        (None, None)
    } else {
        let (nmi, ari) = nmi_ari(&pred, &gt)?;
        (Some(nmi), Some(ari))
    };
    Ok(ClusterQuality {
        nmi,
        ari,
        num_clusters: pseudo.num_clusters,
        num_outliers: pseudo.num_outliers(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceStats {
    /// Mean cosine distance over same-identity pairs.
    pub intra: Option<f64>,
    /// Mean cosine distance over cross-identity pairs.
    pub inter: Option<f64>,
}

pub fn distance_stats(features: ArrayView2<'_, f64>, truth: &[usize]) -> Result<DistanceStats> {
    if features.nrows() != truth.len() {
        return Err(DcccError::Contract(format!(
            "{} labels for {} features",
            truth.len(),
            features.nrows()
        )));
    }
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &t in truth {
        *counts.entry(t).or_default() += 1;
    }
    let n = truth.len();
    let (mut intra_sum, mut intra_n, mut inter_sum, mut inter_n) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..n {
        let fi = features.row(i);
        for j in (i + 1)..n {
            let d = 1.0 - fi.dot(&features.row(j));
            if truth[i] == truth[j] {
                intra_sum += d;
                intra_n += 1;
            } else {
                inter_sum += d;
                inter_n += 1;
            }
        }
    }
    let intra_ok = !counts.is_empty() && counts.values().all(|&c| c >= 2);
    let inter_ok = counts.len() >= 2;
    Ok(DistanceStats {
        intra: (intra_ok && intra_n > 0).then(|| intra_sum / intra_n as f64),
        inter: (inter_ok && inter_n > 0).then(|| inter_sum / inter_n as f64),
    })
}
