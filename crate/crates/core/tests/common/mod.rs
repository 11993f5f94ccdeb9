//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dccc_core::clustering::PseudoLabeling;
use dccc_core::memory::{ClusterMemory, UpdateMode};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn unit_rows<R: Rng>(rng: &mut R, n: usize, d: usize) -> Array2<f64> {
    let mut m = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
    for mut row in m.rows_mut() {
        let norm = row.dot(&row).sqrt();
        row /= norm;
    }
    m
}

pub fn memory_from(vectors: Array2<f64>, mode: UpdateMode, tau_w: f64) -> ClusterMemory {
    ClusterMemory {
        vectors,
        gamma: 0.1,
        mode,
        tau_w,
    }
}

/// Frobenius relative error between an analytic gradient and central
/// finite differences of `f` around `x`.
pub fn fd_relative_error(x: &Array2<f64>, analytic: &Array2<f64>, f: impl Fn(&Array2<f64>) -> f64) -> f64 {
    let h = 1e-5;
    let mut numeric = Array2::zeros(x.dim());
    for idx in ndarray::indices(x.dim()) {
        let mut plus = x.clone();
        plus[idx] += h;
        let mut minus = x.clone();
        minus[idx] -= h;
        numeric[idx] = (f(&plus) - f(&minus)) / (2.0 * h);
    }
    let diff = (analytic - &numeric).mapv(|v| v * v).sum().sqrt();
    let scale = analytic
        .mapv(|v| v * v)
        .sum()
        .sqrt()
        .max(numeric.mapv(|v| v * v).sum().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

/// Checks a labeling against density connectivity: cores within eps share
/// a cluster exactly when they are connected through cores, border points
/// sit in a cluster of a core that reaches them, and everything else is an
/// outlier. Returns a description of the first violation.
pub fn check_dbscan(d: &Array2<f64>, eps: f64, min_samples: usize, got: &PseudoLabeling) -> Result<(), String> {
    let n = d.nrows();
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| d[[i, j]] <= eps).count() >= min_samples)
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && d[[i, j]] <= eps {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut components = std::collections::BTreeSet::new();
    for i in (0..n).filter(|&i| core[i]) {
        components.insert(roots[i]);
        if got.assignment[i].is_none() {
            return Err(format!("core point {i} is an outlier"));
        }
        for j in (0..n).filter(|&j| core[j]) {
            let same_truth = roots[i] == roots[j];
            let same_got = got.assignment[i] == got.assignment[j];
            if same_truth != same_got {
                return Err(format!("cores {i} and {j}: connected={same_truth}, same label={same_got}"));
            }
        }
    }
    if got.num_clusters != components.len() {
        return Err(format!("{} clusters, expected {}", got.num_clusters, components.len()));
    }
    for i in (0..n).filter(|&i| !core[i]) {
        let reachers: Vec<usize> = (0..n).filter(|&j| core[j] && d[[i, j]] <= eps).collect();
        match got.assignment[i] {
            None if reachers.is_empty() => {}
            None => return Err(format!("border point {i} left as outlier")),
            Some(_) if reachers.is_empty() => return Err(format!("noise point {i} was clustered")),
            Some(c) => {
                if !reachers.iter().any(|&j| got.assignment[j] == Some(c)) {
                    return Err(format!("border point {i} joined a cluster that does not reach it"));
                }
            }
        }
    }
    Ok(())
}

/// AP from ranked relevance flags by direct definition.
pub fn brute_ap(relevant: &[bool]) -> Option<f64> {
    let mut precisions = Vec::new();
    for r in 0..relevant.len() {
        if relevant[r] {
            let hits = relevant[..=r].iter().filter(|&&x| x).count();
            precisions.push(hits as f64 / (r + 1) as f64);
        }
    }
    if precisions.is_empty() {
        None
    } else {
        Some(precisions.iter().sum::<f64>() / precisions.len() as f64)
    }
}

pub struct BruteRetrieval {
    pub map: f64,
    pub cmc: [f64; 3],
    pub valid: usize,
}

/// Retrieval by explicit rank counting: an item's rank is the number of
/// kept items that are more similar or equally similar with a lower index.
pub fn brute_retrieval(
    q: &Array2<f64>,
    g: &Array2<f64>,
    q_ids: &[usize],
    g_ids: &[usize],
    q_cams: &[usize],
    g_cams: &[usize],
) -> Option<BruteRetrieval> {
    let mut aps = Vec::new();
    let mut hits = [0usize; 3];
    for i in 0..q.nrows() {
        let kept: Vec<usize> = (0..g.nrows())
            .filter(|&j| !(g_ids[j] == q_ids[i] && g_cams[j] == q_cams[i]))
            .collect();
        let sim = |j: usize| (0..q.ncols()).map(|c| q[[i, c]] * g[[j, c]]).sum::<f64>();
        let mut ranked = vec![false; kept.len()];
        for &j in &kept {
            let rank = kept
                .iter()
                .filter(|&&o| sim(o) > sim(j) || (sim(o) == sim(j) && o < j))
                .count();
            ranked[rank] = g_ids[j] == q_ids[i];
        }
        if let Some(ap) = brute_ap(&ranked) {
            aps.push(ap);
            let first = ranked.iter().position(|&r| r).unwrap();
            for (h, k) in hits.iter_mut().zip([1, 5, 10]) {
                if first < k {
                    *h += 1;
                }
            }
        }
    }
    if aps.is_empty() {
        return None;
    }
    let v = aps.len() as f64;
    Some(BruteRetrieval {
        map: aps.iter().sum::<f64>() / v,
        cmc: hits.map(|h| h as f64 / v),
        valid: aps.len(),
    })
}

/// ARI by counting agreeing pairs, NMI from label entropies.
pub fn brute_nmi_ari(a: &[usize], b: &[usize]) -> (f64, f64) {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut total) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            total += 1.0;
            if sa && sb {
                both += 1.0;
            }
            if sa {
                only_a += 1.0;
            }
            if sb {
                only_b += 1.0;
            }
        }
    }
    let expected = only_a * only_b / total;
    let max = (only_a + only_b) / 2.0;
    let ari = if max == expected { 1.0 } else { (both - expected) / (max - expected) };

    let entropy = |labels: &[usize]| {
        let mut counts = BTreeMap::new();
        for &l in labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        counts
            .values()
            .map(|&c| {
                let p = c as f64 / n as f64;
                -p * p.ln()
            })
            .sum::<f64>()
    };
    let joint: Vec<usize> = a.iter().zip(b).map(|(&x, &y)| x * 1_000_003 + y).collect();
    let (ha, hb) = (entropy(a), entropy(b));
    let mi = ha + hb - entropy(&joint);
    let nmi = if ha + hb == 0.0 { 1.0 } else { 2.0 * mi / (ha + hb) };
    (nmi, ari)
}
