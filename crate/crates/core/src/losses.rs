//! Contrastive losses against the cluster memory, each returning its value
//! and the gradient with respect to the (unit-norm) student features. The
//! memory and any teacher-derived targets are constants.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{DcccError, Result};
use crate::memory::ClusterMemory;

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    /// Batch-mean loss.
    pub loss: f64,
    /// B x D gradient of `loss` w.r.t. each query feature.
    pub grad: Array2<f64>,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(DcccError::config("tau", "temperature must be positive"));
    }
    Ok(())
}

/// Log-softmax of `q . c_k / tau` over all memory rows.
fn log_probs(q: ArrayView1<'_, f64>, m: &ClusterMemory, tau: f64) -> Result<Vec<f64>> {
    if m.num_clusters() == 0 {
        return Err(DcccError::Contract("memory holds no clusters".into()));
    }
    if q.len() != m.dim() {
        return Err(DcccError::Contract(format!(
            "query has dimension {}, memory has {}",
            q.len(),
            m.dim()
        )));
    }
    let logits: Vec<f64> = m.vectors.rows().into_iter().map(|c| q.dot(&c) / tau).collect();
    let top = (0..logits.len()).fold(0, |b, k| if logits[k] > logits[b] { k } else { b });
    let max = logits[top];
    // ln(1 + rest) keeps precision when the top class dominates
    let rest: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != top)
        .map(|(_, l)| (l - max).exp())
        .sum();
    let shift = rest.ln_1p();
    Ok(logits.into_iter().map(|l| (l - max) - shift).collect())
}

/// Softmax of `q . c_k / tau` over the memory.
pub fn similarity_probs(q: ArrayView1<'_, f64>, m: &ClusterMemory, tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    Ok(log_probs(q, m, tau)?.into_iter().map(f64::exp).collect())
}

fn check_batch(q: ArrayView2<'_, f64>, labels: &[usize], m: &ClusterMemory) -> Result<()> {
    if q.nrows() != labels.len() {
        return Err(DcccError::Contract(format!(
            "{} labels for {} queries",
            labels.len(),
            q.nrows()
        )));
    }
    if q.nrows() == 0 {
        return Err(DcccError::Contract("empty batch".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= m.num_clusters()) {
        return Err(DcccError::Contract(format!(
            "label {bad} is not a cluster of the memory ({} clusters)",
            m.num_clusters()
        )));
    }
    Ok(())
}

/// Cross-entropy of the student's similarity distribution against fixed
/// per-query target distributions.
pub fn soft_target_loss(
    q_s: ArrayView2<'_, f64>,
    targets: &[Vec<f64>],
    m: &ClusterMemory,
    tau: f64,
) -> Result<LossOutput> {
    check_tau(tau)?;
    if targets.len() != q_s.nrows() || q_s.nrows() == 0 {
        return Err(DcccError::Contract(format!(
            "{} targets for {} queries",
            targets.len(),
            q_s.nrows()
        )));
    }
    let b = q_s.nrows() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(q_s.dim());
    for (i, (q, target)) in q_s.rows().into_iter().zip(targets).enumerate() {
        if target.len() != m.num_clusters() {
            return Err(DcccError::Contract(format!(
                "target {i} has {} entries for {} clusters",
                target.len(),
                m.num_clusters()
            )));
        }
        let lp = log_probs(q, m, tau)?;
        let mut row = grad.row_mut(i);
        for (k, c) in m.vectors.rows().into_iter().enumerate() {
            if target[k] != 0.0 {
                loss -= target[k] * lp[k];
            }
            row.scaled_add((lp[k].exp() - target[k]) / (b * tau), &c);
        }
    }
    Ok(LossOutput { loss: loss / b, grad })
}

fn one_hot(len: usize, class: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[class] = 1.0;
    v
}

/// ClusterNCE: batch mean of `-log p_+`.
pub fn cluster_nce(q_s: ArrayView2<'_, f64>, labels: &[usize], m: &ClusterMemory, tau: f64) -> Result<LossOutput> {
    check_batch(q_s, labels, m)?;
    let targets: Vec<Vec<f64>> = labels.iter().map(|&l| one_hot(m.num_clusters(), l)).collect();
    soft_target_loss(q_s, &targets, m, tau)
}

/// Plain cross-entropy against the one-hot pseudo-label; identical to
/// [`cluster_nce`].
pub fn cross_entropy_loss(q_s: ArrayView2<'_, f64>, labels: &[usize], m: &ClusterMemory, tau: f64) -> Result<LossOutput> {
    cluster_nce(q_s, labels, m, tau)
}

/// `mu_s * y_t + (1 - mu_s) * onehot(class)`.
pub fn smooth_label(y_t: &[f64], class: usize, mu_s: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&mu_s) {
        return Err(DcccError::config("mu_s", "must lie in [0, 1]"));
    }
    if class >= y_t.len() {
        return Err(DcccError::Contract(format!(
            "class {class} out of range for {} clusters",
            y_t.len()
        )));
    }
    Ok(y_t
        .iter()
        .enumerate()
        .map(|(k, &p)| mu_s * p + if k == class { 1.0 - mu_s } else { 0.0 })
        .collect())
}

/// Teacher-refined smoothed targets, one per query.
pub fn smoothed_targets(
    q_t: ArrayView2<'_, f64>,
    labels: &[usize],
    m: &ClusterMemory,
    tau: f64,
    mu_s: f64,
) -> Result<Vec<Vec<f64>>> {
    check_batch(q_t, labels, m)?;
    q_t.rows()
        .into_iter()
        .zip(labels)
        .map(|(q, &l)| smooth_label(&similarity_probs(q, m, tau)?, l, mu_s))
        .collect()
}

/// Label-smoothing soft contrastive loss: cross-entropy of the student's
/// similarity distribution against the teacher-refined smoothed label.
/// Gradients flow through `q_s` only.
pub fn label_smooth_soft_loss(
    q_s: ArrayView2<'_, f64>,
    q_t: ArrayView2<'_, f64>,
    labels: &[usize],
    m: &ClusterMemory,
    tau: f64,
    mu_s: f64,
) -> Result<LossOutput> {
    check_batch(q_s, labels, m)?;
    if q_t.dim() != q_s.dim() {
        return Err(DcccError::Contract(format!(
            "teacher batch {:?} differs from student batch {:?}",
            q_t.dim(),
            q_s.dim()
        )));
    }
    let targets = smoothed_targets(q_t, labels, m, tau, mu_s)?;
    soft_target_loss(q_s, &targets, m, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Lss,
    ClusterNce,
    /// `ce_weight * L_ce + (1 - ce_weight) * L_ss`.
    CePlusLss,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::ClusterNce, LossKind::CePlusLss, LossKind::Lss];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Lss => "lss",
            LossKind::ClusterNce => "cluster_nce",
            LossKind::CePlusLss => "ce_plus_lss",
        }
    }

    pub fn uses_teacher(self) -> bool {
        !matches!(self, LossKind::ClusterNce)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown loss kind `{s}` (expected lss, cluster_nce or ce_plus_lss)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub kind: LossKind,
    pub tau: f64,
    pub mu_s: f64,
    pub ce_weight: f64,
}

/// Dispatches on the configured loss kind.
pub fn training_loss(
    p: &LossParams,
    q_s: ArrayView2<'_, f64>,
    q_t: ArrayView2<'_, f64>,
    labels: &[usize],
    m: &ClusterMemory,
) -> Result<LossOutput> {
    match p.kind {
        LossKind::ClusterNce => cluster_nce(q_s, labels, m, p.tau),
        LossKind::Lss => label_smooth_soft_loss(q_s, q_t, labels, m, p.tau, p.mu_s),
        LossKind::CePlusLss => {
            let ce = cross_entropy_loss(q_s, labels, m, p.tau)?;
            let ss = label_smooth_soft_loss(q_s, q_t, labels, m, p.tau, p.mu_s)?;
            let w = p.ce_weight;
            Ok(LossOutput {
                loss: w * ce.loss + (1.0 - w) * ss.loss,
                grad: ce.grad * w + ss.grad * (1.0 - w),
            })
        }
    }
}
