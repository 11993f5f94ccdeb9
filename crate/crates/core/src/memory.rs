//! Cluster memory: one unit-norm representation vector per pseudo-class,
//! initialized from cluster means and refreshed from every mini-batch with
//! momentum.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::clustering::PseudoLabeling;
use crate::error::{DcccError, Result};

/// How the batch centroid of a pseudo-class is formed before the momentum
/// step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// One momentum step per query instance, in batch order.
    Instance,
    /// Unweighted batch mean.
    Avg,
    /// The batch member least similar to the stored vector.
    Hardest,
    /// Hardness-weighted batch mean (softmax of negative similarity).
    Dynamic,
}

impl UpdateMode {
    pub const ALL: [UpdateMode; 4] = [
        UpdateMode::Instance,
        UpdateMode::Avg,
        UpdateMode::Hardest,
        UpdateMode::Dynamic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UpdateMode::Instance => "instance",
            UpdateMode::Avg => "avg",
            UpdateMode::Hardest => "hardest",
            UpdateMode::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UpdateMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        UpdateMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown memory mode `{s}` (expected instance, avg, hardest or dynamic)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawMemory", try_from = "RawMemory")]
pub struct ClusterMemory {
    /// C x D, unit-norm rows.
    pub vectors: Array2<f64>,
    pub gamma: f64,
    pub mode: UpdateMode,
    pub tau_w: f64,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct RawMemory {
    pub memory: Vec<Vec<f64>>,
    pub gamma: f64,
    pub mode: UpdateMode,
    pub tau_w: f64,
}

impl From<ClusterMemory> for RawMemory {
    fn from(m: ClusterMemory) -> Self {
        RawMemory {
            memory: crate::encoder::rows_to_vecs(&m.vectors),
            gamma: m.gamma,
            mode: m.mode,
            tau_w: m.tau_w,
        }
    }
}

impl TryFrom<RawMemory> for ClusterMemory {
    type Error = DcccError;

    fn try_from(r: RawMemory) -> Result<Self> {
        check_hyper(r.gamma, r.tau_w)?;
        Ok(ClusterMemory {
            vectors: crate::encoder::vecs_to_array(r.memory)?,
            gamma: r.gamma,
            mode: r.mode,
            tau_w: r.tau_w,
        })
    }
}

fn check_hyper(gamma: f64, tau_w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(DcccError::config("gamma", "must lie in [0, 1]"));
    }
    if !(tau_w > 0.0 && !tau_w.is_nan()) {
        return Err(DcccError::config("tau_w", "must be positive"));
    }
    Ok(())
}

fn normalized(v: Array1<f64>, what: &str) -> Result<Array1<f64>> {
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(DcccError::Numerical(format!("{what} has norm {norm}")));
    }
    Ok(v / norm)
}

/// Stores the L2-normalized mean feature of every cluster; outliers are
/// ignored.
pub fn init_memory(
    f: ArrayView2<'_, f64>,
    labels: &PseudoLabeling,
    gamma: f64,
    mode: UpdateMode,
    tau_w: f64,
) -> Result<ClusterMemory> {
    check_hyper(gamma, tau_w)?;
    if labels.num_clusters == 0 {
        return Err(DcccError::Contract("memory needs at least one cluster".into()));
    }
    if labels.len() != f.nrows() {
        return Err(DcccError::Contract(format!(
            "{} labels for {} features",
            labels.len(),
            f.nrows()
        )));
    }
    let mut vectors = Array2::zeros((labels.num_clusters, f.ncols()));
    for (c, members) in labels.members().iter().enumerate() {
        if members.is_empty() {
            return Err(DcccError::Contract(format!("cluster {c} is empty")));
        }
        let mut sum = Array1::zeros(f.ncols());
        for &i in members {
            sum += &f.row(i);
        }
        let mean = sum / members.len() as f64;
        vectors.row_mut(c).assign(&normalized(mean, &format!("mean of cluster {c}"))?);
    }
    Ok(ClusterMemory {
        vectors,
        gamma,
        mode,
        tau_w,
    })
}

/// Softmax over `-(c . z_j) / tau_w`: less similar members weigh more.
pub fn dynamic_weights(c: ArrayView1<'_, f64>, group: ArrayView2<'_, f64>, tau_w: f64) -> Result<Vec<f64>> {
    if !(tau_w > 0.0) {
        return Err(DcccError::config("tau_w", "must be positive"));
    }
    if group.nrows() == 0 {
        return Err(DcccError::Contract("empty batch group".into()));
    }
    let logits: Vec<f64> = group.rows().into_iter().map(|z| -c.dot(&z) / tau_w).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `sum_j w_j z_j`, left unnormalized.
pub fn dynamic_centroid(w: &[f64], group: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    if w.len() != group.nrows() {
        return Err(DcccError::Contract(format!(
            "{} weights for {} group members",
            w.len(),
            group.nrows()
        )));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(DcccError::Contract(format!("weights sum to {total}, expected 1")));
    }
    let mut out = Array1::zeros(group.ncols());
    for (wj, z) in w.iter().zip(group.rows()) {
        out.scaled_add(*wj, &z);
    }
    Ok(out)
}

impl ClusterMemory {
    pub fn num_clusters(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// `c_i <- normalize(gamma * c_i + (1 - gamma) * c_hat)`.
    pub fn momentum_update(&mut self, cluster_id: usize, c_hat: ArrayView1<'_, f64>) -> Result<()> {
        if cluster_id >= self.num_clusters() {
            return Err(DcccError::Contract(format!(
                "cluster {cluster_id} out of range for memory of {}",
                self.num_clusters()
            )));
        }
        let updated = self.momentum_row(self.vectors.row(cluster_id), cluster_id, c_hat)?;
        self.vectors.row_mut(cluster_id).assign(&updated);
        Ok(())
    }

    fn momentum_row(&self, current: ArrayView1<'_, f64>, cluster_id: usize, c_hat: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if c_hat.len() != self.dim() {
            return Err(DcccError::Contract(format!(
                "centroid has dimension {}, memory has {}",
                c_hat.len(),
                self.dim()
            )));
        }
        let mixed = &current * self.gamma + &c_hat * (1.0 - self.gamma);
        normalized(mixed, &format!("updated vector of cluster {cluster_id}"))
    }

    /// Batch centroid of one group under the memory's update mode (not used
    /// by `Instance`, which steps per member).
    pub fn group_centroid(&self, cluster_id: usize, group: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if cluster_id >= self.num_clusters() || group.nrows() == 0 {
            return Err(DcccError::Contract(format!(
                "cannot form centroid of cluster {cluster_id} from {} rows",
                group.nrows()
            )));
        }
        let c = self.vectors.row(cluster_id);
        match self.mode {
            UpdateMode::Avg | UpdateMode::Instance => {
                let n = group.nrows() as f64;
                Ok(group.sum_axis(ndarray::Axis(0)) / n)
            }
            UpdateMode::Hardest => {
                let mut best = 0;
                let mut best_sim = f64::INFINITY;
                for (j, z) in group.rows().into_iter().enumerate() {
                    let s = c.dot(&z);
                    if s < best_sim {
                        best_sim = s;
                        best = j;
                    }
                }
                Ok(group.row(best).to_owned())
            }
            UpdateMode::Dynamic => {
                let w = dynamic_weights(c, group, self.tau_w)?;
                dynamic_centroid(&w, group)
            }
        }
    }

    /// Groups the batch by pseudo-label and updates each touched cluster, in
    /// ascending cluster order. The memory is left unchanged on error.
    pub fn batch_update(&mut self, features: ArrayView2<'_, f64>, labels: &[usize]) -> Result<()> {
        if features.nrows() != labels.len() {
            return Err(DcccError::Contract(format!(
                "{} labels for {} batch features",
                labels.len(),
                features.nrows()
            )));
        }
        if features.ncols() != self.dim() {
            return Err(DcccError::Contract(format!(
                "batch features have dimension {}, memory has {}",
                features.ncols(),
                self.dim()
            )));
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (row, &label) in labels.iter().enumerate() {
            if label >= self.num_clusters() {
                return Err(DcccError::Contract(format!(
                    "batch label {label} unknown to memory of {} clusters",
                    self.num_clusters()
                )));
            }
            groups.entry(label).or_default().push(row);
        }
        let mut next = self.vectors.clone();
        for (cluster, rows) in groups {
            let group = features.select(ndarray::Axis(0), &rows);
            let updated = match self.mode {
                UpdateMode::Instance => {
                    let mut c = self.vectors.row(cluster).to_owned();
                    for z in group.rows() {
                        c = self.momentum_row(c.view(), cluster, z)?;
                    }
                    c
                }
                _ => {
                    let c_hat = self.group_centroid(cluster, group.view())?;
                    self.momentum_row(self.vectors.row(cluster), cluster, c_hat.view())?
                }
            };
            next.row_mut(cluster).assign(&updated);
        }
        self.vectors = next;
        Ok(())
    }
}
