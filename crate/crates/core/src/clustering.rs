//! DBSCAN over a precomputed distance matrix and the per-epoch eps
//! scheduler.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{DcccError, Result};

/// Cluster assignment per instance; `None` marks an outlier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoLabeling {
    pub assignment: Vec<Option<usize>>,
    pub num_clusters: usize,
}

impl PseudoLabeling {
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_outliers(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_none()).count()
    }

    /// Member indices of every cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (i, a) in self.assignment.iter().enumerate() {
            if let Some(c) = a {
                out[*c].push(i);
            }
        }
        out
    }

    /// Builds a labeling from raw ids, renumbering clusters densely in order
    /// of first appearance.
    pub fn from_raw(raw: &[Option<usize>]) -> Self {
        let mut map = std::collections::HashMap::new();
        let assignment = raw
            .iter()
            .map(|a| {
                a.map(|c| {
                    let next = map.len();
                    *map.entry(c).or_insert(next)
                })
            })
            .collect();
        PseudoLabeling {
            assignment,
            num_clusters: map.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    /// Neighborhood size, the point itself included, needed to be a core point.
    pub min_samples: usize,
}

impl DbscanParams {
    pub fn new(eps: f64, min_samples: usize) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(DcccError::config("eps", "must be a positive finite number"));
        }
        if min_samples < 1 {
            return Err(DcccError::config("min_samples", "must be at least 1"));
        }
        Ok(DbscanParams { eps, min_samples })
    }
}

fn region(d: &DistanceMatrix, i: usize, eps: f64) -> Vec<usize> {
    (0..d.len()).filter(|&j| d.get(i, j) <= eps).collect()
}

/// Density-based clustering. Points are scanned in ascending index order
/// and each new cluster is expanded breadth-first, so a border point within
/// reach of several clusters joins the one that is expanded first.
pub fn dbscan(d: &DistanceMatrix, p: DbscanParams) -> Result<PseudoLabeling> {
    d.validate()?;
    let p = DbscanParams::new(p.eps, p.min_samples)?;
    let n = d.len();
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut num_clusters = 0;

    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seeds = region(d, i, p.eps);
        if seeds.len() < p.min_samples {
            continue;
        }
        let cluster = num_clusters;
        num_clusters += 1;
        assignment[i] = Some(cluster);
        let mut queue: VecDeque<usize> = seeds.into_iter().filter(|&j| j != i).collect();
        while let Some(q) = queue.pop_front() {
            if assignment[q].is_none() {
                assignment[q] = Some(cluster);
            }
            if visited[q] {
                continue;
            }
            visited[q] = true;
            let reach = region(d, q, p.eps);
            if reach.len() >= p.min_samples {
                queue.extend(reach.into_iter().filter(|&j| !visited[j] || assignment[j].is_none()));
            }
        }
    }
    Ok(PseudoLabeling {
        assignment,
        num_clusters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// Fixed eps, the static baseline.
    Constant,
    Step,
    Linear,
    Expo,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 4] = [
        ScheduleKind::Constant,
        ScheduleKind::Step,
        ScheduleKind::Linear,
        ScheduleKind::Expo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Step => "step",
            ScheduleKind::Linear => "linear",
            ScheduleKind::Expo => "expo",
        }
    }
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ScheduleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scheduler kind `{s}` (expected constant, step, linear or expo)"))
    }
}

/// Per-epoch DBSCAN radius.
///
/// * expo: `eps_begin * decay^epoch`
/// * linear: `eps_begin - decrement * epoch`
/// * step: the linear schedule frozen on plateaus of `step_size` epochs,
///   `eps_begin - decrement * step_size * floor(epoch / step_size)`; a step
///   size of 1 is exactly the linear schedule
/// * constant: `fixed` at every epoch, the static baseline
///
/// The decaying kinds start at exactly `eps_begin` and are clamped from
/// below at `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    pub kind: ScheduleKind,
    pub eps_begin: f64,
    pub decay: f64,
    pub decrement: f64,
    pub step_size: usize,
    pub floor: f64,
    pub fixed: f64,
}

impl EpsSchedule {
    /// Schedule of `kind` that reaches `eps_begin / 2` after `half_life`
    /// epochs and stays there.
    pub fn with_half_life(kind: ScheduleKind, eps_begin: f64, half_life: f64, step_size: usize) -> Self {
        let floor = eps_begin / 2.0;
        EpsSchedule {
            kind,
            eps_begin,
            decay: 0.5f64.powf(1.0 / half_life),
            decrement: (eps_begin - floor) / half_life,
            step_size,
            floor,
            fixed: eps_begin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_begin.is_finite() && self.eps_begin > 0.0) {
            return Err(DcccError::config("eps_begin", "must be a positive finite number"));
        }
        if !(self.floor > 0.0 && self.floor <= self.eps_begin) {
            return Err(DcccError::config("eps_floor", "must lie in (0, eps_begin]"));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(DcccError::config("eps_decay", "must lie in (0, 1]"));
        }
        if !(self.decrement.is_finite() && self.decrement >= 0.0) {
            return Err(DcccError::config("eps_decrement", "must be a finite non-negative number"));
        }
        if !(self.fixed.is_finite() && self.fixed > 0.0) {
            return Err(DcccError::config("eps_fixed", "must be a positive finite number"));
        }
        if self.step_size < 1 {
            return Err(DcccError::config("eps_step_size", "must be at least 1"));
        }
        Ok(())
    }

    /// The unclamped schedule value.
    pub fn raw_at(&self, epoch: usize) -> f64 {
        match self.kind {
            ScheduleKind::Constant => self.fixed,
            ScheduleKind::Expo => self.eps_begin * self.decay.powi(epoch.min(i32::MAX as usize) as i32),
            ScheduleKind::Linear => self.eps_begin - self.decrement * epoch as f64,
            ScheduleKind::Step => {
                let plateau = (epoch / self.step_size) * self.step_size;
                self.eps_begin - self.decrement * plateau as f64
            }
        }
    }

    pub fn eps_at(&self, epoch: usize) -> f64 {
        if self.kind == ScheduleKind::Constant {
            return self.fixed;
        }
        if epoch == 0 {
            return self.eps_begin;
        }
        self.raw_at(epoch).max(self.floor)
    }
}
