//! PK mini-batches over pseudo-labels.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::PseudoLabeling;
use crate::error::{DcccError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PkConfig {
    /// Pseudo-identities per batch.
    pub p: usize,
    /// Instances per pseudo-identity.
    pub k: usize,
}

impl PkConfig {
    pub fn new(p: usize, k: usize) -> Result<Self> {
        if p < 1 {
            return Err(DcccError::config("pk_p", "must be at least 1"));
        }
        if k < 1 {
            return Err(DcccError::config("pk_k", "must be at least 1"));
        }
        Ok(PkConfig { p, k })
    }

    pub fn batch_size(&self) -> usize {
        self.p * self.k
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PkBatch {
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
}

/// Draws P distinct clusters uniformly, then K members of each: without
/// replacement when the cluster is large enough, with replacement otherwise.
/// Outliers are never drawn.
pub fn pk_sample<R: Rng + ?Sized>(labels: &PseudoLabeling, cfg: PkConfig, rng: &mut R) -> Result<PkBatch> {
    let members = labels.members();
    if members.len() < cfg.p {
        return Err(DcccError::Degenerate(format!(
            "{} clusters available, {} needed per batch",
            members.len(),
            cfg.p
        )));
    }
    let mut indices = Vec::with_capacity(cfg.batch_size());
    let mut batch_labels = Vec::with_capacity(cfg.batch_size());
    for cluster in sample(rng, members.len(), cfg.p).into_iter() {
        let pool = &members[cluster];
        if pool.len() >= cfg.k {
            indices.extend(sample(rng, pool.len(), cfg.k).into_iter().map(|j| pool[j]));
        } else {
            indices.extend((0..cfg.k).map(|_| pool[rng.random_range(0..pool.len())]));
        }
        batch_labels.extend(std::iter::repeat_n(cluster, cfg.k));
    }
    Ok(PkBatch {
        indices,
        labels: batch_labels,
    })
}
