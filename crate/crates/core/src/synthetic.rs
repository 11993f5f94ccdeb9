//! Synthetic "person" datasets.
//!
//! Every identity is a direction near a shared base vector; its images are
//! that direction plus isotropic Gaussian noise plus the additive offset of
//! the camera that captured them. Raw features are left unnormalized, the
//! encoder owns normalization.

use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DcccError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub num_ids: usize,
    pub images_per_id: usize,
    pub input_dim: usize,
    /// Scale of the per-identity deviation from the shared base direction.
    pub id_spread: f64,
    /// Per-coordinate std-dev of within-identity noise.
    pub intra_noise: f64,
    pub num_cameras: usize,
    /// Norm of each camera's additive offset.
    pub camera_shift: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            num_ids: 32,
            images_per_id: 16,
            input_dim: 64,
            id_spread: 1.0,
            intra_noise: 0.1,
            num_cameras: 4,
            camera_shift: 0.4,
            seed: 7,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_ids < 2 {
            return Err(DcccError::config("num_ids", "must be at least 2"));
        }
        if self.images_per_id < 2 {
            return Err(DcccError::config("images_per_id", "must be at least 2"));
        }
        if self.input_dim < 1 {
            return Err(DcccError::config("input_dim", "must be at least 1"));
        }
        for (name, v) in [
            ("id_spread", self.id_spread),
            ("intra_noise", self.intra_noise),
            ("camera_shift", self.camera_shift),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DcccError::config(name, "must be a finite non-negative number"));
            }
        }
        if self.num_cameras < 1 {
            return Err(DcccError::config("num_cameras", "must be at least 1"));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        self.num_ids * self.images_per_id
    }
}

/// Raw samples with their ground-truth identity and camera labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub spec: DatasetSpec,
    /// N x D_in, row-major, unnormalized.
    pub samples: Array2<f64>,
    pub true_ids: Vec<usize>,
    pub cam_ids: Vec<usize>,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let dim = spec.input_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let base = random_unit(&mut rng, dim);
    let means: Vec<Vec<f64>> = (0..spec.num_ids)
        .map(|_| {
            let u = random_unit(&mut rng, dim);
            base.iter()
                .zip(&u)
                .map(|(b, u)| b + spec.id_spread * u)
                .collect()
        })
        .collect();
    let cam_offsets: Vec<Vec<f64>> = (0..spec.num_cameras)
        .map(|_| {
            random_unit(&mut rng, dim)
                .into_iter()
                .map(|x| x * spec.camera_shift)
                .collect()
        })
        .collect();

    let n = spec.num_samples();
    let mut samples = Array2::zeros((n, dim));
    let mut true_ids = Vec::with_capacity(n);
    let mut cam_ids = Vec::with_capacity(n);
    for (id, mean) in means.iter().enumerate() {
        for j in 0..spec.images_per_id {
            let row = id * spec.images_per_id + j;
            // cameras rotate per identity so every camera sees every id
            let cam = (id + j) % spec.num_cameras;
            for c in 0..dim {
                let noise: f64 = if spec.intra_noise > 0.0 {
                    spec.intra_noise * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                samples[[row, c]] = mean[c] + noise + cam_offsets[cam][c];
            }
            true_ids.push(id);
            cam_ids.push(cam);
        }
    }

    Ok(SyntheticDataset {
        spec: spec.clone(),
        samples,
        true_ids,
        cam_ids,
    })
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.true_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_ids.is_empty()
    }

    /// Rows whose identity lies in `ids`, with identities renumbered from 0.
    pub fn select_ids(&self, ids: std::ops::Range<usize>) -> SyntheticDataset {
        let rows: Vec<usize> = (0..self.len())
            .filter(|&i| ids.contains(&self.true_ids[i]))
            .collect();
        let samples = self.samples.select(ndarray::Axis(0), &rows);
        let mut spec = self.spec.clone();
        spec.num_ids = ids.len();
        SyntheticDataset {
            spec,
            samples,
            true_ids: rows.iter().map(|&i| self.true_ids[i] - ids.start).collect(),
            cam_ids: rows.iter().map(|&i| self.cam_ids[i]).collect(),
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = DatasetFile {
            spec: self.spec.clone(),
            samples: self.samples.rows().into_iter().map(|r| r.to_vec()).collect(),
            true_ids: self.true_ids.clone(),
            cam_ids: self.cam_ids.clone(),
        };
        let text = serde_json::to_string(&file).map_err(|source| DcccError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text).map_err(|e| DcccError::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DcccError::io(path, e))?;
        let file: DatasetFile = serde_json::from_str(&text).map_err(|source| DcccError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        file.into_dataset()
    }
}

/// On-disk JSON layout of a dataset.
#[derive(Serialize, Deserialize)]
struct DatasetFile {
    spec: DatasetSpec,
    samples: Vec<Vec<f64>>,
    true_ids: Vec<usize>,
    cam_ids: Vec<usize>,
}

impl DatasetFile {
    fn into_dataset(self) -> Result<SyntheticDataset> {
        let n = self.samples.len();
        if self.true_ids.len() != n || self.cam_ids.len() != n {
            return Err(DcccError::Contract(format!(
                "dataset has {n} samples but {} ids and {} cameras",
                self.true_ids.len(),
                self.cam_ids.len()
            )));
        }
        let dim = self.samples.first().map_or(0, Vec::len);
        if self.samples.iter().any(|r| r.len() != dim) {
            return Err(DcccError::Contract("ragged sample rows".into()));
        }
        let flat: Vec<f64> = self.samples.into_iter().flatten().collect();
        let samples = Array2::from_shape_vec((n, dim), flat)
            .map_err(|e| DcccError::Contract(e.to_string()))?;
        Ok(SyntheticDataset {
            spec: self.spec,
            samples,
            true_ids: self.true_ids,
            cam_ids: self.cam_ids,
        })
    }
}

/// Query/gallery index partition of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryGallerySplit {
    pub query: Vec<usize>,
    pub gallery: Vec<usize>,
}

/// Picks `query_per_id` random images of every identity as queries; the rest
/// form the gallery. Both index lists are returned sorted.
pub fn split_query_gallery(
    ds: &SyntheticDataset,
    query_per_id: usize,
    seed: u64,
) -> Result<QueryGallerySplit> {
    let num_ids = ds.true_ids.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_ids];
    for (i, &id) in ds.true_ids.iter().enumerate() {
        members[id].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut query = Vec::new();
    let mut gallery = Vec::new();
    for (id, mut idx) in members.into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if query_per_id >= idx.len() {
            return Err(DcccError::config(
                "query_per_id",
                format!(
                    "{query_per_id} queries requested but identity {id} has only {} images",
                    idx.len()
                ),
            ));
        }
        idx.shuffle(&mut rng);
        query.extend_from_slice(&idx[..query_per_id]);
        gallery.extend_from_slice(&idx[query_per_id..]);
    }
    query.sort_unstable();
    gallery.sort_unstable();
    Ok(QueryGallerySplit { query, gallery })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub noise_std: f64,
    pub dropout_prob: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            noise_std: 0.05,
            dropout_prob: 0.1,
        }
    }
}

impl AugmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(DcccError::config("aug_noise", "must be a finite non-negative number"));
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            return Err(DcccError::config("aug_dropout", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One stochastic view of a raw sample: additive Gaussian noise, then each
/// coordinate zeroed independently with probability `dropout_prob`.
pub fn augment<R: Rng + ?Sized>(
    x: ArrayView1<'_, f64>,
    p: &AugmentParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    p.validate()?;
    Ok(x.iter()
        .map(|&v| {
            let noisy = if p.noise_std > 0.0 {
                v + p.noise_std * rng.sample::<f64, _>(StandardNormal)
            } else {
                v
            };
            if p.dropout_prob > 0.0 && rng.random::<f64>() < p.dropout_prob {
                0.0
            } else {
                noisy
            }
        })
        .collect())
}
