//! The epoch loop: cluster student features, rebuild the cluster memory,
//! then train the student against it while the teacher follows by EMA.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{dbscan, DbscanParams, EpsSchedule, PseudoLabeling, ScheduleKind};
use crate::distance::jaccard_distance;
use crate::encoder::{
    backward, ema_update, encode, forward, warmup_lr, AdamConfig, AdamState, EmaConfig, EncoderParams,
};
use crate::error::{DcccError, Result};
use crate::losses::{training_loss, LossKind, LossParams};
use crate::memory::{init_memory, ClusterMemory, UpdateMode};
use crate::metrics::{clustering_quality, distance_stats, evaluate_retrieval, RetrievalResult};
use crate::sampler::{pk_sample, PkConfig};
use crate::synthetic::{augment, generate_dataset, split_query_gallery, AugmentParams, DatasetSpec, QueryGallerySplit, SyntheticDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Network {
    Student,
    Teacher,
}

impl Network {
    pub fn name(self) -> &'static str {
        match self {
            Network::Student => "student",
            Network::Teacher => "teacher",
        }
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Network {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "student" => Ok(Network::Student),
            "teacher" => Ok(Network::Teacher),
            _ => Err(format!("unknown network `{s}` (expected student or teacher)")),
        }
    }
}

/// Complete description of one experiment. Every random draw derives from
/// `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Training identities; `dataset.seed` is ignored in favor of `seed`.
    pub dataset: DatasetSpec,
    /// Held-out identities used for query/gallery retrieval.
    pub eval_ids: usize,
    pub query_per_id: usize,
    pub output_dim: usize,
    pub augment: AugmentParams,
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub adam: AdamConfig,
    pub schedule: EpsSchedule,
    pub min_samples: usize,
    pub k_neighbors: usize,
    pub memory_mode: UpdateMode,
    pub gamma: f64,
    pub tau_w: f64,
    pub loss: LossParams,
    pub ema_lambda: f64,
    pub pk: PkConfig,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub seed: u64,
    pub eval_network: Network,
    pub cluster_network: Network,
}

/// Epochs after which the default schedules reach half of `eps_begin`.
pub const DEFAULT_EPS_HALF_LIFE: f64 = 8.0;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dataset: DatasetSpec::default(),
            eval_ids: 16,
            query_per_id: 2,
            output_dim: 32,
            augment: AugmentParams::default(),
            base_lr: 0.003,
            warmup_epochs: 20,
            adam: AdamConfig::default(),
            schedule: EpsSchedule {
                fixed: 0.5,
                ..EpsSchedule::with_half_life(ScheduleKind::Expo, 0.7, DEFAULT_EPS_HALF_LIFE, 5)
            },
            min_samples: 4,
            k_neighbors: 20,
            memory_mode: UpdateMode::Dynamic,
            gamma: 0.1,
            tau_w: 0.09,
            loss: LossParams {
                kind: LossKind::Lss,
                tau: 0.05,
                mu_s: 0.3,
                ce_weight: 0.7,
            },
            ema_lambda: 0.99,
            pk: PkConfig { p: 8, k: 4 },
            epochs: 15,
            iters_per_epoch: 50,
            seed: 7,
            eval_network: Network::Student,
            cluster_network: Network::Student,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut full = self.dataset.clone();
        full.num_ids += self.eval_ids;
        full.validate()?;
        if self.eval_ids < 2 {
            return Err(DcccError::config("eval_ids", "must be at least 2"));
        }
        if self.query_per_id < 1 || self.query_per_id >= self.dataset.images_per_id {
            return Err(DcccError::config("query_per_id", "must lie in [1, images_per_id)"));
        }
        if self.output_dim < 2 {
            return Err(DcccError::config("output_dim", "must be at least 2"));
        }
        self.augment.validate()?;
        if !(self.base_lr.is_finite() && self.base_lr >= 0.0) {
            return Err(DcccError::config("base_lr", "must be a finite non-negative number"));
        }
        if self.warmup_epochs < 1 {
            return Err(DcccError::config("warmup_epochs", "must be at least 1"));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) {
            return Err(DcccError::config("adam_beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&a.beta2) {
            return Err(DcccError::config("adam_beta2", "must lie in [0, 1)"));
        }
        if !(a.eps > 0.0) {
            return Err(DcccError::config("adam_eps", "must be positive"));
        }
        if !(a.weight_decay >= 0.0 && a.weight_decay.is_finite()) {
            return Err(DcccError::config("weight_decay", "must be a finite non-negative number"));
        }
        self.schedule.validate()?;
        DbscanParams::new(self.schedule.floor, self.min_samples)?;
        if self.k_neighbors < 1 {
            return Err(DcccError::config("k_neighbors", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(DcccError::config("gamma", "must lie in [0, 1]"));
        }
        if !(self.tau_w > 0.0) {
            return Err(DcccError::config("tau_w", "must be positive"));
        }
        if !(self.loss.tau > 0.0 && self.loss.tau.is_finite()) {
            return Err(DcccError::config("tau", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.loss.mu_s) {
            return Err(DcccError::config("mu_s", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.loss.ce_weight) {
            return Err(DcccError::config("ce_weight", "must lie in [0, 1]"));
        }
        EmaConfig::new(self.ema_lambda)?;
        PkConfig::new(self.pk.p, self.pk.k)?;
        if self.epochs < 1 {
            return Err(DcccError::config("epochs", "must be at least 1"));
        }
        Ok(())
    }

    /// Spec of the full generated population: training ids then eval ids.
    fn population_spec(&self) -> DatasetSpec {
        DatasetSpec {
            num_ids: self.dataset.num_ids + self.eval_ids,
            seed: self.seed,
            ..self.dataset.clone()
        }
    }
}

/// Metrics of one epoch. Absent values are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub eps: f64,
    pub clusters: usize,
    pub outliers: usize,
    /// Mean training loss; absent for a degenerate epoch.
    pub loss: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub intra: Option<f64>,
    pub inter: Option<f64>,
    pub map: Option<f64>,
    pub r1: Option<f64>,
    pub r5: Option<f64>,
    pub r10: Option<f64>,
}

pub const REPORT_HEADER: &str = "epoch,eps,clusters,outliers,loss,nmi,ari,intra,inter,map,r1,r5,r10";

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl EpochReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.eps,
            self.clusters,
            self.outliers,
            fmt_opt(self.loss),
            fmt_opt(self.nmi),
            fmt_opt(self.ari),
            fmt_opt(self.intra),
            fmt_opt(self.inter),
            fmt_opt(self.map),
            fmt_opt(self.r1),
            fmt_opt(self.r5),
            fmt_opt(self.r10),
        )
    }
}

pub fn reports_csv(reports: &[EpochReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Training and evaluation data derived from a config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub train: SyntheticDataset,
    pub eval: SyntheticDataset,
    pub split: QueryGallerySplit,
}

impl Experiment {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let population = generate_dataset(&cfg.population_spec())?;
        let n_train = cfg.dataset.num_ids;
        let train = population.select_ids(0..n_train);
        let eval = population.select_ids(n_train..n_train + cfg.eval_ids);
        let split = split_query_gallery(&eval, cfg.query_per_id, cfg.seed)?;
        Ok(Experiment { train, eval, split })
    }
}

// Independent ChaCha streams of the run seed.
const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;

/// Mutable state carried from epoch to epoch.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub student: EncoderParams,
    pub teacher: EncoderParams,
    pub adam: AdamState,
    pub memory: Option<ClusterMemory>,
    pub epochs_done: usize,
    rng: ChaCha8Rng,
}

impl TrainState {
    /// Random student; the teacher starts as an exact copy.
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        init_rng.set_stream(STREAM_INIT);
        let student = EncoderParams::random(cfg.dataset.input_dim, cfg.output_dim, &mut init_rng)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(STREAM_TRAIN);
        Ok(TrainState {
            teacher: student.clone(),
            adam: AdamState::new(&student, cfg.adam),
            student,
            memory: None,
            epochs_done: 0,
            rng,
        })
    }

    fn network(&self, which: Network) -> &EncoderParams {
        match which {
            Network::Student => &self.student,
            Network::Teacher => &self.teacher,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            student: self.student.clone(),
            teacher: self.teacher.clone(),
            adam: self.adam.clone(),
            epoch: self.epochs_done,
            memory: self.memory.as_ref().map(|m| crate::encoder::rows_to_vecs(&m.vectors)),
            gamma: self.memory.as_ref().map(|m| m.gamma),
            mode: self.memory.as_ref().map(|m| m.mode),
            tau_w: self.memory.as_ref().map(|m| m.tau_w),
        }
    }
}

/// Serialized training state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub student: EncoderParams,
    pub teacher: EncoderParams,
    pub adam: AdamState,
    pub epoch: usize,
    pub memory: Option<Vec<Vec<f64>>>,
    pub gamma: Option<f64>,
    pub mode: Option<UpdateMode>,
    pub tau_w: Option<f64>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|source| DcccError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text).map_err(|e| DcccError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DcccError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| DcccError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn network(&self, which: Network) -> &EncoderParams {
        match which {
            Network::Student => &self.student,
            Network::Teacher => &self.teacher,
        }
    }
}

/// Jaccard + DBSCAN pseudo-labels of a feature matrix.
pub fn pseudo_label(features: &Array2<f64>, eps: f64, min_samples: usize, k: usize) -> Result<PseudoLabeling> {
    let d = jaccard_distance(features.view(), k)?;
    dbscan(&d, DbscanParams::new(eps, min_samples)?)
}

/// Retrieval metrics of `params` on the experiment's query/gallery split.
pub fn evaluate_split(params: &EncoderParams, data: &SyntheticDataset, split: &QueryGallerySplit) -> Result<RetrievalResult> {
    let feats = encode(params, data.samples.view())?;
    let q = feats.select(Axis(0), &split.query);
    let g = feats.select(Axis(0), &split.gallery);
    let pick = |idx: &[usize], labels: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
    evaluate_retrieval(
        q.view(),
        g.view(),
        &pick(&split.query, &data.true_ids),
        &pick(&split.gallery, &data.true_ids),
        &pick(&split.query, &data.cam_ids),
        &pick(&split.gallery, &data.cam_ids),
    )
}

fn augment_rows(
    data: &SyntheticDataset,
    indices: &[usize],
    p: &AugmentParams,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((indices.len(), data.samples.ncols()));
    for (r, &i) in indices.iter().enumerate() {
        let view = augment(data.samples.row(i), p, rng)?;
        out.row_mut(r).assign(&ndarray::ArrayView1::from(&view));
    }
    Ok(out)
}

/// Runs one epoch (numbered from 0) and reports its metrics.
pub fn run_epoch(state: &mut TrainState, cfg: &TrainConfig, exp: &Experiment, epoch: usize) -> Result<EpochReport> {
    let features = encode(state.network(cfg.cluster_network), exp.train.samples.view())?;
    let eps = cfg.schedule.eps_at(epoch);
    let labels = pseudo_label(&features, eps, cfg.min_samples, cfg.k_neighbors)?;
    let quality = clustering_quality(&labels, &exp.train.true_ids)?;

    let mut loss = None;
    if labels.num_clusters >= cfg.pk.p {
        let mut memory = init_memory(features.view(), &labels, cfg.gamma, cfg.memory_mode, cfg.tau_w)?;
        let ema = EmaConfig::new(cfg.ema_lambda)?;
        let lr = warmup_lr(epoch, cfg.base_lr, cfg.warmup_epochs);
        let mut total = 0.0;
        for _ in 0..cfg.iters_per_epoch {
            let batch = pk_sample(&labels, cfg.pk, &mut state.rng)?;
            let view_s = augment_rows(&exp.train, &batch.indices, &cfg.augment, &mut state.rng)?;
            let view_t = augment_rows(&exp.train, &batch.indices, &cfg.augment, &mut state.rng)?;
            let (q_s, cache) = forward(&state.student, view_s.view())?;
            let q_t = encode(&state.teacher, view_t.view())?;

            let out = training_loss(&cfg.loss, q_s.view(), q_t.view(), &batch.labels, &memory)?;
            total += out.loss;
            let grads = backward(&state.student, &cache, out.grad.view())?;
            state.adam.step(&mut state.student, &grads, lr)?;
            ema_update(&mut state.teacher, &state.student, ema)?;
            memory.batch_update(q_s.view(), &batch.labels)?;
        }
        if cfg.iters_per_epoch > 0 {
            loss = Some(total / cfg.iters_per_epoch as f64);
        }
        state.memory = Some(memory);
    }
    state.epochs_done = epoch + 1;

    let after = encode(&state.student, exp.train.samples.view())?;
    let stats = distance_stats(after.view(), &exp.train.true_ids)?;
    let retrieval = match evaluate_split(state.network(cfg.eval_network), &exp.eval, &exp.split) {
        Ok(r) => Some(r),
        Err(DcccError::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };

    Ok(EpochReport {
        epoch,
        eps,
        clusters: labels.num_clusters,
        outliers: labels.num_outliers(),
        loss,
        nmi: quality.nmi,
        ari: quality.ari,
        intra: stats.intra,
        inter: stats.inter,
        map: retrieval.map(|r| r.map),
        r1: retrieval.map(|r| r.r1),
        r5: retrieval.map(|r| r.r5),
        r10: retrieval.map(|r| r.r10),
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub reports: Vec<EpochReport>,
    pub state: TrainState,
}

impl TrainOutcome {
    pub fn final_report(&self) -> &EpochReport {
        self.reports.last().expect("at least one epoch")
    }
}

/// Runs all epochs in memory.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let exp = Experiment::new(cfg)?;
    let mut state = TrainState::new(cfg)?;
    let mut reports = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        reports.push(run_epoch(&mut state, cfg, &exp, epoch)?);
    }
    Ok(TrainOutcome { reports, state })
}

pub const REPORTS_FILE: &str = "reports.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Trains and writes `reports.csv` and `checkpoint.json` into `out_dir`.
pub fn train_to_dir(cfg: &TrainConfig, out_dir: &Path) -> Result<TrainOutcome> {
    let outcome = train(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| DcccError::io(out_dir, e))?;
    let csv_path = out_dir.join(REPORTS_FILE);
    std::fs::write(&csv_path, reports_csv(&outcome.reports)).map_err(|e| DcccError::io(&csv_path, e))?;
    outcome.state.checkpoint().save(&out_dir.join(CHECKPOINT_FILE))?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> TrainConfig {
        TrainConfig {
            dataset: DatasetSpec {
                num_ids: 8,
                images_per_id: 6,
                input_dim: 16,
                intra_noise: 0.05,
                ..DatasetSpec::default()
            },
            eval_ids: 4,
            output_dim: 8,
            k_neighbors: 5,
            min_samples: 3,
            pk: PkConfig { p: 4, k: 2 },
            epochs: 2,
            iters_per_epoch: 5,
            base_lr: 0.01,
            warmup_epochs: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn one_epoch_one_row() {
        let cfg = TrainConfig { epochs: 1, ..tiny() };
        let out = train(&cfg).unwrap();
        assert_eq!(out.reports.len(), 1);
        let csv = reports_csv(&out.reports);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap(), REPORT_HEADER);
    }

    #[test]
    fn teacher_is_never_optimized() {
        // with lambda = 1 the teacher must stay at its initial copy
        let cfg = TrainConfig { ema_lambda: 1.0, ..tiny() };
        let init = TrainState::new(&cfg).unwrap();
        let out = train(&cfg).unwrap();
        assert!(out.reports.iter().any(|r| r.loss.is_some()));
        assert_eq!(out.state.teacher, init.teacher);
        assert_ne!(out.state.student, init.student);
    }

    #[test]
    fn zero_lambda_teacher_tracks_student() {
        let cfg = TrainConfig { ema_lambda: 0.0, ..tiny() };
        let out = train(&cfg).unwrap();
        for (t, s) in out.state.teacher.weight.iter().zip(out.state.student.weight.iter()) {
            assert!((t - s).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_epoch_leaves_encoder_untouched() {
        // P larger than the number of identities can never be satisfied
        let cfg = TrainConfig {
            pk: PkConfig { p: 50, k: 2 },
            ..tiny()
        };
        let init = TrainState::new(&cfg).unwrap();
        let out = train(&cfg).unwrap();
        assert!(out.reports.iter().all(|r| r.loss.is_none()));
        assert_eq!(out.state.student, init.student);
        assert!(out.reports[0].csv_row().contains("NA"));
    }

    #[test]
    fn checkpoint_round_trip() {
        let out = train(&tiny()).unwrap();
        let ck = out.state.checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["\"student\"", "\"teacher\"", "\"adam\"", "\"epoch\"", "\"memory\"", "\"gamma\"", "\"mode\"", "\"tau_w\""] {
            assert!(text.contains(key), "{key}");
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = TrainConfig { epochs: 0, ..tiny() };
        assert!(train(&cfg).unwrap_err().to_string().contains("epochs"));
        let cfg = TrainConfig { query_per_id: 6, ..tiny() };
        assert!(cfg.validate().is_err());
    }
}
