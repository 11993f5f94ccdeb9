//! Flat `key = value` experiment configs.
//!
//! Blank lines and `#` comments are ignored, keys may appear at most once
//! and unknown keys are rejected. Missing keys keep their defaults.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{DcccError, Result};
use crate::synthetic::DatasetSpec;
use crate::trainer::TrainConfig;

type Getter = fn(&TrainConfig) -> String;
type Setter = fn(&mut TrainConfig, &str) -> std::result::Result<(), String>;

fn parse<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| e.to_string())
}

macro_rules! keys {
    ($($key:literal => $($field:ident).+;)*) => {
        const KEYS: &[(&str, Getter, Setter)] = &[
            $((
                $key,
                |c: &TrainConfig| c.$($field).+.to_string(),
                |c: &mut TrainConfig, v: &str| {
                    c.$($field).+ = parse(v)?;
                    Ok(())
                },
            ),)*
        ];
    };
}

keys! {
    "seed" => seed;
    "num_ids" => dataset.num_ids;
    "images_per_id" => dataset.images_per_id;
    "input_dim" => dataset.input_dim;
    "id_spread" => dataset.id_spread;
    "intra_noise" => dataset.intra_noise;
    "num_cameras" => dataset.num_cameras;
    "camera_shift" => dataset.camera_shift;
    "eval_ids" => eval_ids;
    "query_per_id" => query_per_id;
    "output_dim" => output_dim;
    "aug_noise" => augment.noise_std;
    "aug_dropout" => augment.dropout_prob;
    "base_lr" => base_lr;
    "warmup_epochs" => warmup_epochs;
    "adam_beta1" => adam.beta1;
    "adam_beta2" => adam.beta2;
    "adam_eps" => adam.eps;
    "weight_decay" => adam.weight_decay;
    "scheduler" => schedule.kind;
    "eps_begin" => schedule.eps_begin;
    "eps_floor" => schedule.floor;
    "eps_decay" => schedule.decay;
    "eps_decrement" => schedule.decrement;
    "eps_step_size" => schedule.step_size;
    "eps_fixed" => schedule.fixed;
    "min_samples" => min_samples;
    "k_neighbors" => k_neighbors;
    "memory_mode" => memory_mode;
    "gamma" => gamma;
    "tau_w" => tau_w;
    "loss_kind" => loss.kind;
    "tau" => loss.tau;
    "mu_s" => loss.mu_s;
    "ce_weight" => loss.ce_weight;
    "ema_lambda" => ema_lambda;
    "pk_p" => pk.p;
    "pk_k" => pk.k;
    "epochs" => epochs;
    "iters_per_epoch" => iters_per_epoch;
    "eval_network" => eval_network;
    "cluster_network" => cluster_network;
}

const DATASET_KEYS: &[&str] = &[
    "seed",
    "num_ids",
    "images_per_id",
    "input_dim",
    "id_spread",
    "intra_noise",
    "num_cameras",
    "camera_shift",
];

/// Every recognized key, in the order [`write_config`] emits them.
pub fn config_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|k| k.0)
}

/// Sets one key from its textual value.
pub fn set_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    let (_, _, set) = KEYS
        .iter()
        .find(|k| k.0 == key)
        .ok_or_else(|| DcccError::config(key, "unknown key"))?;
    set(cfg, value).map_err(|reason| DcccError::config(key, format!("invalid value `{value}`: {reason}")))
}

pub fn get_key(cfg: &TrainConfig, key: &str) -> Option<String> {
    KEYS.iter().find(|k| k.0 == key).map(|k| (k.1)(cfg))
}

fn parse_lines(text: &str, base: TrainConfig, allowed: Option<&[&str]>) -> Result<TrainConfig> {
    let mut cfg = base;
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |key: &str, reason: String| DcccError::Parse {
            line: line_no,
            key: key.to_string(),
            reason,
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(line, "expected `key = value`".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        let Some((_, _, set)) = KEYS.iter().find(|k| k.0 == key) else {
            return Err(err(key, "unknown key".into()));
        };
        if allowed.is_some_and(|a| !a.contains(&key)) {
            return Err(err(key, "not a dataset key".into()));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(key, "duplicate key".into()));
        }
        set(&mut cfg, value).map_err(|r| err(key, format!("invalid value `{value}`: {r}")))?;
    }
    Ok(cfg)
}

/// Parses and validates a config; missing keys take their defaults.
pub fn parse_config_str(text: &str) -> Result<TrainConfig> {
    let cfg = parse_lines(text, TrainConfig::default(), None)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| DcccError::io(path, e))?;
    parse_config_str(&text)
}

/// Parses a dataset spec: either a JSON object or flat dataset keys
/// (`seed`, `num_ids`, ...).
pub fn parse_dataset_spec_str(text: &str) -> Result<DatasetSpec> {
    let spec = if text.trim_start().starts_with('{') {
        serde_json::from_str::<DatasetSpec>(text).map_err(|e| DcccError::Parse {
            line: e.line(),
            key: "spec".into(),
            reason: e.to_string(),
        })?
    } else {
        let cfg = parse_lines(text, TrainConfig::default(), Some(DATASET_KEYS))?;
        DatasetSpec {
            seed: cfg.seed,
            ..cfg.dataset
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Serializes every key. Parsing the output gives back an equal config.
pub fn write_config(cfg: &TrainConfig) -> String {
    let mut out = String::new();
    for (key, get, _) in KEYS {
        let _ = writeln!(out, "{key} = {}", get(cfg));
    }
    out
}
