//! Dynamic clustering and cluster contrastive learning on synthetic
//! re-identification data.
//!
//! The crate is organized bottom-up:
//!
//! * [`synthetic`] generates identity/camera datasets and augmentations,
//! * [`encoder`] is the student/teacher linear encoder with AdamW and EMA,
//! * [`distance`] and [`clustering`] turn features into pseudo-labels with a
//!   per-epoch eps schedule,
//! * [`memory`] and [`losses`] hold the cluster memory and contrastive losses,
//! * [`sampler`], [`trainer`] and [`metrics`] run and score experiments,
//! * [`config`] and [`sweep`] back the `dccc` command line.

pub mod clustering;
pub mod config;
pub mod distance;
pub mod encoder;
pub mod error;
pub mod losses;
pub mod memory;
pub mod metrics;
pub mod sampler;
pub mod sweep;
pub mod synthetic;
pub mod trainer;

pub use error::{DcccError, Result};
pub use trainer::{train, TrainConfig};
