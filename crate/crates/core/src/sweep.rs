//! One-axis experiment sweeps over a base config.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::clustering::ScheduleKind;
use crate::config::set_key;
use crate::error::{DcccError, Result};
use crate::losses::LossKind;
use crate::memory::UpdateMode;
use crate::trainer::{fmt_opt, train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    SchedulerKind,
    MemoryMode,
    LossKind,
    TauW,
    MuS,
    StepSize,
    /// `+`-joined subsets of `dcps`, `dycl`, `lss`; `none` is the baseline.
    Components,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 7] = [
        SweepAxis::SchedulerKind,
        SweepAxis::MemoryMode,
        SweepAxis::LossKind,
        SweepAxis::TauW,
        SweepAxis::MuS,
        SweepAxis::StepSize,
        SweepAxis::Components,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SchedulerKind => "scheduler_kind",
            SweepAxis::MemoryMode => "memory_mode",
            SweepAxis::LossKind => "loss_kind",
            SweepAxis::TauW => "tau_w",
            SweepAxis::MuS => "mu_s",
            SweepAxis::StepSize => "step_size",
            SweepAxis::Components => "components",
        }
    }

    /// Config with this axis set to `value`.
    pub fn apply(self, base: &TrainConfig, value: &str) -> Result<TrainConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::SchedulerKind => set_key(&mut cfg, "scheduler", value)?,
            SweepAxis::MemoryMode => set_key(&mut cfg, "memory_mode", value)?,
            SweepAxis::LossKind => set_key(&mut cfg, "loss_kind", value)?,
            SweepAxis::TauW => set_key(&mut cfg, "tau_w", value)?,
            SweepAxis::MuS => set_key(&mut cfg, "mu_s", value)?,
            SweepAxis::StepSize => {
                cfg.schedule.kind = ScheduleKind::Step;
                set_key(&mut cfg, "eps_step_size", value)?;
            }
            SweepAxis::Components => {
                let (dcps, dycl, lss) = parse_components(value)?;
                if !dcps {
                    cfg.schedule.kind = ScheduleKind::Constant;
                } else if cfg.schedule.kind == ScheduleKind::Constant {
                    cfg.schedule.kind = ScheduleKind::Expo;
                }
                cfg.memory_mode = if dycl { UpdateMode::Dynamic } else { UpdateMode::Instance };
                cfg.loss.kind = if lss { LossKind::Lss } else { LossKind::ClusterNce };
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The Table-1 style component grid.
pub const COMPONENT_GRID: [&str; 8] = [
    "none",
    "dycl",
    "dcps",
    "lss",
    "dcps+lss",
    "dycl+lss",
    "dcps+dycl",
    "dcps+dycl+lss",
];

fn parse_components(value: &str) -> Result<(bool, bool, bool)> {
    let mut on = (false, false, false);
    if value == "none" {
        return Ok(on);
    }
    for part in value.split('+') {
        match part {
            "dcps" => on.0 = true,
            "dycl" => on.1 = true,
            "lss" => on.2 = true,
            _ => {
                return Err(DcccError::config(
                    "components",
                    format!("unknown component `{part}` (expected dcps, dycl, lss or none)"),
                ))
            }
        }
    }
    Ok(on)
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|a| a.name()).collect();
                format!("unknown sweep axis `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Expands `start:stop:step` tokens into their grid; other tokens pass
/// through. `0.01:0.13:0.02` gives seven values.
pub fn expand_values(list: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = token.split(':').collect();
        if parts.len() == 1 {
            out.push(token.to_string());
            continue;
        }
        let nums: Vec<f64> = parts.iter().filter_map(|p| p.parse().ok()).collect();
        let [start, stop, step] = nums[..] else {
            return Err(DcccError::config("values", format!("bad range `{token}` (expected start:stop:step)")));
        };
        if !(step > 0.0) || stop < start {
            return Err(DcccError::config("values", format!("empty range `{token}`")));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        for i in 0..=n {
            let v = start + step * i as f64;
            out.push(format!("{}", (v * 1e10).round() / 1e10));
        }
    }
    if out.is_empty() {
        return Err(DcccError::config("values", "at least one value is required"));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
    pub base: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub seed: u64,
    pub map: Option<f64>,
    pub r1: Option<f64>,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    /// `ok`, or the error that stopped the run.
    pub status: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

/// Runs every (value, seed) pair. Each run uses the listed seed as its
/// `seed`, so all values of the axis see the same data and initializations.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    if spec.values.is_empty() {
        return Err(DcccError::config("values", "at least one value is required"));
    }
    if spec.seeds.is_empty() {
        return Err(DcccError::config("seeds", "at least one seed is required"));
    }
    spec.base.validate()?;
    let jobs: Vec<(&String, u64)> = spec
        .values
        .iter()
        .flat_map(|v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(value, seed)| run_one(spec, value, seed))
        .collect();
    Ok(SweepOutcome { axis: spec.axis, rows })
}

fn run_one(spec: &SweepSpec, value: &str, seed: u64) -> SweepRow {
    let result = spec.axis.apply(&spec.base, value).and_then(|mut cfg| {
        cfg.seed = seed;
        train(&cfg)
    });
    match result {
        Ok(outcome) => {
            let r = outcome.final_report();
            SweepRow {
                value: value.to_string(),
                seed,
                map: r.map,
                r1: r.r1,
                ari: r.ari,
                nmi: r.nmi,
                status: "ok".into(),
            }
        }
        Err(e) => SweepRow {
            value: value.to_string(),
            seed,
            map: None,
            r1: None,
            ari: None,
            nmi: None,
            status: e.to_string(),
        },
    }
}

/// Median of the present values; mean of the middle two for even counts.
pub fn median(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().flatten().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub value: String,
    pub map: Option<f64>,
    pub r1: Option<f64>,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub ok_runs: usize,
    pub runs: usize,
}

impl SweepOutcome {
    /// Per-value medians in first-appearance order.
    pub fn summary(&self) -> Vec<SweepSummary> {
        let mut values: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !values.contains(&r.value.as_str()) {
                values.push(&r.value);
            }
        }
        values
            .into_iter()
            .map(|v| {
                let rows: Vec<&SweepRow> = self.rows.iter().filter(|r| r.value == v).collect();
                SweepSummary {
                    value: v.to_string(),
                    map: median(rows.iter().map(|r| r.map)),
                    r1: median(rows.iter().map(|r| r.r1)),
                    ari: median(rows.iter().map(|r| r.ari)),
                    nmi: median(rows.iter().map(|r| r.nmi)),
                    ok_runs: rows.iter().filter(|r| r.status == "ok").count(),
                    runs: rows.len(),
                }
            })
            .collect()
    }

    /// Per-run rows, a blank line, then the median block.
    pub fn to_csv(&self) -> String {
        let axis = self.axis.name();
        let mut out = String::from("axis,value,seed,map,r1,ari,nmi,status\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{axis},{},{},{},{},{},{},{}",
                r.value,
                r.seed,
                fmt_opt(r.map),
                fmt_opt(r.r1),
                fmt_opt(r.ari),
                fmt_opt(r.nmi),
                csv_field(&r.status)
            );
        }
        out.push_str("\naxis,value,median_map,median_r1,median_ari,median_nmi,ok_runs,runs\n");
        for s in self.summary() {
            let _ = writeln!(
                out,
                "{axis},{},{},{},{},{},{},{}",
                s.value,
                fmt_opt(s.map),
                fmt_opt(s.r1),
                fmt_opt(s.ari),
                fmt_opt(s.nmi),
                s.ok_runs,
                s.runs
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `scheduler,epoch,eps` rows for every schedule kind over `epochs`.
pub fn eps_curve_csv(base: &TrainConfig, epochs: usize) -> String {
    let mut out = String::from("scheduler,epoch,eps\n");
    for kind in ScheduleKind::ALL {
        let s = crate::clustering::EpsSchedule { kind, ..base.schedule };
        for e in 0..epochs {
            let _ = writeln!(out, "{},{e},{:.6}", kind.name(), s.eps_at(e));
        }
    }
    out
}
