use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dccc_core::config::{parse_config, parse_dataset_spec_str};
use dccc_core::encoder::encode;
use dccc_core::metrics::clustering_quality;
use dccc_core::sweep::{eps_curve_csv, expand_values, run_sweep, SweepAxis, SweepSpec};
use dccc_core::synthetic::{generate_dataset, split_query_gallery, SyntheticDataset};
use dccc_core::trainer::{evaluate_split, pseudo_label, train_to_dir, Checkpoint, Network};
use dccc_core::{DcccError, Result, TrainConfig};

/// Dynamic clustering and cluster contrastive learning on synthetic re-id data.
#[derive(Parser, Debug)]
#[command(name = "dccc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset as JSON.
    Generate {
        /// Dataset spec: flat `key = value` lines or a JSON object.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and write reports.csv and checkpoint.json.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score a checkpoint on a dataset; prints a JSON object.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Config supplying clustering and split parameters (defaults otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "student")]
        network: Network,
    },
    /// Train one config per (value, seed) along an axis.
    Sweep {
        #[arg(long, required_unless_present = "eps_curve")]
        axis: Option<SweepAxis>,
        /// Comma-separated values; `start:stop:step` expands to a grid.
        #[arg(long, requires = "axis")]
        values: Option<String>,
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds; defaults to the config's seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, requires = "axis")]
        out: Option<PathBuf>,
        /// Also write `scheduler,epoch,eps` rows for every schedule kind.
        #[arg(long)]
        eps_curve: Option<PathBuf>,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| DcccError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| DcccError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_num(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), |x| format!("{x}"))
}

fn evaluate(checkpoint: &Path, data: &Path, config: Option<&Path>, network: Network) -> Result<String> {
    let ck = Checkpoint::load(checkpoint)?;
    let ds = SyntheticDataset::load_json(data)?;
    let cfg = match config {
        Some(p) => parse_config(p)?,
        None => TrainConfig::default(),
    };
    let params = ck.network(network);
    let split = split_query_gallery(&ds, cfg.query_per_id, ds.spec.seed)?;
    let retrieval = evaluate_split(params, &ds, &split)?;
    let feats = encode(params, ds.samples.view())?;
    let eps = cfg.schedule.eps_at(ck.epoch.saturating_sub(1));
    let labels = pseudo_label(&feats, eps, cfg.min_samples, cfg.k_neighbors)?;
    let quality = clustering_quality(&labels, &ds.true_ids)?;
    Ok(format!(
        "{{\"map\":{},\"r1\":{},\"r5\":{},\"r10\":{},\"nmi\":{},\"ari\":{}}}",
        retrieval.map,
        retrieval.r1,
        retrieval.r5,
        retrieval.r10,
        json_num(quality.nmi),
        json_num(quality.ari)
    ))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { spec, out } => {
            let spec = parse_dataset_spec_str(&read(&spec)?)?;
            generate_dataset(&spec)?.save_json(&out)?;
        }
        Command::Train { config, out_dir } => {
            let cfg = parse_config(&config)?;
            let outcome = train_to_dir(&cfg, &out_dir)?;
            let last = outcome.final_report();
            println!("{}", dccc_core::trainer::REPORT_HEADER);
            println!("{}", last.csv_row());
        }
        Command::Evaluate {
            checkpoint,
            data,
            config,
            network,
        } => println!("{}", evaluate(&checkpoint, &data, config.as_deref(), network)?),
        Command::Sweep {
            axis,
            values,
            config,
            seeds,
            out,
            eps_curve,
        } => {
            let base = parse_config(&config)?;
            if let Some(path) = eps_curve {
                write(&path, &eps_curve_csv(&base, base.epochs))?;
            }
            if let Some(axis) = axis {
                let values = values.ok_or_else(|| DcccError::Config {
                    field: "values".into(),
                    reason: "required with --axis".into(),
                })?;
                let seeds = if seeds.is_empty() { vec![base.seed] } else { seeds };
                let spec = SweepSpec {
                    axis,
                    values: expand_values(&values)?,
                    seeds,
                    base,
                };
                let csv = run_sweep(&spec)?.to_csv();
                match out {
                    Some(path) => write(&path, &csv)?,
                    None => print!("{csv}"),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
