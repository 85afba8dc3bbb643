use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qnr_cli::commands::{self, TraceBundle, TraceMetadata};
use qnr_cli::config::{ExperimentConfig, Preset};

#[derive(Parser)]
#[command(name = "qnr", version, about = "Noise-induced quantum reservoir experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Built-in configuration; with --config it only replaces the split.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Subcommand)]
enum Command {
    /// Write per-instance state CSVs and a run manifest.
    Simulate(Common),
    /// Fit the linear readout and write metrics JSON.
    Train(Common),
    /// TIPC profiles of the simulated instances or of an ingested store.
    Tipc {
        #[command(flatten)]
        common: Common,
        /// Directory previously filled by `qnr ingest`.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Input-only capacity profile of the task target.
    Ipc(Common),
    /// Echo-state decay under amplitude damping.
    Esp(Common),
    /// Validate and store an externally recorded trace.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Bundle description (TOML with `inputs`, `states`, `[metadata]`).
        #[arg(long, conflicts_with_all = ["inputs", "states"])]
        bundle: Option<PathBuf>,
        /// Input series CSV (`t,value`).
        #[arg(long, requires = "states")]
        inputs: Option<PathBuf>,
        /// State CSV (`t,x1,...`); repeat to concatenate several files.
        #[arg(long)]
        states: Vec<PathBuf>,
        #[arg(long)]
        device: Option<String>,
        #[arg(long)]
        cnot_error: Option<f64>,
        #[arg(long)]
        readout_error: Option<f64>,
    },
}

fn resolve(c: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut cfg = match (&c.config, c.preset) {
        (Some(path), preset) => {
            let mut cfg = ExperimentConfig::load(path)?;
            if let Some(p) = preset {
                cfg.split = ExperimentConfig::preset(p).split;
            }
            cfg
        }
        (None, Some(p)) => ExperimentConfig::preset(p),
        (None, None) => bail!("give --config PATH or --preset {{paper,desk}}"),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let out = c
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, out))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(c) => {
            let (cfg, out) = resolve(&c)?;
            let m = commands::simulate(&cfg, &out)?;
            eprintln!("wrote {} artifacts to {}", m.artifacts.len(), out.display());
        }
        Command::Train(c) => {
            let (cfg, out) = resolve(&c)?;
            let m = commands::train(&cfg, &out)?;
            println!(
                "{}: train NRMSE {:.4}, eval NRMSE {:.4} ({} features)",
                m.model, m.train_nrmse, m.eval_nrmse, m.n_features
            );
        }
        Command::Tipc { common, store } => {
            if let Some(store) = store {
                let settings = match (&common.config, common.preset) {
                    (None, None) => Default::default(),
                    _ => resolve(&common)?.0.tipc,
                };
                let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
                let (r, _) = commands::tipc_ingested(&store, &settings, &out)?;
                let p = &r.profile;
                println!("rank {}: TIV {:.4}, TV {:.4}, total {:.4}", p.rank, p.tiv_total, p.tv_total, p.total);
            } else {
                let (cfg, out) = resolve(&common)?;
                for (i, r) in commands::tipc(&cfg, &out)?.iter().enumerate() {
                    let p = &r.profile;
                    println!("{i:4}  rank {}  TIV {:.4}  TV {:.4}  total {:.4}", p.rank, p.tiv_total, p.tv_total, p.total);
                }
            }
        }
        Command::Ipc(c) => {
            let (cfg, out) = resolve(&c)?;
            let r = commands::ipc(&cfg, &out)?;
            let mut kept: Vec<_> = r.records.iter().filter(|x| !x.truncated).collect();
            kept.sort_by(|a, b| b.capacity.total_cmp(&a.capacity));
            for rec in kept.iter().take(10) {
                println!("{:<28} {:.4}", rec.label, rec.capacity);
            }
            println!("total {:.4}", r.profile.total);
        }
        Command::Esp(c) => {
            let (cfg, out) = resolve(&c)?;
            let r = commands::esp(&cfg, &out)?;
            println!(
                "final distance {:.3e}, slope {}, bound slope {:.4}",
                r.final_distance,
                r.slope.map_or("n/a".into(), |s| format!("{s:.4}")),
                r.bound_slope
            );
        }
        Command::Ingest {
            common,
            bundle,
            inputs,
            states,
            device,
            cnot_error,
            readout_error,
        } => {
            let mut b = match (bundle, inputs) {
                (Some(path), _) => TraceBundle::load(&path)?,
                (None, Some(inputs)) => TraceBundle {
                    inputs,
                    states,
                    metadata: TraceMetadata::default(),
                },
                (None, None) => bail!("give --bundle PATH or --inputs CSV --states CSV"),
            };
            let m = &mut b.metadata;
            m.device = device.or(m.device.take());
            m.cnot_error = cnot_error.or(m.cnot_error);
            m.readout_error = readout_error.or(m.readout_error);
            let out = common.out.unwrap_or_else(|| PathBuf::from("out"));
            let index = commands::ingest(&b, &out)?;
            println!("stored {} x {} trace in {}", index.n_steps, index.n_features, out.join("store").display());
        }
    }
    Ok(())
}
