//! `chainsight` — batch pipeline from raw chain and market data to windowed
//! datasets, baseline predictors and evaluation reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chainsight::config::PipelineConfig;
use chainsight::fixture::{generate_fixture, FixtureSpec};
use chainsight::pipeline::{Pipeline, PipelineError};

#[derive(Parser)]
#[command(name = "chainsight", version, about, max_term_width = 100)]
struct Cli {
    /// JSON config file; omitted fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flags that override the corresponding config fields.
#[derive(Args, Clone)]
struct Overrides {
    /// Store directory (also via CHAINSIGHT_STORE).
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset preset 1..=8.
    #[arg(long, global = true)]
    preset: Option<u8>,
    /// Window length in ticks.
    #[arg(long, global = true)]
    wn: Option<usize>,
    /// Normalization: basic|around_zero|image|prop.
    #[arg(long, global = true)]
    norm: Option<String>,
    /// Prediction target property.
    #[arg(long, global = true)]
    target: Option<String>,
    /// Predictor: persistence|null_half|linear|mlp.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Training epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Seed for init and shuffling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-tick stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fit normalization on the train range only.
    #[arg(long, global = true)]
    fit_train_only: bool,
    /// Count and skip malformed ingest records instead of aborting.
    #[arg(long, global = true)]
    skip_bad_records: bool,
    /// Forward-fill missing market ticks.
    #[arg(long, global = true)]
    forward_fill: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Read raw chain and market files (or RPC) into the store.
    Ingest,
    /// Replay the ledger and extract every scalar property series.
    Properties,
    /// Compute the per-tick account distributions.
    Distributions,
    /// Normalize, window and write the dataset artifact.
    Dataset,
    /// Train the configured predictor on the train split.
    Train,
    /// Evaluate on the test split and write metrics.json.
    Evaluate,
    /// Export prediction curves, property CSVs or distribution frames.
    ExportPlot {
        /// Skip the predictions.csv export.
        #[arg(long)]
        no_predictions: bool,
        /// Export a scalar property series as CSV (repeatable).
        #[arg(long)]
        series: Vec<String>,
        /// Export a tensor property as PGM frames (repeatable).
        #[arg(long)]
        frames: Vec<String>,
    },
    /// Run every stage in order.
    RunAll,
    /// Generate a deterministic synthetic chain + tick fixture.
    Fixture {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        blocks: u64,
        #[arg(long, default_value_t = 200)]
        accounts: usize,
        #[arg(long, default_value_t = 4)]
        blocks_per_hour: u32,
        /// Output directory for the fixture files.
        #[arg(long, default_value = "fixture")]
        dir: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env();
    let o = &cli.overrides;
    if let Some(dir) = &o.store {
        cfg.store_dir = dir.clone();
    }
    if let Some(dir) = &o.out {
        cfg.out_dir = dir.clone();
    }
    if let Some(preset) = o.preset {
        cfg.dataset.preset = Some(preset);
    }
    if let Some(wn) = o.wn {
        cfg.dataset.wn = wn;
    }
    if let Some(norm) = &o.norm {
        cfg.dataset.norm = norm.clone();
    }
    if let Some(target) = &o.target {
        cfg.dataset.target = target.clone();
    }
    if let Some(model) = &o.model {
        cfg.train.model = model.clone();
    }
    if let Some(epochs) = o.epochs {
        cfg.train.epochs = epochs;
    }
    if let Some(seed) = o.seed {
        cfg.train.seed = seed;
    }
    if let Some(threads) = o.threads {
        cfg.options.threads = threads;
    }
    if o.fit_train_only {
        cfg.options.fit_train_only = true;
    }
    if o.skip_bad_records {
        cfg.options.skip_bad_records = true;
    }
    if o.forward_fill {
        cfg.options.forward_fill = true;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    if let Command::Fixture {
        seed,
        blocks,
        accounts,
        blocks_per_hour,
        dir,
    } = &cli.command
    {
        let spec = FixtureSpec {
            seed: *seed,
            n_blocks: *blocks,
            n_accounts: *accounts,
            blocks_per_hour: *blocks_per_hour,
            start_time: chainsight::fixture::DEFAULT_START,
        };
        let summary = generate_fixture(&spec, dir)?;
        println!(
            "fixture: {} blocks, {} ticks, {} transactions, {} traces, {} contracts",
            summary.n_blocks,
            summary.n_ticks,
            summary.n_transactions,
            summary.n_traces,
            summary.n_contracts
        );
        println!(
            "range: {}..{} ({} -> {})",
            summary.range.0,
            summary.range.1,
            summary.blocks.display(),
            summary.ticks.display()
        );
        return Ok(());
    }

    let pipeline = Pipeline::new(load_config(&cli)?)?;
    match cli.command {
        Command::Fixture { .. } => unreachable!("handled above"),
        Command::Ingest => {
            let s = pipeline.ingest()?;
            println!(
                "ingested {} blocks, {} transactions, {} traces, {} ticks ({} skipped)",
                s.blocks, s.transactions, s.traces, s.ticks, s.skipped_records
            );
            if !s.validation.is_clean() {
                println!(
                    "chain validation: {} gap(s), {} timestamp regression(s)",
                    s.validation.gaps.len(),
                    s.validation.timestamp_regressions.len()
                );
            }
        }
        Command::Properties => {
            let n = pipeline.properties()?;
            println!("stored {n} property series");
        }
        Command::Distributions => {
            let n = pipeline.distributions()?;
            println!("stored {n} distribution series");
        }
        Command::Dataset => {
            let path = pipeline.dataset()?;
            println!("wrote {}", path.display());
        }
        Command::Train => {
            let s = pipeline.train()?;
            if s.trained {
                println!(
                    "trained {} for {} epochs; best epoch {} (monitored mse {:.6e}); {}",
                    s.model.as_str(),
                    s.epochs,
                    s.best_epoch,
                    s.best_loss,
                    s.checkpoint.display()
                );
            } else {
                println!(
                    "{} has no trainable parameters; checkpoint written to {}",
                    s.model.as_str(),
                    s.checkpoint.display()
                );
            }
        }
        Command::Evaluate => {
            let e = pipeline.evaluate()?;
            println!(
                "{}: n={} mse={:.6} rmse={:.6} r2={:.6} r2_mean={:.6} sign={:.4}",
                e.model, e.n_test, e.mse, e.rmse, e.r2, e.r2_mean, e.sign
            );
        }
        Command::ExportPlot {
            no_predictions,
            series,
            frames,
        } => {
            if !no_predictions {
                let path = pipeline.export_predictions()?;
                println!("wrote {}", path.display());
            }
            for name in series {
                let path = pipeline.export_series_csv(&name)?;
                println!("wrote {}", path.display());
            }
            for name in frames {
                let dir = pipeline.export_frames_for(&name)?;
                println!("wrote frames under {}", dir.display());
            }
        }
        Command::RunAll => {
            let r = pipeline.run_all()?;
            println!(
                "ingested {} blocks / {} ticks; replay applied {} transfers ({} clamped)",
                r.ingest.blocks,
                r.ingest.ticks,
                r.replay.transfers_applied,
                r.replay.clamped_transfers
            );
            println!(
                "{}: n={} mse={:.6} rmse={:.6} r2={:.6} r2_mean={:.6} sign={:.4}",
                r.eval.model,
                r.eval.n_test,
                r.eval.mse,
                r.eval.rmse,
                r.eval.r2,
                r.eval.r2_mean,
                r.eval.sign
            );
            for (name, hash) in &r.artifacts {
                println!("{hash}  {name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
