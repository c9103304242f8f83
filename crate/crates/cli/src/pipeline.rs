//! The staged pipeline: ingest -> properties -> distributions -> dataset ->
//! train -> evaluate -> export-plot, each stage reading its inputs from the
//! chunked store or the out directory and writing its outputs back. Stages
//! are idempotent and deterministic given config and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use chainsight_core::chain::{validate_chain, ValidationReport};
use chainsight_core::dataset::{
    build_dataset, split_train_test, Dataset, DatasetError, DatasetModel, WindowSpec,
};
use chainsight_core::distributions::{
    account_balance_distribution, account_number_distribution, balance_activity_scale,
    builtin_configs,
};
use chainsight_core::ledger::{
    AccountState, Ledger, LedgerConfig, LedgerError, LedgerSnapshot, ReplayReport,
};
use chainsight_core::model::{
    evaluate, train, MetricsReport, ModelError, Predictor, PredictorKind, TrainConfig,
};
use chainsight_core::normalize;
use chainsight_core::properties::{
    compute_scalar_properties, densify_ticks, names, to_relative, PropertyError, PropertySeries,
    ScalarPropertyConfig, TickChain,
};
use chainsight_core::types::{
    address_opt_string, parse_selector, tick_of, Address, Amount, Block, MarketTick, Trace,
    TraceKind, Transaction, WEI_PER_ETH,
};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{ConfigError, PipelineConfig, ResolvedConfig};
use crate::dataset_file::{read_dataset, write_dataset};
use crate::fixture::FixtureError;
use crate::formats::FormatError;
use crate::frames::export_frames;
use crate::jsonl::{self, IngestError};
use crate::rpc::{RpcClient, RpcError};
use crate::store::{ChunkStore, StoreError, StoreRecord};
use crate::ticks;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing input for `{stage}`: {what}")]
    MissingInput { stage: &'static str, what: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Rpc(#[from] RpcError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
    #[error("ledger replay: {0}")]
    Ledger(#[from] LedgerError),
    #[error("property extraction: {0}")]
    Property(#[from] PropertyError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(std::io::Error),
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e)
    }
}

impl PipelineError {
    /// 1 for validation problems, 2 for I/O problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Io(_)
            | PipelineError::Store(_)
            | PipelineError::Rpc(_)
            | PipelineError::Format(FormatError::Io(_)) => 2,
            PipelineError::Ingest(IngestError::Io(_)) => 2,
            PipelineError::Fixture(FixtureError::Io(_)) => 2,
            _ => 1,
        }
    }
}

// --- store row formats -----------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct BlockRow {
    timestamp: u64,
    number: u64,
    miner: String,
    size: u64,
    difficulty: String,
    gas_limit: u64,
    gas_used: u64,
    tx_count: u32,
}

impl StoreRecord for BlockRow {
    fn time(&self) -> u64 {
        self.timestamp
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TxRow {
    time: u64,
    block_number: u64,
    from: String,
    to: String,
    value: String,
    gas_used: u64,
    gas_price: String,
    input_selector: Option<String>,
}

impl StoreRecord for TxRow {
    fn time(&self) -> u64 {
        self.time
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TraceRow {
    time: u64,
    block_number: u64,
    from: String,
    to: String,
    value: String,
    kind: String,
}

impl StoreRecord for TraceRow {
    fn time(&self) -> u64 {
        self.time
    }
}

#[derive(Serialize, Deserialize)]
struct TickRow {
    time: u64,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    volumefrom: f64,
    volumeto: f64,
}

impl StoreRecord for TickRow {
    fn time(&self) -> u64 {
        self.time
    }
}

/// One tick of a property series: scalar or tensor-valued.
#[derive(Serialize, Deserialize)]
struct PropRow {
    time: u64,
    shape: [usize; 2],
    values: Vec<f64>,
}

impl StoreRecord for PropRow {
    fn time(&self) -> u64 {
        self.time
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct AccountRow {
    address: String,
    balance: String,
    saturated: bool,
    last_seen: u64,
    volume_in: String,
    volume_out: String,
    transaction_n: u64,
    erc20_n: u64,
    is_contract: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SnapshotRow {
    time: u64,
    unique_accounts: u64,
    accounts: Vec<AccountRow>,
}

impl StoreRecord for SnapshotRow {
    fn time(&self) -> u64 {
        self.time
    }
}

/// Dense ticks, per-tick chain data, per-tick snapshots and the replay report.
type RangeData = (
    Vec<MarketTick>,
    Vec<TickChain>,
    Vec<LedgerSnapshot>,
    ReplayReport,
);

const SERIES_BLOCKS: &str = "chain.blocks";
const SERIES_TXS: &str = "chain.transactions";
const SERIES_TRACES: &str = "chain.traces";
const SERIES_TICKS: &str = "market.ticks";
const SERIES_SNAPSHOTS: &str = "ledger.snapshots";

fn prop_series_name(name: &str) -> String {
    format!("prop.{name}")
}

// --- summaries --------------------------------------------------------------

#[derive(Clone, Debug, Default)]
pub struct IngestSummary {
    pub blocks: u64,
    pub transactions: u64,
    pub traces: u64,
    pub ticks: u64,
    pub skipped_records: u64,
    pub validation: ValidationReport,
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub model: PredictorKind,
    pub trained: bool,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub first_loss: Option<f64>,
    pub last_loss: Option<f64>,
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalSummary {
    pub model: String,
    pub n_train: usize,
    pub n_test: usize,
    pub mse: f64,
    pub rmse: f64,
    pub r2: f64,
    pub r2_mean: f64,
    pub sign: f64,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub ingest: IngestSummary,
    pub replay: ReplayReport,
    pub train: TrainSummary,
    pub eval: EvalSummary,
    /// (artifact name, sha256 hex) in a fixed order.
    pub artifacts: Vec<(String, String)>,
}

pub struct Pipeline {
    cfg: ResolvedConfig,
    store: ChunkStore,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Pipeline, PipelineError> {
        let cfg = config.resolve()?;
        let store = ChunkStore::new(&cfg.raw.store_dir);
        Ok(Pipeline { cfg, store })
    }

    pub fn config(&self) -> &ResolvedConfig {
        &self.cfg
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.cfg.raw.out_dir.join(name)
    }

    // --- stage: ingest ------------------------------------------------------

    pub fn ingest(&self) -> Result<IngestSummary, PipelineError> {
        let mut summary = IngestSummary::default();
        let data = &self.cfg.raw.data;
        let skip = self.cfg.raw.options.skip_bad_records;

        let mut blocks: Vec<Block> = Vec::new();
        let mut transactions: Vec<Transaction> = Vec::new();
        if let Some(rpc) = &data.rpc {
            let client = RpcClient::new(&rpc.endpoint);
            for item in client.fetch_blocks(rpc.range[0], rpc.range[1]) {
                let (block, txs) = item?;
                blocks.push(block);
                transactions.extend(txs);
            }
        } else {
            let path = data.blocks.as_ref().ok_or(PipelineError::MissingInput {
                stage: "ingest",
                what: "data.blocks path or data.rpc endpoint".into(),
            })?;
            for item in jsonl::read_blocks(path)? {
                match item {
                    Ok(b) => blocks.push(b),
                    Err(e) if skip && e.is_skippable() => summary.skipped_records += 1,
                    Err(e) => return Err(e.into()),
                }
            }
            if let Some(tx_path) = &data.transactions {
                for item in jsonl::read_transactions(tx_path)? {
                    match item {
                        Ok(t) => transactions.push(t),
                        Err(e) if skip && e.is_skippable() => summary.skipped_records += 1,
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        }
        summary.validation = validate_chain(&blocks);
        summary.blocks = blocks.len() as u64;
        summary.transactions = transactions.len() as u64;

        let by_number: BTreeMap<u64, u64> =
            blocks.iter().map(|b| (b.number, b.timestamp)).collect();
        let block_time = |n: u64, what: &str| -> Result<u64, PipelineError> {
            by_number
                .get(&n)
                .copied()
                .ok_or_else(|| PipelineError::MissingInput {
                    stage: "ingest",
                    what: format!("{what} references unknown block {n}"),
                })
        };

        let block_rows: Vec<BlockRow> = blocks.iter().map(block_row).collect();
        self.store.put(SERIES_BLOCKS, &block_rows)?;

        let mut tx_rows = Vec::with_capacity(transactions.len());
        for t in &transactions {
            tx_rows.push(tx_row(t, block_time(t.block_number, "transaction")?));
        }
        tx_rows.sort_by_key(|r: &TxRow| r.time);
        self.store.put(SERIES_TXS, &tx_rows)?;

        let mut trace_rows: Vec<TraceRow> = Vec::new();
        if let Some(path) = &data.traces {
            for item in jsonl::read_traces(path)? {
                match item {
                    Ok(t) => {
                        summary.traces += 1;
                        trace_rows.push(trace_row(&t, block_time(t.block_number, "trace")?));
                    }
                    Err(e) if skip && e.is_skippable() => summary.skipped_records += 1,
                    Err(e) => return Err(e.into()),
                }
            }
        }
        trace_rows.sort_by_key(|r| r.time);
        self.store.put(SERIES_TRACES, &trace_rows)?;

        let mut tick_rows: Vec<TickRow> = Vec::new();
        if let Some(path) = &data.ticks {
            for item in ticks::read_ticks(path)? {
                match item {
                    Ok(t) => tick_rows.push(tick_row(&t)),
                    Err(e) if skip && e.is_skippable() => summary.skipped_records += 1,
                    Err(e) => return Err(e.into()),
                }
            }
        }
        summary.ticks = tick_rows.len() as u64;
        self.store.put(SERIES_TICKS, &tick_rows)?;
        Ok(summary)
    }

    // --- replay -------------------------------------------------------------

    fn ledger_config(&self) -> LedgerConfig {
        LedgerConfig {
            miner_reward: Amount::new(eth_to_wei(self.cfg.raw.ledger.miner_reward_eth)),
            debit_gas_fees: self.cfg.raw.ledger.debit_gas_fees,
            erc20_selectors: self.cfg.erc20_selectors.clone(),
        }
    }

    /// Load the configured range from the store and replay it: dense market
    /// ticks, per-tick chain data, and one ledger snapshot per tick.
    fn load_range(&self) -> Result<RangeData, PipelineError> {
        let (start, end) = (self.cfg.start, self.cfg.end);
        for series in [SERIES_TICKS, SERIES_BLOCKS] {
            if !self.store.has_series(series) {
                return Err(PipelineError::MissingInput {
                    stage: "replay",
                    what: format!("store series `{series}` (run `ingest` first)"),
                });
            }
        }
        let tick_rows: Vec<TickRow> = self.store.get(SERIES_TICKS, start, end)?;
        let market: Vec<MarketTick> = tick_rows.iter().map(tick_from_row).collect();
        let market = densify_ticks(start, end, &market, self.cfg.raw.options.forward_fill)?;

        let block_rows: Vec<BlockRow> = self.store.get(SERIES_BLOCKS, start, end)?;
        let mut blocks: Vec<Block> = block_rows
            .iter()
            .map(block_from_row)
            .collect::<Result<_, _>>()
            .map_err(|reason| PipelineError::MissingInput {
                stage: "replay",
                what: reason,
            })?;
        blocks.sort_by_key(|b| b.number);

        let mut txs_by_block: BTreeMap<u64, Vec<Transaction>> = BTreeMap::new();
        if self.store.has_series(SERIES_TXS) {
            for row in self.store.get::<TxRow>(SERIES_TXS, start, end)? {
                let tx = tx_from_row(&row).map_err(|reason| PipelineError::MissingInput {
                    stage: "replay",
                    what: reason,
                })?;
                txs_by_block.entry(tx.block_number).or_default().push(tx);
            }
        }
        let mut traces_by_block: BTreeMap<u64, Vec<Trace>> = BTreeMap::new();
        if self.store.has_series(SERIES_TRACES) {
            for row in self.store.get::<TraceRow>(SERIES_TRACES, start, end)? {
                let trace = trace_from_row(&row).map_err(|reason| PipelineError::MissingInput {
                    stage: "replay",
                    what: reason,
                })?;
                traces_by_block
                    .entry(trace.block_number)
                    .or_default()
                    .push(trace);
            }
        }

        let mut by_tick: BTreeMap<u64, TickChain> = BTreeMap::new();
        for block in blocks {
            let slot = by_tick.entry(tick_of(block.timestamp)).or_default();
            if let Some(txs) = txs_by_block.get(&block.number) {
                slot.transactions.extend(txs.iter().cloned());
            }
            slot.blocks.push(block);
        }

        let mut ledger = Ledger::new(self.ledger_config());
        let mut chains: Vec<TickChain> = Vec::with_capacity(market.len());
        let mut snapshots: Vec<LedgerSnapshot> = Vec::with_capacity(market.len());
        for tick in &market {
            let chain = by_tick.remove(&tick.time).unwrap_or_default();
            for block in &chain.blocks {
                let block_txs: Vec<Transaction> = chain
                    .transactions
                    .iter()
                    .filter(|t| t.block_number == block.number)
                    .cloned()
                    .collect();
                let block_traces = traces_by_block.remove(&block.number).unwrap_or_default();
                ledger.apply_block(block, &block_txs, &block_traces)?;
            }
            snapshots.push(ledger.snapshot_at_tick(tick.time));
            chains.push(chain);
        }
        Ok((market, chains, snapshots, ledger.report()))
    }

    // --- stage: properties ---------------------------------------------------

    pub fn properties(&self) -> Result<usize, PipelineError> {
        let (market, chains, snapshots, _) = self.load_range()?;
        let prop_cfg = ScalarPropertyConfig {
            block_reward_eth: self.cfg.raw.ledger.block_reward_eth,
        };
        let mut series = compute_scalar_properties(&market, &chains, &snapshots, &prop_cfg)?;
        if let Some(path) = &self.cfg.raw.data.pending_tx {
            series.push(read_value_csv(path, names::PENDING_TX)?);
        }
        let mut stored = 0usize;
        let mut relatives = Vec::new();
        for s in &series {
            if s.len() >= 2 {
                relatives.push(to_relative(s)?);
            }
        }
        series.extend(relatives);
        for s in &series {
            self.put_property(s)?;
            stored += 1;
        }
        if self.cfg.raw.ledger.persist_snapshots {
            let rows: Vec<SnapshotRow> = snapshots.iter().map(snapshot_row).collect();
            self.store.put(SERIES_SNAPSHOTS, &rows)?;
        }
        Ok(stored)
    }

    // --- stage: distributions ------------------------------------------------

    pub fn distributions(&self) -> Result<usize, PipelineError> {
        let (_, _, snapshots, _) = self.load_range()?;
        let series = compute_distribution_series(&snapshots, self.cfg.raw.options.threads);
        for s in &series {
            self.put_property(s)?;
        }
        Ok(series.len())
    }

    fn put_property(&self, series: &PropertySeries) -> Result<(), PipelineError> {
        let cells = series.cells();
        let rows: Vec<PropRow> = (0..series.len())
            .map(|i| PropRow {
                time: series.times[i],
                shape: [series.shape.0, series.shape.1],
                values: series.data[i * cells..(i + 1) * cells].to_vec(),
            })
            .collect();
        self.store.put(&prop_series_name(&series.name), &rows)?;
        Ok(())
    }

    /// Load a stored property series over the configured range.
    pub fn get_property(&self, name: &str) -> Result<PropertySeries, PipelineError> {
        let series_name = prop_series_name(name);
        if !self.store.has_series(&series_name) {
            return Err(PipelineError::Dataset(DatasetError::MissingProperty(
                name.to_string(),
            )));
        }
        let rows: Vec<PropRow> = self.store.get(&series_name, self.cfg.start, self.cfg.end)?;
        if rows.is_empty() {
            return Err(PipelineError::Dataset(DatasetError::MissingProperty(
                name.to_string(),
            )));
        }
        let shape = (rows[0].shape[0], rows[0].shape[1]);
        let mut times = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * shape.0 * shape.1);
        for row in &rows {
            if row.shape != [shape.0, shape.1] || row.values.len() != shape.0 * shape.1 {
                return Err(PipelineError::Store(StoreError::CorruptChunk {
                    path: series_name.clone(),
                    reason: format!("inconsistent tensor shape at time {}", row.time),
                }));
            }
            times.push(row.time);
            data.extend_from_slice(&row.values);
        }
        let series = PropertySeries {
            name: name.to_string(),
            unit: String::new(),
            times,
            shape,
            data,
        };
        series.validate()?;
        Ok(series)
    }

    // --- stage: dataset --------------------------------------------------------

    fn window_spec(&self) -> Result<WindowSpec, PipelineError> {
        let d = &self.cfg.raw.dataset;
        let spec = match d.preset {
            Some(n) => WindowSpec::for_preset(n, d.wn, self.cfg.norm, &d.target)?,
            None => WindowSpec {
                wn: d.wn,
                properties: d.properties.clone(),
                target: d.target.clone(),
                norm: self.cfg.norm,
                model: self.cfg.explicit_model.unwrap_or(DatasetModel::Matrix),
            },
        };
        Ok(spec)
    }

    pub fn dataset(&self) -> Result<PathBuf, PipelineError> {
        let spec = self.window_spec()?;
        let mut series: Vec<PropertySeries> = Vec::new();
        let mut names_needed: Vec<&str> = spec.properties.iter().map(String::as_str).collect();
        if !names_needed.contains(&spec.target.as_str()) {
            names_needed.push(&spec.target);
        }
        for name in names_needed {
            series.push(self.get_property(name)?);
        }
        // Absolute and relative series differ by one leading tick; trim all
        // inputs to their common time range.
        let lo = series
            .iter()
            .filter_map(|s| s.times.first())
            .max()
            .copied()
            .unwrap_or(0);
        let hi = series
            .iter()
            .filter_map(|s| s.times.last())
            .min()
            .copied()
            .unwrap_or(0);
        let series: Vec<PropertySeries> = series.iter().map(|s| s.slice(lo, hi + 1)).collect();
        let fit_boundary = self
            .cfg
            .raw
            .options
            .fit_train_only
            .then_some(self.cfg.boundary);
        let ds = build_dataset(&spec, &series, fit_boundary)?;
        std::fs::create_dir_all(&self.cfg.raw.out_dir)?;
        let path = self.out_path("dataset.bpd");
        write_dataset(&ds, &path)?;
        Ok(path)
    }

    // --- stage: train ---------------------------------------------------------

    fn load_dataset(&self, stage: &'static str) -> Result<Dataset, PipelineError> {
        let path = self.out_path("dataset.bpd");
        if !path.exists() {
            return Err(PipelineError::MissingInput {
                stage,
                what: format!("{} (run `dataset` first)", path.display()),
            });
        }
        Ok(read_dataset(&path)?)
    }

    fn make_predictor(&self, ds: &Dataset) -> Predictor {
        match self.cfg.model_kind {
            PredictorKind::Persistence => Predictor::persistence(),
            PredictorKind::NullHalf => Predictor::null_half(),
            PredictorKind::Linear => Predictor::linear(&ds.input_shape),
            PredictorKind::Mlp => Predictor::mlp(
                &ds.input_shape,
                self.cfg.raw.train.hidden,
                self.cfg.raw.train.seed,
            ),
        }
    }

    pub fn train(&self) -> Result<TrainSummary, PipelineError> {
        let ds = self.load_dataset("train")?;
        let (train_ds, test_ds) = split_train_test(&ds, self.cfg.boundary)?;
        let mut predictor = self.make_predictor(&ds);
        let checkpoint = self.out_path("model.ckpt");
        std::fs::create_dir_all(&self.cfg.raw.out_dir)?;
        if !predictor.kind.is_trainable() {
            save_checkpoint(&predictor, &checkpoint)?;
            return Ok(TrainSummary {
                model: predictor.kind,
                trained: false,
                epochs: 0,
                best_epoch: 0,
                best_loss: 0.0,
                first_loss: None,
                last_loss: None,
                checkpoint,
            });
        }
        let t = &self.cfg.raw.train;
        let cfg = TrainConfig {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            seed: t.seed,
            ..TrainConfig::default()
        };
        // Best-epoch parameters are selected on the test split, mirroring
        // best-of-all-epochs reporting; an optimistic protocol.
        let outcome = train(&mut predictor, &train_ds, &cfg, Some(&test_ds))?;
        save_checkpoint(&predictor, &checkpoint)?;
        Ok(TrainSummary {
            model: predictor.kind,
            trained: true,
            epochs: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            best_loss: outcome.best_loss,
            first_loss: outcome.history.first().copied(),
            last_loss: outcome.history.last().copied(),
            checkpoint,
        })
    }

    // --- stage: evaluate --------------------------------------------------------

    fn predictor_for_eval(&self, ds: &Dataset) -> Result<Predictor, PipelineError> {
        if self.cfg.model_kind.is_trainable() {
            let path = self.out_path("model.ckpt");
            if !path.exists() {
                return Err(PipelineError::MissingInput {
                    stage: "evaluate",
                    what: format!("{} (run `train` first)", path.display()),
                });
            }
            Ok(load_checkpoint(&path)?)
        } else {
            Ok(self.make_predictor(ds))
        }
    }

    pub fn evaluate(&self) -> Result<EvalSummary, PipelineError> {
        let ds = self.load_dataset("evaluate")?;
        let (train_ds, test_ds) = split_train_test(&ds, self.cfg.boundary)?;
        let predictor = self.predictor_for_eval(&ds)?;
        let report = evaluate(&predictor, &test_ds)?;
        let summary = EvalSummary {
            model: predictor.kind.as_str().to_string(),
            n_train: train_ds.len(),
            n_test: test_ds.len(),
            mse: report.mse,
            rmse: report.rmse,
            r2: report.r2,
            r2_mean: report.r2_mean,
            sign: report.sign,
        };
        std::fs::create_dir_all(&self.cfg.raw.out_dir)?;
        let json = serde_json::to_string_pretty(&summary)
            .map_err(|e| FormatError::InvalidHeader(e.to_string()))?;
        std::fs::write(self.out_path("metrics.json"), json + "\n")?;
        Ok(summary)
    }

    /// Evaluate an arbitrary predictor on the test split without touching
    /// the checkpoint; used by comparisons and tests.
    pub fn evaluate_predictor(
        &self,
        predictor: &Predictor,
    ) -> Result<MetricsReport, PipelineError> {
        let ds = self.load_dataset("evaluate")?;
        let (_, test_ds) = split_train_test(&ds, self.cfg.boundary)?;
        Ok(evaluate(predictor, &test_ds)?)
    }

    // --- stage: export-plot -------------------------------------------------------

    pub fn export_predictions(&self) -> Result<PathBuf, PipelineError> {
        let ds = self.load_dataset("export-plot")?;
        let (_, test_ds) = split_train_test(&ds, self.cfg.boundary)?;
        let predictor = self.predictor_for_eval(&ds)?;
        std::fs::create_dir_all(&self.cfg.raw.out_dir)?;
        let path = self.out_path("predictions.csv");
        let mut out = String::from("time,predicted,actual\n");
        for i in 0..test_ds.len() {
            let predicted = normalize::invert(
                predictor.predict_normalized(&test_ds, i)?,
                &test_ds.target.params,
            );
            let actual = normalize::invert(test_ds.targets[i], &test_ds.target.params);
            out.push_str(&format!("{},{},{}\n", test_ds.times[i], predicted, actual));
        }
        std::fs::write(&path, out)?;
        Ok(path)
    }

    pub fn export_series_csv(&self, name: &str) -> Result<PathBuf, PipelineError> {
        let series = self.get_property(name)?;
        if !series.is_scalar() {
            return Err(PipelineError::Property(PropertyError::NotScalar {
                name: name.to_string(),
            }));
        }
        std::fs::create_dir_all(&self.cfg.raw.out_dir)?;
        let path = self.out_path(&format!("{name}.csv"));
        let mut out = String::from("time,value\n");
        for i in 0..series.len() {
            out.push_str(&format!("{},{}\n", series.times[i], series.scalar_at(i)));
        }
        std::fs::write(&path, out)?;
        Ok(path)
    }

    pub fn export_frames_for(&self, name: &str) -> Result<PathBuf, PipelineError> {
        let series = self.get_property(name)?;
        let dir = self.out_path("frames").join(name);
        export_frames(&series, &dir)?;
        Ok(dir)
    }

    // --- run-all ---------------------------------------------------------------

    pub fn run_all(&self) -> Result<RunSummary, PipelineError> {
        let ingest = self.ingest()?;
        self.properties()?;
        self.distributions()?;
        let (_, _, _, replay) = self.load_range()?;
        self.dataset()?;
        let train = self.train()?;
        let eval = self.evaluate()?;
        self.export_predictions()?;
        let mut artifacts = Vec::new();
        for name in [
            "dataset.bpd",
            "model.ckpt",
            "metrics.json",
            "predictions.csv",
        ] {
            artifacts.push((name.to_string(), sha256_file(&self.out_path(name))?));
        }
        Ok(RunSummary {
            ingest,
            replay,
            train,
            eval,
            artifacts,
        })
    }
}

/// Compute the four distribution series, optionally chunking ticks over
/// worker threads. Output is assembled in tick order, so any thread count
/// produces identical bytes.
pub fn compute_distribution_series(
    snapshots: &[LedgerSnapshot],
    threads: usize,
) -> Vec<PropertySeries> {
    let configs = builtin_configs();
    let (scl0, mx0) = balance_activity_scale();
    let times: Vec<u64> = snapshots.iter().map(|s| s.tick_time).collect();

    let compute_one = |snap: &LedgerSnapshot| -> Vec<Vec<f64>> {
        let mut per = Vec::with_capacity(4);
        per.push(account_balance_distribution(snap, &scl0, mx0).values);
        for config in &configs {
            per.push(account_number_distribution(snap, config).values);
        }
        per
    };

    let per_tick: Vec<Vec<Vec<f64>>> = if threads <= 1 || snapshots.len() < 2 {
        snapshots.iter().map(compute_one).collect()
    } else {
        let chunk = snapshots.len().div_ceil(threads);
        let mut pieces: Vec<Vec<Vec<Vec<f64>>>> = Vec::new();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for slice in snapshots.chunks(chunk) {
                handles
                    .push(scope.spawn(move || slice.iter().map(compute_one).collect::<Vec<_>>()));
            }
            for h in handles {
                pieces.push(h.join().expect("distribution worker panicked"));
            }
        });
        pieces.into_iter().flatten().collect()
    };

    let balance_shape = (3usize, scl0.group_count(mx0));
    let mut shapes = vec![balance_shape];
    for config in &configs {
        shapes.push(config.group_shape());
    }
    let mut series_names = vec![names::ACCOUNT_BALANCE_DISTRIBUTION.to_string()];
    for config in &configs {
        series_names.push(config.name.clone());
    }

    let mut out = Vec::with_capacity(4);
    for (idx, (name, shape)) in series_names.iter().zip(&shapes).enumerate() {
        let mut data = Vec::with_capacity(times.len() * shape.0 * shape.1);
        for tick_values in &per_tick {
            data.extend_from_slice(&tick_values[idx]);
        }
        out.push(PropertySeries {
            name: name.clone(),
            unit: String::new(),
            times: times.clone(),
            shape: *shape,
            data,
        });
    }
    out
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn eth_to_wei(eth: f64) -> u128 {
    if eth <= 0.0 {
        0
    } else {
        (eth * WEI_PER_ETH as f64) as u128
    }
}

/// Two-column `time,value` CSV (with header) into a scalar series.
fn read_value_csv(path: &Path, name: &str) -> Result<PropertySeries, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "time,value" {
                return Err(PipelineError::Ingest(IngestError::MalformedRecord {
                    line: 1,
                    reason: "expected header `time,value`".into(),
                }));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| {
            PipelineError::Ingest(IngestError::MalformedRecord {
                line: i + 1,
                reason,
            })
        };
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| bad("expected two columns".into()))?;
        times.push(t.trim().parse::<u64>().map_err(|e| bad(e.to_string()))?);
        values.push(v.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?);
    }
    Ok(PropertySeries::scalar(name, "tx/min", times, values))
}

// --- row conversions ---------------------------------------------------------

fn block_row(b: &Block) -> BlockRow {
    BlockRow {
        timestamp: b.timestamp,
        number: b.number,
        miner: b.miner.to_string(),
        size: b.size_bytes,
        difficulty: b.difficulty.to_string(),
        gas_limit: b.gas_limit,
        gas_used: b.gas_used,
        tx_count: b.tx_count,
    }
}

fn block_from_row(r: &BlockRow) -> Result<Block, String> {
    Ok(Block {
        timestamp: r.timestamp,
        number: r.number,
        miner: Address::parse(&r.miner).map_err(|e| format!("block {}: {e}", r.number))?,
        size_bytes: r.size,
        difficulty: Amount::from_decimal(&r.difficulty)
            .map_err(|e| format!("block {}: {e}", r.number))?,
        gas_limit: r.gas_limit,
        gas_used: r.gas_used,
        tx_count: r.tx_count,
    })
}

fn tx_row(t: &Transaction, time: u64) -> TxRow {
    TxRow {
        time,
        block_number: t.block_number,
        from: t.from.to_string(),
        to: address_opt_string(&t.to),
        value: t.value.to_string(),
        gas_used: t.gas_used,
        gas_price: t.gas_price.to_string(),
        input_selector: t
            .input_selector
            .map(|s| s.iter().map(|b| format!("{b:02x}")).collect()),
    }
}

fn tx_from_row(r: &TxRow) -> Result<Transaction, String> {
    Ok(Transaction {
        block_number: r.block_number,
        from: Address::parse(&r.from).map_err(|e| e.to_string())?,
        to: Address::parse_opt(&r.to).map_err(|e| e.to_string())?,
        value: Amount::from_decimal(&r.value).map_err(|e| e.to_string())?,
        gas_used: r.gas_used,
        gas_price: Amount::from_decimal(&r.gas_price).map_err(|e| e.to_string())?,
        input_selector: match &r.input_selector {
            None => None,
            Some(s) => Some(parse_selector(s).map_err(|e| e.to_string())?),
        },
    })
}

fn trace_row(t: &Trace, time: u64) -> TraceRow {
    TraceRow {
        time,
        block_number: t.block_number,
        from: t.from.to_string(),
        to: t.to.to_string(),
        value: t.value.to_string(),
        kind: t.kind.as_str().to_string(),
    }
}

fn trace_from_row(r: &TraceRow) -> Result<Trace, String> {
    Ok(Trace {
        block_number: r.block_number,
        from: Address::parse(&r.from).map_err(|e| e.to_string())?,
        to: Address::parse(&r.to).map_err(|e| e.to_string())?,
        value: Amount::from_decimal(&r.value).map_err(|e| e.to_string())?,
        kind: TraceKind::parse(&r.kind).map_err(|e| e.to_string())?,
    })
}

fn tick_row(t: &MarketTick) -> TickRow {
    TickRow {
        time: t.time,
        open: t.open,
        high: t.high,
        low: t.low,
        close: t.close,
        volumefrom: t.volume_from,
        volumeto: t.volume_to,
    }
}

fn tick_from_row(r: &TickRow) -> MarketTick {
    MarketTick {
        time: r.time,
        open: r.open,
        high: r.high,
        low: r.low,
        close: r.close,
        volume_from: r.volumefrom,
        volume_to: r.volumeto,
    }
}

fn snapshot_row(s: &LedgerSnapshot) -> SnapshotRow {
    SnapshotRow {
        time: s.tick_time,
        unique_accounts: s.unique_accounts,
        accounts: s
            .accounts
            .iter()
            .map(|(a, st)| account_row(a, st))
            .collect(),
    }
}

fn account_row(addr: &Address, st: &AccountState) -> AccountRow {
    AccountRow {
        address: addr.to_string(),
        balance: st.balance.to_string(),
        saturated: st.balance.is_saturated(),
        last_seen: st.last_seen,
        volume_in: st.volume_in.to_string(),
        volume_out: st.volume_out.to_string(),
        transaction_n: st.transaction_n,
        erc20_n: st.erc20_n,
        is_contract: st.is_contract,
    }
}
