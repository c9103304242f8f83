//! Pipeline configuration: a JSON file with machine-diffable defaults,
//! overridable by command-line flags. Times are unix seconds or
//! `YYYY-MM-DD` dates (midnight UTC).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use chainsight_core::dataset::DatasetModel;
use chainsight_core::model::PredictorKind;
use chainsight_core::normalize::NormKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot read config {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Unparseable(#[from] serde_json::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Unix seconds, or a `YYYY-MM-DD` calendar date at midnight UTC.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum TimeSpec {
    Unix(u64),
    Date(String),
}

impl TimeSpec {
    pub fn resolve(&self, field: &'static str) -> Result<u64, ConfigError> {
        match self {
            TimeSpec::Unix(t) => Ok(*t),
            TimeSpec::Date(s) => parse_date(s)
                .ok_or_else(|| invalid(field, format!("`{s}` is not unix seconds or YYYY-MM-DD"))),
        }
    }
}

/// Days-from-civil: unix seconds of a calendar date at midnight UTC.
fn parse_date(s: &str) -> Option<u64> {
    let mut parts = s.split('-');
    let y: i64 = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let d: u32 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return None;
    }
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = (y - era * 400) as u64;
    let mp = ((m + 9) % 12) as u64;
    let doy = (153 * mp + 2) / 5 + d as u64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    let days = era * 146_097 + doe as i64 - 719_468;
    u64::try_from(days.checked_mul(86_400)?).ok()
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSources {
    pub blocks: Option<PathBuf>,
    pub transactions: Option<PathBuf>,
    pub traces: Option<PathBuf>,
    pub ticks: Option<PathBuf>,
    /// Optional externally sourced pending-transaction series (CSV time,value).
    pub pending_tx: Option<PathBuf>,
    pub rpc: Option<RpcSource>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpcSource {
    pub endpoint: String,
    /// Inclusive block range to fetch.
    pub range: [u64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub preset: Option<u8>,
    /// Explicit property list when no preset is given.
    pub properties: Vec<String>,
    /// Explicit model (`matrix`/`stacked`) when no preset is given.
    pub model: Option<String>,
    pub wn: usize,
    pub norm: String,
    pub target: String,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            preset: Some(8),
            properties: Vec::new(),
            model: None,
            wn: 8,
            norm: "image".into(),
            target: "highPrice_rel".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub model: String,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            model: "linear".into(),
            batch_size: 16,
            learning_rate: 1e-5,
            epochs: 10,
            hidden: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedgerSection {
    /// Reward credited to miners during replay, in ETH. Zero keeps balances
    /// conservative.
    pub miner_reward_eth: f64,
    pub debit_gas_fees: bool,
    /// Call-data selectors counted as ERC20 operations, 4-byte hex.
    pub erc20_selectors: Vec<String>,
    /// Flat per-block reward assumed by the supply property, in ETH.
    pub block_reward_eth: f64,
    pub persist_snapshots: bool,
}

impl Default for LedgerSection {
    fn default() -> Self {
        LedgerSection {
            miner_reward_eth: 0.0,
            debit_gas_fees: false,
            erc20_selectors: vec!["a9059cbb".into(), "23b872dd".into()],
            block_reward_eth: 5.0,
            persist_snapshots: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Fit normalization on the train range only instead of the full series.
    pub fit_train_only: bool,
    /// Count and skip malformed ingest records instead of aborting.
    pub skip_bad_records: bool,
    /// Forward-fill missing market ticks instead of failing.
    pub forward_fill: bool,
    pub threads: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            fit_train_only: false,
            skip_bad_records: false,
            forward_fill: false,
            threads: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub store_dir: PathBuf,
    pub out_dir: PathBuf,
    pub data: DataSources,
    pub range_start: TimeSpec,
    pub range_end: TimeSpec,
    /// Train/test split boundary (samples at or after it are test).
    pub boundary: TimeSpec,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub ledger: LedgerSection,
    pub options: Options,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            store_dir: PathBuf::from("store"),
            out_dir: PathBuf::from("out"),
            data: DataSources::default(),
            range_start: TimeSpec::Date("2017-03-01".into()),
            range_end: TimeSpec::Date("2017-11-01".into()),
            boundary: TimeSpec::Date("2017-10-01".into()),
            dataset: DatasetSection::default(),
            train: TrainSection::default(),
            ledger: LedgerSection::default(),
            options: Options::default(),
        }
    }
}

/// Times and enums resolved and validated, ready for the pipeline.
#[derive(Clone, Debug)]
pub struct ResolvedConfig {
    pub raw: PipelineConfig,
    pub start: u64,
    pub end: u64,
    pub boundary: u64,
    pub norm: NormKind,
    pub model_kind: PredictorKind,
    pub explicit_model: Option<DatasetModel>,
    pub erc20_selectors: Vec<[u8; 4]>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Unreadable {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Environment override for the store directory.
    pub fn apply_env(&mut self) {
        if let Ok(dir) = std::env::var("CHAINSIGHT_STORE") {
            if !dir.is_empty() {
                self.store_dir = PathBuf::from(dir);
            }
        }
    }

    pub fn resolve(&self) -> Result<ResolvedConfig, ConfigError> {
        let start = self.range_start.resolve("range_start")?;
        let end = self.range_end.resolve("range_end")?;
        let boundary = self.boundary.resolve("boundary")?;
        if start % 3600 != 0 {
            return Err(invalid("range_start", "must be hour-aligned"));
        }
        if !(start < boundary && boundary < end) {
            return Err(invalid("boundary", "must satisfy start < boundary < end"));
        }
        if let Some(p) = self.dataset.preset {
            if !(1..=8).contains(&p) {
                return Err(invalid("dataset.preset", "must be 1..=8"));
            }
        } else if self.dataset.properties.is_empty() {
            return Err(invalid(
                "dataset.properties",
                "required when no preset is set",
            ));
        }
        if self.dataset.wn == 0 {
            return Err(invalid("dataset.wn", "must be at least 1"));
        }
        let norm = NormKind::parse(&self.dataset.norm)
            .ok_or_else(|| invalid("dataset.norm", "one of basic|around_zero|image|prop"))?;
        let model_kind = PredictorKind::parse(&self.train.model)
            .ok_or_else(|| invalid("train.model", "one of persistence|null_half|linear|mlp"))?;
        let explicit_model = match &self.dataset.model {
            None => None,
            Some(m) => Some(
                DatasetModel::parse(m).ok_or_else(|| invalid("dataset.model", "matrix|stacked"))?,
            ),
        };
        if self.options.threads == 0 {
            return Err(invalid("options.threads", "must be at least 1"));
        }
        if self.train.batch_size == 0 {
            return Err(invalid("train.batch_size", "must be at least 1"));
        }
        if self.train.learning_rate <= 0.0 || self.train.learning_rate.is_nan() {
            return Err(invalid("train.learning_rate", "must be positive"));
        }
        let mut erc20_selectors = Vec::new();
        for s in &self.ledger.erc20_selectors {
            erc20_selectors.push(
                chainsight_core::types::parse_selector(s)
                    .map_err(|e| invalid("ledger.erc20_selectors", e.to_string()))?,
            );
        }
        Ok(ResolvedConfig {
            raw: self.clone(),
            start,
            end,
            boundary,
            norm,
            model_kind,
            explicit_model,
            erc20_selectors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_range_dates() {
        assert_eq!(parse_date("2017-03-01"), Some(1_488_326_400));
        assert_eq!(parse_date("2017-10-01"), Some(1_506_816_000));
        assert_eq!(parse_date("2017-11-01"), Some(1_509_494_400));
        assert_eq!(parse_date("1970-01-01"), Some(0));
        assert_eq!(parse_date("2017-13-01"), None);
        assert_eq!(parse_date("bogus"), None);
    }

    #[test]
    fn defaults_resolve() {
        let cfg = PipelineConfig::default();
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.start, 1_488_326_400);
        assert_eq!(resolved.boundary, 1_506_816_000);
        assert_eq!(resolved.end, 1_509_494_400);
        assert_eq!(resolved.erc20_selectors.len(), 2);
    }

    #[test]
    fn boundary_ordering_enforced() {
        let cfg = PipelineConfig {
            boundary: TimeSpec::Unix(0),
            ..Default::default()
        };
        assert!(matches!(
            cfg.resolve(),
            Err(ConfigError::Invalid {
                field: "boundary",
                ..
            })
        ));
    }

    #[test]
    fn preset_range_enforced() {
        let mut cfg = PipelineConfig::default();
        cfg.dataset.preset = Some(9);
        assert!(cfg.resolve().is_err());
        cfg.dataset.preset = None;
        assert!(
            cfg.resolve().is_err(),
            "no preset and no explicit properties"
        );
        cfg.dataset.properties = vec!["highPrice".into()];
        cfg.dataset.model = Some("matrix".into());
        assert!(cfg.resolve().is_ok());
    }

    #[test]
    fn json_round_trip() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let again: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(
            serde_json::to_string(&again).unwrap(),
            serde_json::to_string(&cfg).unwrap()
        );
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = serde_json::from_str::<PipelineConfig>("{\"bogus\":1}").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }
}
