//! Per-tick property time series extracted from market ticks, blocks and
//! ledger snapshots.
//!
//! Each property is one value per market tick. Scalars have shape `(1, 1)`;
//! the account distributions reuse the same container with a larger shape.
//! A `<name>_rel` series is the first difference of its source series in the
//! property's natural units.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ledger::LedgerSnapshot;
use crate::types::{Block, MarketTick, Transaction, TICK_SECONDS};

/// Property names used throughout the pipeline.
pub mod names {
    pub const OPEN_PRICE: &str = "openPrice";
    pub const CLOSE_PRICE: &str = "closePrice";
    pub const HIGH_PRICE: &str = "highPrice";
    pub const STICK_PRICE: &str = "stickPrice";
    pub const VOLUME_TO: &str = "volumeTo";
    pub const VOLUME_FROM: &str = "volumeFrom";
    pub const TRANSACTION_COUNT: &str = "transactionCount";
    pub const DAPP_OPERATIONS: &str = "dappOperations";
    pub const BLOCK_SIZE: &str = "blockSize";
    pub const DIFFICULTY: &str = "difficulty";
    pub const UNIQUE_ACCOUNTS: &str = "uniqueAccounts";
    pub const GAS_LIMIT: &str = "gasLimit";
    pub const GAS_PRICE: &str = "gasPrice";
    pub const GAS_USED: &str = "gasUsed";
    pub const NETWORK_HASHRATE: &str = "networkHashrate";
    pub const ETH_SUPPLY: &str = "ETHSupply";
    pub const PENDING_TX: &str = "pendingTx";
    pub const BLOCKCHAIN_GROWTH: &str = "blockchainGrowth";
    pub const ACCOUNT_BALANCE_DISTRIBUTION: &str = "accountBalanceDistribution";

    /// The relative (first difference) variant of a property name.
    pub fn relative(name: &str) -> alloc::string::String {
        alloc::format!("{name}_rel")
    }

    pub fn is_relative(name: &str) -> bool {
        name.ends_with("_rel")
    }

    /// Source property of a `_rel` name, if any.
    pub fn absolute_source(name: &str) -> Option<&str> {
        name.strip_suffix("_rel")
    }
}

/// A named time series with one `(v1, v2)` tensor per tick; scalars are
/// `(1, 1)`. Values are stored tick-major, row-major within a tick.
#[derive(Clone, PartialEq, Debug)]
pub struct PropertySeries {
    pub name: String,
    pub unit: String,
    pub times: Vec<u64>,
    pub shape: (usize, usize),
    pub data: Vec<f64>,
}

impl PropertySeries {
    pub fn scalar(name: &str, unit: &str, times: Vec<u64>, values: Vec<f64>) -> PropertySeries {
        debug_assert_eq!(times.len(), values.len());
        PropertySeries {
            name: String::from(name),
            unit: String::from(unit),
            times,
            shape: (1, 1),
            data: values,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.shape == (1, 1)
    }

    /// Cells per tick (`v1 * v2`).
    pub fn cells(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn tick_values(&self, i: usize) -> &[f64] {
        let c = self.cells();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn scalar_at(&self, i: usize) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[i]
    }

    /// Restrict the series to ticks with time in `[from, to)`.
    pub fn slice(&self, from: u64, to: u64) -> PropertySeries {
        let lo = self.times.partition_point(|&t| t < from);
        let hi = self.times.partition_point(|&t| t < to);
        let c = self.cells();
        PropertySeries {
            name: self.name.clone(),
            unit: self.unit.clone(),
            times: self.times[lo..hi].to_vec(),
            shape: self.shape,
            data: self.data[lo * c..hi * c].to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), PropertyError> {
        if self.data.len() != self.times.len() * self.cells() {
            return Err(PropertyError::LengthMismatch {
                name: self.name.clone(),
                times: self.times.len(),
                values: self.data.len(),
            });
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PropertyError::UnorderedTimes {
                name: self.name.clone(),
            });
        }
        Ok(())
    }
}

/// Blocks and their transactions belonging to one tick's hour.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct TickChain {
    pub blocks: Vec<Block>,
    pub transactions: Vec<Transaction>,
}

#[derive(Clone, Copy, Debug)]
pub struct ScalarPropertyConfig {
    /// Flat per-block reward in ETH used for the supply series.
    pub block_reward_eth: f64,
}

impl Default for ScalarPropertyConfig {
    fn default() -> Self {
        ScalarPropertyConfig {
            block_reward_eth: 5.0,
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum PropertyError {
    /// A tick in the requested range has no market data.
    CoverageGap {
        time: u64,
    },
    LengthMismatch {
        name: String,
        times: usize,
        values: usize,
    },
    UnorderedTimes {
        name: String,
    },
    /// Inputs to the property computation do not cover the same ticks.
    Misaligned {
        expected: u64,
        got: u64,
    },
    TooShort {
        len: usize,
    },
    NotScalar {
        name: String,
    },
}

impl fmt::Display for PropertyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyError::CoverageGap { time } => {
                write!(f, "no market data for tick at {time}")
            }
            PropertyError::LengthMismatch {
                name,
                times,
                values,
            } => {
                write!(f, "series {name}: {times} timestamps but {values} values")
            }
            PropertyError::UnorderedTimes { name } => {
                write!(f, "series {name}: timestamps not strictly increasing")
            }
            PropertyError::Misaligned { expected, got } => {
                write!(f, "tick inputs misaligned: expected {expected}, got {got}")
            }
            PropertyError::TooShort { len } => {
                write!(f, "series of length {len} is too short")
            }
            PropertyError::NotScalar { name } => {
                write!(
                    f,
                    "series {name} is tensor-valued where a scalar is required"
                )
            }
        }
    }
}

impl core::error::Error for PropertyError {}

/// Expand a tick list into a dense hour-by-hour array over `[start, end)`.
///
/// Missing hours are an error by default; with `forward_fill` a synthetic
/// flat tick (previous close, zero volume) is inserted instead. A gap before
/// the first available tick cannot be filled and stays an error.
pub fn densify_ticks(
    start: u64,
    end: u64,
    ticks: &[MarketTick],
    forward_fill: bool,
) -> Result<Vec<MarketTick>, PropertyError> {
    let mut out = Vec::new();
    let mut cursor = ticks.iter().peekable();
    let mut t = start;
    let mut prev: Option<MarketTick> = None;
    while t < end {
        while cursor.peek().map(|tick| tick.time < t).unwrap_or(false) {
            cursor.next();
        }
        let found = cursor
            .peek()
            .filter(|tick| tick.time == t)
            .copied()
            .copied();
        match found {
            Some(tick) => {
                out.push(tick);
                prev = Some(tick);
                cursor.next();
            }
            None => match (forward_fill, prev) {
                (true, Some(p)) => {
                    let filled = MarketTick {
                        time: t,
                        open: p.close,
                        high: p.close,
                        low: p.close,
                        close: p.close,
                        volume_from: 0.0,
                        volume_to: 0.0,
                    };
                    out.push(filled);
                    prev = Some(filled);
                }
                _ => return Err(PropertyError::CoverageGap { time: t }),
            },
        }
        t += TICK_SECONDS;
    }
    Ok(out)
}

/// Compute every scalar property series for an aligned tick range.
///
/// `ticks`, `chain` and `snapshots` are parallel arrays: entry `k` holds the
/// market tick, the blocks (with their transactions) whose timestamps fall in
/// that tick's hour, and the ledger snapshot taken after applying them.
pub fn compute_scalar_properties(
    ticks: &[MarketTick],
    chain: &[TickChain],
    snapshots: &[LedgerSnapshot],
    cfg: &ScalarPropertyConfig,
) -> Result<Vec<PropertySeries>, PropertyError> {
    if ticks.len() != chain.len() || ticks.len() != snapshots.len() {
        return Err(PropertyError::LengthMismatch {
            name: String::from("tick inputs"),
            times: ticks.len(),
            values: chain.len().min(snapshots.len()),
        });
    }
    for (tick, snap) in ticks.iter().zip(snapshots) {
        if tick.time != snap.tick_time {
            return Err(PropertyError::Misaligned {
                expected: tick.time,
                got: snap.tick_time,
            });
        }
    }
    let times: Vec<u64> = ticks.iter().map(|t| t.time).collect();
    let n = ticks.len();

    let mut open = Vec::with_capacity(n);
    let mut close = Vec::with_capacity(n);
    let mut high = Vec::with_capacity(n);
    let mut stick = Vec::with_capacity(n);
    let mut volume_to = Vec::with_capacity(n);
    let mut volume_from = Vec::with_capacity(n);
    let mut tx_count = Vec::with_capacity(n);
    let mut dapp_ops = Vec::with_capacity(n);
    let mut block_size = Vec::with_capacity(n);
    let mut difficulty = Vec::with_capacity(n);
    let mut unique_accounts = Vec::with_capacity(n);
    let mut gas_limit = Vec::with_capacity(n);
    let mut gas_price = Vec::with_capacity(n);
    let mut gas_used = Vec::with_capacity(n);
    let mut hashrate = Vec::with_capacity(n);
    let mut supply = Vec::with_capacity(n);
    let mut growth = Vec::with_capacity(n);

    let mut cumulative_blocks = 0u64;
    for k in 0..n {
        let tick = &ticks[k];
        let tc = &chain[k];
        let snap = &snapshots[k];

        open.push(tick.open);
        close.push(tick.close);
        high.push(tick.high);
        stick.push(tick.open - tick.close);
        volume_to.push(tick.volume_to);
        volume_from.push(tick.volume_from);

        let nb = tc.blocks.len();
        tx_count.push(tc.blocks.iter().map(|b| b.tx_count as f64).sum());
        dapp_ops.push(
            tc.transactions
                .iter()
                .filter(|tx| {
                    tx.to
                        .as_ref()
                        .and_then(|to| snap.accounts.get(to))
                        .map(|st| st.is_contract)
                        .unwrap_or(false)
                })
                .count() as f64,
        );
        block_size.push(mean(tc.blocks.iter().map(|b| b.size_bytes as f64), nb));
        let mean_difficulty = mean(tc.blocks.iter().map(|b| b.difficulty.as_f64()), nb);
        difficulty.push(mean_difficulty);
        gas_limit.push(mean(tc.blocks.iter().map(|b| b.gas_limit as f64), nb));
        gas_used.push(mean(tc.blocks.iter().map(|b| b.gas_used as f64), nb));
        gas_price.push(mean(
            tc.transactions.iter().map(|t| t.gas_price.as_f64()),
            tc.transactions.len(),
        ));

        // Combined miner throughput, estimated as mean difficulty over the
        // mean inter-block interval inside the tick. Needs two blocks.
        let rate = if nb >= 2 {
            let first = tc.blocks[0].timestamp;
            let last = tc.blocks[nb - 1].timestamp;
            if last > first {
                mean_difficulty / ((last - first) as f64 / (nb - 1) as f64)
            } else {
                0.0
            }
        } else {
            0.0
        };
        hashrate.push(rate);

        unique_accounts.push(snap.unique_accounts as f64);
        cumulative_blocks += nb as u64;
        supply.push(cumulative_blocks as f64 * cfg.block_reward_eth);
        growth.push(tc.blocks.iter().map(|b| b.size_bytes as f64).sum::<f64>() / 1e9);
    }

    let mut out = Vec::new();
    let mut push = |name: &str, unit: &str, values: Vec<f64>| {
        out.push(PropertySeries::scalar(name, unit, times.clone(), values));
    };
    push(names::OPEN_PRICE, "USD", open);
    push(names::CLOSE_PRICE, "USD", close);
    push(names::HIGH_PRICE, "USD", high);
    push(names::STICK_PRICE, "USD", stick);
    push(names::VOLUME_TO, "volume", volume_to);
    push(names::VOLUME_FROM, "volume", volume_from);
    push(names::TRANSACTION_COUNT, "transactions", tx_count);
    push(names::DAPP_OPERATIONS, "transactions", dapp_ops);
    push(names::BLOCK_SIZE, "bytes", block_size);
    push(names::DIFFICULTY, "difficulty", difficulty);
    push(names::UNIQUE_ACCOUNTS, "accounts", unique_accounts);
    push(names::GAS_LIMIT, "gas", gas_limit);
    push(names::GAS_PRICE, "wei", gas_price);
    push(names::GAS_USED, "gas", gas_used);
    push(names::NETWORK_HASHRATE, "difficulty/s", hashrate);
    push(names::ETH_SUPPLY, "ETH", supply);
    push(names::BLOCKCHAIN_GROWTH, "GB", growth);
    Ok(out)
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

/// First difference of a scalar series: `out[i] = in[i+1] - in[i]`, stamped
/// with the later timestamps and named `<name>_rel`.
pub fn to_relative(series: &PropertySeries) -> Result<PropertySeries, PropertyError> {
    if !series.is_scalar() {
        return Err(PropertyError::NotScalar {
            name: series.name.clone(),
        });
    }
    if series.len() < 2 {
        return Err(PropertyError::TooShort { len: series.len() });
    }
    let values: Vec<f64> = series.data.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(PropertySeries {
        name: names::relative(&series.name),
        unit: format!("{}/tick", series.unit),
        times: series.times[1..].to_vec(),
        shape: (1, 1),
        data: values,
    })
}
