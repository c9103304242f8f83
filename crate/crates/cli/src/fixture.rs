//! Synthetic chain and market data generator.
//!
//! Produces a deterministic desk-scale stand-in for real chain history:
//! random-walk hourly prices, Poisson transaction activity among a fixed
//! account population, a contract subset created through `create` traces and
//! exercised with ERC20-selector calls and forwarding traces. The output
//! passes chain validation with an empty report.

use std::path::{Path, PathBuf};

use thiserror::Error;

use chainsight_core::ledger::SELECTOR_TRANSFER;
use chainsight_core::rng::Rng;
use chainsight_core::types::{Address, Amount, Block, MarketTick, Trace, TraceKind, Transaction};

use crate::jsonl;
use crate::ticks;

/// 2017-03-01 00:00:00 UTC, the default range start.
pub const DEFAULT_START: u64 = 1_488_326_400;

#[derive(Clone, Debug)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_blocks: u64,
    pub n_accounts: usize,
    /// Evenly spaced blocks per hour; must divide 3600.
    pub blocks_per_hour: u32,
    pub start_time: u64,
}

impl FixtureSpec {
    pub fn new(seed: u64, n_blocks: u64, n_accounts: usize) -> FixtureSpec {
        FixtureSpec {
            seed,
            n_blocks,
            n_accounts,
            blocks_per_hour: 4,
            start_time: DEFAULT_START,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixtureSummary {
    pub blocks: PathBuf,
    pub transactions: PathBuf,
    pub traces: PathBuf,
    pub ticks: PathBuf,
    pub n_blocks: u64,
    pub n_ticks: u64,
    pub n_transactions: u64,
    pub n_traces: u64,
    pub n_contracts: usize,
    /// First tick time and one-past-the-last tick time.
    pub range: (u64, u64),
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("n_blocks must be at least 1")]
    NoBlocks,
    #[error("n_accounts must be at least 3")]
    TooFewAccounts,
    #[error("blocks_per_hour must divide 3600")]
    BadSpacing,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn account_address(rng_seed: u64, index: usize) -> Address {
    // Addresses derived from their own tiny stream so the layout is stable
    // regardless of how many random draws generation consumes.
    let mut rng = Rng::new(rng_seed ^ (index as u64).wrapping_mul(0x9e37_79b9));
    let mut a = [0u8; 20];
    for b in &mut a {
        *b = rng.next_u64() as u8;
    }
    Address(a)
}

pub fn generate_fixture(spec: &FixtureSpec, dir: &Path) -> Result<FixtureSummary, FixtureError> {
    if spec.n_blocks == 0 {
        return Err(FixtureError::NoBlocks);
    }
    if spec.n_accounts < 3 {
        return Err(FixtureError::TooFewAccounts);
    }
    if spec.blocks_per_hour == 0 || 3600 % spec.blocks_per_hour != 0 {
        return Err(FixtureError::BadSpacing);
    }
    std::fs::create_dir_all(dir)?;
    let mut rng = Rng::new(spec.seed);

    let n = spec.n_accounts;
    let n_contracts = (n / 5).max(1);
    let addresses: Vec<Address> = (0..n).map(|i| account_address(spec.seed, i)).collect();
    let faucet = addresses[0];
    // indices 1..=n_contracts are contracts, the rest regular accounts
    let contract = |i: usize| -> Address { addresses[1 + i % n_contracts] };
    let user_range = (1 + n_contracts).min(n - 1)..n;
    let interval = 3600 / spec.blocks_per_hour as u64;
    let n_ticks = spec.n_blocks.div_ceil(spec.blocks_per_hour as u64);

    let mut blocks: Vec<Block> = Vec::with_capacity(spec.n_blocks as usize);
    let mut transactions: Vec<Transaction> = Vec::new();
    let mut traces: Vec<Trace> = Vec::new();
    let mut difficulty = 1.0e12;

    for number in 1..=spec.n_blocks {
        let timestamp = spec.start_time + (number - 1) * interval;
        let miner = addresses[1 + rng.below((n - 1) as u64) as usize];
        difficulty *= 1.0 + rng.normal() * 0.01;
        let mut block_txs: Vec<Transaction> = Vec::new();

        if number == 1 {
            // Deploy the contract population, then fund every account from
            // the faucet. The faucet starts at zero so these transfers clamp,
            // exactly like replaying real dumps with no genesis allocations.
            for c in 0..n_contracts {
                traces.push(Trace {
                    block_number: number,
                    from: faucet,
                    to: contract(c),
                    value: Amount::ZERO,
                    kind: TraceKind::Create,
                });
            }
            for addr in &addresses[1..] {
                block_txs.push(Transaction {
                    block_number: number,
                    from: faucet,
                    to: Some(*addr),
                    value: Amount::new(1_000_000_000_000_000_000_000), // 1000 ETH
                    gas_used: 21_000,
                    gas_price: Amount::new(1_000_000_000),
                    input_selector: None,
                });
            }
        } else {
            let tx_count = rng.poisson(3.0);
            for _ in 0..tx_count {
                let from =
                    addresses[user_range.start + rng.below((user_range.len()) as u64) as usize];
                let to_contract = rng.next_f64() < 0.25;
                let value = Amount::new(rng.below(5_000_000_000_000_000_000) as u128);
                if to_contract {
                    let target = contract(rng.below(n_contracts as u64) as usize);
                    let is_erc20 = rng.next_f64() < 0.6;
                    block_txs.push(Transaction {
                        block_number: number,
                        from,
                        to: Some(target),
                        value,
                        gas_used: 21_000 + rng.below(60_000),
                        gas_price: Amount::new((1 + rng.below(50)) as u128 * 1_000_000_000),
                        input_selector: is_erc20.then_some(SELECTOR_TRANSFER),
                    });
                    if !value.is_zero() && rng.next_f64() < 0.5 {
                        // the contract forwards the funds on
                        let out = addresses
                            [user_range.start + rng.below(user_range.len() as u64) as usize];
                        traces.push(Trace {
                            block_number: number,
                            from: target,
                            to: out,
                            value,
                            kind: TraceKind::Call,
                        });
                    }
                } else {
                    let to =
                        addresses[user_range.start + rng.below(user_range.len() as u64) as usize];
                    block_txs.push(Transaction {
                        block_number: number,
                        from,
                        to: Some(to),
                        value,
                        gas_used: 21_000,
                        gas_price: Amount::new((1 + rng.below(50)) as u128 * 1_000_000_000),
                        input_selector: None,
                    });
                }
            }
        }

        let gas_used: u64 = block_txs.iter().map(|t| t.gas_used).sum();
        let size_bytes = 500 + block_txs.len() as u64 * (150 + rng.below(100));
        blocks.push(Block {
            timestamp,
            number,
            miner,
            size_bytes,
            difficulty: Amount::new(difficulty as u128),
            gas_limit: 8_000_000u64.max(gas_used),
            gas_used,
            tx_count: block_txs.len() as u32,
        });
        transactions.extend(block_txs);
    }

    // Hourly random-walk candles covering every block.
    let mut market: Vec<MarketTick> = Vec::with_capacity(n_ticks as usize);
    let mut close = 300.0f64;
    for k in 0..n_ticks {
        let open = close;
        let mut next = open + rng.normal();
        if next < 1.0 {
            next = 2.0 - next; // reflect away from zero
        }
        close = next;
        let high = open.max(close) + rng.next_f64() * 0.5;
        let low = (open.min(close) - rng.next_f64() * 0.5).max(0.01);
        market.push(MarketTick {
            time: spec.start_time + k * 3600,
            open,
            high,
            low,
            close,
            volume_from: 800.0 + rng.normal().abs() * 200.0,
            volume_to: 750.0 + rng.normal().abs() * 200.0,
        });
    }

    let blocks_path = dir.join("blocks.jsonl");
    let txs_path = dir.join("transactions.jsonl");
    let traces_path = dir.join("traces.jsonl");
    let ticks_path = dir.join("ticks.csv");
    jsonl::write_lines(&blocks_path, blocks.iter().map(jsonl::block_to_json))?;
    jsonl::write_lines(
        &txs_path,
        transactions.iter().map(jsonl::transaction_to_json),
    )?;
    jsonl::write_lines(&traces_path, traces.iter().map(jsonl::trace_to_json))?;
    ticks::write_ticks(&ticks_path, &market)?;

    Ok(FixtureSummary {
        blocks: blocks_path,
        transactions: txs_path,
        traces: traces_path,
        ticks: ticks_path,
        n_blocks: spec.n_blocks,
        n_ticks,
        n_transactions: transactions.len() as u64,
        n_traces: traces.len() as u64,
        n_contracts,
        range: (spec.start_time, spec.start_time + n_ticks * 3600),
    })
}
