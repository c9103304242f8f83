//! Ethereum JSON-RPC block fetcher.
//!
//! `eth_getBlockByNumber` with full transaction objects, over plain HTTP.
//! Transient failures (transport errors, HTTP 5xx, JSON-RPC error replies)
//! are retried with bounded exponential backoff; a null result means the
//! node definitively lacks the block and is not retried.

use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use chainsight_core::types::{Address, Amount, Block, Transaction};

#[derive(Debug, Error)]
pub enum RpcError {
    #[error("rpc failed after {attempts} attempts (last code {code:?}): {last}")]
    Exhausted {
        attempts: u32,
        code: Option<i64>,
        last: String,
    },
    #[error("node lacks block {0}")]
    RangeGap(u64),
    #[error("malformed rpc response for block {number}: {reason}")]
    BadResponse { number: u64, reason: String },
}

#[derive(Clone, Debug)]
pub struct RpcClient {
    endpoint: String,
    agent: ureq::Agent,
    max_attempts: u32,
    backoff_base: Duration,
}

#[derive(Deserialize)]
struct RpcEnvelope {
    #[serde(default)]
    result: serde_json::Value,
    #[serde(default)]
    error: Option<RpcErrorBody>,
}

#[derive(Deserialize)]
struct RpcErrorBody {
    code: i64,
    #[serde(default)]
    message: String,
}

#[derive(Deserialize)]
struct BlockRpc {
    number: String,
    timestamp: String,
    miner: String,
    size: String,
    difficulty: String,
    #[serde(rename = "gasLimit")]
    gas_limit: String,
    #[serde(rename = "gasUsed")]
    gas_used: String,
    #[serde(default)]
    transactions: Vec<TxRpc>,
}

#[derive(Deserialize)]
struct TxRpc {
    from: String,
    #[serde(default)]
    to: Option<String>,
    value: String,
    gas: String,
    #[serde(rename = "gasPrice", default)]
    gas_price: Option<String>,
    #[serde(default)]
    input: Option<String>,
}

impl RpcClient {
    pub fn new(endpoint: impl Into<String>) -> RpcClient {
        RpcClient {
            endpoint: endpoint.into(),
            agent: ureq::AgentBuilder::new()
                .timeout_connect(Duration::from_secs(10))
                .timeout(Duration::from_secs(30))
                .build(),
            max_attempts: 5,
            backoff_base: Duration::from_millis(100),
        }
    }

    /// Tune the retry schedule (tests use a tiny backoff).
    pub fn with_backoff(mut self, max_attempts: u32, base: Duration) -> RpcClient {
        self.max_attempts = max_attempts.max(1);
        self.backoff_base = base;
        self
    }

    /// Fetch blocks `lo..=hi` lazily, in order. An empty range yields
    /// nothing; after the first error the stream ends.
    pub fn fetch_blocks(&self, lo: u64, hi: u64) -> BlockStream<'_> {
        BlockStream {
            client: self,
            next: lo,
            hi,
            failed: false,
        }
    }

    /// One `eth_getBlockByNumber(number, true)` call with retries.
    pub fn get_block(&self, number: u64) -> Result<(Block, Vec<Transaction>), RpcError> {
        let request = serde_json::json!({
            "jsonrpc": "2.0",
            "id": number,
            "method": "eth_getBlockByNumber",
            "params": [format!("0x{number:x}"), true],
        });
        let mut last_code: Option<i64> = None;
        let mut last_msg = String::new();
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff_base * (1u32 << (attempt - 1).min(8)));
            }
            match self.agent.post(&self.endpoint).send_json(&request) {
                Ok(response) => {
                    let envelope: RpcEnvelope = match response.into_json() {
                        Ok(e) => e,
                        Err(e) => {
                            last_msg = e.to_string();
                            last_code = None;
                            continue;
                        }
                    };
                    if let Some(err) = envelope.error {
                        last_code = Some(err.code);
                        last_msg = err.message;
                        continue;
                    }
                    if envelope.result.is_null() {
                        return Err(RpcError::RangeGap(number));
                    }
                    let raw: BlockRpc = serde_json::from_value(envelope.result).map_err(|e| {
                        RpcError::BadResponse {
                            number,
                            reason: e.to_string(),
                        }
                    })?;
                    return map_block(number, raw);
                }
                Err(ureq::Error::Status(code, _)) => {
                    last_code = Some(code as i64);
                    last_msg = format!("http status {code}");
                }
                Err(ureq::Error::Transport(t)) => {
                    last_code = None;
                    last_msg = t.to_string();
                }
            }
        }
        Err(RpcError::Exhausted {
            attempts: self.max_attempts,
            code: last_code,
            last: last_msg,
        })
    }
}

pub struct BlockStream<'a> {
    client: &'a RpcClient,
    next: u64,
    hi: u64,
    failed: bool,
}

impl Iterator for BlockStream<'_> {
    type Item = Result<(Block, Vec<Transaction>), RpcError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next > self.hi {
            return None;
        }
        let number = self.next;
        self.next += 1;
        let item = self.client.get_block(number);
        if item.is_err() {
            self.failed = true;
        }
        Some(item)
    }
}

fn map_block(number: u64, raw: BlockRpc) -> Result<(Block, Vec<Transaction>), RpcError> {
    let bad = |reason: String| RpcError::BadResponse { number, reason };
    let hex_u64 = |s: &str, name: &str| -> Result<u64, RpcError> {
        let a = Amount::from_hex(s).map_err(|e| bad(format!("{name}: {e}")))?;
        u64::try_from(a.wei()).map_err(|_| bad(format!("{name}: exceeds u64")))
    };
    let block_number = hex_u64(&raw.number, "number")?;
    if block_number != number {
        return Err(bad(format!(
            "expected block {number}, node returned {block_number}"
        )));
    }
    let mut txs = Vec::with_capacity(raw.transactions.len());
    for (i, tx) in raw.transactions.iter().enumerate() {
        let gas_price = match &tx.gas_price {
            Some(s) => Amount::from_hex(s).map_err(|e| bad(format!("tx {i} gasPrice: {e}")))?,
            None => Amount::ZERO,
        };
        let input_selector = tx.input.as_deref().and_then(|s| {
            let hex = s.strip_prefix("0x").unwrap_or(s);
            if hex.len() >= 8 {
                chainsight_core::types::parse_selector(hex).ok()
            } else {
                None
            }
        });
        txs.push(Transaction {
            block_number,
            from: Address::parse(&tx.from).map_err(|e| bad(format!("tx {i} from: {e}")))?,
            to: match &tx.to {
                None => None,
                Some(s) => Address::parse_opt(s).map_err(|e| bad(format!("tx {i} to: {e}")))?,
            },
            value: Amount::from_hex(&tx.value).map_err(|e| bad(format!("tx {i} value: {e}")))?,
            gas_used: hex_u64(&tx.gas, &format!("tx {i} gas"))?,
            gas_price,
            input_selector,
        });
    }
    let block = Block {
        timestamp: hex_u64(&raw.timestamp, "timestamp")?,
        number: block_number,
        miner: Address::parse(&raw.miner).map_err(|e| bad(format!("miner: {e}")))?,
        size_bytes: hex_u64(&raw.size, "size")?,
        difficulty: Amount::from_hex(&raw.difficulty)
            .map_err(|e| bad(format!("difficulty: {e}")))?,
        gas_limit: hex_u64(&raw.gas_limit, "gasLimit")?,
        gas_used: hex_u64(&raw.gas_used, "gasUsed")?,
        tx_count: raw.transactions.len() as u32,
    };
    Ok((block, txs))
}
