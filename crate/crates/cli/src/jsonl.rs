//! Streaming JSONL readers and writers for raw chain records.
//!
//! One JSON object per line, UTF-8, LF. Field names are the wire contract:
//!
//! * blocks:       `{timestamp, number, miner, size, difficulty, gasLimit, gasUsed, txCount}`
//! * transactions: `{blockNumber, from, to, value, gasUsed, gasPrice, inputSelector}`
//! * traces:       `{blockNumber, from, to, value, kind}`
//!
//! Readers yield records one line at a time; memory stays bounded by a
//! single record no matter how large the file is.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use chainsight_core::types::{
    address_opt_string, parse_selector, Address, Amount, Block, Trace, TraceKind, Transaction,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: String },
}

impl IngestError {
    fn malformed(line: usize, reason: impl Into<String>) -> IngestError {
        IngestError::MalformedRecord {
            line,
            reason: reason.into(),
        }
    }

    /// Whether `--skip-bad-records` may skip this error (IO failures abort).
    pub fn is_skippable(&self) -> bool {
        !matches!(self, IngestError::Io(_))
    }
}

/// Lazy line-by-line parser over any reader.
pub struct JsonlReader<R, T> {
    lines: std::io::Lines<BufReader<R>>,
    line_no: usize,
    parse: fn(&str, usize) -> Result<T, IngestError>,
}

impl<R: std::io::Read, T> Iterator for JsonlReader<R, T> {
    type Item = Result<T, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some((self.parse)(&line, self.line_no));
        }
    }
}

fn reader_for<R: std::io::Read, T>(
    reader: R,
    parse: fn(&str, usize) -> Result<T, IngestError>,
) -> JsonlReader<R, T> {
    JsonlReader {
        lines: BufReader::new(reader).lines(),
        line_no: 0,
        parse,
    }
}

pub fn read_blocks(path: &Path) -> Result<JsonlReader<File, Block>, IngestError> {
    Ok(blocks_from_reader(File::open(path)?))
}

pub fn blocks_from_reader<R: std::io::Read>(reader: R) -> JsonlReader<R, Block> {
    reader_for(reader, parse_block_line)
}

pub fn read_transactions(path: &Path) -> Result<JsonlReader<File, Transaction>, IngestError> {
    Ok(transactions_from_reader(File::open(path)?))
}

pub fn transactions_from_reader<R: std::io::Read>(reader: R) -> JsonlReader<R, Transaction> {
    reader_for(reader, parse_transaction_line)
}

pub fn read_traces(path: &Path) -> Result<JsonlReader<File, Trace>, IngestError> {
    Ok(traces_from_reader(File::open(path)?))
}

pub fn traces_from_reader<R: std::io::Read>(reader: R) -> JsonlReader<R, Trace> {
    reader_for(reader, parse_trace_line)
}

// --- field extraction helpers ---------------------------------------------

fn object(value: &Value, line: usize) -> Result<&serde_json::Map<String, Value>, IngestError> {
    value
        .as_object()
        .ok_or_else(|| IngestError::malformed(line, "not a JSON object"))
}

fn field<'v>(
    obj: &'v serde_json::Map<String, Value>,
    name: &str,
    line: usize,
) -> Result<&'v Value, IngestError> {
    obj.get(name).ok_or_else(|| IngestError::MissingField {
        line,
        field: name.to_string(),
    })
}

fn as_u64(v: &Value, name: &str, line: usize) -> Result<u64, IngestError> {
    v.as_u64().ok_or_else(|| {
        IngestError::malformed(
            line,
            format!("field `{name}` is not a non-negative integer"),
        )
    })
}

fn as_str<'v>(v: &'v Value, name: &str, line: usize) -> Result<&'v str, IngestError> {
    v.as_str()
        .ok_or_else(|| IngestError::malformed(line, format!("field `{name}` is not a string")))
}

fn as_amount(v: &Value, name: &str, line: usize) -> Result<Amount, IngestError> {
    let s = as_str(v, name, line)?;
    Amount::from_decimal(s)
        .map_err(|e| IngestError::malformed(line, format!("field `{name}`: {e}")))
}

fn as_address(v: &Value, name: &str, line: usize) -> Result<Address, IngestError> {
    let s = as_str(v, name, line)?;
    Address::parse(s).map_err(|e| IngestError::malformed(line, format!("field `{name}`: {e}")))
}

fn parse_json(line: &str, line_no: usize) -> Result<Value, IngestError> {
    serde_json::from_str(line).map_err(|e| IngestError::malformed(line_no, e.to_string()))
}

fn parse_block_line(line: &str, line_no: usize) -> Result<Block, IngestError> {
    let value = parse_json(line, line_no)?;
    let obj = object(&value, line_no)?;
    let block = Block {
        timestamp: as_u64(field(obj, "timestamp", line_no)?, "timestamp", line_no)?,
        number: as_u64(field(obj, "number", line_no)?, "number", line_no)?,
        miner: as_address(field(obj, "miner", line_no)?, "miner", line_no)?,
        size_bytes: as_u64(field(obj, "size", line_no)?, "size", line_no)?,
        difficulty: as_amount(field(obj, "difficulty", line_no)?, "difficulty", line_no)?,
        gas_limit: as_u64(field(obj, "gasLimit", line_no)?, "gasLimit", line_no)?,
        gas_used: as_u64(field(obj, "gasUsed", line_no)?, "gasUsed", line_no)?,
        tx_count: as_u64(field(obj, "txCount", line_no)?, "txCount", line_no)? as u32,
    };
    block
        .validate()
        .map_err(|e| IngestError::malformed(line_no, e.to_string()))?;
    Ok(block)
}

fn parse_transaction_line(line: &str, line_no: usize) -> Result<Transaction, IngestError> {
    let value = parse_json(line, line_no)?;
    let obj = object(&value, line_no)?;
    let to = match obj.get("to") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let s = as_str(v, "to", line_no)?;
            Address::parse_opt(s)
                .map_err(|e| IngestError::malformed(line_no, format!("field `to`: {e}")))?
        }
    };
    let input_selector = match obj.get("inputSelector") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let s = as_str(v, "inputSelector", line_no)?;
            if s.is_empty() {
                None
            } else {
                Some(parse_selector(s).map_err(|e| {
                    IngestError::malformed(line_no, format!("field `inputSelector`: {e}"))
                })?)
            }
        }
    };
    Ok(Transaction {
        block_number: as_u64(field(obj, "blockNumber", line_no)?, "blockNumber", line_no)?,
        from: as_address(field(obj, "from", line_no)?, "from", line_no)?,
        to,
        value: as_amount(field(obj, "value", line_no)?, "value", line_no)?,
        gas_used: as_u64(field(obj, "gasUsed", line_no)?, "gasUsed", line_no)?,
        gas_price: as_amount(field(obj, "gasPrice", line_no)?, "gasPrice", line_no)?,
        input_selector,
    })
}

fn parse_trace_line(line: &str, line_no: usize) -> Result<Trace, IngestError> {
    let value = parse_json(line, line_no)?;
    let obj = object(&value, line_no)?;
    let kind_str = as_str(field(obj, "kind", line_no)?, "kind", line_no)?;
    let kind = TraceKind::parse(kind_str)
        .map_err(|_| IngestError::malformed(line_no, format!("unknown trace kind `{kind_str}`")))?;
    Ok(Trace {
        block_number: as_u64(field(obj, "blockNumber", line_no)?, "blockNumber", line_no)?,
        from: as_address(field(obj, "from", line_no)?, "from", line_no)?,
        to: as_address(field(obj, "to", line_no)?, "to", line_no)?,
        value: as_amount(field(obj, "value", line_no)?, "value", line_no)?,
        kind,
    })
}

// --- writers (used by the fixture generator and tests) --------------------

pub fn block_to_json(b: &Block) -> String {
    serde_json::json!({
        "timestamp": b.timestamp,
        "number": b.number,
        "miner": b.miner.to_string(),
        "size": b.size_bytes,
        "difficulty": b.difficulty.to_string(),
        "gasLimit": b.gas_limit,
        "gasUsed": b.gas_used,
        "txCount": b.tx_count,
    })
    .to_string()
}

pub fn transaction_to_json(t: &Transaction) -> String {
    serde_json::json!({
        "blockNumber": t.block_number,
        "from": t.from.to_string(),
        "to": address_opt_string(&t.to),
        "value": t.value.to_string(),
        "gasUsed": t.gas_used,
        "gasPrice": t.gas_price.to_string(),
        "inputSelector": t.input_selector.map(hex_selector),
    })
    .to_string()
}

pub fn trace_to_json(t: &Trace) -> String {
    serde_json::json!({
        "blockNumber": t.block_number,
        "from": t.from.to_string(),
        "to": t.to.to_string(),
        "value": t.value.to_string(),
        "kind": t.kind.as_str(),
    })
    .to_string()
}

fn hex_selector(sel: [u8; 4]) -> String {
    sel.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<(), std::io::Error> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in lines {
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
