//! Hourly market tick CSV: header `time,open,high,low,close,volumefrom,volumeto`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chainsight_core::types::MarketTick;

use crate::jsonl::IngestError;

const HEADER: [&str; 7] = [
    "time",
    "open",
    "high",
    "low",
    "close",
    "volumefrom",
    "volumeto",
];

pub fn read_ticks(path: &Path) -> Result<TickReader<File>, IngestError> {
    Ok(ticks_from_reader(File::open(path)?))
}

pub fn ticks_from_reader<R: std::io::Read>(reader: R) -> TickReader<R> {
    let inner = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(reader);
    TickReader {
        records: inner.into_records(),
        line: 0,
        header_checked: false,
    }
}

pub struct TickReader<R> {
    records: csv::StringRecordsIntoIter<R>,
    line: usize,
    header_checked: bool,
}

impl<R: std::io::Read> Iterator for TickReader<R> {
    type Item = Result<MarketTick, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let record = match self.records.next()? {
                Ok(r) => r,
                Err(e) => {
                    return Some(Err(IngestError::MalformedRecord {
                        line: self.line + 1,
                        reason: e.to_string(),
                    }))
                }
            };
            self.line += 1;
            if !self.header_checked {
                self.header_checked = true;
                let got: Vec<&str> = record.iter().map(str::trim).collect();
                if got != HEADER {
                    return Some(Err(IngestError::MalformedRecord {
                        line: self.line,
                        reason: format!("bad header: expected {}", HEADER.join(",")),
                    }));
                }
                continue;
            }
            return Some(parse_tick(&record, self.line));
        }
    }
}

fn parse_tick(record: &csv::StringRecord, line: usize) -> Result<MarketTick, IngestError> {
    if record.len() != 7 {
        return Err(IngestError::MalformedRecord {
            line,
            reason: format!("expected 7 columns, found {}", record.len()),
        });
    }
    let num = |i: usize, name: &str| -> Result<f64, IngestError> {
        record[i]
            .trim()
            .parse::<f64>()
            .map_err(|e| IngestError::MalformedRecord {
                line,
                reason: format!("column `{name}`: {e}"),
            })
    };
    let time = record[0]
        .trim()
        .parse::<u64>()
        .map_err(|e| IngestError::MalformedRecord {
            line,
            reason: format!("column `time`: {e}"),
        })?;
    let tick = MarketTick {
        time,
        open: num(1, "open")?,
        high: num(2, "high")?,
        low: num(3, "low")?,
        close: num(4, "close")?,
        volume_from: num(5, "volumefrom")?,
        volume_to: num(6, "volumeto")?,
    };
    tick.validate().map_err(|e| IngestError::MalformedRecord {
        line,
        reason: e.to_string(),
    })?;
    Ok(tick)
}

pub fn write_ticks(path: &Path, ticks: &[MarketTick]) -> Result<(), std::io::Error> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", HEADER.join(","))?;
    for t in ticks {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            t.time, t.open, t.high, t.low, t.close, t.volume_from, t.volume_to
        )?;
    }
    out.flush()
}
