//! Chunked time-series store.
//!
//! Every series lives in its own directory; records are grouped into
//! day-sized chunk files (`<chunk_start>.jsonl`) by timestamp so date-range
//! queries only touch the chunks they overlap. Writes rewrite whole chunks
//! atomically (tmp + rename) and are idempotent for identical payloads.
//! Concurrent readers are fine; writers need exclusive access per series.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

/// Fixed chunk span: one day of hourly records per file.
pub const CHUNK_SPAN: u64 = 86_400;

/// Anything storable: serializable with a record timestamp.
pub trait StoreRecord: Serialize + DeserializeOwned {
    fn time(&self) -> u64;
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown series: {0}")]
    UnknownSeries(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("corrupt chunk {path}: {reason}")]
    CorruptChunk { path: String, reason: String },
}

#[derive(Clone, Debug)]
pub struct ChunkStore {
    root: PathBuf,
}

impl ChunkStore {
    pub fn new(root: impl Into<PathBuf>) -> ChunkStore {
        ChunkStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn series_dir(&self, series: &str) -> PathBuf {
        self.root.join(series)
    }

    pub fn has_series(&self, series: &str) -> bool {
        self.series_dir(series).is_dir()
    }

    /// Append records (time-ordered) into their chunks. Records identical to
    /// already-stored ones are dropped, so re-running a put is a no-op.
    pub fn put<T: StoreRecord>(&self, series: &str, records: &[T]) -> Result<(), StoreError> {
        if records.is_empty() {
            // Still create the series so an empty put registers it.
            fs::create_dir_all(self.series_dir(series))?;
            return Ok(());
        }
        let dir = self.series_dir(series);
        fs::create_dir_all(&dir)?;
        let mut i = 0usize;
        while i < records.len() {
            let chunk_start = records[i].time() - records[i].time() % CHUNK_SPAN;
            let mut j = i;
            while j < records.len()
                && records[j].time() - records[j].time() % CHUNK_SPAN == chunk_start
            {
                j += 1;
            }
            self.merge_chunk(&dir, chunk_start, &records[i..j])?;
            i = j;
        }
        Ok(())
    }

    fn merge_chunk<T: StoreRecord>(
        &self,
        dir: &Path,
        chunk_start: u64,
        records: &[T],
    ) -> Result<(), StoreError> {
        let path = dir.join(format!("{chunk_start}.jsonl"));
        let mut rows: Vec<(u64, String)> = Vec::new();
        if path.exists() {
            for line in BufReader::new(fs::File::open(&path)?).lines() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                let parsed: T =
                    serde_json::from_str(&line).map_err(|e| StoreError::CorruptChunk {
                        path: path.display().to_string(),
                        reason: e.to_string(),
                    })?;
                rows.push((parsed.time(), line));
            }
        }
        let mut seen: HashSet<String> = rows.iter().map(|(_, l)| l.clone()).collect();
        for record in records {
            let line = serde_json::to_string(record).map_err(|e| StoreError::CorruptChunk {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            if seen.insert(line.clone()) {
                rows.push((record.time(), line));
            }
        }
        // Stable sort keeps same-timestamp records in insertion order.
        rows.sort_by_key(|(t, _)| *t);
        let tmp = dir.join(format!("{chunk_start}.jsonl.tmp"));
        {
            let mut out = BufWriter::new(fs::File::create(&tmp)?);
            for (_, line) in &rows {
                out.write_all(line.as_bytes())?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// All records with `time` in `[from, to)`, in time order, reassembled
    /// across chunk boundaries.
    pub fn get<T: StoreRecord>(
        &self,
        series: &str,
        from: u64,
        to: u64,
    ) -> Result<Vec<T>, StoreError> {
        let dir = self.series_dir(series);
        if !dir.is_dir() {
            return Err(StoreError::UnknownSeries(series.to_string()));
        }
        let mut chunk_starts: Vec<u64> = Vec::new();
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            let name = entry.file_name();
            let name = name.to_string_lossy();
            if let Some(stem) = name.strip_suffix(".jsonl") {
                if let Ok(start) = stem.parse::<u64>() {
                    if start < to && start + CHUNK_SPAN > from {
                        chunk_starts.push(start);
                    }
                }
            }
        }
        chunk_starts.sort_unstable();
        let mut out = Vec::new();
        for start in chunk_starts {
            let path = dir.join(format!("{start}.jsonl"));
            for line in BufReader::new(fs::File::open(&path)?).lines() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                let record: T =
                    serde_json::from_str(&line).map_err(|e| StoreError::CorruptChunk {
                        path: path.display().to_string(),
                        reason: e.to_string(),
                    })?;
                let t = record.time();
                if t >= from && t < to {
                    out.push(record);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, PartialEq, Eq, Debug, Clone)]
    struct Point {
        time: u64,
        value: i64,
    }

    impl StoreRecord for Point {
        fn time(&self) -> u64 {
            self.time
        }
    }

    fn points(times: &[u64]) -> Vec<Point> {
        times
            .iter()
            .map(|&t| Point {
                time: t,
                value: t as i64 * 10,
            })
            .collect()
    }

    #[test]
    fn interval_query_spans_chunks() {
        let dir = tempfile::tempdir().unwrap();
        let store = ChunkStore::new(dir.path());
        // 10 hourly points spanning a day boundary
        let times: Vec<u64> = (0..10).map(|i| 80_000 + i * 3600).collect();
        store.put("s", &points(&times)).unwrap();
        assert!(dir.path().join("s").join("0.jsonl").exists());
        assert!(dir.path().join("s").join("86400.jsonl").exists());
        // middle 4 hours
        let got: Vec<Point> = store
            .get("s", 80_000 + 2 * 3600, 80_000 + 6 * 3600)
            .unwrap();
        assert_eq!(got, points(&times[2..6]));
    }

    #[test]
    fn empty_interval_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let store = ChunkStore::new(dir.path());
        store.put("s", &points(&[3600])).unwrap();
        let got: Vec<Point> = store.get("s", 50_000, 60_000).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn unknown_series_errors() {
        let dir = tempfile::tempdir().unwrap();
        let store = ChunkStore::new(dir.path());
        let err = store.get::<Point>("nope", 0, 10).unwrap_err();
        assert!(matches!(err, StoreError::UnknownSeries(s) if s == "nope"));
    }

    #[test]
    fn put_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let store = ChunkStore::new(dir.path());
        let records = points(&[0, 3600, 7200]);
        store.put("s", &records).unwrap();
        let first = std::fs::read(dir.path().join("s").join("0.jsonl")).unwrap();
        store.put("s", &records).unwrap();
        let second = std::fs::read(dir.path().join("s").join("0.jsonl")).unwrap();
        assert_eq!(first, second);
        let got: Vec<Point> = store.get("s", 0, 10_000).unwrap();
        assert_eq!(got, records);
    }

    #[test]
    fn incremental_put_merges() {
        let dir = tempfile::tempdir().unwrap();
        let store = ChunkStore::new(dir.path());
        store.put("s", &points(&[0, 7200])).unwrap();
        store.put("s", &points(&[3600])).unwrap();
        let got: Vec<Point> = store.get("s", 0, 10_000).unwrap();
        assert_eq!(got, points(&[0, 3600, 7200]));
    }
}
