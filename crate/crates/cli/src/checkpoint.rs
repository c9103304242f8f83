//! Model checkpoints: magic `BPC1`, little-endian `u32` header length, a
//! JSON header `{version, kind, input_shape, hidden, seed, param_count}`,
//! then the parameters as little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use chainsight_core::model::{Predictor, PredictorKind};

use crate::formats::{check_magic, read_exact, read_f64s, read_u32, FormatError};

const MAGIC: &[u8; 4] = b"BPC1";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: String,
    input_shape: Vec<usize>,
    hidden: usize,
    seed: u64,
    param_count: usize,
}

pub fn save_checkpoint(pred: &Predictor, path: &Path) -> Result<(), FormatError> {
    let header = Header {
        version: VERSION,
        kind: pred.kind.as_str().to_string(),
        input_shape: pred.input_shape.clone(),
        hidden: pred.hidden,
        seed: pred.seed,
        param_count: pred.params.len(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| FormatError::InvalidHeader(e.to_string()))?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    out.write_all(&header_bytes)?;
    for v in &pred.params {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Predictor, FormatError> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, MAGIC, "BPC1 checkpoint")?;
    let header_len = read_u32(&mut r, "header length")? as usize;
    let mut header_bytes = vec![0u8; header_len];
    read_exact(&mut r, &mut header_bytes, "header")?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| FormatError::InvalidHeader(e.to_string()))?;
    if header.version != VERSION {
        return Err(FormatError::VersionMismatch {
            found: header.version,
            expected: VERSION,
        });
    }
    let kind = PredictorKind::parse(&header.kind)
        .ok_or_else(|| FormatError::InvalidHeader(format!("unknown kind `{}`", header.kind)))?;
    let params = read_f64s(&mut r, header.param_count, "parameters")?;
    Ok(Predictor {
        kind,
        input_shape: header.input_shape,
        hidden: header.hidden,
        seed: header.seed,
        params,
    })
}
