//! The dataset artifact: magic `BPD1`, little-endian `u32` header length, a
//! JSON header describing shapes and normalization parameters, then the
//! samples as little-endian `f32` (sample-major, row-major) followed by the
//! targets as `f32`. Parameters stay at full `f64` precision in the header
//! so inversion is exact; only the payload is quantized.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use chainsight_core::dataset::{Dataset, DatasetModel, PropertyMeta};
use chainsight_core::normalize::{NormKind, NormParams};

use crate::formats::{check_magic, read_exact, read_f32s, read_u32, FormatError};

const MAGIC: &[u8; 4] = b"BPD1";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    model: String,
    input_shape: Vec<usize>,
    wn: usize,
    properties: Vec<PropHeader>,
    target: TargetHeader,
    times: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct PropHeader {
    name: String,
    shape: [usize; 2],
    norm_kind: String,
    params: serde_json::Value,
}

/// The target is always scalar, so its header carries no shape.
#[derive(Serialize, Deserialize)]
struct TargetHeader {
    name: String,
    norm_kind: String,
    params: serde_json::Value,
}

fn params_to_json(params: &NormParams) -> serde_json::Value {
    match *params {
        NormParams::Basic { min, max } => serde_json::json!({ "min": min, "max": max }),
        NormParams::AroundZero { magnitude } => serde_json::json!({ "magnitude": magnitude }),
        NormParams::Image { mean, std } => serde_json::json!({ "mean": mean, "std": std }),
    }
}

fn params_from_json(kind: &str, value: &serde_json::Value) -> Result<NormParams, FormatError> {
    let get = |field: &str| -> Result<f64, FormatError> {
        value
            .get(field)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| FormatError::InvalidHeader(format!("params missing `{field}`")))
    };
    match kind {
        "basic" => Ok(NormParams::Basic {
            min: get("min")?,
            max: get("max")?,
        }),
        "around_zero" => Ok(NormParams::AroundZero {
            magnitude: get("magnitude")?,
        }),
        "image" => Ok(NormParams::Image {
            mean: get("mean")?,
            std: get("std")?,
        }),
        other => Err(FormatError::InvalidHeader(format!(
            "unknown norm kind `{other}`"
        ))),
    }
}

fn prop_header(meta: &PropertyMeta) -> PropHeader {
    PropHeader {
        name: meta.name.clone(),
        shape: [meta.shape.0, meta.shape.1],
        norm_kind: meta.params.kind().as_str().to_string(),
        params: params_to_json(&meta.params),
    }
}

fn prop_meta(h: &PropHeader) -> Result<PropertyMeta, FormatError> {
    if NormKind::parse(&h.norm_kind).is_none() {
        return Err(FormatError::InvalidHeader(format!(
            "unknown norm kind `{}`",
            h.norm_kind
        )));
    }
    Ok(PropertyMeta {
        name: h.name.clone(),
        shape: (h.shape[0], h.shape[1]),
        params: params_from_json(&h.norm_kind, &h.params)?,
    })
}

fn target_header(meta: &PropertyMeta) -> TargetHeader {
    TargetHeader {
        name: meta.name.clone(),
        norm_kind: meta.params.kind().as_str().to_string(),
        params: params_to_json(&meta.params),
    }
}

fn target_meta(h: &TargetHeader) -> Result<PropertyMeta, FormatError> {
    if NormKind::parse(&h.norm_kind).is_none() {
        return Err(FormatError::InvalidHeader(format!(
            "unknown norm kind `{}`",
            h.norm_kind
        )));
    }
    Ok(PropertyMeta {
        name: h.name.clone(),
        shape: (1, 1),
        params: params_from_json(&h.norm_kind, &h.params)?,
    })
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), FormatError> {
    let header = Header {
        version: VERSION,
        model: ds.model.as_str().to_string(),
        input_shape: ds.input_shape.clone(),
        wn: ds.wn,
        properties: ds.properties.iter().map(prop_header).collect(),
        target: target_header(&ds.target),
        times: ds.times.clone(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| FormatError::InvalidHeader(e.to_string()))?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    out.write_all(&header_bytes)?;
    for v in &ds.inputs {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    for v in &ds.targets {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, FormatError> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, MAGIC, "BPD1 dataset")?;
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
    let model = DatasetModel::parse(&header.model)
        .ok_or_else(|| FormatError::InvalidHeader(format!("unknown model `{}`", header.model)))?;
    let n = header.times.len();
    let sample_len: usize = header.input_shape.iter().product();
    let inputs = read_f32s(&mut r, n * sample_len, "inputs")?;
    let targets = read_f32s(&mut r, n, "targets")?;
    let properties = header
        .properties
        .iter()
        .map(prop_meta)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        model,
        wn: header.wn,
        input_shape: header.input_shape,
        properties,
        target: target_meta(&header.target)?,
        times: header.times,
        inputs,
        targets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chainsight_core::dataset::{build_dataset, DatasetModel, WindowSpec};
    use chainsight_core::properties::PropertySeries;
    use chainsight_core::rng::Rng;

    fn sample_dataset() -> Dataset {
        let mut rng = Rng::new(3);
        let len = 20;
        let times: Vec<u64> = (0..len as u64).map(|i| 1_488_326_400 + i * 3600).collect();
        let a: Vec<f64> = (0..len).map(|_| rng.uniform(100.0, 300.0)).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.normal()).collect();
        let series = [
            PropertySeries::scalar("a", "u", times.clone(), a),
            PropertySeries::scalar("b", "u", times, b),
        ];
        let spec = WindowSpec {
            wn: 4,
            properties: vec!["a".into(), "b".into()],
            target: "a".into(),
            norm: chainsight_core::normalize::NormKind::Prop,
            model: DatasetModel::Matrix,
        };
        build_dataset(&spec, &series, None).unwrap()
    }

    #[test]
    fn write_read_write_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample_dataset();
        let p1 = dir.path().join("a.bpd");
        let p2 = dir.path().join("b.bpd");
        write_dataset(&ds, &p1).unwrap();
        let loaded = read_dataset(&p1).unwrap();
        write_dataset(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(loaded.times, ds.times);
        assert_eq!(loaded.properties, ds.properties);
        assert_eq!(loaded.input_shape, ds.input_shape);
        // payload is f32-quantized
        for (a, b) in ds.inputs.iter().zip(&loaded.inputs) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bpd");
        write_dataset(&sample_dataset(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(FormatError::BadMagic { .. })
        ));
    }

    #[test]
    fn truncation_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bpd");
        write_dataset(&sample_dataset(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(FormatError::TruncatedPayload { .. })
        ));
        // Truncating inside the header is also caught.
        std::fs::write(&path, &bytes[..20]).unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(FormatError::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn version_bump_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bpd");
        write_dataset(&sample_dataset(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let text = String::from_utf8_lossy(&bytes[8..]).into_owned();
        assert!(text.starts_with("{\"version\":1"));
        let mut patched = bytes.clone();
        // "version":1 -> "version":2 keeps the header length unchanged
        let pos = 8 + text.find("\"version\":1").unwrap() + "\"version\":".len();
        patched[pos] = b'2';
        std::fs::write(&path, &patched).unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(FormatError::VersionMismatch {
                found: 2,
                expected: 1
            })
        ));
    }
}
