//! Sliding-window dataset assembly.
//!
//! Normalized property series are cut into windows of `wn` consecutive ticks
//! with step 1; the value of the target property one tick past each window is
//! the expected output. Two sample layouts exist:
//!
//! * matrix — a `propN x wn` 2D sample of scalar properties
//! * stacked — a `V1 x V2 x wn` 3D sample packing scalar and tensor-valued
//!   property windows by row offset, zero-padded where shapes differ
//!
//! Every dataset keeps the fitted normalization parameters per property and
//! for the target, so samples and predictions can be mapped back to raw
//! units exactly.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::normalize::{self, NormKind, NormParams, NormalizeError};
use crate::properties::{names, PropertySeries};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DatasetModel {
    Matrix,
    Stacked,
}

impl DatasetModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetModel::Matrix => "matrix",
            DatasetModel::Stacked => "stacked",
        }
    }

    pub fn parse(s: &str) -> Option<DatasetModel> {
        match s {
            "matrix" => Some(DatasetModel::Matrix),
            "stacked" => Some(DatasetModel::Stacked),
            _ => None,
        }
    }
}

/// What to window: property names, the prediction target, window length and
/// the normalization to fit per series.
#[derive(Clone, PartialEq, Debug)]
pub struct WindowSpec {
    pub wn: usize,
    pub properties: Vec<String>,
    pub target: String,
    pub norm: NormKind,
    pub model: DatasetModel,
}

/// A property's contribution to the dataset: its shape and fitted scale.
#[derive(Clone, PartialEq, Debug)]
pub struct PropertyMeta {
    pub name: String,
    pub shape: (usize, usize),
    pub params: NormParams,
}

/// Windowed samples plus everything needed to invert them.
#[derive(Clone, PartialEq, Debug)]
pub struct Dataset {
    pub model: DatasetModel,
    pub wn: usize,
    /// `[propN, wn]` for matrix, `[V1, V2, wn]` for stacked.
    pub input_shape: Vec<usize>,
    pub properties: Vec<PropertyMeta>,
    pub target: PropertyMeta,
    /// Per-sample target timestamps.
    pub times: Vec<u64>,
    /// Sample-major, row-major normalized inputs.
    pub inputs: Vec<f64>,
    /// Normalized targets.
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Flattened values per sample.
    pub fn sample_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.sample_len();
        &self.inputs[i * n..(i + 1) * n]
    }

    pub fn property_index(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|p| p.name == name)
    }

    /// Row offset of property `k` in the stacked layout.
    fn stacked_row_offset(&self, k: usize) -> usize {
        self.properties[..k].iter().map(|p| p.shape.0).sum()
    }

    /// The normalized value of scalar property `k` at the last window
    /// position of sample `i` (the most recent input tick).
    pub fn last_window_value(&self, k: usize, i: usize) -> f64 {
        let sample = self.sample(i);
        match self.model {
            DatasetModel::Matrix => sample[k * self.wn + (self.wn - 1)],
            DatasetModel::Stacked => {
                let v2 = self.input_shape[1];
                let row = self.stacked_row_offset(k);
                sample[row * v2 * self.wn + (self.wn - 1)]
            }
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum DatasetError {
    /// The series must be strictly longer than the window.
    TooShort {
        len: usize,
        wn: usize,
    },
    MissingProperty(String),
    /// Matrix samples can only hold scalar properties.
    NonScalarProperty(String),
    NonScalarTarget(String),
    /// A series does not cover the same ticks as the target.
    Misaligned(String),
    EmptySplit,
    InvalidPreset(u8),
    /// The train-only fit window contains no ticks.
    EmptyFitWindow,
    Normalize {
        name: String,
        source: NormalizeError,
    },
    BadWindow,
}

impl fmt::Display for DatasetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetError::TooShort { len, wn } => {
                write!(f, "series length {len} cannot produce windows of size {wn}")
            }
            DatasetError::MissingProperty(name) => write!(f, "property not available: {name}"),
            DatasetError::NonScalarProperty(name) => {
                write!(
                    f,
                    "matrix model requires scalar properties, {name} is tensor-valued"
                )
            }
            DatasetError::NonScalarTarget(name) => {
                write!(
                    f,
                    "prediction target must be scalar, {name} is tensor-valued"
                )
            }
            DatasetError::Misaligned(name) => {
                write!(
                    f,
                    "series {name} does not cover the same ticks as the target"
                )
            }
            DatasetError::EmptySplit => write!(f, "train/test boundary leaves one side empty"),
            DatasetError::InvalidPreset(n) => {
                write!(f, "dataset preset {n} does not exist (1..=8)")
            }
            DatasetError::EmptyFitWindow => {
                write!(f, "normalization fit window contains no samples")
            }
            DatasetError::Normalize { name, source } => write!(f, "normalizing {name}: {source}"),
            DatasetError::BadWindow => write!(f, "window size must be at least 1"),
        }
    }
}

impl core::error::Error for DatasetError {}

/// Property lists and sample model of the eight dataset presets.
///
/// Sets 1-4 hold market data only and serve as baselines; 5-8 hold account
/// distributions. Set 5's single tensor property goes through the stacked
/// layout because a 2D matrix sample cannot carry a 3D window.
pub fn preset(set_n: u8) -> Result<(Vec<&'static str>, DatasetModel), DatasetError> {
    use crate::distributions::names as dist;
    let def = match set_n {
        1 => (
            vec![names::VOLUME_FROM, names::VOLUME_TO],
            DatasetModel::Matrix,
        ),
        2 => (vec!["volumeFrom_rel", "volumeTo_rel"], DatasetModel::Matrix),
        3 => (
            vec![names::HIGH_PRICE, names::VOLUME_FROM, names::VOLUME_TO],
            DatasetModel::Matrix,
        ),
        4 => (
            vec!["highPrice_rel", "volumeFrom_rel", "volumeTo_rel"],
            DatasetModel::Matrix,
        ),
        5 => (
            vec![names::ACCOUNT_BALANCE_DISTRIBUTION],
            DatasetModel::Stacked,
        ),
        6 => (vec![dist::BALANCE_LAST_SEEN], DatasetModel::Stacked),
        7 => (
            vec![dist::CONTRACT_BALANCE_LAST_SEEN],
            DatasetModel::Stacked,
        ),
        8 => (
            vec![
                dist::BALANCE_LAST_SEEN,
                dist::CONTRACT_BALANCE_LAST_SEEN,
                dist::CONTRACT_VOLUME_IN_ERC20,
                names::ACCOUNT_BALANCE_DISTRIBUTION,
            ],
            DatasetModel::Stacked,
        ),
        n => return Err(DatasetError::InvalidPreset(n)),
    };
    Ok(def)
}

impl WindowSpec {
    /// Window spec for one of the eight presets.
    pub fn for_preset(
        set_n: u8,
        wn: usize,
        norm: NormKind,
        target: &str,
    ) -> Result<WindowSpec, DatasetError> {
        let (props, model) = preset(set_n)?;
        Ok(WindowSpec {
            wn,
            properties: props.into_iter().map(String::from).collect(),
            target: String::from(target),
            norm,
            model,
        })
    }
}

/// Build a dataset from aligned property series.
///
/// Normalization parameters are fit per series, over the whole series by
/// default, or over ticks before `fit_boundary` only (leakage-free mode)
/// while still being applied everywhere.
pub fn build_dataset(
    spec: &WindowSpec,
    series: &[PropertySeries],
    fit_boundary: Option<u64>,
) -> Result<Dataset, DatasetError> {
    if spec.wn == 0 {
        return Err(DatasetError::BadWindow);
    }
    let find = |name: &str| -> Result<&PropertySeries, DatasetError> {
        series
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| DatasetError::MissingProperty(String::from(name)))
    };
    let target_series = find(&spec.target)?;
    if !target_series.is_scalar() {
        return Err(DatasetError::NonScalarTarget(spec.target.clone()));
    }
    let len = target_series.len();
    if len <= spec.wn {
        return Err(DatasetError::TooShort { len, wn: spec.wn });
    }

    let mut props: Vec<&PropertySeries> = Vec::with_capacity(spec.properties.len());
    for name in &spec.properties {
        let s = find(name)?;
        if s.times != target_series.times {
            return Err(DatasetError::Misaligned(name.clone()));
        }
        if spec.model == DatasetModel::Matrix && !s.is_scalar() {
            return Err(DatasetError::NonScalarProperty(name.clone()));
        }
        props.push(s);
    }

    // Fit window: tick indices whose time precedes the boundary.
    let fit_end = match fit_boundary {
        Some(boundary) => {
            let end = target_series.times.partition_point(|&t| t < boundary);
            if end == 0 {
                return Err(DatasetError::EmptyFitWindow);
            }
            end
        }
        None => len,
    };

    let normalize_series = |s: &PropertySeries| -> Result<(Vec<f64>, NormParams), DatasetError> {
        let cells = s.cells();
        let params = normalize::fit(&s.data[..fit_end * cells], spec.norm).map_err(|source| {
            DatasetError::Normalize {
                name: s.name.clone(),
                source,
            }
        })?;
        Ok((normalize::apply_all(&s.data, &params), params))
    };

    let mut normalized: Vec<Vec<f64>> = Vec::with_capacity(props.len());
    let mut metas: Vec<PropertyMeta> = Vec::with_capacity(props.len());
    for s in &props {
        let (values, params) = normalize_series(s)?;
        normalized.push(values);
        metas.push(PropertyMeta {
            name: s.name.clone(),
            shape: s.shape,
            params,
        });
    }
    let (target_values, target_params) = normalize_series(target_series)?;
    let target_meta = PropertyMeta {
        name: target_series.name.clone(),
        shape: (1, 1),
        params: target_params,
    };

    let input_shape = match spec.model {
        DatasetModel::Matrix => vec![props.len(), spec.wn],
        DatasetModel::Stacked => {
            let v1: usize = props.iter().map(|s| s.shape.0).sum();
            let v2: usize = props.iter().map(|s| s.shape.1).max().unwrap_or(1);
            vec![v1, v2, spec.wn]
        }
    };
    let sample_len: usize = input_shape.iter().product();
    let count = len - spec.wn;

    let mut inputs = vec![0.0f64; count * sample_len];
    let mut targets = Vec::with_capacity(count);
    let mut times = Vec::with_capacity(count);
    for step in 0..count {
        let sample = &mut inputs[step * sample_len..(step + 1) * sample_len];
        match spec.model {
            DatasetModel::Matrix => {
                let wn = spec.wn;
                for (y, values) in normalized.iter().enumerate() {
                    sample[y * wn..(y + 1) * wn].copy_from_slice(&values[step..step + wn]);
                }
            }
            DatasetModel::Stacked => {
                let v2_total = input_shape[1];
                let wn = spec.wn;
                let mut row_offset = 0usize;
                for (k, values) in normalized.iter().enumerate() {
                    let (v1, v2) = props[k].shape;
                    let cells = v1 * v2;
                    for x in 0..wn {
                        let tick = &values[(step + x) * cells..(step + x + 1) * cells];
                        for lr in 0..v1 {
                            for lc in 0..v2 {
                                let dst = ((row_offset + lr) * v2_total + lc) * wn + x;
                                sample[dst] = tick[lr * v2 + lc];
                            }
                        }
                    }
                    row_offset += v1;
                }
            }
        }
        targets.push(target_values[spec.wn + step]);
        times.push(target_series.times[spec.wn + step]);
    }

    Ok(Dataset {
        model: spec.model,
        wn: spec.wn,
        input_shape,
        properties: metas,
        target: target_meta,
        times,
        inputs,
        targets,
    })
}

/// Split samples by target timestamp: strictly before the boundary is train,
/// the rest is test. Fails if either side would be empty.
pub fn split_train_test(ds: &Dataset, boundary: u64) -> Result<(Dataset, Dataset), DatasetError> {
    let idx = ds.times.partition_point(|&t| t < boundary);
    if idx == 0 || idx == ds.len() {
        return Err(DatasetError::EmptySplit);
    }
    let n = ds.sample_len();
    let mut train = ds.clone();
    let mut test = ds.clone();
    train.times.truncate(idx);
    train.targets.truncate(idx);
    train.inputs.truncate(idx * n);
    test.times.drain(..idx);
    test.targets.drain(..idx);
    test.inputs.drain(..idx * n);
    Ok((train, test))
}
