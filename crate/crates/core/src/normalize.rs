//! Series normalization and its exact inverse.
//!
//! Three parametric scales are supported, fit on a series and invertible
//! from the stored parameters:
//!
//! * `basic`       — min-max to `[0, 1]`, for single-sign series
//! * `around_zero` — symmetric min-max mapping sign to either side of 0.5
//! * `image`       — zero mean, unit variance (population std), unbounded
//!
//! `prop` is not a scale of its own: it resolves to `basic` when the series
//! keeps one sign and `around_zero` otherwise.

use core::fmt;

use alloc::vec::Vec;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NormKind {
    Basic,
    AroundZero,
    Image,
    /// Resolve per series: `basic` for single-sign values, else `around_zero`.
    Prop,
}

impl NormKind {
    pub fn parse(s: &str) -> Option<NormKind> {
        match s {
            "basic" => Some(NormKind::Basic),
            "around_zero" => Some(NormKind::AroundZero),
            "image" => Some(NormKind::Image),
            "prop" => Some(NormKind::Prop),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::Basic => "basic",
            NormKind::AroundZero => "around_zero",
            NormKind::Image => "image",
            NormKind::Prop => "prop",
        }
    }
}

/// Fitted scale parameters; everything needed to invert exactly.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum NormParams {
    Basic { min: f64, max: f64 },
    AroundZero { magnitude: f64 },
    Image { mean: f64, std: f64 },
}

impl NormParams {
    pub fn kind(&self) -> NormKind {
        match self {
            NormParams::Basic { .. } => NormKind::Basic,
            NormParams::AroundZero { .. } => NormKind::AroundZero,
            NormParams::Image { .. } => NormKind::Image,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NormalizeError {
    EmptySeries,
    /// The fit window is constant, so the scale denominator is zero.
    DegenerateSeries,
}

impl fmt::Display for NormalizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizeError::EmptySeries => write!(f, "cannot normalize an empty series"),
            NormalizeError::DegenerateSeries => {
                write!(f, "constant series leaves the scale denominator zero")
            }
        }
    }
}

impl core::error::Error for NormalizeError {}

/// Choose `basic` when all values share one sign (zero counts as either),
/// `around_zero` when signs mix.
pub fn resolve_prop(values: &[f64]) -> NormKind {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if min >= 0.0 || max <= 0.0 {
        NormKind::Basic
    } else {
        NormKind::AroundZero
    }
}

/// Fit scale parameters on `values`. `Prop` resolves first.
pub fn fit(values: &[f64], kind: NormKind) -> Result<NormParams, NormalizeError> {
    if values.is_empty() {
        return Err(NormalizeError::EmptySeries);
    }
    let kind = match kind {
        NormKind::Prop => resolve_prop(values),
        k => k,
    };
    match kind {
        NormKind::Basic => {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for &v in values {
                min = min.min(v);
                max = max.max(v);
            }
            if max > min {
                Ok(NormParams::Basic { min, max })
            } else {
                Err(NormalizeError::DegenerateSeries)
            }
        }
        NormKind::AroundZero => {
            let mut magnitude = 0.0f64;
            for &v in values {
                magnitude = magnitude.max(libm::fabs(v));
            }
            if magnitude > 0.0 {
                Ok(NormParams::AroundZero { magnitude })
            } else {
                Err(NormalizeError::DegenerateSeries)
            }
        }
        NormKind::Image => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = libm::sqrt(var);
            if std > 0.0 {
                Ok(NormParams::Image { mean, std })
            } else {
                Err(NormalizeError::DegenerateSeries)
            }
        }
        NormKind::Prop => unreachable!("prop resolved above"),
    }
}

/// Apply fitted parameters to one value.
pub fn apply(value: f64, params: &NormParams) -> f64 {
    match *params {
        NormParams::Basic { min, max } => (value - min) / (max - min),
        NormParams::AroundZero { magnitude } => (value + magnitude) / (2.0 * magnitude),
        NormParams::Image { mean, std } => (value - mean) * (1.0 / std),
    }
}

/// Exact algebraic inverse of [`apply`].
pub fn invert(value: f64, params: &NormParams) -> f64 {
    match *params {
        NormParams::Basic { min, max } => value * (max - min) + min,
        NormParams::AroundZero { magnitude } => value * (2.0 * magnitude) - magnitude,
        NormParams::Image { mean, std } => value * std + mean,
    }
}

pub fn apply_all(values: &[f64], params: &NormParams) -> Vec<f64> {
    values.iter().map(|&v| apply(v, params)).collect()
}

pub fn invert_all(values: &[f64], params: &NormParams) -> Vec<f64> {
    values.iter().map(|&v| invert(v, params)).collect()
}

/// Fit on the whole series and normalize it; returns the values and the
/// parameters needed to invert.
pub fn normalize(values: &[f64], kind: NormKind) -> Result<(Vec<f64>, NormParams), NormalizeError> {
    let params = fit(values, kind)?;
    Ok((apply_all(values, &params), params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn basic_maps_to_unit_interval() {
        let (out, params) = normalize(&[2.0, 4.0, 6.0], NormKind::Basic).unwrap();
        assert_eq!(out, vec![0.0, 0.5, 1.0]);
        assert_eq!(params, NormParams::Basic { min: 2.0, max: 6.0 });
    }

    #[test]
    fn around_zero_splits_on_half() {
        let (out, params) = normalize(&[-4.0, 0.0, 1.0], NormKind::AroundZero).unwrap();
        assert_eq!(out, vec![0.0, 0.5, 0.625]);
        assert_eq!(params, NormParams::AroundZero { magnitude: 4.0 });
    }

    #[test]
    fn image_zero_mean_unit_std() {
        // mean 2, population std sqrt(2/3)
        let (out, _) = normalize(&[1.0, 2.0, 3.0], NormKind::Image).unwrap();
        assert!((out[0] - (-1.22474)).abs() < 1e-5, "{}", out[0]);
        assert_eq!(out[1], 0.0);
        assert!((out[2] - 1.22474).abs() < 1e-5);
    }

    #[test]
    fn prop_resolution() {
        assert_eq!(resolve_prop(&[1.0, 2.0, 3.0]), NormKind::Basic);
        assert_eq!(resolve_prop(&[-1.0, -5.0]), NormKind::Basic);
        assert_eq!(resolve_prop(&[-1.0, 2.0]), NormKind::AroundZero);
        assert_eq!(resolve_prop(&[0.0, 0.0]), NormKind::Basic);
        assert_eq!(resolve_prop(&[0.0, 3.0]), NormKind::Basic);
    }

    #[test]
    fn degenerate_series_rejected() {
        assert_eq!(
            normalize(&[5.0, 5.0], NormKind::Basic).unwrap_err(),
            NormalizeError::DegenerateSeries
        );
        assert_eq!(
            normalize(&[0.0, 0.0], NormKind::AroundZero).unwrap_err(),
            NormalizeError::DegenerateSeries
        );
        assert_eq!(
            normalize(&[3.0, 3.0, 3.0], NormKind::Image).unwrap_err(),
            NormalizeError::DegenerateSeries
        );
        assert_eq!(
            normalize(&[0.0, 0.0], NormKind::Prop).unwrap_err(),
            NormalizeError::DegenerateSeries
        );
        assert_eq!(
            normalize(&[], NormKind::Basic).unwrap_err(),
            NormalizeError::EmptySeries
        );
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(invert(0.5, &NormParams::Basic { min: 2.0, max: 6.0 }), 4.0);
        assert_eq!(
            invert(
                0.0,
                &NormParams::Image {
                    mean: 2.0,
                    std: 0.8165
                }
            ),
            2.0
        );
        assert_eq!(invert(0.5, &NormParams::AroundZero { magnitude: 4.0 }), 0.0);
    }

    #[test]
    fn round_trip_is_tight() {
        let mut rng = crate::rng::Rng::new(9);
        for kind in [
            NormKind::Basic,
            NormKind::AroundZero,
            NormKind::Image,
            NormKind::Prop,
        ] {
            let xs: Vec<f64> = (0..200).map(|_| rng.normal() * 100.0 + 50.0).collect();
            let (out, params) = normalize(&xs, kind).unwrap();
            for (orig, norm) in xs.iter().zip(&out) {
                let back = invert(*norm, &params);
                assert!(
                    (back - orig).abs() < 1e-9,
                    "{kind:?}: {orig} -> {norm} -> {back}"
                );
            }
        }
    }

    #[test]
    fn around_zero_sign_mapping() {
        let xs = [-3.0, -0.5, 0.0, 0.25, 7.0];
        let (out, _) = normalize(&xs, NormKind::AroundZero).unwrap();
        for (x, y) in xs.iter().zip(&out) {
            if *x > 0.0 {
                assert!(*y > 0.5);
            } else if *x < 0.0 {
                assert!(*y < 0.5);
            } else {
                assert_eq!(*y, 0.5);
            }
        }
    }

    #[test]
    fn fit_subset_apply_all() {
        // Fit on a prefix, apply everywhere: later values may leave [0, 1].
        let xs = [2.0, 4.0, 6.0, 10.0];
        let params = fit(&xs[..3], NormKind::Basic).unwrap();
        let out = apply_all(&xs, &params);
        assert_eq!(out, vec![0.0, 0.5, 1.0, 2.0]);
    }
}
