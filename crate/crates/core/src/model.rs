//! Baseline predictors, minibatch Adam training and the evaluation measures.
//!
//! Four predictor kinds share one interface:
//!
//! * `persistence` — copies the target property's most recent windowed value
//!   (zero for relative targets); the classic cheat that inflates error
//!   scores on absolute targets without predicting anything
//! * `null_half`   — constant 0.5 in normalized space, the reference the
//!   r2 measure is defined against
//! * `linear`      — one dense layer over the flattened sample
//! * `mlp`         — one ReLU hidden layer
//!
//! Training minimizes MSE in normalized space with bias-corrected Adam and
//! seeded shuffling; evaluation reports mse/rmse on inverse-normalized
//! values, r2 against the constant-0.5 reference in normalized space, a
//! classic mean-baseline r2 for comparison, and directional sign accuracy.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::dataset::Dataset;
use crate::normalize;
use crate::properties::names;
use crate::rng::Rng;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PredictorKind {
    Persistence,
    NullHalf,
    Linear,
    Mlp,
}

impl PredictorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictorKind::Persistence => "persistence",
            PredictorKind::NullHalf => "null_half",
            PredictorKind::Linear => "linear",
            PredictorKind::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Option<PredictorKind> {
        match s {
            "persistence" => Some(PredictorKind::Persistence),
            "null_half" | "null" => Some(PredictorKind::NullHalf),
            "linear" => Some(PredictorKind::Linear),
            "mlp" => Some(PredictorKind::Mlp),
            _ => None,
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, PredictorKind::Linear | PredictorKind::Mlp)
    }
}

/// A predictor with its flat parameter vector. Forward output is a single
/// real (the normalized target estimate) per sample.
#[derive(Clone, PartialEq, Debug)]
pub struct Predictor {
    pub kind: PredictorKind,
    pub input_shape: Vec<usize>,
    /// Hidden width (mlp only, 0 otherwise).
    pub hidden: usize,
    /// Seed used for parameter initialization.
    pub seed: u64,
    pub params: Vec<f64>,
}

impl Predictor {
    pub fn persistence() -> Predictor {
        Predictor {
            kind: PredictorKind::Persistence,
            input_shape: Vec::new(),
            hidden: 0,
            seed: 0,
            params: Vec::new(),
        }
    }

    pub fn null_half() -> Predictor {
        Predictor {
            kind: PredictorKind::NullHalf,
            input_shape: Vec::new(),
            hidden: 0,
            seed: 0,
            params: Vec::new(),
        }
    }

    /// Dense layer `w . x + b`, zero-initialized.
    pub fn linear(input_shape: &[usize]) -> Predictor {
        let n: usize = input_shape.iter().product();
        Predictor {
            kind: PredictorKind::Linear,
            input_shape: input_shape.to_vec(),
            hidden: 0,
            seed: 0,
            params: vec![0.0; n + 1],
        }
    }

    /// One ReLU hidden layer, uniform Glorot initialization from `seed`.
    pub fn mlp(input_shape: &[usize], hidden: usize, seed: u64) -> Predictor {
        let n: usize = input_shape.iter().product();
        let mut rng = Rng::new(seed);
        let mut params = vec![0.0; hidden * n + hidden + hidden + 1];
        let limit1 = libm::sqrt(6.0 / (n + hidden) as f64);
        for w in &mut params[..hidden * n] {
            *w = rng.uniform(-limit1, limit1);
        }
        let limit2 = libm::sqrt(6.0 / (hidden + 1) as f64);
        let w2_start = hidden * n + hidden;
        for w in &mut params[w2_start..w2_start + hidden] {
            *w = rng.uniform(-limit2, limit2);
        }
        Predictor {
            kind: PredictorKind::Mlp,
            input_shape: input_shape.to_vec(),
            hidden,
            seed,
            params,
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Forward pass over a flattened sample (linear and mlp only).
    pub fn forward(&self, x: &[f64]) -> Result<f64, ModelError> {
        match self.kind {
            PredictorKind::Linear => {
                let n = self.input_len();
                if x.len() != n || self.params.len() != n + 1 {
                    return Err(ModelError::ShapeMismatch {
                        expected: n,
                        got: x.len(),
                    });
                }
                let (w, b) = self.params.split_at(n);
                Ok(dot(w, x) + b[0])
            }
            PredictorKind::Mlp => {
                let n = self.input_len();
                let h = self.hidden;
                if x.len() != n || self.params.len() != h * n + 2 * h + 1 {
                    return Err(ModelError::ShapeMismatch {
                        expected: n,
                        got: x.len(),
                    });
                }
                let (w1, rest) = self.params.split_at(h * n);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(h);
                let mut out = b2[0];
                for j in 0..h {
                    let z = dot(&w1[j * n..(j + 1) * n], x) + b1[j];
                    if z > 0.0 {
                        out += w2[j] * z;
                    }
                }
                Ok(out)
            }
            PredictorKind::Persistence | PredictorKind::NullHalf => {
                Err(ModelError::NotTrainable { kind: self.kind })
            }
        }
    }

    /// Normalized-space prediction for one dataset sample. This is the
    /// common entry point for every predictor kind.
    pub fn predict_normalized(&self, ds: &Dataset, i: usize) -> Result<f64, ModelError> {
        match self.kind {
            PredictorKind::NullHalf => Ok(0.5),
            PredictorKind::Linear | PredictorKind::Mlp => self.forward(ds.sample(i)),
            PredictorKind::Persistence => {
                let target = ds.target.name.as_str();
                if names::is_relative(target) {
                    // The next change is unknown to a copying model; predict
                    // "no change" in the target's raw units.
                    let present = ds.property_index(target).is_some()
                        || names::absolute_source(target)
                            .map(|s| ds.property_index(s).is_some())
                            .unwrap_or(false);
                    if !present {
                        return Err(ModelError::TargetNotInWindow {
                            target: String::from(target),
                        });
                    }
                    Ok(normalize::apply(0.0, &ds.target.params))
                } else {
                    let k =
                        ds.property_index(target)
                            .ok_or_else(|| ModelError::TargetNotInWindow {
                                target: String::from(target),
                            })?;
                    let v = ds.last_window_value(k, i);
                    let raw = normalize::invert(v, &ds.properties[k].params);
                    Ok(normalize::apply(raw, &ds.target.params))
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 1e-5,
            epochs: 10,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

/// First/second moment estimates for Adam, one slot per parameter.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> AdamState {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<(), ModelError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(ModelError::ShapeMismatch {
            expected: params.len(),
            got: grads.len(),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(ModelError::NonFiniteGradient);
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.eps);
    }
    Ok(())
}

/// Mean squared error and its parameter gradient over a batch, in
/// normalized space. Gradients are written into `grads` (zeroed first).
pub fn batch_loss_grad(
    pred: &Predictor,
    ds: &Dataset,
    batch: &[usize],
    grads: &mut [f64],
) -> Result<f64, ModelError> {
    if grads.len() != pred.params.len() {
        return Err(ModelError::ShapeMismatch {
            expected: pred.params.len(),
            got: grads.len(),
        });
    }
    for g in grads.iter_mut() {
        *g = 0.0;
    }
    let b = batch.len() as f64;
    let mut loss = 0.0;
    match pred.kind {
        PredictorKind::Linear => {
            let n = pred.input_len();
            for &i in batch {
                let x = ds.sample(i);
                let f = pred.forward(x)?;
                let err = f - ds.targets[i];
                loss += err * err;
                let scale = 2.0 * err / b;
                for (gw, xv) in grads[..n].iter_mut().zip(x) {
                    *gw += scale * xv;
                }
                grads[n] += scale;
            }
        }
        PredictorKind::Mlp => {
            let n = pred.input_len();
            let h = pred.hidden;
            let (w1, rest) = pred.params.split_at(h * n);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(h);
            let mut z = vec![0.0; h];
            for &i in batch {
                let x = ds.sample(i);
                if x.len() != n {
                    return Err(ModelError::ShapeMismatch {
                        expected: n,
                        got: x.len(),
                    });
                }
                let mut f = b2[0];
                for j in 0..h {
                    z[j] = dot(&w1[j * n..(j + 1) * n], x) + b1[j];
                    if z[j] > 0.0 {
                        f += w2[j] * z[j];
                    }
                }
                let err = f - ds.targets[i];
                loss += err * err;
                let df = 2.0 * err / b;
                let (gw1, grest) = grads.split_at_mut(h * n);
                let (gb1, grest) = grest.split_at_mut(h);
                let (gw2, gb2) = grest.split_at_mut(h);
                gb2[0] += df;
                for j in 0..h {
                    if z[j] > 0.0 {
                        gw2[j] += df * z[j];
                        let dz = df * w2[j];
                        gb1[j] += dz;
                        for (g, xv) in gw1[j * n..(j + 1) * n].iter_mut().zip(x) {
                            *g += dz * xv;
                        }
                    }
                }
            }
        }
        PredictorKind::Persistence | PredictorKind::NullHalf => {
            return Err(ModelError::NotTrainable { kind: pred.kind });
        }
    }
    Ok(loss / b)
}

/// Compare the analytic gradient against central finite differences
/// (`h = 1e-4`) over every parameter; returns the worst relative error
/// (with a small absolute floor so dead-unit zero gradients compare clean).
pub fn gradient_check(pred: &Predictor, ds: &Dataset, batch: &[usize]) -> Result<f64, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let h = 1e-4;
    let mut analytic = vec![0.0; pred.params.len()];
    batch_loss_grad(pred, ds, batch, &mut analytic)?;
    let mut shadow = pred.clone();
    let mut scratch = vec![0.0; pred.params.len()];
    let mut worst = 0.0f64;
    for (p, &a) in analytic.iter().enumerate() {
        let orig = shadow.params[p];
        shadow.params[p] = orig + h;
        let plus = batch_loss_grad(&shadow, ds, batch, &mut scratch)?;
        shadow.params[p] = orig - h;
        let minus = batch_loss_grad(&shadow, ds, batch, &mut scratch)?;
        shadow.params[p] = orig;
        let fd = (plus - minus) / (2.0 * h);
        let rel = if a == fd {
            0.0
        } else {
            libm::fabs(a - fd) / (libm::fabs(a).max(libm::fabs(fd)) + 1e-3)
        };
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Per-epoch training history; the predictor is left at its best epoch.
#[derive(Clone, PartialEq, Debug)]
pub struct TrainOutcome {
    /// Mean train MSE per epoch, in normalized space.
    pub history: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    /// The monitored loss at that epoch.
    pub best_loss: f64,
}

/// Minibatch Adam with seeded shuffling.
///
/// When `monitor` is given, the parameters kept are those of the epoch with
/// the lowest monitor MSE; this mirrors best-epoch test reporting and is an
/// optimistic protocol. Otherwise the train loss decides.
pub fn train(
    pred: &mut Predictor,
    ds: &Dataset,
    cfg: &TrainConfig,
    monitor: Option<&Dataset>,
) -> Result<TrainOutcome, ModelError> {
    if !pred.kind.is_trainable() {
        return Err(ModelError::NotTrainable { kind: pred.kind });
    }
    if ds.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut outcome = TrainOutcome {
        history: Vec::new(),
        best_epoch: 0,
        best_loss: f64::INFINITY,
    };
    if cfg.epochs == 0 {
        outcome.best_loss = 0.0;
        return Ok(outcome);
    }
    let batch_size = cfg.batch_size.max(1);
    let mut rng = Rng::new(cfg.seed);
    let mut indices: Vec<usize> = (0..ds.len()).collect();
    let mut state = AdamState::new(pred.params.len());
    let mut grads = vec![0.0; pred.params.len()];
    let mut best_params = pred.params.clone();
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut indices);
        let mut epoch_loss = 0.0;
        for batch in indices.chunks(batch_size) {
            let loss = batch_loss_grad(pred, ds, batch, &mut grads)?;
            epoch_loss += loss * batch.len() as f64;
            adam_step(&mut pred.params, &grads, &mut state, cfg)?;
        }
        epoch_loss /= ds.len() as f64;
        outcome.history.push(epoch_loss);
        let monitored = match monitor {
            Some(m) => mse_normalized(pred, m)?,
            None => epoch_loss,
        };
        if monitored < outcome.best_loss {
            outcome.best_loss = monitored;
            outcome.best_epoch = epoch;
            best_params.copy_from_slice(&pred.params);
        }
    }
    pred.params.copy_from_slice(&best_params);
    Ok(outcome)
}

/// Mean squared error of a predictor over a dataset, normalized space.
pub fn mse_normalized(pred: &Predictor, ds: &Dataset) -> Result<f64, ModelError> {
    if ds.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut acc = 0.0;
    for i in 0..ds.len() {
        let err = pred.predict_normalized(ds, i)? - ds.targets[i];
        acc += err * err;
    }
    Ok(acc / ds.len() as f64)
}

/// The evaluation measures for one predictor on one dataset.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct MetricsReport {
    /// Mean squared error on inverse-normalized values.
    pub mse: f64,
    pub rmse: f64,
    /// 1 - err/null accuracy against the constant-0.5 reference, computed in
    /// normalized space (the reference is only meaningful there).
    pub r2: f64,
    /// Classic coefficient of determination against the mean of the true
    /// values, on inverse-normalized values; reported for comparison.
    pub r2_mean: f64,
    /// Directional accuracy: fraction of samples whose predicted up/not-up
    /// flag matches the actual one. Relative targets compare against zero,
    /// absolute targets against the previous true value.
    pub sign: f64,
    pub n: usize,
}

/// Evaluate a predictor sample by sample.
pub fn evaluate(pred: &Predictor, ds: &Dataset) -> Result<MetricsReport, ModelError> {
    if ds.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut outs = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        outs.push(pred.predict_normalized(ds, i)?);
    }
    metrics_from_outputs(&outs, ds)
}

/// Compute the report from normalized-space model outputs.
pub fn metrics_from_outputs(outs: &[f64], ds: &Dataset) -> Result<MetricsReport, ModelError> {
    let n = ds.len();
    if n == 0 {
        return Err(ModelError::EmptyDataset);
    }
    if outs.len() != n {
        return Err(ModelError::ShapeMismatch {
            expected: n,
            got: outs.len(),
        });
    }
    let raw_out: Vec<f64> = outs
        .iter()
        .map(|&v| normalize::invert(v, &ds.target.params))
        .collect();
    let raw_true: Vec<f64> = ds
        .targets
        .iter()
        .map(|&v| normalize::invert(v, &ds.target.params))
        .collect();

    let mut mse = 0.0;
    for (o, t) in raw_out.iter().zip(&raw_true) {
        let e = o - t;
        mse += e * e;
    }
    mse /= n as f64;
    let rmse = libm::sqrt(mse);

    let mut err_ss = 0.0;
    let mut null_ss = 0.0;
    for (o, t) in outs.iter().zip(&ds.targets) {
        let err = o - t;
        let null = 0.5 - t;
        err_ss += err * err;
        null_ss += null * null;
    }
    let r2 = ratio_r2(err_ss, null_ss);

    let mean_true = raw_true.iter().sum::<f64>() / n as f64;
    let mut res_ss = 0.0;
    let mut tot_ss = 0.0;
    for (o, t) in raw_out.iter().zip(&raw_true) {
        res_ss += (o - t) * (o - t);
        tot_ss += (t - mean_true) * (t - mean_true);
    }
    let r2_mean = ratio_r2(res_ss, tot_ss);

    let sign = sign_accuracy(&raw_out, &raw_true, &ds.target.name);

    Ok(MetricsReport {
        mse,
        rmse,
        r2,
        r2_mean,
        sign,
        n,
    })
}

fn ratio_r2(err_ss: f64, null_ss: f64) -> f64 {
    if null_ss == 0.0 {
        if err_ss == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - err_ss / null_ss
    }
}

/// Directional accuracy on raw values. Predictions and truths are binarized
/// to up / not-up flags: against zero for relative targets, against the
/// previous true value for absolute ones (the first sample has no previous
/// value and is skipped). With no comparable pair the accuracy is a neutral
/// 0.5.
fn sign_accuracy(raw_out: &[f64], raw_true: &[f64], target_name: &str) -> f64 {
    let mut t = 0u64;
    let mut f = 0u64;
    if names::is_relative(target_name) {
        for (o, a) in raw_out.iter().zip(raw_true) {
            if (*o > 0.0) == (*a > 0.0) {
                t += 1;
            } else {
                f += 1;
            }
        }
    } else {
        for i in 1..raw_true.len() {
            let prev = raw_true[i - 1];
            if (raw_out[i] > prev) == (raw_true[i] > prev) {
                t += 1;
            } else {
                f += 1;
            }
        }
    }
    if t + f == 0 {
        0.5
    } else {
        t as f64 / (t + f) as f64
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum ModelError {
    ShapeMismatch { expected: usize, got: usize },
    NonFiniteGradient,
    EmptyDataset,
    TargetNotInWindow { target: String },
    NotTrainable { kind: PredictorKind },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::ShapeMismatch { expected, got } => {
                write!(f, "shape mismatch: expected {expected}, got {got}")
            }
            ModelError::NonFiniteGradient => write!(f, "gradient contains NaN or infinity"),
            ModelError::EmptyDataset => write!(f, "dataset has no samples"),
            ModelError::TargetNotInWindow { target } => {
                write!(f, "target property {target} is not among the window inputs")
            }
            ModelError::NotTrainable { kind } => {
                write!(f, "{} predictor has no trainable parameters", kind.as_str())
            }
        }
    }
}

impl core::error::Error for ModelError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatasetModel, PropertyMeta};
    use crate::normalize::NormParams;
    use alloc::string::ToString;

    /// A hand-built dataset with identity-like normalization for direct
    /// metric arithmetic: basic params {min 0, max 1} invert to the value
    /// itself.
    fn plain_dataset(inputs: Vec<f64>, targets: Vec<f64>, input_len: usize, name: &str) -> Dataset {
        let identity = NormParams::Basic { min: 0.0, max: 1.0 };
        let n = targets.len();
        Dataset {
            model: DatasetModel::Matrix,
            wn: input_len,
            input_shape: vec![1, input_len],
            properties: vec![PropertyMeta {
                name: "x".to_string(),
                shape: (1, 1),
                params: identity,
            }],
            target: PropertyMeta {
                name: name.to_string(),
                shape: (1, 1),
                params: identity,
            },
            times: (0..n as u64).map(|i| i * 3600).collect(),
            inputs,
            targets,
        }
    }

    #[test]
    fn linear_forward_dot_product() {
        let mut p = Predictor::linear(&[2]);
        p.params = vec![1.0, 2.0, 0.5];
        assert_eq!(p.forward(&[3.0, 4.0]).unwrap(), 11.5);
        assert!(matches!(
            p.forward(&[1.0]),
            Err(ModelError::ShapeMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn mlp_all_zero_weights_returns_output_bias() {
        let mut p = Predictor::mlp(&[3], 4, 1);
        for w in &mut p.params {
            *w = 0.0;
        }
        let b2 = p.params.len() - 1;
        p.params[b2] = 7.5;
        assert_eq!(p.forward(&[1.0, 2.0, 3.0]).unwrap(), 7.5);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let mut params = vec![1.0, -2.0, 0.0];
        let grads = vec![0.5, -3.0, 0.0];
        let mut state = AdamState::new(3);
        adam_step(&mut params, &grads, &mut state, &cfg).unwrap();
        // First bias-corrected step is lr * g / (|g| + eps) per coordinate.
        assert!((params[0] - (1.0 - 1e-2)).abs() < 1e-9);
        assert!((params[1] - (-2.0 + 1e-2)).abs() < 1e-9);
        assert_eq!(params[2], 0.0);
    }

    #[test]
    fn adam_rejects_nan_gradient() {
        let cfg = TrainConfig::default();
        let mut params = vec![1.0];
        let mut state = AdamState::new(1);
        let err = adam_step(&mut params, &[f64::NAN], &mut state, &cfg).unwrap_err();
        assert_eq!(err, ModelError::NonFiniteGradient);
    }

    #[test]
    fn gradient_check_linear_is_tight() {
        let mut rng = Rng::new(21);
        let n = 6;
        let samples = 12;
        let inputs: Vec<f64> = (0..samples * n).map(|_| rng.normal()).collect();
        let targets: Vec<f64> = (0..samples).map(|_| rng.normal()).collect();
        let ds = plain_dataset(inputs, targets, n, "y");
        let mut p = Predictor::linear(&[n]);
        for w in &mut p.params {
            *w = rng.uniform(-0.5, 0.5);
        }
        let batch: Vec<usize> = (0..samples).collect();
        let worst = gradient_check(&p, &ds, &batch).unwrap();
        assert!(worst < 1e-6, "linear gradient check {worst}");
    }

    #[test]
    fn gradient_check_mlp_within_tolerance() {
        let mut rng = Rng::new(22);
        let n = 5;
        let samples = 10;
        let inputs: Vec<f64> = (0..samples * n).map(|_| rng.normal()).collect();
        let targets: Vec<f64> = (0..samples).map(|_| rng.normal()).collect();
        let ds = plain_dataset(inputs, targets, n, "y");
        let p = Predictor::mlp(&[n], 8, 3);
        let batch: Vec<usize> = (0..samples).collect();
        let worst = gradient_check(&p, &ds, &batch).unwrap();
        assert!(worst < 1e-4, "mlp gradient check {worst}");
    }

    #[test]
    fn gradient_check_zero_for_dead_units() {
        // All hidden units dead (w1 = 0, b1 < 0): output is the constant b2,
        // so all gradients into dead units vanish on both routes and the
        // only live parameter (b2) has an exactly quadratic loss.
        let mut rng = Rng::new(23);
        let n = 4;
        let samples = 6;
        let inputs: Vec<f64> = (0..samples * n).map(|_| rng.normal()).collect();
        let targets: Vec<f64> = (0..samples).map(|_| rng.normal()).collect();
        let ds = plain_dataset(inputs, targets, n, "y");
        let mut p = Predictor::mlp(&[n], 5, 1);
        for w in &mut p.params {
            *w = 0.0;
        }
        for b in &mut p.params[n * 5..n * 5 + 5] {
            *b = -1.0;
        }
        let batch: Vec<usize> = (0..samples).collect();
        let worst = gradient_check(&p, &ds, &batch).unwrap();
        assert!(worst < 1e-9, "dead-unit gradient check {worst}");
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let ds = plain_dataset(vec![1.0, 2.0], vec![0.5, 0.25], 1, "y");
        let mut p = Predictor::linear(&[1]);
        let before = p.params.clone();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let outcome = train(&mut p, &ds, &cfg, None).unwrap();
        assert!(outcome.history.is_empty());
        assert_eq!(p.params, before);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = Rng::new(4);
        let inputs: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let targets: Vec<f64> = inputs.iter().map(|x| 0.3 * x + 0.1).collect();
        let ds = plain_dataset(inputs, targets, 1, "y");
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: 1e-2,
            seed: 9,
            ..TrainConfig::default()
        };
        let mut a = Predictor::mlp(&[1], 4, 2);
        let mut b = Predictor::mlp(&[1], 4, 2);
        let oa = train(&mut a, &ds, &cfg, None).unwrap();
        let ob = train(&mut b, &ds, &cfg, None).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(oa.history, ob.history);
    }

    #[test]
    fn convex_loss_decreases() {
        let mut rng = Rng::new(14);
        let inputs: Vec<f64> = (0..200).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let targets: Vec<f64> = inputs.iter().map(|x| 2.0 * x + 1.0).collect();
        let ds = plain_dataset(inputs, targets, 1, "y");
        let mut p = Predictor::linear(&[1]);
        let cfg = TrainConfig {
            epochs: 30,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        };
        let outcome = train(&mut p, &ds, &cfg, None).unwrap();
        assert!(outcome.history.last().unwrap() < outcome.history.first().unwrap());
    }

    #[test]
    fn linear_recovers_regression_line() {
        // y = 2x + 1, no noise; compare against the closed-form
        // least-squares fit.
        let mut rng = Rng::new(42);
        let xs: Vec<f64> = (0..1000).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let w_star = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let b_star = (sy - w_star * sx) / n;

        let ds = plain_dataset(xs, ys, 1, "y");
        let mut p = Predictor::linear(&[1]);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            epochs: 500,
            seed: 7,
            ..TrainConfig::default()
        };
        train(&mut p, &ds, &cfg, None).unwrap();
        assert!((p.params[0] - w_star).abs() < 1e-3, "w {}", p.params[0]);
        assert!((p.params[1] - b_star).abs() < 1e-3, "b {}", p.params[1]);
    }

    #[test]
    fn untrainable_predictors_refuse_training() {
        let ds = plain_dataset(vec![1.0], vec![0.5], 1, "y");
        for mut p in [Predictor::persistence(), Predictor::null_half()] {
            assert!(matches!(
                train(&mut p, &ds, &TrainConfig::default(), None),
                Err(ModelError::NotTrainable { .. })
            ));
        }
    }

    #[test]
    fn perfect_predictions_metrics() {
        let ds = plain_dataset(vec![1.0, 2.0, 3.0], vec![0.2, 0.4, 0.6], 1, "y");
        let report = metrics_from_outputs(&[0.2, 0.4, 0.6], &ds).unwrap();
        assert_eq!(report.mse, 0.0);
        assert_eq!(report.rmse, 0.0);
        assert_eq!(report.r2, 1.0);
        assert_eq!(report.r2_mean, 1.0);
    }

    #[test]
    fn hand_computed_mse_rmse() {
        let ds = plain_dataset(vec![0.0, 0.0], vec![3.0, 4.0], 1, "y");
        let report = metrics_from_outputs(&[0.0, 0.0], &ds).unwrap();
        assert_eq!(report.mse, 12.5);
        assert!((report.rmse - 3.53553).abs() < 1e-5);
        assert!((report.rmse * report.rmse - report.mse).abs() < 1e-12);
    }

    #[test]
    fn null_half_r2_is_exactly_zero() {
        let mut rng = Rng::new(33);
        let targets: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let inputs = targets.clone();
        let ds = plain_dataset(inputs, targets, 1, "y");
        let report = evaluate(&Predictor::null_half(), &ds).unwrap();
        assert_eq!(report.r2, 0.0);
    }

    #[test]
    fn sign_counts_direction_matches() {
        // Relative target: predicted [+,-,+] vs actual [+,+,+] -> 2/3.
        let ds = plain_dataset(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0], 1, "y_rel");
        let report = metrics_from_outputs(&[0.5, -0.5, 0.5], &ds).unwrap();
        assert!((report.sign - 2.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn sign_absolute_uses_previous_true() {
        // truths 1 -> 2 -> 1 (up then down); predictions say up then up.
        let ds = plain_dataset(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 1.0], 1, "y");
        let report = metrics_from_outputs(&[0.0, 3.0, 3.0], &ds).unwrap();
        // comparisons: (3>1)==(2>1) ok; (3>2)==(1>2) wrong -> 1/2
        assert_eq!(report.sign, 0.5);
    }

    #[test]
    fn persistence_copies_last_window_value() {
        // One scalar property which is also the target; window holds the
        // previous value in identity normalization.
        let inputs = vec![10.0, 20.0, 30.0];
        let ds = plain_dataset(inputs, vec![20.0, 30.0, 40.0], 1, "x");
        let p = Predictor::persistence();
        assert_eq!(p.predict_normalized(&ds, 0).unwrap(), 10.0);
        assert_eq!(p.predict_normalized(&ds, 2).unwrap(), 30.0);
    }

    #[test]
    fn persistence_needs_target_in_window() {
        let ds = plain_dataset(vec![1.0], vec![0.5], 1, "notx");
        let p = Predictor::persistence();
        assert!(matches!(
            p.predict_normalized(&ds, 0),
            Err(ModelError::TargetNotInWindow { .. })
        ));
    }

    #[test]
    fn persistence_relative_target_predicts_no_change() {
        let mut ds = plain_dataset(vec![1.0], vec![0.5], 1, "x_rel");
        ds.target.params = NormParams::AroundZero { magnitude: 2.0 };
        let p = Predictor::persistence();
        // raw 0 maps to exactly 0.5 under around_zero
        assert_eq!(p.predict_normalized(&ds, 0).unwrap(), 0.5);
    }

    #[test]
    fn best_epoch_snapshot_restored() {
        // Train with a monitor equal to the train set; parameters must come
        // from the epoch with the lowest monitored loss.
        let mut rng = Rng::new(8);
        let inputs: Vec<f64> = (0..64).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let targets: Vec<f64> = inputs.iter().map(|x| 0.7 * x - 0.2).collect();
        let ds = plain_dataset(inputs, targets, 1, "y");
        let mut p = Predictor::linear(&[1]);
        let cfg = TrainConfig {
            epochs: 20,
            learning_rate: 5e-2,
            ..TrainConfig::default()
        };
        let outcome = train(&mut p, &ds, &cfg, Some(&ds)).unwrap();
        let final_mse = mse_normalized(&p, &ds).unwrap();
        assert!((final_mse - outcome.best_loss).abs() < 1e-12);
    }
}
