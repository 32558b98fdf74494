//! Logistic aggregation of normalized detector signals into one alarm
//! trajectory, and its training objective.
//!
//! The aggregate at time `t` is `a_t = sigmoid(sum over detectors k and
//! lags j of w[k][j] * s^k_{t-j} - bias)`, a value in (0,1) compared
//! against a threshold `h` to raise alarms. Weights are trained by
//! minimizing the average relative error rate: the false-alarm time
//! fraction on change-free stretches plus the false-silence fraction
//! inside changes, each weighted by a cost. The exact rate counts
//! indicator crossings and is piecewise constant in the weights, so
//! training descends a smooth surrogate with the indicators replaced by
//! sigmoids, which restores a usable gradient.
//!
//! Training is deterministic: full-batch gradient descent with a
//! backtracking line search from a zero initialization, no randomness
//! anywhere.

use crate::detectors::{DetectorBank, DetectorConfig, SignalTrajectory, BANK};
use crate::error::{Error, Result};
use crate::persist::{parse_f64_field, parse_key_value, parse_u64_field, require_unique, write_atomic};
use std::path::Path;

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

/// Weights and decision parameters of the aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    /// `weights[k][j]` multiplies detector `k`'s signal at lag `j`;
    /// row length is `lag_depth + 1`.
    pub weights: Vec<Vec<f64>>,
    /// Subtracted inside the sigmoid.
    pub bias: f64,
    /// Maximum lag `p`; lags reaching before the stream start read 0.
    pub lag_depth: usize,
    /// Alarm threshold on the aggregate, in (0,1).
    pub threshold: f64,
    /// Cost of a unit false-alarm rate.
    pub cost_false_alarm: f64,
    /// Cost of a unit false-silence rate.
    pub cost_false_silence: f64,
}

impl EnsembleModel {
    /// A zero-weight model for `n` detectors with lags `0..=lag_depth`,
    /// threshold 1/2 and unit costs.
    pub fn zeros(detector_count: usize, lag_depth: usize) -> Self {
        Self {
            weights: vec![vec![0.0; lag_depth + 1]; detector_count],
            bias: 0.0,
            lag_depth,
            threshold: 0.5,
            cost_false_alarm: 1.0,
            cost_false_silence: 1.0,
        }
    }

    pub fn detector_count(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Domain(format!(
                "alarm threshold must lie strictly inside (0,1), got {}",
                self.threshold
            )));
        }
        if !(self.cost_false_alarm > 0.0) || !(self.cost_false_silence > 0.0) {
            return Err(Error::Domain("costs must be positive".into()));
        }
        if !self.bias.is_finite() {
            return Err(Error::Domain("non-finite bias".into()));
        }
        for row in &self.weights {
            if row.len() != self.lag_depth + 1 {
                return Err(Error::LengthMismatch {
                    left: row.len(),
                    right: self.lag_depth + 1,
                    context: "weight row vs lag depth",
                });
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::Domain("non-finite weight".into()));
            }
        }
        Ok(())
    }
}

/// The aggregated alarm trajectory for one path.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedTrajectory {
    /// `a_t` per time step, each strictly inside (0,1) up to floating
    /// point saturation.
    pub values: Vec<f64>,
    /// First index with `a_t >= threshold`, when one exists.
    pub stopping_time: Option<usize>,
}

fn linear_score(model: &EnsembleModel, signals: &[Vec<f64>], t: usize) -> f64 {
    let mut z = -model.bias;
    for (row, signal) in model.weights.iter().zip(signals) {
        for (j, &w) in row.iter().enumerate() {
            if t >= j {
                z += w * signal[t - j];
            }
        }
    }
    z
}

/// Applies the model to one path's stacked normalized signals
/// (`signals[k][t]`, one row per detector in bank order).
pub fn aggregate(model: &EnsembleModel, signals: &[Vec<f64>]) -> Result<AggregatedTrajectory> {
    model.validate()?;
    if signals.len() != model.detector_count() {
        return Err(Error::LengthMismatch {
            left: signals.len(),
            right: model.detector_count(),
            context: "signal rows vs model detectors",
        });
    }
    let len = signals.first().map_or(0, |s| s.len());
    for s in signals {
        if s.len() != len {
            return Err(Error::LengthMismatch {
                left: s.len(),
                right: len,
                context: "signal rows",
            });
        }
    }
    if len <= model.lag_depth {
        return Err(Error::TooShort {
            needed: model.lag_depth + 1,
            got: len,
        });
    }
    let mut values = Vec::with_capacity(len);
    let mut stopping_time = None;
    for t in 0..len {
        let a = sigmoid(linear_score(model, signals, t));
        if stopping_time.is_none() && a >= model.threshold {
            stopping_time = Some(t);
        }
        values.push(a);
    }
    Ok(AggregatedTrajectory {
        values,
        stopping_time,
    })
}

/// Aggregation plus the maximal super-threshold runs, the detection
/// output for one path.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub trajectory: AggregatedTrajectory,
    /// Maximal index runs with `a_t >= threshold`, inclusive bounds.
    pub segments: Vec<(usize, usize)>,
}

/// Runs the model and reports the stopping time and all alarm segments.
pub fn detect(model: &EnsembleModel, signals: &[Vec<f64>]) -> Result<DetectionResult> {
    let trajectory = aggregate(model, signals)?;
    let mut segments = Vec::new();
    let mut start = None;
    for (t, &a) in trajectory.values.iter().enumerate() {
        if a >= model.threshold {
            start.get_or_insert(t);
        } else if let Some(s) = start.take() {
            segments.push((s, t - 1));
        }
    }
    if let Some(s) = start {
        segments.push((s, trajectory.values.len() - 1));
    }
    Ok(DetectionResult {
        trajectory,
        segments,
    })
}

/// One path of training data: stacked normalized signals and aligned
/// ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPath {
    /// `signals[k][t]`, one row per detector in bank order.
    pub signals: Vec<Vec<f64>>,
    /// `true` where the path is inside a change.
    pub labels: Vec<bool>,
}

impl TrainingPath {
    pub fn new(signals: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        for s in &signals {
            if s.len() != labels.len() {
                return Err(Error::LengthMismatch {
                    left: s.len(),
                    right: labels.len(),
                    context: "signal row vs labels",
                });
            }
        }
        Ok(Self { signals, labels })
    }

    fn abnormal_len(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }
}

/// An error-rate value together with the number of paths that could not
/// contribute because they lack normal or abnormal time entirely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArerValue {
    pub value: f64,
    pub excluded_paths: usize,
}

/// Exact average relative error rate of the thresholded aggregate:
/// per path, `cost_fa * (normal time alarming) / (normal time) +
/// cost_fs * (abnormal time silent) / (abnormal time)`, averaged over
/// paths. Paths without both kinds of time are excluded and counted.
pub fn arer_exact(model: &EnsembleModel, paths: &[TrainingPath]) -> Result<ArerValue> {
    let mut total = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for path in paths {
        let t0 = path.abnormal_len();
        let t_inf = path.labels.len() - t0;
        if t0 == 0 || t_inf == 0 {
            excluded += 1;
            continue;
        }
        let trajectory = aggregate(model, &path.signals)?;
        let (mut false_alarm, mut false_silence) = (0usize, 0usize);
        for (&a, &label) in trajectory.values.iter().zip(&path.labels) {
            let alarming = a >= model.threshold;
            if label && !alarming {
                false_silence += 1;
            } else if !label && alarming {
                false_alarm += 1;
            }
        }
        total += model.cost_false_alarm * false_alarm as f64 / t_inf as f64
            + model.cost_false_silence * false_silence as f64 / t0 as f64;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "no path has both normal and abnormal time".into(),
        ));
    }
    Ok(ArerValue {
        value: total / used as f64,
        excluded_paths: excluded,
    })
}

/// Gradient of the surrogate objective, flattened alongside its value.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateGradient {
    pub loss: f64,
    /// Same shape as the model's weight matrix.
    pub weights: Vec<Vec<f64>>,
    pub bias: f64,
}

fn surrogate_impl(
    model: &EnsembleModel,
    paths: &[TrainingPath],
    sharpness: f64,
    with_gradient: bool,
) -> Result<SurrogateGradient> {
    model.validate()?;
    if !(sharpness > 0.0) || !sharpness.is_finite() {
        return Err(Error::Domain(format!(
            "surrogate sharpness must be positive and finite, got {sharpness}"
        )));
    }
    let n = model.detector_count();
    let p = model.lag_depth;
    let mut loss = 0.0;
    let mut grad_w = vec![vec![0.0; p + 1]; n];
    let mut grad_b = 0.0;
    let mut used = 0usize;
    for path in paths {
        let t0 = path.abnormal_len();
        let t_inf = path.labels.len() - t0;
        if t0 == 0 || t_inf == 0 {
            continue;
        }
        if path.signals.len() != n {
            return Err(Error::LengthMismatch {
                left: path.signals.len(),
                right: n,
                context: "signal rows vs model detectors",
            });
        }
        used += 1;
        for (t, &label) in path.labels.iter().enumerate() {
            let z = linear_score(model, &path.signals, t);
            let a = sigmoid(z);
            // Normal time pays for alarming, abnormal time for silence.
            let (margin, weight) = if label {
                (
                    sharpness * (model.threshold - a),
                    model.cost_false_silence / t0 as f64,
                )
            } else {
                (
                    sharpness * (a - model.threshold),
                    model.cost_false_alarm / t_inf as f64,
                )
            };
            loss += weight * sigmoid(margin);
            if with_gradient {
                let sign = if label { -1.0 } else { 1.0 };
                let g = weight * sign * sharpness * sigmoid_derivative(margin)
                    * sigmoid_derivative(z);
                for (row, signal) in grad_w.iter_mut().zip(&path.signals) {
                    for (j, slot) in row.iter_mut().enumerate() {
                        if t >= j {
                            *slot += g * signal[t - j];
                        }
                    }
                }
                grad_b -= g;
            }
        }
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "no path has both normal and abnormal time".into(),
        ));
    }
    let scale = 1.0 / used as f64;
    loss *= scale;
    if !loss.is_finite() {
        return Err(Error::Training(format!("non-finite training loss {loss}")));
    }
    for row in &mut grad_w {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    grad_b *= scale;
    Ok(SurrogateGradient {
        loss,
        weights: grad_w,
        bias: grad_b,
    })
}

/// Smooth surrogate of [`arer_exact`]: each indicator becomes a sigmoid
/// of the signed margin between the aggregate and the threshold.
pub fn arer_surrogate(model: &EnsembleModel, paths: &[TrainingPath]) -> Result<f64> {
    Ok(surrogate_impl(model, paths, 1.0, false)?.loss)
}

/// [`arer_surrogate`] with the indicator sigmoids sharpened by `s`; as
/// `s` grows the surrogate converges to the exact rate.
pub fn arer_surrogate_sharpened(
    model: &EnsembleModel,
    paths: &[TrainingPath],
    sharpness: f64,
) -> Result<f64> {
    Ok(surrogate_impl(model, paths, sharpness, false)?.loss)
}

/// Analytic gradient of the surrogate with respect to every weight and
/// the bias, together with its value.
pub fn arer_surrogate_gradient(
    model: &EnsembleModel,
    paths: &[TrainingPath],
) -> Result<SurrogateGradient> {
    surrogate_impl(model, paths, 1.0, true)
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    pub lag_depth: usize,
    pub epochs: usize,
    /// Step size each epoch's line search starts from.
    pub initial_step: f64,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo_c: f64,
    /// Alarm threshold held fixed during training.
    pub threshold: f64,
    pub cost_false_alarm: f64,
    pub cost_false_silence: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            lag_depth: 1,
            epochs: 200,
            initial_step: 0.1,
            armijo_c: 1e-4,
            threshold: 0.5,
            cost_false_alarm: 1.0,
            cost_false_silence: 1.0,
        }
    }
}

/// Loss trace of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Surrogate loss before the first step and after every accepted
    /// epoch; non-increasing by construction.
    pub losses: Vec<f64>,
    pub epochs_run: usize,
}

/// Trains a zero-initialized model by full-batch gradient descent with
/// a backtracking line search. Deterministic: no randomness enters.
pub fn train(
    paths: &[TrainingPath],
    options: &TrainOptions,
) -> Result<(EnsembleModel, TrainingReport)> {
    let n = paths
        .first()
        .map(|p| p.signals.len())
        .ok_or_else(|| Error::Training("no training paths".into()))?;
    let mut model = EnsembleModel::zeros(n, options.lag_depth);
    model.threshold = options.threshold;
    model.cost_false_alarm = options.cost_false_alarm;
    model.cost_false_silence = options.cost_false_silence;
    model.validate()?;

    let mut current = arer_surrogate_gradient(&model, paths)?;
    let mut losses = vec![current.loss];
    let mut epochs_run = 0;
    for _ in 0..options.epochs {
        let grad_norm_sq: f64 = current
            .weights
            .iter()
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            + current.bias * current.bias;
        if grad_norm_sq <= 1e-24 {
            break;
        }
        let mut step = options.initial_step;
        let mut accepted = None;
        for _ in 0..40 {
            let mut candidate = model.clone();
            for (row, grow) in candidate.weights.iter_mut().zip(&current.weights) {
                for (w, g) in row.iter_mut().zip(grow) {
                    *w -= step * g;
                }
            }
            candidate.bias -= step * current.bias;
            let next = arer_surrogate_gradient(&candidate, paths)?;
            if next.loss <= current.loss - options.armijo_c * step * grad_norm_sq {
                accepted = Some((candidate, next));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((candidate, next)) => {
                model = candidate;
                current = next;
                losses.push(current.loss);
                epochs_run += 1;
            }
            // No step length improves the loss: we are at a numerical
            // stationary point.
            None => break,
        }
    }
    Ok((
        model,
        TrainingReport {
            losses,
            epochs_run,
        },
    ))
}

/// Everything needed to reproduce detection on new data: the residual
/// window, the calibrated bank, and the trained aggregation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedDetector {
    /// Sliding-window width used to produce forecast residuals.
    pub window_width: usize,
    pub bank: DetectorBank,
    pub model: EnsembleModel,
}

impl TrainedDetector {
    /// Stacks the bank's normalized signals into the matrix layout the
    /// model consumes.
    pub fn stacked_signals(&self, residuals: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .bank
            .signals(residuals)?
            .into_iter()
            .map(|s: SignalTrajectory| s.normalized)
            .collect())
    }
}

const MODEL_SCHEMA: u64 = 1;

/// Serializes a trained detector to a key=value file, atomically.
/// Floats use the shortest round-trip form, so load returns the exact
/// same bits.
pub fn save_model(detector: &TrainedDetector, path: &Path) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!("schema={MODEL_SCHEMA}\n"));
    text.push_str(&format!("window_width={}\n", detector.window_width));
    text.push_str(&format!("delta={}\n", detector.bank.config.delta));
    text.push_str(&format!("detector_window={}\n", detector.bank.config.window));
    text.push_str(&format!("prior={}\n", detector.bank.config.prior));
    for (kind, h) in BANK.iter().zip(&detector.bank.thresholds) {
        text.push_str(&format!("threshold_{}={}\n", kind.name(), h));
    }
    let model = &detector.model;
    text.push_str(&format!("lag_depth={}\n", model.lag_depth));
    text.push_str(&format!("bias={}\n", model.bias));
    text.push_str(&format!("alarm_threshold={}\n", model.threshold));
    text.push_str(&format!("cost_false_alarm={}\n", model.cost_false_alarm));
    text.push_str(&format!("cost_false_silence={}\n", model.cost_false_silence));
    for (kind, row) in BANK.iter().zip(&model.weights) {
        let joined: Vec<String> = row.iter().map(|w| w.to_string()).collect();
        text.push_str(&format!("weights_{}={}\n", kind.name(), joined.join(",")));
    }
    write_atomic(path, &text)
}

/// Reads a trained detector saved by [`save_model`].
pub fn load_model(path: &Path) -> Result<TrainedDetector> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let pairs = parse_key_value(&name, &text)?;
    let schema = parse_u64_field(require_unique(&pairs, "schema", &name)?, "schema", &name)?;
    if schema != MODEL_SCHEMA {
        return Err(Error::Malformed {
            file: name,
            row: 1,
            msg: format!("unsupported model schema {schema}, expected {MODEL_SCHEMA}"),
        });
    }
    let field = |key: &str| -> Result<f64> {
        parse_f64_field(require_unique(&pairs, key, &name)?, key, &name)
    };
    let int_field = |key: &str| -> Result<u64> {
        parse_u64_field(require_unique(&pairs, key, &name)?, key, &name)
    };
    let config = DetectorConfig {
        delta: field("delta")?,
        window: int_field("detector_window")? as usize,
        prior: field("prior")?,
    };
    let mut thresholds = Vec::with_capacity(BANK.len());
    for kind in BANK {
        thresholds.push(field(&format!("threshold_{}", kind.name()))?);
    }
    let lag_depth = int_field("lag_depth")? as usize;
    let mut weights = Vec::with_capacity(BANK.len());
    for kind in BANK {
        let key = format!("weights_{}", kind.name());
        let raw = require_unique(&pairs, &key, &name)?;
        let row = raw
            .split(',')
            .map(|v| parse_f64_field(v, &key, &name))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != lag_depth + 1 {
            return Err(Error::Malformed {
                file: name.clone(),
                row: 0,
                msg: format!(
                    "key '{key}': expected {} weights, got {}",
                    lag_depth + 1,
                    row.len()
                ),
            });
        }
        weights.push(row);
    }
    let model = EnsembleModel {
        weights,
        bias: field("bias")?,
        lag_depth,
        threshold: field("alarm_threshold")?,
        cost_false_alarm: field("cost_false_alarm")?,
        cost_false_silence: field("cost_false_silence")?,
    };
    model.validate()?;
    Ok(TrainedDetector {
        window_width: int_field("window_width")? as usize,
        bank: DetectorBank { config, thresholds },
        model,
    })
}
