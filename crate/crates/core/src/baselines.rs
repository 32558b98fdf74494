//! Comparison procedures: exponentially weighted moving-average
//! residual thresholding, CUSUM on EWMA residuals, and a seasonal
//! subspace method built on singular spectrum analysis.

use crate::detectors::{run_detector, DetectorConfig, DetectorKind};
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use nalgebra::{DMatrix, DVector};

/// Smoothing factors the evaluation harness searches over.
pub const SMOOTHING_GRID: [f64; 4] = [0.01, 0.05, 0.1, 0.3];

/// Drift magnitudes searched when calibrating CUSUM on EWMA residuals.
pub const CUSUM_DELTA_GRID: [f64; 10] =
    [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0];

fn check_smoothing(smoothing: f64) -> Result<()> {
    if !(smoothing > 0.0 && smoothing < 1.0) {
        return Err(Error::Domain(format!(
            "EWMA smoothing factor must lie in (0,1), got {smoothing}"
        )));
    }
    Ok(())
}

/// Running mean, variance, one-step predictions, and standardized
/// residuals of an exponentially weighted moving average.
#[derive(Debug, Clone, PartialEq)]
pub struct EwmaTrack {
    /// Smoothed level after absorbing the observation at each index.
    pub level: Vec<f64>,
    /// Level before absorbing the observation: the one-step forecast.
    /// The first entry repeats the first observation.
    pub prediction: Vec<f64>,
    /// `(x_t - prediction_t) / scale_t` with the scale taken before the
    /// observation arrives; zero wherever the scale is zero or still
    /// warming up (see [`ewma_burn_in`]).
    pub residuals: Vec<f64>,
    /// How many residuals were forced to zero by a zero or warming-up
    /// scale.
    pub zero_scale_count: usize,
}

/// Number of leading residuals suppressed while the variance recursion
/// accumulates weight. The estimate after `k` innovations carries total
/// weight `1 - (1-a)^k`; `ceil(1/a)` steps bring that near two thirds.
/// Without the suppression the near-empty early estimate inflates the
/// first standardized residuals by orders of magnitude, and cumulative
/// statistics downstream turn that into a spurious spike at the stream
/// head that dwarfs any real change.
pub fn ewma_burn_in(smoothing: f64) -> usize {
    (1.0 / smoothing).ceil() as usize
}

/// Runs the EWMA mean and variance recursions over a value stream.
pub fn ewma_track(values: &[f64], smoothing: f64) -> Result<EwmaTrack> {
    check_smoothing(smoothing)?;
    if values.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in EWMA input".into()));
    }
    let n = values.len();
    let burn_in = ewma_burn_in(smoothing);
    let mut level = Vec::with_capacity(n);
    let mut prediction = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut zero_scale_count = 0usize;
    let mut mean = values[0];
    let mut variance = 0.0f64;
    level.push(mean);
    prediction.push(values[0]);
    residuals.push(0.0);
    zero_scale_count += 1;
    for (k, &x) in values.iter().enumerate().skip(1) {
        let innovation = x - mean;
        let scale = variance.sqrt();
        prediction.push(mean);
        if scale == 0.0 || k <= burn_in {
            residuals.push(0.0);
            zero_scale_count += 1;
        } else {
            residuals.push(innovation / scale);
        }
        mean += smoothing * innovation;
        variance = (1.0 - smoothing) * variance + smoothing * innovation * innovation;
        level.push(mean);
    }
    Ok(EwmaTrack {
        level,
        prediction,
        residuals,
        zero_scale_count,
    })
}

/// Number of entries in the trailing inclusive window that reach the
/// per-point threshold: `S_k = #{i in [k-window, k] : r_i >= point_threshold}`.
pub fn exceedance_count(residuals: &[f64], point_threshold: f64, window: usize) -> Vec<f64> {
    let mut statistic = Vec::with_capacity(residuals.len());
    let mut in_window = 0usize;
    for (k, &r) in residuals.iter().enumerate() {
        if r >= point_threshold {
            in_window += 1;
        }
        if let Some(leaving) = k.checked_sub(window + 1) {
            if residuals[leaving] >= point_threshold {
                in_window -= 1;
            }
        }
        statistic.push(in_window as f64);
    }
    statistic
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaThresholdParams {
    pub smoothing: f64,
    /// Per-point residual threshold.
    pub point_threshold: f64,
    /// Trailing window length; the count includes the current point, so
    /// the statistic saturates at `window + 1`.
    pub window: usize,
}

impl Default for EwmaThresholdParams {
    fn default() -> Self {
        Self {
            smoothing: 0.05,
            point_threshold: 2.0,
            window: 10,
        }
    }
}

/// A baseline statistic trajectory plus the zero-scale diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineStatistic {
    pub statistic: Vec<f64>,
    pub zero_scale_count: usize,
}

/// Windowed count of EWMA residual exceedances.
pub fn ewma_threshold_statistic(
    series: &TimeSeries,
    params: &EwmaThresholdParams,
) -> Result<BaselineStatistic> {
    if params.window == 0 {
        return Err(Error::Domain("exceedance window must be at least 1".into()));
    }
    let track = ewma_track(series.values(), params.smoothing)?;
    let statistic = exceedance_count(&track.residuals, params.point_threshold, params.window);
    Ok(BaselineStatistic {
        statistic,
        zero_scale_count: track.zero_scale_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaCusumParams {
    pub smoothing: f64,
    /// Drift magnitude of the alternative the CUSUM tests for.
    pub delta: f64,
}

impl Default for EwmaCusumParams {
    fn default() -> Self {
        Self {
            smoothing: 0.05,
            delta: 3.0,
        }
    }
}

/// CUSUM recursion applied to a residual stream.
pub fn cusum_on_residuals(residuals: &[f64], delta: f64) -> Result<Vec<f64>> {
    let config = DetectorConfig {
        delta,
        ..DetectorConfig::default()
    };
    run_detector(DetectorKind::Cusum, &config, residuals)
}

/// CUSUM statistic over EWMA residuals.
pub fn ewma_cusum_statistic(
    series: &TimeSeries,
    params: &EwmaCusumParams,
) -> Result<BaselineStatistic> {
    let track = ewma_track(series.values(), params.smoothing)?;
    let statistic = cusum_on_residuals(&track.residuals, params.delta)?;
    Ok(BaselineStatistic {
        statistic,
        zero_scale_count: track.zero_scale_count,
    })
}

/// How the leading subspace dimension is chosen when fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SsaRank {
    Fixed(usize),
    /// Smallest rank whose eigenvalues reach `fraction` of the total
    /// squared singular mass, never exceeding `cap`.
    MassFraction { fraction: f64, cap: usize },
}

impl Default for SsaRank {
    fn default() -> Self {
        SsaRank::MassFraction {
            fraction: 0.9,
            cap: 10,
        }
    }
}

/// Seasonal subspace fitted to a stretch of history.
#[derive(Debug, Clone, PartialEq)]
pub struct SsaModel {
    /// Lag-window length of the embedding.
    pub embedding_length: usize,
    /// Dimension of the leading subspace actually kept.
    pub rank: usize,
    /// Orthonormal columns spanning the leading subspace,
    /// `embedding_length` rows by `rank` columns.
    pub basis: DMatrix<f64>,
    /// All singular values of the trajectory matrix, descending.
    pub singular_values: Vec<f64>,
    /// Set when numerical rank deficiency forced the kept rank below
    /// the requested one.
    pub rank_reduced: bool,
}

impl SsaModel {
    /// Fraction of the squared singular mass carried by the leading
    /// `rank` directions.
    pub fn leading_mass(&self, rank: usize) -> f64 {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        if total == 0.0 {
            return 0.0;
        }
        self.singular_values
            .iter()
            .take(rank)
            .map(|s| s * s)
            .sum::<f64>()
            / total
    }

    fn project(&self, window: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * window)
    }
}

/// Fits the leading lag-window subspace of a history stretch.
pub fn ssa_fit(history: &TimeSeries, embedding_length: usize, rank: SsaRank) -> Result<SsaModel> {
    let values = history.values();
    let l = embedding_length;
    if l < 2 {
        return Err(Error::Domain(format!(
            "embedding length must be at least 2, got {l}"
        )));
    }
    if values.len() < 2 * l {
        return Err(Error::TooShort {
            needed: 2 * l,
            got: values.len(),
        });
    }
    let column_count = values.len() - l + 1;
    // Gram matrix of the lag-window embedding; its eigenvalues are the
    // squared singular values of the trajectory matrix.
    let mut gram = DMatrix::zeros(l, l);
    for start in 0..column_count {
        let window = &values[start..start + l];
        for i in 0..l {
            for j in 0..=i {
                gram[(i, j)] += window[i] * window[j];
            }
        }
    }
    for i in 0..l {
        for j in i + 1..l {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let eigen = gram.symmetric_eigen();
    let raw: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| {
        raw[b]
            .partial_cmp(&raw[a])
            .expect("eigenvalues of a finite symmetric matrix are finite")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| raw[i].max(0.0)).collect();
    let singular_values: Vec<f64> = eigenvalues.iter().map(|e| e.sqrt()).collect();
    let total_mass: f64 = eigenvalues.iter().sum();
    if total_mass <= 0.0 {
        return Err(Error::Degenerate(
            "history is identically zero, no subspace to fit".into(),
        ));
    }
    let requested = match rank {
        SsaRank::Fixed(r) => {
            if r == 0 || r >= l {
                return Err(Error::Domain(format!(
                    "rank must satisfy 1 <= rank < embedding length, got {r} with length {l}"
                )));
            }
            r
        }
        SsaRank::MassFraction { fraction, cap } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::Domain(format!(
                    "mass fraction must lie in (0,1], got {fraction}"
                )));
            }
            if cap == 0 {
                return Err(Error::Domain("rank cap must be at least 1".into()));
            }
            let target = fraction * total_mass;
            let mut running = 0.0;
            let mut chosen = l - 1;
            for (i, &e) in eigenvalues.iter().enumerate() {
                running += e;
                if running >= target {
                    chosen = i + 1;
                    break;
                }
            }
            chosen.min(cap).min(l - 1).max(1)
        }
    };
    let numerical_rank = eigenvalues
        .iter()
        .filter(|&&e| e > eigenvalues[0] * 1e-12)
        .count()
        .max(1);
    let rank_reduced = requested > numerical_rank;
    let kept = requested.min(numerical_rank);
    let mut basis = DMatrix::zeros(l, kept);
    for (col, &src) in order.iter().take(kept).enumerate() {
        basis.set_column(col, &eigen.eigenvectors.column(src));
    }
    Ok(SsaModel {
        embedding_length: l,
        rank: kept,
        basis,
        singular_values,
        rank_reduced,
    })
}

/// A trajectory whose first `offset` time steps carry no value.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetTrajectory {
    pub offset: usize,
    pub values: Vec<f64>,
}

/// Norm of each trailing lag-window's component orthogonal to the
/// fitted subspace; the first `embedding_length - 1` points carry no
/// statistic.
pub fn pca_residual_statistic(model: &SsaModel, series: &TimeSeries) -> Result<OffsetTrajectory> {
    let values = series.values();
    let l = model.embedding_length;
    if values.len() < l {
        return Err(Error::TooShort {
            needed: l,
            got: values.len(),
        });
    }
    let mut out = Vec::with_capacity(values.len() - l + 1);
    for start in 0..=values.len() - l {
        let window = DVector::from_column_slice(&values[start..start + l]);
        let residual = &window - model.project(&window);
        out.push(residual.norm());
    }
    Ok(OffsetTrajectory {
        offset: l - 1,
        values: out,
    })
}

/// Reconstructs the series from its leading-subspace component by
/// projecting every lag window and averaging the overlaps.
pub fn ssa_reconstruct(model: &SsaModel, series: &TimeSeries) -> Result<Vec<f64>> {
    let values = series.values();
    let l = model.embedding_length;
    if values.len() < l {
        return Err(Error::TooShort {
            needed: l,
            got: values.len(),
        });
    }
    let column_count = values.len() - l + 1;
    let mut sums = vec![0.0f64; values.len()];
    let mut counts = vec![0usize; values.len()];
    for start in 0..column_count {
        let window = DVector::from_column_slice(&values[start..start + l]);
        let projected = model.project(&window);
        for i in 0..l {
            sums[start + i] += projected[i];
            counts[start + i] += 1;
        }
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect())
}

/// One-step-ahead predictions from the fitted subspace: the last
/// coordinate of a lag window in the subspace is a fixed linear
/// combination of the first `embedding_length - 1`, which turns the
/// basis into a forward recurrence. `values[i]` predicts the series at
/// `offset + i` from the points before it.
pub fn ssa_forecast(model: &SsaModel, series: &TimeSeries) -> Result<OffsetTrajectory> {
    let values = series.values();
    let l = model.embedding_length;
    if values.len() < l {
        return Err(Error::TooShort {
            needed: l,
            got: values.len(),
        });
    }
    let coefficients = recurrence_coefficients(model).ok_or_else(|| {
        Error::Degenerate(
            "subspace is vertical: the last lag coordinate is not determined by the others".into(),
        )
    })?;
    let mut out = Vec::with_capacity(values.len() - l + 1);
    for t in l - 1..values.len() {
        out.push(dot(&coefficients, &values[t - (l - 1)..t]));
    }
    Ok(OffsetTrajectory {
        offset: l - 1,
        values: out,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weights expressing the last lag coordinate of an in-subspace window
/// as a combination of the first `embedding_length - 1`, or `None` when
/// the subspace is vertical and no such recurrence exists.
fn recurrence_coefficients(model: &SsaModel) -> Option<Vec<f64>> {
    let l = model.embedding_length;
    let last_row = model.basis.row(l - 1).transpose();
    let verticality = last_row.norm_squared();
    if verticality >= 1.0 - 1e-10 {
        return None;
    }
    let head = model.basis.rows(0, l - 1);
    let coefficients = (head * &last_row) / (1.0 - verticality);
    Some(coefficients.iter().copied().collect())
}

/// Weights producing the subspace component of a window's last
/// coordinate from the whole window: one row of the projection matrix.
fn smoother_row(model: &SsaModel) -> Vec<f64> {
    let l = model.embedding_length;
    let weights = &model.basis * model.basis.row(l - 1).transpose();
    weights.iter().copied().collect()
}

/// How a streaming subspace tracker refreshes its decomposition when no
/// pretrained model is supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsaStreamOptions {
    pub embedding_length: usize,
    pub rank: SsaRank,
    /// Steps between refits of the decomposition.
    pub refit_every: usize,
    /// Trailing stretch of data each refit sees.
    pub fit_window: usize,
}

impl Default for SsaStreamOptions {
    fn default() -> Self {
        SsaStreamOptions {
            embedding_length: 96,
            rank: SsaRank::default(),
            refit_every: 48,
            fit_window: 192,
        }
    }
}

/// Causal output of a streaming subspace tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct SsaStreamTrack {
    /// Seasonal-component estimate at every index: the subspace part of
    /// the lag window ending there. Falls back to the raw observation
    /// while no decomposition or full window is available yet.
    pub trend: Vec<f64>,
    /// `forecast[t - 1]` predicts the series at index `t` from earlier
    /// points only, via the subspace recurrence; persistence is the
    /// fallback while no usable recurrence exists.
    pub forecast: Vec<f64>,
}

fn ssa_track(
    values: &[f64],
    options: &SsaStreamOptions,
    pretrained: Option<&SsaModel>,
) -> Result<SsaStreamTrack> {
    let l = options.embedding_length;
    if l < 2 {
        return Err(Error::Domain(format!(
            "embedding length must be at least 2, got {l}"
        )));
    }
    if options.refit_every == 0 {
        return Err(Error::Domain("refit interval must be positive".into()));
    }
    if options.fit_window < 2 * l {
        return Err(Error::Domain(format!(
            "fit window must cover at least two embeddings ({}), got {}",
            2 * l,
            options.fit_window
        )));
    }
    if let Some(model) = pretrained {
        if model.embedding_length != l || model.basis.nrows() != l {
            return Err(Error::Domain(format!(
                "pretrained model with {} basis rows and embedding length {} \
                 does not match requested length {l}",
                model.basis.nrows(),
                model.embedding_length
            )));
        }
    }
    if values.is_empty() {
        return Err(Error::TooShort { needed: 1, got: 0 });
    }
    let mut smoother = pretrained.map(smoother_row);
    let mut coefficients = pretrained.and_then(recurrence_coefficients);
    let mut last_fit = 0usize;
    let mut trend = Vec::with_capacity(values.len());
    let mut forecast = Vec::with_capacity(values.len().saturating_sub(1));
    for t in 0..values.len() {
        if pretrained.is_none()
            && t >= 2 * l
            && (smoother.is_none() || t - last_fit >= options.refit_every)
        {
            let lo = t.saturating_sub(options.fit_window);
            let stretch = TimeSeries::from_values(values[lo..t].to_vec(), 1.0)?;
            if let Ok(model) = ssa_fit(&stretch, l, options.rank) {
                smoother = Some(smoother_row(&model));
                coefficients = recurrence_coefficients(&model);
                last_fit = t;
            }
        }
        if t >= 1 {
            let mut prediction = values[t - 1];
            if t >= l - 1 {
                if let Some(c) = &coefficients {
                    let p = dot(c, &values[t - (l - 1)..t]);
                    if p.is_finite() {
                        prediction = p;
                    }
                }
            }
            forecast.push(prediction);
        }
        let mut estimate = values[t];
        if t + 1 >= l {
            if let Some(s) = &smoother {
                let e = dot(s, &values[t + 1 - l..=t]);
                if e.is_finite() {
                    estimate = e;
                }
            }
        }
        trend.push(estimate);
    }
    Ok(SsaStreamTrack { trend, forecast })
}

/// Runs the subspace tracker cold: the decomposition is learned on the
/// fly from a trailing stretch of the stream itself and refreshed
/// periodically. Until the first refit enough data has accumulated, the
/// tracker passes observations through unfiltered.
pub fn ssa_track_adaptive(series: &TimeSeries, options: &SsaStreamOptions) -> Result<SsaStreamTrack> {
    ssa_track(series.values(), options, None)
}

/// Runs the subspace tracker with a fixed decomposition fitted ahead of
/// time on separate history.
pub fn ssa_track_pretrained(model: &SsaModel, series: &TimeSeries) -> Result<SsaStreamTrack> {
    let options = SsaStreamOptions {
        embedding_length: model.embedding_length,
        fit_window: 2 * model.embedding_length,
        ..SsaStreamOptions::default()
    };
    ssa_track(series.values(), &options, Some(model))
}
