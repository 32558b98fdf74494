//! Synthetic quasi-seasonal telemetry with injected performance changes.
//!
//! A generated path is a sinusoidal seasonal profile plus stationary
//! fractional Gaussian noise, with an additive step of known magnitude
//! over a random interval. Each sample carries a ground-truth label
//! telling whether the change is active there, which downstream
//! evaluation treats as the answer key.
//!
//! Standardized residuals are formed by subtracting a fitted trend and
//! dividing by the local noise scale estimated alongside it; under a
//! correct fit they are mean zero with unit variance away from the
//! change and shifted by roughly `magnitude / sigma` inside it.

use crate::error::{Error, Result};
use crate::fgn::{FgnGenerator, HurstExponent};
use crate::persist::{parse_key_value, parse_u64_field, require_unique, write_atomic};
use crate::rng::{mix_seed, seeded_rng};
use crate::series::{parse_series_csv, render_series_csv, TimeSeries};
use crate::trend::TrendEstimate;
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::TAU;
use std::path::Path;

/// Number of samples per generated path (one week at 5-minute sampling).
pub const PATH_LEN: usize = 2016;

/// Seasonal period in samples (one day at 5-minute sampling).
pub const SEASON_PERIOD: f64 = 288.0;

/// Amplitude of the seasonal component.
pub const SEASON_AMPLITUDE: f64 = 1.5;

/// Hurst exponent of the generated noise.
pub const NOISE_HURST: f64 = 0.95;

/// Change onset is drawn uniformly over this interval (in samples).
pub const CHANGE_TIME_RANGE: (f64, f64) = (SEASON_PERIOD, 6.0 * SEASON_PERIOD);

/// Change duration is drawn uniformly over this interval (in samples).
pub const CHANGE_DURATION_RANGE: (f64, f64) = (5.0, 100.0);

/// Difficulty profile of a generated dataset, fixing the step height
/// relative to the unit noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Step magnitude 5, clearly visible against unit noise.
    Easy,
    /// Step magnitude 3, partially masked by noise excursions.
    Hard,
}

impl Profile {
    /// Step height before any global noise rescaling.
    pub fn magnitude(self) -> f64 {
        match self {
            Profile::Easy => 5.0,
            Profile::Hard => 3.0,
        }
    }

    /// Stable lowercase name used in manifests and CLI arguments.
    pub fn name(self) -> &'static str {
        match self {
            Profile::Easy => "easy",
            Profile::Hard => "hard",
        }
    }

    /// Inverse of [`Profile::name`].
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "easy" => Some(Profile::Easy),
            "hard" => Some(Profile::Hard),
            _ => None,
        }
    }
}

/// The seasonal component `A * sin(2*pi*t / T)` of a generated path.
pub fn seasonal_component(t: f64) -> f64 {
    SEASON_AMPLITUDE * (TAU * t / SEASON_PERIOD).sin()
}

/// One additive step change: onset time, duration, height, and the
/// parameters of the noise it rides on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeSpec {
    /// Onset time, in the series' time units.
    pub change_time: f64,
    /// Length of the affected interval; the step is active on the closed
    /// interval `[change_time, change_time + duration]`.
    pub duration: f64,
    /// Additive step height.
    pub magnitude: f64,
    /// Standard deviation of the stationary noise.
    pub sigma: f64,
    /// Hurst exponent of the noise.
    pub hurst: HurstExponent,
}

impl ChangeSpec {
    fn validate(&self, series: &TimeSeries) -> Result<()> {
        if !self.change_time.is_finite() || !self.duration.is_finite() {
            return Err(Error::Domain(format!(
                "change interval must be finite, got onset {} duration {}",
                self.change_time, self.duration
            )));
        }
        if self.duration < 0.0 {
            return Err(Error::Domain(format!(
                "change duration must be nonnegative, got {}",
                self.duration
            )));
        }
        if !self.magnitude.is_finite() {
            return Err(Error::Domain(format!(
                "change magnitude must be finite, got {}",
                self.magnitude
            )));
        }
        let first = series.times()[0];
        let last = *series.times().last().expect("series is never empty");
        if self.change_time < first || self.change_time + self.duration > last {
            return Err(Error::OutOfSpan(format!(
                "change interval [{}, {}] exceeds series span [{first}, {last}]",
                self.change_time,
                self.change_time + self.duration
            )));
        }
        Ok(())
    }
}

/// A series together with per-sample ground truth: `true` where the
/// injected change is active.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPath {
    pub series: TimeSeries,
    pub labels: Vec<bool>,
}

impl LabeledPath {
    /// Number of samples inside the change interval.
    pub fn abnormal_len(&self) -> usize {
        self.labels.iter().filter(|&&b| b).count()
    }

    /// Number of samples outside the change interval.
    pub fn normal_len(&self) -> usize {
        self.labels.len() - self.abnormal_len()
    }
}

/// A generated collection of labeled paths with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub paths: Vec<LabeledPath>,
    pub profile: Profile,
    pub seed: u64,
}

/// Adds the step described by `spec` to `series` and labels every sample
/// whose timestamp falls in the closed interval `[onset, onset + duration]`.
pub fn inject_change(series: &TimeSeries, spec: &ChangeSpec) -> Result<LabeledPath> {
    spec.validate(series)?;
    let end = spec.change_time + spec.duration;
    let mut values = series.values().to_vec();
    let mut labels = vec![false; series.len()];
    for (k, &t) in series.times().iter().enumerate() {
        if t >= spec.change_time && t <= end {
            values[k] += spec.magnitude;
            labels[k] = true;
        }
    }
    Ok(LabeledPath {
        series: series.with_values(values)?,
        labels,
    })
}

/// Knobs for dataset generation that do not change the detection
/// geometry of the paths.
#[derive(Debug, Clone, Copy)]
pub struct GenerateOptions {
    /// Multiplies both the noise standard deviation and the step height,
    /// preserving their ratio. Detector behaviour on standardized
    /// residuals is invariant to it; absolute trend errors scale with it.
    pub noise_scale: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { noise_scale: 1.0 }
    }
}

/// Generates `count` labeled paths at unit noise scale.
///
/// Path `i` of a dataset depends only on `(seed, i)`, so regenerating
/// the same dataset reproduces every byte and paths can be built in
/// parallel.
pub fn generate_artificial(profile: Profile, count: usize, seed: u64) -> Result<LabeledDataset> {
    generate_artificial_with(profile, count, seed, &GenerateOptions::default())
}

/// [`generate_artificial`] with explicit generation options.
pub fn generate_artificial_with(
    profile: Profile,
    count: usize,
    seed: u64,
    options: &GenerateOptions,
) -> Result<LabeledDataset> {
    if count == 0 {
        return Err(Error::Domain("dataset needs at least one path".into()));
    }
    if !(options.noise_scale > 0.0) || !options.noise_scale.is_finite() {
        return Err(Error::Domain(format!(
            "noise scale must be positive and finite, got {}",
            options.noise_scale
        )));
    }
    let hurst = HurstExponent::new(NOISE_HURST)?;
    let generator = FgnGenerator::new(PATH_LEN, hurst)?;
    let paths = (0..count)
        .into_par_iter()
        .map(|i| {
            let path_seed = mix_seed(seed, i as u64);
            generate_path(profile, path_seed, options.noise_scale, &generator)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset {
        paths,
        profile,
        seed,
    })
}

/// Draws the change onset and duration for one path.
fn draw_change_interval<R: Rng>(rng: &mut R) -> (f64, f64) {
    let onset = rng.gen_range(CHANGE_TIME_RANGE.0..CHANGE_TIME_RANGE.1);
    let duration = rng.gen_range(CHANGE_DURATION_RANGE.0..CHANGE_DURATION_RANGE.1);
    (onset, duration)
}

fn generate_path(
    profile: Profile,
    path_seed: u64,
    noise_scale: f64,
    generator: &FgnGenerator,
) -> Result<LabeledPath> {
    let noise = generator.sample(mix_seed(path_seed, 0));
    let mut rng = seeded_rng(mix_seed(path_seed, 1));
    let (onset, duration) = draw_change_interval(&mut rng);
    let values: Vec<f64> = noise
        .values
        .iter()
        .enumerate()
        .map(|(k, &z)| seasonal_component(k as f64) + noise_scale * z)
        .collect();
    let base = TimeSeries::from_values(values, 1.0)?;
    let spec = ChangeSpec {
        change_time: onset,
        duration,
        magnitude: profile.magnitude() * noise_scale,
        sigma: noise_scale,
        hurst: generator.hurst(),
    };
    inject_change(&base, &spec)
}

/// Standardizes a series against a fitted trend: `(x - fitted) / sigma`,
/// with the noise scale taken from the trend window nearest each sample.
///
/// A sample that the trend reproduces exactly standardizes to zero even
/// when the local scale estimate collapsed; anywhere else a nonpositive
/// scale is an error rather than a silently infinite residual.
pub fn compute_residuals(series: &TimeSeries, trend: &TrendEstimate) -> Result<TimeSeries> {
    if trend.fitted.len() != series.len() {
        return Err(Error::LengthMismatch {
            left: series.len(),
            right: trend.fitted.len(),
            context: "series vs fitted trend",
        });
    }
    if trend.windows.is_empty() {
        return Err(Error::Degenerate(
            "trend estimate contains no window fits".into(),
        ));
    }
    let mut residuals = Vec::with_capacity(series.len());
    for (k, (&x, &f)) in series.values().iter().zip(&trend.fitted).enumerate() {
        let num = x - f;
        if num == 0.0 {
            residuals.push(0.0);
            continue;
        }
        let sigma = trend.sigma_at(k);
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::DegenerateScale(format!(
                "noise scale {sigma} at sample {k} cannot standardize residual {num}"
            )));
        }
        residuals.push(num / sigma);
    }
    series.with_values(residuals)
}

const MANIFEST_NAME: &str = "manifest.txt";

/// Writes a dataset as one labeled CSV per path plus a manifest.
///
/// The manifest records `profile`, `seed`, and one `path=` line per
/// file, in path order. All writes are atomic.
pub fn save_dataset(dataset: &LabeledDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    manifest.push_str(&format!("profile={}\n", dataset.profile.name()));
    manifest.push_str(&format!("seed={}\n", dataset.seed));
    for (i, path) in dataset.paths.iter().enumerate() {
        let file = format!("path_{i:04}.csv");
        let csv = render_series_csv(&path.series, Some(&path.labels));
        write_atomic(&dir.join(&file), &csv)?;
        manifest.push_str(&format!("path={file}\n"));
    }
    write_atomic(&dir.join(MANIFEST_NAME), &manifest)
}

/// Reads a dataset previously written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<LabeledDataset> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let manifest_name = manifest_path.display().to_string();
    let text = std::fs::read_to_string(&manifest_path)?;
    let pairs = parse_key_value(&manifest_name, &text)?;
    let profile_name = require_unique(&pairs, "profile", &manifest_name)?;
    let profile = Profile::from_name(profile_name).ok_or_else(|| Error::Malformed {
        file: manifest_name.clone(),
        row: 0,
        msg: format!("unknown profile '{profile_name}'"),
    })?;
    let seed = parse_u64_field(
        require_unique(&pairs, "seed", &manifest_name)?,
        "seed",
        &manifest_name,
    )?;
    let mut paths = Vec::new();
    for (key, value) in &pairs {
        if key != "path" {
            continue;
        }
        let file = dir.join(value);
        let name = file.display().to_string();
        let content = std::fs::read_to_string(&file)?;
        let (series, labels) = parse_series_csv(&name, &content)?;
        let labels = labels.ok_or_else(|| Error::Malformed {
            file: name,
            row: 1,
            msg: "dataset path is missing the label column".into(),
        })?;
        paths.push(LabeledPath { series, labels });
    }
    if paths.is_empty() {
        return Err(Error::Malformed {
            file: manifest_name,
            row: 0,
            msg: "manifest lists no paths".into(),
        });
    }
    Ok(LabeledDataset {
        paths,
        profile,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trend::{extract_trend, forecast_residuals, TrendOptions, WindowFit};

    fn flat_series(n: usize) -> TimeSeries {
        TimeSeries::from_values(vec![0.0; n], 1.0).unwrap()
    }

    fn unit_spec(change_time: f64, duration: f64, magnitude: f64) -> ChangeSpec {
        ChangeSpec {
            change_time,
            duration,
            magnitude,
            sigma: 1.0,
            hurst: HurstExponent::independent(),
        }
    }

    #[test]
    fn labels_cover_closed_interval_on_grid() {
        let path = inject_change(&flat_series(40), &unit_spec(10.0, 10.0, 5.0)).unwrap();
        let expected: Vec<bool> = (0..40).map(|k| (10..=20).contains(&k)).collect();
        assert_eq!(path.labels, expected, "closed interval [10, 20] on unit grid");
        assert_eq!(path.abnormal_len(), 11);
        assert_eq!(path.normal_len(), 29);
    }

    #[test]
    fn fractional_endpoints_snap_inward() {
        let path = inject_change(&flat_series(40), &unit_spec(9.5, 10.0, 5.0)).unwrap();
        let labeled: Vec<usize> = (0..40).filter(|&k| path.labels[k]).collect();
        assert_eq!(
            labeled,
            (10..=19).collect::<Vec<_>>(),
            "interval [9.5, 19.5] contains grid points 10 through 19"
        );
    }

    #[test]
    fn step_on_zero_series_is_pure_indicator() {
        let path = inject_change(&flat_series(30), &unit_spec(5.0, 4.0, 2.5)).unwrap();
        for (k, (&v, &lab)) in path.series.values().iter().zip(&path.labels).enumerate() {
            let expected = if lab { 2.5 } else { 0.0 };
            assert_eq!(v, expected, "sample {k}");
        }
    }

    #[test]
    fn zero_magnitude_keeps_values_but_labels_interval() {
        let base = TimeSeries::from_values((0..50).map(|k| (k as f64).cos()).collect(), 1.0)
            .unwrap();
        let path = inject_change(&base, &unit_spec(12.0, 6.0, 0.0)).unwrap();
        assert_eq!(path.series.values(), base.values(), "values untouched");
        assert_eq!(path.abnormal_len(), 7, "labels still mark [12, 18]");
    }

    #[test]
    fn interval_outside_span_is_rejected() {
        let err = inject_change(&flat_series(20), &unit_spec(15.0, 10.0, 1.0)).unwrap_err();
        assert!(
            matches!(err, Error::OutOfSpan(_)),
            "interval [15, 25] exceeds span [0, 19], got {err:?}"
        );
        let err = inject_change(&flat_series(20), &unit_spec(-1.0, 2.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::OutOfSpan(_)), "onset before start");
    }

    #[test]
    fn generated_path_has_expected_shape() {
        let dataset = generate_artificial(Profile::Easy, 1, 7).unwrap();
        let path = &dataset.paths[0];
        assert_eq!(path.series.len(), PATH_LEN);
        assert_eq!(path.labels.len(), PATH_LEN);
        let count = path.abnormal_len();
        assert!(
            (5..=100).contains(&count),
            "label count {count} should land in [5, 100] for durations in (5, 100)"
        );
        assert_eq!(path.abnormal_len() + path.normal_len(), PATH_LEN);
    }

    #[test]
    fn labeled_segment_is_contiguous_and_in_window() {
        let dataset = generate_artificial(Profile::Hard, 20, 99).unwrap();
        for (i, path) in dataset.paths.iter().enumerate() {
            let first = path.labels.iter().position(|&b| b).expect("change exists");
            let last = path.labels.iter().rposition(|&b| b).unwrap();
            assert_eq!(
                path.abnormal_len(),
                last - first + 1,
                "path {i}: labels form one contiguous run"
            );
            assert!(
                first as f64 >= CHANGE_TIME_RANGE.0 && (first as f64) < CHANGE_TIME_RANGE.1 + 1.0,
                "path {i}: onset index {first} outside draw range"
            );
            assert!(
                (last as f64) < CHANGE_TIME_RANGE.1 + CHANGE_DURATION_RANGE.1 + 1.0,
                "path {i}: change end {last} later than any drawable interval"
            );
        }
    }

    #[test]
    fn generation_is_deterministic_in_seed_and_prefix_stable() {
        let a = generate_artificial(Profile::Hard, 4, 1234).unwrap();
        let b = generate_artificial(Profile::Hard, 4, 1234).unwrap();
        assert_eq!(a, b, "same seed reproduces every byte");
        let longer = generate_artificial(Profile::Hard, 6, 1234).unwrap();
        assert_eq!(
            &longer.paths[..4],
            &a.paths[..],
            "extending the dataset preserves earlier paths"
        );
        let other = generate_artificial(Profile::Hard, 4, 1235).unwrap();
        assert_ne!(a.paths[0], other.paths[0], "different seed, different data");
    }

    #[test]
    fn profiles_differ_only_in_step_height() {
        let easy = generate_artificial(Profile::Easy, 1, 31).unwrap();
        let hard = generate_artificial(Profile::Hard, 1, 31).unwrap();
        let (e, h) = (&easy.paths[0], &hard.paths[0]);
        assert_eq!(e.labels, h.labels, "same seed draws the same interval");
        for k in 0..PATH_LEN {
            let diff = e.series.values()[k] - h.series.values()[k];
            let expected = if e.labels[k] { 2.0 } else { 0.0 };
            assert!(
                (diff - expected).abs() < 1e-12,
                "sample {k}: easy minus hard should be the magnitude gap on labeled samples"
            );
        }
    }

    #[test]
    fn noise_scale_shrinks_deviations_but_keeps_labels() {
        let unit = generate_artificial(Profile::Easy, 1, 5).unwrap();
        let scaled = generate_artificial_with(
            Profile::Easy,
            1,
            5,
            &GenerateOptions { noise_scale: 0.25 },
        )
        .unwrap();
        assert_eq!(unit.paths[0].labels, scaled.paths[0].labels);
        for k in 0..PATH_LEN {
            let f = seasonal_component(k as f64);
            let du = unit.paths[0].series.values()[k] - f;
            let ds = scaled.paths[0].series.values()[k] - f;
            assert!(
                (ds - 0.25 * du).abs() < 1e-12,
                "sample {k}: deviation from the seasonal profile scales linearly"
            );
        }
    }

    #[test]
    fn change_onsets_are_uniform_over_their_range() {
        let n = 10_000;
        let mut onsets = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = seeded_rng(mix_seed(mix_seed(777, i as u64), 1));
            let (onset, duration) = draw_change_interval(&mut rng);
            assert!(
                (CHANGE_TIME_RANGE.0..CHANGE_TIME_RANGE.1).contains(&onset),
                "onset {onset} outside its range"
            );
            assert!(
                (CHANGE_DURATION_RANGE.0..CHANGE_DURATION_RANGE.1).contains(&duration),
                "duration {duration} outside its range"
            );
            onsets.push(onset);
        }
        onsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let span = CHANGE_TIME_RANGE.1 - CHANGE_TIME_RANGE.0;
        let mut ks = 0.0f64;
        for (i, &x) in onsets.iter().enumerate() {
            let cdf = (x - CHANGE_TIME_RANGE.0) / span;
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            ks = ks.max((cdf - lo).abs()).max((hi - cdf).abs());
        }
        let critical = 1.6276 / (n as f64).sqrt();
        assert!(
            ks < critical,
            "Kolmogorov-Smirnov statistic {ks:.5} exceeds the 1% critical value {critical:.5}"
        );
    }

    #[test]
    fn exact_fit_standardizes_to_zero_even_with_collapsed_scale() {
        let series = TimeSeries::from_values((0..64).map(|k| k as f64 * 0.5).collect(), 1.0)
            .unwrap();
        let trend = TrendEstimate {
            fitted: series.values().to_vec(),
            window_counts: vec![1; 64],
            windows: vec![WindowFit {
                start: 0,
                end: 64,
                sigma_hat: 0.0,
                hurst_hat: HurstExponent::independent(),
            }],
            failed_windows: 0,
        };
        let residuals = compute_residuals(&series, &trend).unwrap();
        assert!(residuals.values().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn nonzero_residual_with_collapsed_scale_is_an_error() {
        let series = flat_series(32);
        let mut fitted = series.values().to_vec();
        fitted[10] = 1.0;
        let trend = TrendEstimate {
            fitted,
            window_counts: vec![1; 32],
            windows: vec![WindowFit {
                start: 0,
                end: 32,
                sigma_hat: 0.0,
                hurst_hat: HurstExponent::independent(),
            }],
            failed_windows: 0,
        };
        let err = compute_residuals(&series, &trend).unwrap_err();
        assert!(matches!(err, Error::DegenerateScale(_)), "got {err:?}");
    }

    #[test]
    fn residuals_divide_by_nearest_window_scale() {
        let series = TimeSeries::from_values(vec![2.0; 100], 1.0).unwrap();
        let trend = TrendEstimate {
            fitted: vec![0.0; 100],
            window_counts: vec![1; 100],
            windows: vec![
                WindowFit {
                    start: 0,
                    end: 50,
                    sigma_hat: 2.0,
                    hurst_hat: HurstExponent::independent(),
                },
                WindowFit {
                    start: 50,
                    end: 100,
                    sigma_hat: 4.0,
                    hurst_hat: HurstExponent::independent(),
                },
            ],
            failed_windows: 0,
        };
        let residuals = compute_residuals(&series, &trend).unwrap();
        assert_eq!(residuals.values()[0], 1.0, "left half standardized by 2");
        assert_eq!(residuals.values()[99], 0.5, "right half standardized by 4");
    }

    #[test]
    fn residuals_are_invariant_to_an_added_cubic() {
        let dataset = generate_artificial(Profile::Easy, 1, 42).unwrap();
        let series = &dataset.paths[0].series;
        let options = TrendOptions::default();
        let r1 = compute_residuals(series, &extract_trend(series, &options).unwrap()).unwrap();
        let shifted: Vec<f64> = series
            .values()
            .iter()
            .zip(series.times())
            .map(|(&x, &t)| {
                let u = t / PATH_LEN as f64;
                x + 4.0 - 3.0 * u + 2.0 * u * u - 5.0 * u * u * u
            })
            .collect();
        let series2 = series.with_values(shifted).unwrap();
        let r2 = compute_residuals(&series2, &extract_trend(&series2, &options).unwrap()).unwrap();
        let max_diff = r1
            .values()
            .iter()
            .zip(r2.values())
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(
            max_diff < 1e-6,
            "window fits absorb cubics, so residuals should not move: max diff {max_diff:.2e}"
        );
    }

    #[test]
    fn residual_moments_are_standardized_on_quiet_paths() {
        let hurst = HurstExponent::new(NOISE_HURST).unwrap();
        let generator = FgnGenerator::new(PATH_LEN, hurst).unwrap();
        let options = TrendOptions::default();
        for seed in 0..6u64 {
            let noise = generator.sample(mix_seed(404, seed));
            let values: Vec<f64> = noise
                .values
                .iter()
                .enumerate()
                .map(|(k, &z)| seasonal_component(k as f64) + z)
                .collect();
            let series = TimeSeries::from_values(values, 1.0).unwrap();
            let trend = extract_trend(&series, &options).unwrap();
            let residuals = compute_residuals(&series, &trend).unwrap();
            let n = residuals.len() as f64;
            let mean = residuals.values().iter().sum::<f64>() / n;
            let var = residuals
                .values()
                .iter()
                .map(|&r| (r - mean) * (r - mean))
                .sum::<f64>()
                / (n - 1.0);
            assert!(
                mean.abs() < 0.1,
                "seed {seed}: residual mean {mean:.4} should sit near zero"
            );
            assert!(
                (0.7..1.3).contains(&var),
                "seed {seed}: residual variance {var:.4} should sit near one"
            );
        }
    }

    // A smoothed two-sided fit rides up onto a level shift, so the shift
    // survives in these residuals only partially; the full-height signal
    // lives in the causal forecast residuals tested below.
    #[test]
    fn injected_change_lifts_smoothed_residuals_partially() {
        let dataset = generate_artificial(Profile::Easy, 8, 2024).unwrap();
        let options = TrendOptions::default();
        let (mut on_sum, mut on_n) = (0.0, 0usize);
        let (mut off_sum, mut off_n) = (0.0, 0usize);
        for path in &dataset.paths {
            let trend = extract_trend(&path.series, &options).unwrap();
            let residuals = compute_residuals(&path.series, &trend).unwrap();
            for (k, &lab) in path.labels.iter().enumerate() {
                if lab {
                    on_sum += residuals.values()[k];
                    on_n += 1;
                } else {
                    off_sum += residuals.values()[k];
                    off_n += 1;
                }
            }
        }
        let on_mean = on_sum / on_n as f64;
        let off_mean = off_sum / off_n as f64;
        assert!(
            on_mean > 0.2,
            "some of the magnitude-5 step should survive smoothing, got {on_mean:.3}"
        );
        assert!(
            off_mean.abs() < 0.1,
            "off-change residuals should stay centered, got {off_mean:.3}"
        );
    }

    #[test]
    fn change_onset_appears_at_full_height_in_forecast_residuals() {
        let dataset = generate_artificial(Profile::Easy, 50, 2024).unwrap();
        let (mut sum, mut count) = (0.0, 0usize);
        for path in &dataset.paths {
            let res = forecast_residuals(&path.series, 96).unwrap();
            let onset = path.labels.iter().position(|&b| b).unwrap();
            for k in onset..onset + 5 {
                assert!(path.labels[k], "durations are at least 5 samples");
                sum += res.values[k - res.offset];
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!(
            mean > 4.0,
            "forecasts extrapolate the pre-change past, so the first samples of a \
             magnitude-5 step should standardize near 5, got {mean:.3}"
        );
    }

    #[test]
    fn short_change_lifts_mean_forecast_residual_above_two() {
        let hurst = HurstExponent::new(NOISE_HURST).unwrap();
        let generator = FgnGenerator::new(PATH_LEN, hurst).unwrap();
        let mut total = 0.0;
        let seeds = 100u64;
        for seed in 0..seeds {
            let noise = generator.sample(mix_seed(31, seed));
            let values: Vec<f64> = noise
                .values
                .iter()
                .enumerate()
                .map(|(k, &z)| seasonal_component(k as f64) + z)
                .collect();
            let base = TimeSeries::from_values(values, 1.0).unwrap();
            let path = inject_change(
                &base,
                &ChangeSpec {
                    change_time: 500.5,
                    duration: 10.0,
                    magnitude: 5.0,
                    sigma: 1.0,
                    hurst,
                },
            )
            .unwrap();
            let res = forecast_residuals(&path.series, 96).unwrap();
            let (mut s, mut c) = (0.0, 0usize);
            for (i, &r) in res.values.iter().enumerate() {
                if path.labels[res.offset + i] {
                    s += r;
                    c += 1;
                }
            }
            total += s / c as f64;
        }
        let mc_mean = total / seeds as f64;
        assert!(
            mc_mean > 2.0,
            "mean forecast residual over a short change interval, averaged across \
             seeds, should exceed 2, got {mc_mean:.3}"
        );
    }

    #[test]
    fn dataset_round_trips_through_disk() {
        let dataset = generate_artificial(Profile::Hard, 3, 88).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&dataset, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded.profile, Profile::Hard);
        assert_eq!(loaded.seed, 88);
        assert_eq!(loaded.paths.len(), 3);
        for (a, b) in dataset.paths.iter().zip(&loaded.paths) {
            assert_eq!(a.series.values(), b.series.values(), "values survive bitwise");
            assert_eq!(a.labels, b.labels);
        }
    }

    #[test]
    fn manifest_errors_name_the_problem() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(MANIFEST_NAME), "profile=medium\nseed=1\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        match err {
            Error::Malformed { msg, .. } => {
                assert!(msg.contains("medium"), "message should quote the bad profile")
            }
            other => panic!("expected Malformed, got {other:?}"),
        }
        std::fs::write(dir.path().join(MANIFEST_NAME), "profile=easy\nseed=1\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(
            matches!(err, Error::Malformed { .. }),
            "manifest without paths is malformed, got {err:?}"
        );
    }
}
