//! A bank of five weak sequential detectors over standardized residuals.
//!
//! Each detector maintains one nonnegative statistic that is updated
//! causally, one residual at a time. The likelihood-based kinds (CUSUM,
//! Shiryaev-Roberts, posterior probability) share the Gaussian
//! mean-shift log-likelihood ratio `zeta = delta * (r - delta/2)` for a
//! presumed post-change mean `delta`; the Shewhart chart is memoryless;
//! the window detector contrasts two adjacent moving averages.
//!
//! Raw statistics live on different scales, so each detector carries a
//! reference threshold `h` calibrated as a high quantile of its statistic
//! over change-free training data. The normalized signal `s = S/h`
//! crosses 1 exactly where the raw statistic crosses `h`, putting all
//! detectors on a common scale for aggregation.

use crate::error::{Error, Result};
use std::collections::VecDeque;

/// The five detector kinds in the bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Cusum,
    ShiryaevRoberts,
    Shewhart,
    WindowChangepoint,
    PosteriorProbability,
}

/// Bank order used everywhere signals are stacked into matrices.
pub const BANK: [DetectorKind; 5] = [
    DetectorKind::Cusum,
    DetectorKind::ShiryaevRoberts,
    DetectorKind::Shewhart,
    DetectorKind::WindowChangepoint,
    DetectorKind::PosteriorProbability,
];

impl DetectorKind {
    /// Stable lowercase name used in model files and reports.
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Cusum => "cusum",
            DetectorKind::ShiryaevRoberts => "shiryaev-roberts",
            DetectorKind::Shewhart => "shewhart",
            DetectorKind::WindowChangepoint => "window",
            DetectorKind::PosteriorProbability => "posterior",
        }
    }

    /// Inverse of [`DetectorKind::name`].
    pub fn from_name(name: &str) -> Option<Self> {
        BANK.into_iter().find(|k| k.name() == name)
    }
}

/// Shared parameters of the bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Presumed post-change residual mean for the likelihood-based kinds.
    pub delta: f64,
    /// Length of each of the two adjacent windows in the window detector.
    pub window: usize,
    /// Per-step prior change probability for the posterior detector.
    pub prior: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            delta: 3.0,
            window: 20,
            prior: 1.0 / 2016.0,
        }
    }
}

impl DetectorConfig {
    fn validate(&self, kind: DetectorKind) -> Result<()> {
        match kind {
            DetectorKind::Cusum | DetectorKind::ShiryaevRoberts => {
                if !(self.delta > 0.0) || !self.delta.is_finite() {
                    return Err(Error::Domain(format!(
                        "post-change mean must be positive and finite, got {}",
                        self.delta
                    )));
                }
            }
            DetectorKind::Shewhart => {}
            DetectorKind::WindowChangepoint => {
                if self.window == 0 {
                    return Err(Error::Domain("window length must be at least 1".into()));
                }
            }
            DetectorKind::PosteriorProbability => {
                if !(self.prior > 0.0 && self.prior < 1.0) {
                    return Err(Error::Domain(format!(
                        "prior change probability must lie in (0,1), got {}",
                        self.prior
                    )));
                }
                if !(self.delta > 0.0) || !self.delta.is_finite() {
                    return Err(Error::Domain(format!(
                        "post-change mean must be positive and finite, got {}",
                        self.delta
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Saturation bound for the Shiryaev-Roberts statistic. Its recursion
/// multiplies by `exp(zeta)` and would overflow on a long strong signal;
/// everything past this bound means "alarm" equally.
const SR_CAP: f64 = 1e12;

fn log_likelihood_ratio(r: f64, delta: f64) -> f64 {
    delta * (r - 0.5 * delta)
}

#[derive(Debug, Clone, PartialEq)]
enum Inner {
    Cusum {
        t: f64,
    },
    ShiryaevRoberts {
        r: f64,
    },
    Shewhart {
        s: f64,
    },
    WindowChangepoint {
        /// Last `2 * window` residuals, oldest first.
        buffer: VecDeque<f64>,
        seen: usize,
    },
    PosteriorProbability {
        pi: f64,
    },
}

/// One sequential detector: a kind, its parameters, and the current
/// value of its statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    kind: DetectorKind,
    config: DetectorConfig,
    inner: Inner,
}

impl DetectorState {
    pub fn new(kind: DetectorKind, config: &DetectorConfig) -> Result<Self> {
        config.validate(kind)?;
        let inner = match kind {
            DetectorKind::Cusum => Inner::Cusum { t: 0.0 },
            DetectorKind::ShiryaevRoberts => Inner::ShiryaevRoberts { r: 0.0 },
            DetectorKind::Shewhart => Inner::Shewhart { s: 0.0 },
            DetectorKind::WindowChangepoint => Inner::WindowChangepoint {
                buffer: VecDeque::with_capacity(2 * config.window),
                seen: 0,
            },
            DetectorKind::PosteriorProbability => Inner::PosteriorProbability { pi: 0.0 },
        };
        Ok(Self {
            kind,
            config: *config,
            inner,
        })
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    /// Current value of the detection statistic.
    pub fn statistic(&self) -> f64 {
        match &self.inner {
            Inner::Cusum { t } => *t,
            Inner::ShiryaevRoberts { r } => *r,
            Inner::Shewhart { s } => *s,
            Inner::WindowChangepoint { buffer, seen } => {
                let w = self.config.window;
                if *seen < 2 * w {
                    return 0.0;
                }
                let prev: f64 = buffer.iter().take(w).sum::<f64>() / w as f64;
                let recent: f64 = buffer.iter().skip(w).sum::<f64>() / w as f64;
                (recent - prev).abs() * (w as f64 / 2.0).sqrt()
            }
            Inner::PosteriorProbability { pi } => *pi,
        }
    }

    /// Advances the detector by one residual and returns the new
    /// statistic. The residual must be finite.
    pub fn update(&mut self, r: f64) -> f64 {
        debug_assert!(r.is_finite(), "residuals must be finite, got {r}");
        match &mut self.inner {
            Inner::Cusum { t } => {
                let zeta = log_likelihood_ratio(r, self.config.delta);
                *t = (*t + zeta).max(0.0);
            }
            Inner::ShiryaevRoberts { r: stat } => {
                let zeta = log_likelihood_ratio(r, self.config.delta);
                *stat = ((1.0 + *stat) * zeta.exp()).min(SR_CAP);
            }
            Inner::Shewhart { s } => {
                *s = r.abs();
            }
            Inner::WindowChangepoint { buffer, seen } => {
                if buffer.len() == 2 * self.config.window {
                    buffer.pop_front();
                }
                buffer.push_back(r);
                *seen += 1;
            }
            Inner::PosteriorProbability { pi } => {
                // pi' = A / (A + B) with A = (pi + p(1-pi)) * exp(zeta)
                // and B = (1-p)(1-pi), computed as 1/(1 + (B/A)) so a
                // huge likelihood saturates to 1 instead of overflowing.
                let p = self.config.prior;
                let zeta = log_likelihood_ratio(r, self.config.delta);
                let no_change_mass = (1.0 - p) * (1.0 - *pi);
                if no_change_mass == 0.0 {
                    // The chain has absorbed at pi = 1; no evidence,
                    // however crushing, can resurrect the no-change
                    // hypothesis (and 0 * exp(huge) would be NaN).
                    *pi = 1.0;
                } else {
                    let grown = *pi + p * (1.0 - *pi);
                    let ratio = no_change_mass * (-zeta).exp() / grown;
                    *pi = (1.0 / (1.0 + ratio)).clamp(0.0, 1.0);
                }
            }
        }
        self.statistic()
    }
}

/// Runs one detector over a residual stream and returns its statistic
/// trajectory, aligned with the input.
pub fn run_detector(
    kind: DetectorKind,
    config: &DetectorConfig,
    residuals: &[f64],
) -> Result<Vec<f64>> {
    let mut state = DetectorState::new(kind, config)?;
    Ok(residuals.iter().map(|&r| state.update(r)).collect())
}

/// A raw statistic trajectory with its calibrated reference threshold
/// and the normalized signal `s = S/h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrajectory {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub reference_threshold: f64,
}

/// Normalizes a raw trajectory by a positive reference threshold.
pub fn normalize_signal(raw: Vec<f64>, reference_threshold: f64) -> Result<SignalTrajectory> {
    if !(reference_threshold > 0.0) || !reference_threshold.is_finite() {
        return Err(Error::DegenerateThreshold(format!(
            "reference threshold must be positive and finite, got {reference_threshold}"
        )));
    }
    let normalized = raw.iter().map(|&s| s / reference_threshold).collect();
    Ok(SignalTrajectory {
        raw,
        normalized,
        reference_threshold,
    })
}

/// Calibrates a reference threshold as the `quantile`-level order
/// statistic of the pooled detector values at change-free timestamps.
///
/// `trajectories[i]` and `normal_masks[i]` describe path `i`: the
/// statistic values and, aligned with them, `true` wherever the path is
/// labeled normal. Timestamps marked abnormal are excluded from the
/// pool. `quantile` may be 1.0, giving the maximum observed value.
pub fn calibrate_reference_threshold(
    trajectories: &[Vec<f64>],
    normal_masks: &[Vec<bool>],
    quantile: f64,
) -> Result<f64> {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::Domain(format!(
            "calibration quantile must lie in (0, 1], got {quantile}"
        )));
    }
    if trajectories.len() != normal_masks.len() {
        return Err(Error::LengthMismatch {
            left: trajectories.len(),
            right: normal_masks.len(),
            context: "trajectories vs normal masks",
        });
    }
    let mut pool = Vec::new();
    for (traj, mask) in trajectories.iter().zip(normal_masks) {
        if traj.len() != mask.len() {
            return Err(Error::LengthMismatch {
                left: traj.len(),
                right: mask.len(),
                context: "trajectory vs normal mask",
            });
        }
        for (&s, &normal) in traj.iter().zip(mask) {
            if normal {
                pool.push(s);
            }
        }
    }
    if pool.is_empty() {
        return Err(Error::Degenerate(
            "no normal-labeled timestamps to calibrate on".into(),
        ));
    }
    pool.sort_by(|a, b| a.partial_cmp(b).expect("statistics are finite"));
    let idx = ((quantile * pool.len() as f64).ceil() as usize)
        .saturating_sub(1)
        .min(pool.len() - 1);
    let h = pool[idx];
    if !(h > 0.0) {
        return Err(Error::DegenerateThreshold(format!(
            "calibrated threshold {h} is not positive; the statistic is \
             degenerate on the training normals"
        )));
    }
    Ok(h)
}

/// A fully calibrated bank: shared parameters plus one reference
/// threshold per detector, in [`BANK`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorBank {
    pub config: DetectorConfig,
    /// `thresholds[i]` belongs to `BANK[i]`.
    pub thresholds: Vec<f64>,
}

impl DetectorBank {
    /// Calibrates every detector of the bank at the given quantile over
    /// the training paths' normal timestamps.
    pub fn calibrate(
        config: &DetectorConfig,
        residual_paths: &[Vec<f64>],
        normal_masks: &[Vec<bool>],
        quantile: f64,
    ) -> Result<Self> {
        let mut thresholds = Vec::with_capacity(BANK.len());
        for kind in BANK {
            let trajectories = residual_paths
                .iter()
                .map(|rs| run_detector(kind, config, rs))
                .collect::<Result<Vec<_>>>()?;
            thresholds.push(calibrate_reference_threshold(
                &trajectories,
                normal_masks,
                quantile,
            )?);
        }
        Ok(Self {
            config: *config,
            thresholds,
        })
    }

    /// Runs the whole bank over one residual stream and returns the
    /// normalized signals, in [`BANK`] order.
    pub fn signals(&self, residuals: &[f64]) -> Result<Vec<SignalTrajectory>> {
        if self.thresholds.len() != BANK.len() {
            return Err(Error::LengthMismatch {
                left: self.thresholds.len(),
                right: BANK.len(),
                context: "bank thresholds vs detector kinds",
            });
        }
        BANK.iter()
            .zip(&self.thresholds)
            .map(|(&kind, &h)| {
                let raw = run_detector(kind, &self.config, residuals)?;
                normalize_signal(raw, h)
            })
            .collect()
    }
}
