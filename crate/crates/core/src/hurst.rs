//! Hurst exponent estimation by detrended fluctuation analysis.
//!
//! The input noise sequence is integrated into a profile, the profile is
//! split into non-overlapping boxes of size `s`, each box is detrended by
//! its least-squares line, and the root-mean-square residual F(s) is
//! collected over a geometric grid of box sizes. For self-similar noise
//! F(s) ~ s^H, so the slope of log F against log s estimates H.

use crate::error::{Error, Result};
use crate::fgn::HurstExponent;

/// Smallest input length the estimator accepts.
pub const DFA_MIN_LEN: usize = 128;

const BOX_MIN: usize = 8;
const BOX_RATIO: f64 = 1.189_207_115_002_721; // 2^(1/4)

/// Estimates the Hurst exponent of a noise sequence.
///
/// Box sizes run geometrically from 8 to n/4 with ratio 2^(1/4). The
/// estimate is clamped to [0.01, 0.99]. The statistic is invariant under
/// affine maps of the input. Errors on inputs shorter than
/// [`DFA_MIN_LEN`] or with zero variance.
pub fn estimate_hurst_dfa(values: &[f64]) -> Result<HurstExponent> {
    let n = values.len();
    if n < DFA_MIN_LEN {
        return Err(Error::TooShort {
            needed: DFA_MIN_LEN,
            got: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if !values.iter().any(|v| (v - mean).abs() > 0.0) {
        return Err(Error::Degenerate(
            "constant input has no fluctuation to analyse".into(),
        ));
    }

    // Integrated profile of the centered sequence.
    let mut profile = Vec::with_capacity(n);
    let mut acc = 0.0;
    for v in values {
        acc += v - mean;
        profile.push(acc);
    }

    let mut pts = Vec::new();
    for s in box_sizes(n) {
        let f = fluctuation(&profile, s);
        if f > 0.0 {
            pts.push((((s) as f64).ln(), f.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(Error::Degenerate(
            "fewer than two usable box sizes in fluctuation fit".into(),
        ));
    }

    let slope = ols_slope(&pts);
    HurstExponent::new(slope.clamp(0.01, 0.99))
}

fn box_sizes(n: usize) -> Vec<usize> {
    let max = n / 4;
    let mut sizes = Vec::new();
    let mut s = BOX_MIN;
    while s <= max {
        sizes.push(s);
        let next = ((s as f64) * BOX_RATIO).round() as usize;
        s = next.max(s + 1);
    }
    sizes
}

/// RMS deviation of the profile from per-box least-squares lines, pooled
/// over all complete boxes of size `s`.
fn fluctuation(profile: &[f64], s: usize) -> f64 {
    let boxes = profile.len() / s;
    let sf = s as f64;
    let x_mean = (sf - 1.0) / 2.0;
    let sxx = sf * (sf * sf - 1.0) / 12.0;
    let mut total = 0.0;
    for b in 0..boxes {
        let seg = &profile[b * s..(b + 1) * s];
        let y_mean = seg.iter().sum::<f64>() / sf;
        let mut sxy = 0.0;
        for (i, y) in seg.iter().enumerate() {
            sxy += (i as f64 - x_mean) * (y - y_mean);
        }
        let slope = sxy / sxx;
        let intercept = y_mean - slope * x_mean;
        for (i, y) in seg.iter().enumerate() {
            let r = y - (intercept + slope * i as f64);
            total += r * r;
        }
    }
    (total / (boxes * s) as f64).sqrt()
}

fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in pts {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}
