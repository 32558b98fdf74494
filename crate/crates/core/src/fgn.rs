//! Fractional Brownian motion and fractional Gaussian noise.
//!
//! Fractional Brownian motion `B_H` with Hurst exponent `H` in (0,1) is the
//! zero-mean Gaussian process with
//!
//! ```text
//! cov(B_H(s), B_H(t)) = 1/2 (t^{2H} + s^{2H} - |t - s|^{2H})
//! ```
//!
//! Its unit-step increments form fractional Gaussian noise, a stationary
//! sequence with autocovariance
//!
//! ```text
//! gamma(k) = 1/2 (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H})
//! ```
//!
//! `H = 1/2` gives white noise; `H > 1/2` gives long-range dependence with
//! gamma(k) ~ H(2H-1) k^{2H-2}, which decays so slowly that sums over lags
//! diverge. Simulation uses circulant embedding of the Toeplitz covariance:
//! the autocovariance is wrapped into a circulant matrix whose eigenvalues
//! come from one FFT, and a sample is one more FFT over complex Gaussians
//! shaped by the eigenvalue square roots. The draw is exact (no truncation),
//! and costs O(n log n). Should an embedding ever fail to be nonnegative
//! definite, a dense Cholesky factorization of the n x n covariance is used
//! instead.

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Hurst exponent, validated into the open interval (0,1).
///
/// `0.5` denotes an independent (white) noise sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstExponent(f64);

impl HurstExponent {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!(
                "Hurst exponent must lie in (0,1), got {value}"
            )))
        }
    }

    /// The independent-increments case, H = 1/2.
    pub fn independent() -> Self {
        Self(0.5)
    }

    /// Whether this is the independent-increments case.
    pub fn is_independent(self) -> bool {
        (self.0 - 0.5).abs() < 1e-12
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Covariance of fractional Brownian motion at times `s`, `t` >= 0.
pub fn fbm_covariance(s: f64, t: f64, hurst: HurstExponent) -> Result<f64> {
    if !s.is_finite() || !t.is_finite() || s < 0.0 || t < 0.0 {
        return Err(Error::Domain(format!(
            "fBm covariance needs nonnegative finite times, got ({s}, {t})"
        )));
    }
    let two_h = 2.0 * hurst.value();
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

/// Autocovariance of unit-variance fractional Gaussian noise at integer lag.
pub fn fgn_autocovariance(lag: usize, hurst: HurstExponent) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let k = lag as f64;
    let two_h = 2.0 * hurst.value();
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).powf(two_h))
}

/// A simulated stationary Gaussian noise path together with its provenance.
#[derive(Debug, Clone)]
pub struct FgnSample {
    pub values: Vec<f64>,
    pub hurst: HurstExponent,
    pub seed: u64,
}

enum Backend {
    /// Square roots of circulant eigenvalues, and the forward FFT plan.
    Spectral {
        sqrt_eigen: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    /// Lower Cholesky factor of the dense covariance.
    Dense(DMatrix<f64>),
}

/// Reusable sampler for fixed `(n, H)`.
///
/// Construction does the covariance embedding once; each [`sample`] call is
/// then two FFT passes over a fresh ChaCha12 stream. Samples are exact:
/// every draw has precisely the fGn covariance at all lags.
///
/// [`sample`]: FgnGenerator::sample
pub struct FgnGenerator {
    n: usize,
    hurst: HurstExponent,
    backend: Backend,
}

impl FgnGenerator {
    pub fn new(n: usize, hurst: HurstExponent) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("cannot simulate an empty path".into()));
        }
        let m = 2 * n;
        // Wrap gamma(0..n) into a length-2n circulant generator row.
        let mut row = vec![0.0f64; m];
        for (k, r) in row.iter_mut().enumerate().take(n + 1) {
            *r = fgn_autocovariance(k, hurst);
        }
        for k in n + 1..m {
            row[k] = row[m - k];
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let mut buf: Vec<Complex<f64>> = row.iter().map(|&c| Complex::new(c, 0.0)).collect();
        fft.process(&mut buf);

        let max_eig = buf.iter().map(|z| z.re).fold(0.0f64, f64::max);
        let tol = 1e-10 * max_eig.max(1.0);
        let mut sqrt_eigen = Vec::with_capacity(m);
        let mut embeddable = true;
        for z in &buf {
            if z.re < -tol {
                embeddable = false;
                break;
            }
            sqrt_eigen.push(z.re.max(0.0).sqrt());
        }

        let backend = if embeddable {
            Backend::Spectral { sqrt_eigen, fft }
        } else {
            // Extremely rare for fGn; fall back to an exact dense factor.
            let cov = DMatrix::from_fn(n, n, |i, j| {
                fgn_autocovariance(i.abs_diff(j), hurst)
            });
            let chol = cov.cholesky().ok_or_else(|| {
                Error::Simulation(format!(
                    "circulant embedding indefinite and dense covariance not \
                     positive definite (n={n}, H={})",
                    hurst.value()
                ))
            })?;
            Backend::Dense(chol.unpack())
        };

        Ok(Self { n, hurst, backend })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn hurst(&self) -> HurstExponent {
        self.hurst
    }

    /// Draws one exact fGn path for `seed`. Deterministic in `seed`.
    ///
    /// Gaussian draw order (documented so fixtures stay portable): with
    /// `m = 2n`, first the real weights of frequency bins 0 and m/2, then
    /// pairs (re, im) for bins 1..m/2. All are standard normals from the
    /// ChaCha12 stream for `seed`.
    pub fn sample(&self, seed: u64) -> FgnSample {
        let values = match &self.backend {
            Backend::Spectral { sqrt_eigen, fft } => {
                let m = 2 * self.n;
                let mut rng = seeded_rng(seed);
                let mut spec = vec![Complex::new(0.0, 0.0); m];
                let z0: f64 = rng.sample(StandardNormal);
                let zh: f64 = rng.sample(StandardNormal);
                spec[0] = Complex::new(sqrt_eigen[0] * z0, 0.0);
                spec[m / 2] = Complex::new(sqrt_eigen[m / 2] * zh, 0.0);
                for k in 1..m / 2 {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    let w = sqrt_eigen[k] * std::f64::consts::FRAC_1_SQRT_2;
                    spec[k] = Complex::new(w * a, w * b);
                    spec[m - k] = Complex::new(w * a, -(w * b));
                }
                let mut buf = spec;
                fft.process(&mut buf);
                let norm = 1.0 / (m as f64).sqrt();
                buf[..self.n].iter().map(|z| z.re * norm).collect()
            }
            Backend::Dense(l) => {
                let mut rng = seeded_rng(seed);
                let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
                let mut out = vec![0.0f64; self.n];
                for i in 0..self.n {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += l[(i, j)] * z[j];
                    }
                    out[i] = acc;
                }
                out
            }
        };
        FgnSample {
            values,
            hurst: self.hurst,
            seed,
        }
    }
}

/// One-shot convenience over [`FgnGenerator`].
pub fn simulate_fgn(n: usize, hurst: HurstExponent, seed: u64) -> Result<FgnSample> {
    Ok(FgnGenerator::new(n, hurst)?.sample(seed))
}

/// Prefix sums of a noise path: the corresponding fBm positions
/// `B(t_k) = sum of increments up to k`.
pub fn cumulate_to_fbm(sample: &FgnSample) -> Vec<f64> {
    let mut out = Vec::with_capacity(sample.values.len());
    let mut acc = 0.0;
    for v in &sample.values {
        acc += v;
        out.push(acc);
    }
    out
}
