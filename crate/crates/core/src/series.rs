//! Uniformly sampled time series and its CSV form.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// A finite, uniformly sampled series of real observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    sample_period: f64,
}

/// Relative tolerance when checking grid uniformity.
const GRID_TOL: f64 = 1e-9;

impl TimeSeries {
    /// Builds a series from explicit timestamps, validating uniform spacing.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: values.len(),
                context: "times vs values",
            });
        }
        if times.len() < 2 {
            return Err(Error::TooShort {
                needed: 2,
                got: times.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite value at index {i}")));
            }
        }
        let step = times[1] - times[0];
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Domain(format!(
                "non-increasing timestamps at index 1 (step {step})"
            )));
        }
        let tol = GRID_TOL * step.abs().max(1.0);
        for i in 1..times.len() {
            let d = times[i] - times[i - 1];
            if (d - step).abs() > tol {
                return Err(Error::Domain(format!(
                    "non-uniform timestamp spacing at index {i}: expected step {step}, got {d}"
                )));
            }
        }
        Ok(Self {
            times,
            values,
            sample_period: step,
        })
    }

    /// Builds a series on the grid `0, period, 2*period, ...`.
    pub fn from_values(values: Vec<f64>, period: f64) -> Result<Self> {
        let times = (0..values.len()).map(|k| k as f64 * period).collect();
        Self::new(times, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.times.clone(), values)
    }
}

/// Renders `t,value[,label]` rows with a header. Floats use the shortest
/// representation that parses back to the same bits, so files round-trip
/// and reruns are byte-identical.
pub fn render_series_csv(series: &TimeSeries, labels: Option<&[bool]>) -> String {
    let mut out = String::new();
    match labels {
        Some(lab) => {
            out.push_str("t,value,label\n");
            for i in 0..series.len() {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    series.times[i],
                    series.values[i],
                    u8::from(lab[i])
                );
            }
        }
        None => {
            out.push_str("t,value\n");
            for i in 0..series.len() {
                let _ = writeln!(out, "{},{}", series.times[i], series.values[i]);
            }
        }
    }
    out
}

/// Parses a `t,value[,label]` CSV with a header row.
///
/// Timestamps must form a uniform grid; a gap, duplicate, or backward step
/// is a hard error naming the offending row (1-based, header included).
pub fn parse_series_csv(name: &str, text: &str) -> Result<(TimeSeries, Option<Vec<bool>>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Malformed {
        file: name.to_string(),
        row: 1,
        msg: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_label = match cols.as_slice() {
        ["t", "value"] => false,
        ["t", "value", "label"] => true,
        _ => {
            return Err(Error::Malformed {
                file: name.to_string(),
                row: 1,
                msg: format!("expected header 't,value[,label]', got '{header}'"),
            })
        }
    };

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let want = if with_label { 3 } else { 2 };
        if fields.len() != want {
            return Err(Error::Malformed {
                file: name.to_string(),
                row,
                msg: format!("expected {want} columns, got {}", fields.len()),
            });
        }
        let t: f64 = fields[0].parse().map_err(|_| Error::Malformed {
            file: name.to_string(),
            row,
            msg: format!("unparseable timestamp '{}'", fields[0]),
        })?;
        let v: f64 = fields[1].parse().map_err(|_| Error::Malformed {
            file: name.to_string(),
            row,
            msg: format!("unparseable value '{}'", fields[1]),
        })?;
        if with_label {
            let l: u8 = fields[2].parse().map_err(|_| Error::Malformed {
                file: name.to_string(),
                row,
                msg: format!("unparseable label '{}'", fields[2]),
            })?;
            if l > 1 {
                return Err(Error::Malformed {
                    file: name.to_string(),
                    row,
                    msg: format!("label must be 0 or 1, got {l}"),
                });
            }
            labels.push(l == 1);
        }
        times.push(t);
        values.push(v);
    }

    if times.len() < 2 {
        return Err(Error::Malformed {
            file: name.to_string(),
            row: times.len() + 1,
            msg: "need at least 2 data rows".into(),
        });
    }
    let step = times[1] - times[0];
    if !(step > 0.0) {
        return Err(Error::Malformed {
            file: name.to_string(),
            row: 3,
            msg: format!("duplicate or backward timestamp (step {step})"),
        });
    }
    let tol = GRID_TOL * step.abs().max(1.0);
    for i in 1..times.len() {
        let d = times[i] - times[i - 1];
        if (d - step).abs() > tol {
            let kind = if d <= tol { "duplicate timestamp" } else { "timestamp gap" };
            return Err(Error::Malformed {
                file: name.to_string(),
                row: i + 2,
                msg: format!("{kind}: expected step {step}, got {d}"),
            });
        }
    }

    let series = TimeSeries::new(times, values)?;
    Ok((series, if with_label { Some(labels) } else { None }))
}

/// Reads a series CSV from disk.
pub fn read_series_csv(path: &Path) -> Result<(TimeSeries, Option<Vec<bool>>)> {
    let text = std::fs::read_to_string(path)?;
    parse_series_csv(&path.display().to_string(), &text)
}
