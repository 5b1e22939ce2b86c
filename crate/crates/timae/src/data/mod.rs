//! Everything upstream of the model: ingestion, synthetic generation,
//! chronological splitting, windowing, normalization, augmentation and
//! equidistant subsampling.

mod augment;
mod csv_io;
mod normalize;
mod split;
mod synthetic;
mod window;

pub use augment::{augment, AugmentKind, AugmentParams};
pub use csv_io::{load_csv, CsvSchema, NanPolicy};
pub use normalize::Normalizer;
pub use split::{split, SplitSpec, Splits};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use window::{make_windows, stack, supervised_windows, window_starts, WindowBatch};

use crate::error::{Error, Result};

/// A `[T x m]` multivariate observation matrix with channel metadata.
///
/// Values are stored row-major (time-major). Timestamps, when present,
/// are opaque strings carried along for reporting; they are never
/// interpreted.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    len: usize,
    channels: Vec<String>,
    timestamps: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, len: usize, channels: Vec<String>) -> Result<TimeSeries> {
        if len == 0 || channels.is_empty() || values.len() != len * channels.len() {
            return Err(Error::Config(format!(
                "time series needs T >= 1 and m >= 1 with T*m values; got T={len}, m={}, {} values",
                channels.len(),
                values.len()
            )));
        }
        Ok(TimeSeries {
            values,
            len,
            channels,
            timestamps: None,
        })
    }

    pub fn with_timestamps(mut self, timestamps: Vec<String>) -> Result<TimeSeries> {
        if timestamps.len() != self.len {
            return Err(Error::Config(format!(
                "{} timestamps for {} rows",
                timestamps.len(),
                self.len
            )));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    /// Number of timesteps T.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false // T >= 1 by construction
    }

    /// Number of channels m.
    pub fn channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channels
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    /// Row-major `[T x m]` values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, t: usize, c: usize) -> f64 {
        self.values[t * self.channels.len() + c]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let m = self.channels.len();
        &self.values[t * m..(t + 1) * m]
    }

    /// The contiguous block `[start, end)` of timesteps.
    pub fn slice(&self, start: usize, end: usize) -> Result<TimeSeries> {
        if start >= end || end > self.len {
            return Err(Error::Config(format!(
                "invalid slice [{start}, {end}) of series with T={}",
                self.len
            )));
        }
        let m = self.channels.len();
        let ts = TimeSeries {
            values: self.values[start * m..end * m].to_vec(),
            len: end - start,
            channels: self.channels.clone(),
            timestamps: self
                .timestamps
                .as_ref()
                .map(|t| t[start..end].to_vec()),
        };
        Ok(ts)
    }

    pub(crate) fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> TimeSeries {
        let m = self.channels.len();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % m, v))
            .collect();
        TimeSeries {
            values,
            len: self.len,
            channels: self.channels.clone(),
            timestamps: self.timestamps.clone(),
        }
    }
}

/// Keeps at most `max_len` samples by retaining equidistant indices
/// `round(i * (T-1) / (L'-1))`; first and last samples always survive.
pub fn equidistant_subsample(ts: &TimeSeries, max_len: usize) -> Result<TimeSeries> {
    if max_len < 2 {
        return Err(Error::InvalidParameter {
            op: "equidistant_subsample",
            message: format!("max_len must be at least 2, got {max_len}"),
        });
    }
    if ts.len() <= max_len {
        return Ok(ts.clone());
    }
    let t_max = (ts.len() - 1) as f64;
    let m = ts.channels();
    let mut values = Vec::with_capacity(max_len * m);
    let mut stamps = ts.timestamps().map(|_| Vec::with_capacity(max_len));
    for i in 0..max_len {
        let src = ((i as f64) * t_max / ((max_len - 1) as f64)).round() as usize;
        values.extend_from_slice(ts.row(src));
        if let (Some(out), Some(all)) = (stamps.as_mut(), ts.timestamps()) {
            out.push(all[src].clone());
        }
    }
    let mut out = TimeSeries::new(values, max_len, ts.channel_names().to_vec())?;
    if let Some(s) = stamps {
        out = out.with_timestamps(s)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> TimeSeries {
        TimeSeries::new((0..n).map(|v| v as f64).collect(), n, vec!["x".into()]).unwrap()
    }

    #[test]
    fn subsample_identity_below_cap() {
        let ts = ramp(500);
        let out = equidistant_subsample(&ts, 1024).unwrap();
        assert_eq!(out, ts);
    }

    #[test]
    fn subsample_keeps_endpoints() {
        let ts = ramp(2048);
        let out = equidistant_subsample(&ts, 1024).unwrap();
        assert_eq!(out.len(), 1024);
        assert_eq!(out.value(0, 0), 0.0);
        assert_eq!(out.value(1023, 0), 2047.0);
    }

    #[test]
    fn subsample_preserves_linear_ramp() {
        let ts = ramp(3000);
        let out = equidistant_subsample(&ts, 1000).unwrap();
        // equidistant indices of a linear ramp stay (approximately) linear
        let step = out.value(1, 0) - out.value(0, 0);
        for t in 1..out.len() {
            let d = out.value(t, 0) - out.value(t - 1, 0);
            assert!((d - step).abs() <= 1.0, "step {d} vs {step}");
        }
    }
}
