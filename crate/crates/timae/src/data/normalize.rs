//! Per-channel z-score normalization with statistics fit on the train
//! split only.

use super::TimeSeries;

/// Per-channel affine transform `(x - mean) / std` plus its inverse.
/// Channels whose train-split standard deviation is zero pass through
/// unscaled (with a warning) instead of dividing by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    mean: Vec<f64>,
    std: Vec<f64>,
    passthrough: Vec<bool>,
}

impl Normalizer {
    /// Fits statistics on (what must be) the train split.
    pub fn fit(train: &TimeSeries) -> Normalizer {
        let m = train.channels();
        let n = train.len() as f64;
        let mut mean = vec![0.0; m];
        for t in 0..train.len() {
            for (c, mu) in mean.iter_mut().enumerate() {
                *mu += train.value(t, c);
            }
        }
        for mu in &mut mean {
            *mu /= n;
        }
        let mut var = vec![0.0; m];
        for t in 0..train.len() {
            for (c, v) in var.iter_mut().enumerate() {
                let d = train.value(t, c) - mean[c];
                *v += d * d;
            }
        }
        let mut std = vec![0.0; m];
        let mut passthrough = vec![false; m];
        for c in 0..m {
            let s = (var[c] / n).sqrt();
            if s > 0.0 {
                std[c] = s;
            } else {
                std[c] = 1.0;
                passthrough[c] = true;
                log::warn!(
                    "channel {:?} has zero variance on the train split; passing through unscaled",
                    train.channel_names()[c]
                );
            }
        }
        Normalizer {
            mean,
            std,
            passthrough,
        }
    }

    /// Identity transform (for the raw-units path).
    pub fn identity(channels: usize) -> Normalizer {
        Normalizer {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
            passthrough: vec![true; channels],
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn is_passthrough(&self, channel: usize) -> bool {
        self.passthrough[channel]
    }

    pub fn apply(&self, ts: &TimeSeries) -> TimeSeries {
        ts.map_values(|c, v| {
            if self.passthrough[c] {
                v
            } else {
                (v - self.mean[c]) / self.std[c]
            }
        })
    }

    pub fn invert(&self, ts: &TimeSeries) -> TimeSeries {
        ts.map_values(|c, v| {
            if self.passthrough[c] {
                v
            } else {
                v * self.std[c] + self.mean[c]
            }
        })
    }

    /// Normalizes a raw value in the given channel.
    pub fn normalize_value(&self, channel: usize, v: f64) -> f64 {
        if self.passthrough[channel] {
            v
        } else {
            (v - self.mean[channel]) / self.std[channel]
        }
    }

    /// Maps a normalized value in the given channel back to raw units.
    pub fn invert_value(&self, channel: usize, v: f64) -> f64 {
        if self.passthrough[channel] {
            v
        } else {
            v * self.std[channel] + self.mean[channel]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_channel(values: Vec<f64>) -> TimeSeries {
        let len = values.len() / 2;
        TimeSeries::new(values, len, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn constant_channel_passes_through() {
        let ts = two_channel(vec![5.0, 1.0, 5.0, 2.0, 5.0, 3.0]);
        let norm = Normalizer::fit(&ts);
        assert!(norm.is_passthrough(0));
        assert!(!norm.is_passthrough(1));
        let out = norm.apply(&ts);
        assert_eq!(out.value(0, 0), 5.0);
    }

    #[test]
    fn roundtrip_within_tolerance() {
        let ts = two_channel(vec![1.0, -3.0, 2.5, 7.0, 4.0, 0.1, -2.0, 5.5]);
        let norm = Normalizer::fit(&ts);
        let back = norm.invert(&norm.apply(&ts));
        for (a, b) in ts.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn statistics_exclude_later_splits() {
        // construct val data with a shifted mean; fitting on train alone
        // must leave the train block standardized and the val block shifted
        let train = two_channel(vec![0.0, 0.0, 2.0, 2.0]);
        let val = two_channel(vec![10.0, 10.0, 12.0, 12.0]);
        let norm = Normalizer::fit(&train);
        let train_n = norm.apply(&train);
        let val_n = norm.apply(&val);
        let train_mean: f64 =
            (0..train_n.len()).map(|t| train_n.value(t, 0)).sum::<f64>() / train_n.len() as f64;
        let val_mean: f64 =
            (0..val_n.len()).map(|t| val_n.value(t, 0)).sum::<f64>() / val_n.len() as f64;
        assert!(train_mean.abs() < 1e-12);
        assert!(val_mean > 5.0, "val mean {val_mean} should stay shifted");
    }
}
