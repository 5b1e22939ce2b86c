//! Sliding-window extraction.

use super::TimeSeries;
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// A batch of input windows `[B x L x m]`, with optional forecast
/// targets `[B x k x n]` for supervised fine-tuning.
#[derive(Debug, Clone)]
pub struct WindowBatch {
    pub inputs: Vec<f64>,
    pub batch: usize,
    pub window_len: usize,
    pub channels: usize,
    pub targets: Option<Vec<f64>>,
    pub horizon: usize,
    pub target_channels: usize,
}

impl WindowBatch {
    /// The inputs as a constant tensor of the requested element width.
    pub fn input_tensor<T: Element>(&self) -> Result<Tensor<T>> {
        let data = self.inputs.iter().map(|&v| T::from_f64(v)).collect();
        Tensor::constant(data, &[self.batch, self.window_len, self.channels])
    }

    pub fn target_tensor<T: Element>(&self) -> Result<Tensor<T>> {
        let targets = self.targets.as_ref().ok_or_else(|| Error::Contract {
            op: "target_tensor",
            message: "batch has no targets".into(),
        })?;
        let data = targets.iter().map(|&v| T::from_f64(v)).collect();
        Tensor::constant(data, &[self.batch, self.horizon, self.target_channels])
    }
}

/// Start indices of sliding windows of length `window_len` (plus
/// `horizon` when supervised) at the given stride.
pub fn window_starts(
    series_len: usize,
    window_len: usize,
    stride: usize,
    horizon: usize,
) -> Result<Vec<usize>> {
    if window_len == 0 || stride == 0 {
        return Err(Error::Config(
            "window length and stride must be positive".into(),
        ));
    }
    let span = window_len + horizon;
    if span > series_len {
        return Err(Error::Config(format!(
            "window span {span} (L={window_len}, k={horizon}) exceeds split length {series_len}"
        )));
    }
    Ok((0..=series_len - span).step_by(stride).collect())
}

/// Unsupervised windows `[t, t+L)`.
pub fn make_windows(
    ts: &TimeSeries,
    window_len: usize,
    stride: usize,
) -> Result<Vec<WindowBatch>> {
    let starts = window_starts(ts.len(), window_len, stride, 0)?;
    Ok(starts
        .iter()
        .map(|&s| single_window(ts, s, window_len, 0, 0))
        .collect())
}

/// Supervised pairs: history `[t, t+L)` with future `[t+L, t+L+k)`.
/// The target keeps the last `target_channels` channels.
pub fn supervised_windows(
    ts: &TimeSeries,
    window_len: usize,
    stride: usize,
    horizon: usize,
    target_channels: usize,
) -> Result<Vec<WindowBatch>> {
    if horizon == 0 || target_channels == 0 || target_channels > ts.channels() {
        return Err(Error::Config(format!(
            "horizon {horizon} and target channels {target_channels} invalid for m={}",
            ts.channels()
        )));
    }
    let starts = window_starts(ts.len(), window_len, stride, horizon)?;
    Ok(starts
        .iter()
        .map(|&s| single_window(ts, s, window_len, horizon, target_channels))
        .collect())
}

fn single_window(
    ts: &TimeSeries,
    start: usize,
    window_len: usize,
    horizon: usize,
    target_channels: usize,
) -> WindowBatch {
    let m = ts.channels();
    let mut inputs = Vec::with_capacity(window_len * m);
    for t in start..start + window_len {
        inputs.extend_from_slice(ts.row(t));
    }
    let targets = (horizon > 0).then(|| {
        let mut tgt = Vec::with_capacity(horizon * target_channels);
        for t in start + window_len..start + window_len + horizon {
            let row = ts.row(t);
            tgt.extend_from_slice(&row[m - target_channels..]);
        }
        tgt
    });
    WindowBatch {
        inputs,
        batch: 1,
        window_len,
        channels: m,
        targets,
        horizon,
        target_channels,
    }
}

/// Stacks single-window batches into one `[B x L x m]` batch.
pub fn stack(windows: &[WindowBatch]) -> Result<WindowBatch> {
    let first = windows.first().ok_or_else(|| Error::Contract {
        op: "stack",
        message: "no windows to stack".into(),
    })?;
    let mut inputs = Vec::with_capacity(windows.len() * first.inputs.len());
    let mut targets = first.targets.as_ref().map(|t| {
        Vec::with_capacity(windows.len() * t.len())
    });
    let mut batch = 0;
    for w in windows {
        if w.window_len != first.window_len || w.channels != first.channels {
            return Err(Error::Contract {
                op: "stack",
                message: "inconsistent window shapes".into(),
            });
        }
        inputs.extend_from_slice(&w.inputs);
        if let (Some(acc), Some(t)) = (targets.as_mut(), w.targets.as_ref()) {
            acc.extend_from_slice(t);
        }
        batch += w.batch;
    }
    Ok(WindowBatch {
        inputs,
        batch,
        window_len: first.window_len,
        channels: first.channels,
        targets,
        horizon: first.horizon,
        target_channels: first.target_channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize) -> TimeSeries {
        TimeSeries::new((0..n).map(|v| v as f64).collect(), n, vec!["x".into()]).unwrap()
    }

    #[test]
    fn unsupervised_count_formula() {
        // T - L + 1 windows at stride 1
        let w = make_windows(&series(5), 3, 1).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].inputs, vec![0.0, 1.0, 2.0]);
        assert_eq!(w[2].inputs, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn supervised_count_formula() {
        // T - L - k + 1 windows
        let w = supervised_windows(&series(5), 3, 1, 2, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].inputs, vec![0.0, 1.0, 2.0]);
        assert_eq!(w[0].targets.as_ref().unwrap(), &vec![3.0, 4.0]);
    }

    #[test]
    fn stride_equal_to_length_tiles() {
        let w = make_windows(&series(9), 3, 3).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w[1].inputs, vec![3.0, 4.0, 5.0]);
    }

    #[test]
    fn oversized_window_is_config_error() {
        assert!(make_windows(&series(5), 6, 1).is_err());
        assert!(supervised_windows(&series(5), 3, 1, 3, 1).is_err());
    }

    #[test]
    fn stacking_concatenates_batch_dim() {
        let w = make_windows(&series(6), 2, 2).unwrap();
        let b = stack(&w).unwrap();
        assert_eq!(b.batch, 3);
        assert_eq!(b.inputs.len(), 6);
    }
}
