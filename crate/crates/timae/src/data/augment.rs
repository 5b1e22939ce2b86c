//! Window-level data augmentation: scaling, shifting, jittering.
//!
//! Magnitudes are deliberately small and conventional; all three kinds
//! reduce to the identity at their degenerate parameter values.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::WindowBatch;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentKind {
    /// Multiply each window by `s ~ U(1-scale_range, 1+scale_range)`.
    Scaling,
    /// Add `c ~ U(-shift_range, shift_range) * channel_std`, one constant
    /// per (window, channel).
    Shifting,
    /// Add Gaussian noise with std `jitter_sigma * channel_std` per element.
    Jittering,
}

impl std::str::FromStr for AugmentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<AugmentKind> {
        match s {
            "scaling" => Ok(AugmentKind::Scaling),
            "shifting" => Ok(AugmentKind::Shifting),
            "jittering" => Ok(AugmentKind::Jittering),
            other => Err(Error::InvalidParameter {
                op: "augment",
                message: format!("unknown kind {other:?} (expected scaling|shifting|jittering)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub scale_range: f64,
    pub shift_range: f64,
    pub jitter_sigma: f64,
}

impl Default for AugmentParams {
    fn default() -> AugmentParams {
        AugmentParams {
            scale_range: 0.2,
            shift_range: 0.1,
            jitter_sigma: 0.05,
        }
    }
}

/// Per-channel standard deviation within one window (used to scale the
/// shifting and jittering magnitudes to the data).
fn window_channel_std(inputs: &[f64], window_len: usize, channels: usize, b: usize) -> Vec<f64> {
    let base = b * window_len * channels;
    let mut mean = vec![0.0; channels];
    for t in 0..window_len {
        for (c, mu) in mean.iter_mut().enumerate() {
            *mu += inputs[base + t * channels + c];
        }
    }
    for mu in &mut mean {
        *mu /= window_len as f64;
    }
    let mut var = vec![0.0; channels];
    for t in 0..window_len {
        for (c, v) in var.iter_mut().enumerate() {
            let d = inputs[base + t * channels + c] - mean[c];
            *v += d * d;
        }
    }
    var.iter().map(|v| (v / window_len as f64).sqrt()).collect()
}

/// Applies one augmentation kind to every window in the batch.
/// Targets, when present, are left untouched.
pub fn augment(
    batch: &WindowBatch,
    kind: AugmentKind,
    rng: &mut Rng,
    params: &AugmentParams,
) -> Result<WindowBatch> {
    let mut out = batch.clone();
    let (bsz, len, m) = (batch.batch, batch.window_len, batch.channels);
    match kind {
        AugmentKind::Scaling => {
            for b in 0..bsz {
                let s = if params.scale_range == 0.0 {
                    1.0
                } else {
                    rng.gen_range(1.0 - params.scale_range..1.0 + params.scale_range)
                };
                for v in &mut out.inputs[b * len * m..(b + 1) * len * m] {
                    *v *= s;
                }
            }
        }
        AugmentKind::Shifting => {
            for b in 0..bsz {
                let stds = window_channel_std(&batch.inputs, len, m, b);
                let shifts: Vec<f64> = (0..m)
                    .map(|c| {
                        if params.shift_range == 0.0 {
                            0.0
                        } else {
                            rng.gen_range(-params.shift_range..params.shift_range) * stds[c]
                        }
                    })
                    .collect();
                for t in 0..len {
                    for c in 0..m {
                        out.inputs[(b * len + t) * m + c] += shifts[c];
                    }
                }
            }
        }
        AugmentKind::Jittering => {
            for b in 0..bsz {
                let stds = window_channel_std(&batch.inputs, len, m, b);
                for t in 0..len {
                    for c in 0..m {
                        let sigma = params.jitter_sigma * stds[c];
                        if sigma > 0.0 {
                            let noise = Normal::new(0.0, sigma)
                                .map_err(|e| Error::Numeric {
                                    op: "augment",
                                    message: e.to_string(),
                                })?
                                .sample(rng);
                            out.inputs[(b * len + t) * m + c] += noise;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_windows, stack, TimeSeries};
    use rand::SeedableRng;

    fn batch() -> WindowBatch {
        let ts = TimeSeries::new(
            (0..24).map(|v| (v as f64).sin() + v as f64 * 0.1).collect(),
            24,
            vec!["x".into()],
        )
        .unwrap();
        stack(&make_windows(&ts, 8, 8).unwrap()).unwrap()
    }

    #[test]
    fn degenerate_parameters_are_identity() {
        let b = batch();
        let mut rng = Rng::seed_from_u64(0);
        let zero = AugmentParams {
            scale_range: 0.0,
            shift_range: 0.0,
            jitter_sigma: 0.0,
        };
        for kind in [
            AugmentKind::Scaling,
            AugmentKind::Shifting,
            AugmentKind::Jittering,
        ] {
            let out = augment(&b, kind, &mut rng, &zero).unwrap();
            assert_eq!(out.inputs, b.inputs, "{kind:?} at zero magnitude");
        }
    }

    #[test]
    fn shifting_adds_one_constant_per_window() {
        let b = batch();
        let mut rng = Rng::seed_from_u64(3);
        let out = augment(&b, AugmentKind::Shifting, &mut rng, &AugmentParams::default()).unwrap();
        for w in 0..b.batch {
            let base = w * b.window_len;
            let delta = out.inputs[base] - b.inputs[base];
            for t in 0..b.window_len {
                let d = out.inputs[base + t] - b.inputs[base + t];
                assert!((d - delta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let err = "warp".parse::<AugmentKind>();
        assert!(matches!(err, Err(Error::InvalidParameter { .. })));
    }
}
