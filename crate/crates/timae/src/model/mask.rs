//! Masking strategies: which token positions the encoder may see.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// How masked positions are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskStrategy {
    /// Uniform sample without replacement (the default).
    Random,
    /// The trailing block: reconstruct the future from history, the
    /// classic forecasting setup.
    Continuous,
    /// A coin flip per draw between masking the trailing block and
    /// masking the leading block (reconstruct history from the future).
    Split,
    /// Contiguous masked runs of length four placed equidistantly.
    Periodic,
}

impl std::str::FromStr for MaskStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<MaskStrategy> {
        match s {
            "random" => Ok(MaskStrategy::Random),
            "continuous" => Ok(MaskStrategy::Continuous),
            "split" => Ok(MaskStrategy::Split),
            "periodic" => Ok(MaskStrategy::Periodic),
            other => Err(Error::InvalidParameter {
                op: "mask strategy",
                message: format!(
                    "unknown strategy {other:?} (expected random|continuous|split|periodic)"
                ),
            }),
        }
    }
}

impl std::fmt::Display for MaskStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MaskStrategy::Random => "random",
            MaskStrategy::Continuous => "continuous",
            MaskStrategy::Split => "split",
            MaskStrategy::Periodic => "periodic",
        };
        f.write_str(s)
    }
}

/// Length of each masked run under the periodic strategy.
pub const PERIODIC_RUN: usize = 4;

/// A partition of `0..len` into visible and masked positions, both kept
/// sorted, together with the strategy and ratio that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    pub strategy: MaskStrategy,
    pub ratio: f64,
    pub len: usize,
    pub visible_idx: Vec<usize>,
    pub masked_idx: Vec<usize>,
}

impl MaskSpec {
    pub fn visible(&self) -> usize {
        self.visible_idx.len()
    }

    pub fn masked(&self) -> usize {
        self.masked_idx.len()
    }

    /// A mask with every position visible (representation extraction).
    pub fn all_visible(len: usize) -> MaskSpec {
        MaskSpec {
            strategy: MaskStrategy::Random,
            ratio: 0.0,
            len,
            visible_idx: (0..len).collect(),
            masked_idx: Vec::new(),
        }
    }

    /// The direct-forecast construction: the trailing `horizon` positions
    /// of a window of `history + horizon` tokens are masked.
    pub fn forecast_tail(history: usize, horizon: usize) -> Result<MaskSpec> {
        if history == 0 || horizon == 0 {
            return Err(Error::InvalidParameter {
                op: "forecast_tail",
                message: format!("need history >= 1 and horizon >= 1, got {history} and {horizon}"),
            });
        }
        let len = history + horizon;
        Ok(MaskSpec {
            strategy: MaskStrategy::Continuous,
            ratio: horizon as f64 / len as f64,
            len,
            visible_idx: (0..history).collect(),
            masked_idx: (history..len).collect(),
        })
    }
}

/// Draws a mask over `len` positions at the given ratio.
///
/// `round(r * len)` positions are masked for every strategy. Periodic
/// masking additionally requires that count to be a multiple of the run
/// length so that every masked run has length exactly four.
pub fn make_mask(len: usize, strategy: MaskStrategy, ratio: f64, rng: &mut Rng) -> Result<MaskSpec> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidParameter {
            op: "make_mask",
            message: format!("ratio must be in [0, 1), got {ratio}"),
        });
    }
    if len == 0 {
        return Err(Error::InvalidParameter {
            op: "make_mask",
            message: "cannot mask an empty window".into(),
        });
    }
    let n_masked = (ratio * len as f64).round() as usize;
    if n_masked >= len {
        return Err(Error::InvalidParameter {
            op: "make_mask",
            message: format!("round({ratio} * {len}) = {n_masked} leaves no visible tokens"),
        });
    }

    let masked_idx: Vec<usize> = match strategy {
        MaskStrategy::Random => {
            let mut all: Vec<usize> = (0..len).collect();
            all.shuffle(rng);
            let mut m = all[..n_masked].to_vec();
            m.sort_unstable();
            m
        }
        MaskStrategy::Continuous => (len - n_masked..len).collect(),
        MaskStrategy::Split => {
            if rng.gen_bool(0.5) {
                (len - n_masked..len).collect()
            } else {
                (0..n_masked).collect()
            }
        }
        MaskStrategy::Periodic => {
            if n_masked % PERIODIC_RUN != 0 {
                return Err(Error::InvalidParameter {
                    op: "make_mask",
                    message: format!(
                        "periodic masking needs round(r*L) divisible by {PERIODIC_RUN}; \
                         got {n_masked} for L={len}, r={ratio}"
                    ),
                });
            }
            let n_runs = n_masked / PERIODIC_RUN;
            let mut m = Vec::with_capacity(n_masked);
            for run in 0..n_runs {
                let start = (run * len) / n_runs;
                for j in 0..PERIODIC_RUN {
                    m.push(start + j);
                }
            }
            if m.iter().any(|&i| i >= len) || m.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter {
                    op: "make_mask",
                    message: format!(
                        "periodic runs overlap for L={len}, r={ratio} (ratio too high)"
                    ),
                });
            }
            m
        }
    };

    let mut is_masked = vec![false; len];
    for &i in &masked_idx {
        is_masked[i] = true;
    }
    let visible_idx: Vec<usize> = (0..len).filter(|&i| !is_masked[i]).collect();
    Ok(MaskSpec {
        strategy,
        ratio,
        len,
        visible_idx,
        masked_idx,
    })
}
