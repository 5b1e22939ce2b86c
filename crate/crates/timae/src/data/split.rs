//! Chronological train/validation/test splitting.

use super::TimeSeries;
use crate::error::{Error, Result};

/// Split ratios over the time axis; blocks are contiguous and ordered
/// train < val < test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitSpec {
    pub const SIX_TWO_TWO: SplitSpec = SplitSpec {
        train: 0.6,
        val: 0.2,
        test: 0.2,
    };
    pub const SEVEN_ONE_TWO: SplitSpec = SplitSpec {
        train: 0.7,
        val: 0.1,
        test: 0.2,
    };

    pub fn new(train: f64, val: f64, test: f64) -> Result<SplitSpec> {
        let spec = SplitSpec { train, val, test };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&p| !(0.0..=1.0).contains(&p)) || self.train == 0.0 {
            return Err(Error::Config(format!("invalid split ratios {self:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    /// Boundary indices `(train_end, val_end)`; cumulative floors of the
    /// ratios, so the test block absorbs the rounding remainder.
    pub fn boundaries(&self, len: usize) -> (usize, usize) {
        let train_end = (self.train * len as f64).floor() as usize;
        let val_end = ((self.train + self.val) * len as f64).floor() as usize;
        (train_end, val_end)
    }
}

/// The three chronological blocks. Empty val/test blocks are allowed
/// here; requesting windows from an empty block fails at windowing time.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: TimeSeries,
    pub val: Option<TimeSeries>,
    pub test: Option<TimeSeries>,
}

pub fn split(ts: &TimeSeries, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    let (train_end, val_end) = spec.boundaries(ts.len());
    if train_end == 0 {
        return Err(Error::Config(format!(
            "train split is empty for T={} with ratios {spec:?}",
            ts.len()
        )));
    }
    let train = ts.slice(0, train_end)?;
    let val = (val_end > train_end)
        .then(|| ts.slice(train_end, val_end))
        .transpose()?;
    let test = (ts.len() > val_end)
        .then(|| ts.slice(val_end, ts.len()))
        .transpose()?;
    Ok(Splits { train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize) -> TimeSeries {
        TimeSeries::new((0..n).map(|v| v as f64).collect(), n, vec!["x".into()]).unwrap()
    }

    #[test]
    fn six_two_two_on_thousand() {
        let s = split(&series(1000), &SplitSpec::SIX_TWO_TWO).unwrap();
        assert_eq!(s.train.len(), 600);
        assert_eq!(s.val.unwrap().len(), 200);
        assert_eq!(s.test.unwrap().len(), 200);
    }

    #[test]
    fn seven_one_two_on_ten() {
        let s = split(&series(10), &SplitSpec::SEVEN_ONE_TWO).unwrap();
        assert_eq!(s.train.len(), 7);
        assert_eq!(s.val.unwrap().len(), 1);
        assert_eq!(s.test.unwrap().len(), 2);
    }

    #[test]
    fn all_in_train_leaves_val_test_empty() {
        let s = split(&series(50), &SplitSpec::new(1.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(s.train.len(), 50);
        assert!(s.val.is_none());
        assert!(s.test.is_none());
    }

    #[test]
    fn blocks_are_contiguous_and_ordered() {
        let ts = series(100);
        let s = split(&ts, &SplitSpec::SIX_TWO_TWO).unwrap();
        assert_eq!(s.train.value(59, 0), 59.0);
        assert_eq!(s.val.as_ref().unwrap().value(0, 0), 60.0);
        assert_eq!(s.test.as_ref().unwrap().value(0, 0), 80.0);
    }

    #[test]
    fn bad_ratios_rejected() {
        assert!(SplitSpec::new(0.5, 0.2, 0.2).is_err());
        assert!(SplitSpec::new(0.0, 0.8, 0.2).is_err());
    }
}
