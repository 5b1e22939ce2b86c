//! Fixed sinusoidal positional encoding.

use std::collections::BTreeMap;
use std::sync::Mutex;

use once_cell::sync::Lazy;

use crate::error::{Error, Result};

/// `PE[pos, 2i] = sin(pos / 10000^(2i/d))`,
/// `PE[pos, 2i+1] = cos(pos / 10000^(2i/d))`, row-major `[len x d]`.
///
/// Computed in `f64`; narrow at the use site if needed.
pub fn positional_encoding(len: usize, d: usize) -> Result<Vec<f64>> {
    if d == 0 || d % 2 != 0 {
        return Err(Error::Config(format!(
            "positional encoding width must be even and positive, got {d}"
        )));
    }
    let mut table = vec![0.0f64; len * d];
    for pos in 0..len {
        for i in 0..d / 2 {
            let denom = 10000f64.powf(2.0 * i as f64 / d as f64);
            let angle = pos as f64 / denom;
            table[pos * d + 2 * i] = angle.sin();
            table[pos * d + 2 * i + 1] = angle.cos();
        }
    }
    Ok(table)
}

static PE_CACHE: Lazy<Mutex<BTreeMap<(usize, usize), std::sync::Arc<Vec<f64>>>>> =
    Lazy::new(|| Mutex::new(BTreeMap::new()));

/// The same table, computed once per `(len, d)` and shared thereafter.
pub fn positional_encoding_cached(len: usize, d: usize) -> Result<std::sync::Arc<Vec<f64>>> {
    let mut cache = PE_CACHE.lock().expect("PE cache poisoned");
    if let Some(hit) = cache.get(&(len, d)) {
        return Ok(hit.clone());
    }
    let table = std::sync::Arc::new(positional_encoding(len, d)?);
    cache.insert((len, d), table.clone());
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn position_zero_alternates_zero_one() {
        let pe = positional_encoding(4, 8).unwrap();
        for i in 0..4 {
            assert_eq!(pe[2 * i], 0.0, "sin(0)");
            assert_eq!(pe[2 * i + 1], 1.0, "cos(0)");
        }
    }

    #[test]
    fn first_position_first_column_is_sin_one() {
        let pe = positional_encoding(2, 6).unwrap();
        assert!((pe[6] - 1f64.sin()).abs() < 1e-12);
        assert!((pe[6] - 0.841471).abs() < 1e-6);
    }

    #[test]
    fn all_entries_bounded_by_one() {
        let pe = positional_encoding(128, 64).unwrap();
        assert!(pe.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn odd_width_rejected() {
        assert!(positional_encoding(4, 7).is_err());
    }

    #[test]
    fn cache_returns_identical_table() {
        let a = positional_encoding_cached(32, 16).unwrap();
        let b = positional_encoding_cached(32, 16).unwrap();
        assert!(std::sync::Arc::ptr_eq(&a, &b));
        assert_eq!(*a, positional_encoding(32, 16).unwrap());
    }
}
