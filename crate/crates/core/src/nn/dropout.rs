//! Inverted dropout masks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-element keep factors: `0` with probability `rate`, otherwise
/// `1 / (1 - rate)` so the expected activation is unchanged. Inference
/// simply skips the mask. `rate` must lie in `[0, 1)`.
pub fn dropout_mask<T: Scalar>(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid("dropout", format!("rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(vec![T::one(); len]);
    }
    let keep = T::of(1.0 / (1.0 - rate));
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn mask_is_unbiased_and_scaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rate = 0.1;
        let mask: Vec<f64> = dropout_mask(100_000, rate, &mut rng).unwrap();
        let zeros = mask.iter().filter(|&&m| m == 0.0).count();
        let frac = zeros as f64 / mask.len() as f64;
        assert!((frac - rate).abs() < 0.005, "dropped fraction {frac}");
        for &m in &mask {
            assert!(m == 0.0 || (m - 1.0 / 0.9).abs() < 1e-12);
        }
        let mean: f64 = mask.iter().sum::<f64>() / mask.len() as f64;
        assert!((mean - 1.0).abs() < 0.01);
    }

    #[test]
    fn zero_rate_keeps_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mask: Vec<f32> = dropout_mask(64, 0.0, &mut rng).unwrap();
        assert!(mask.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn invalid_rates_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(dropout_mask::<f64>(8, 1.0, &mut rng).is_err());
        assert!(dropout_mask::<f64>(8, -0.1, &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_mask() {
        let a: Vec<f64> = dropout_mask(256, 0.3, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b: Vec<f64> = dropout_mask(256, 0.3, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }
}
