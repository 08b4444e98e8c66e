use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Input range of the uniform class quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantRange {
    pub lo: f64,
    pub hi: f64,
}

impl QuantRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config("encoder.q_range", "needs finite lo < hi"));
        }
        Ok(Self { lo, hi })
    }

    /// Position of `y` within the range, clamped to [0, 1].
    pub fn unit(&self, y: f64) -> f64 {
        ((y.clamp(self.lo, self.hi) - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    /// Empirical [min, max] of calibration samples.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let (lo, hi) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                (lo.min(y), hi.max(y))
            });
        Self::new(lo, hi)
    }
}

/// Uniform quantizer Q_N: maps `y` to a 0-based class in `0..levels`.
///
/// Class = ⌊levels·(clamp(y) − lo)/(hi − lo)⌋, with `y = hi` mapped to the
/// top class.
pub fn quantize_uniform(y: f64, range: QuantRange, levels: usize) -> Result<usize> {
    if y.is_nan() {
        return Err(Error::NonFinite);
    }
    let class = libm::floor(levels as f64 * range.unit(y)) as usize;
    Ok(class.min(levels - 1))
}

/// Midrise quantization of [−1, 1] onto `2^bits` levels.
pub fn quantize_graded(values: &[f64], bits: u32) -> Result<Vec<f64>> {
    if bits < 2 {
        return Err(Error::GradedBits(bits));
    }
    let levels = libm::ldexp(1.0, bits as i32);
    let step = 2.0 / levels;
    Ok(values
        .iter()
        .map(|&x| {
            let idx = libm::floor((x.clamp(-1.0, 1.0) + 1.0) / step).clamp(0.0, levels - 1.0);
            -1.0 + step * (idx + 0.5)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> QuantRange {
        QuantRange::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn uniform_edges_and_midpoint() {
        assert_eq!(quantize_uniform(0.0, unit(), 256).unwrap(), 0);
        assert_eq!(quantize_uniform(1.0, unit(), 256).unwrap(), 255);
        assert_eq!(quantize_uniform(-3.0, unit(), 256).unwrap(), 0);
        assert_eq!(quantize_uniform(7.0, unit(), 256).unwrap(), 255);
        assert!(quantize_uniform(f64::NAN, unit(), 256).is_err());

        // Brute-force bin search: class c holds [c/N, (c+1)/N).
        let y = 0.5;
        let found = (0..256).find(|&c| y >= c as f64 / 256.0 && y < (c + 1) as f64 / 256.0);
        assert_eq!(found, Some(128));
        assert_eq!(quantize_uniform(y, unit(), 256).unwrap(), 128);
    }

    #[test]
    fn graded_two_bits_hits_nearest_level() {
        let input = [-1.0, -0.4, 0.3, 1.0];
        let out = quantize_graded(&input, 2).unwrap();
        let grid = [-0.75, -0.25, 0.25, 0.75];
        for (x, q) in input.iter().zip(&out) {
            let nearest = grid
                .iter()
                .copied()
                .min_by(|a, b| (a - x).abs().partial_cmp(&(b - x).abs()).unwrap())
                .unwrap();
            assert_eq!(*q, nearest);
            assert!((q - x).abs() <= 0.25 + 1e-15);
        }
    }

    #[test]
    fn graded_rejects_one_bit() {
        assert_eq!(quantize_graded(&[0.1], 1), Err(Error::GradedBits(1)));
    }

    #[test]
    fn graded_32_bit_resolution() {
        let xs: Vec<f64> = (0..1000).map(|i| -1.0 + 2.0 * i as f64 / 999.0).collect();
        let q = quantize_graded(&xs, 32).unwrap();
        for (x, y) in xs.iter().zip(&q) {
            assert!((x - y).abs() <= libm::ldexp(1.0, -31));
        }
    }

    proptest! {
        #[test]
        fn uniform_is_monotone(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let r = QuantRange::new(-2.0, 3.0).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantize_uniform(lo, r, 256).unwrap() <= quantize_uniform(hi, r, 256).unwrap());
        }

        #[test]
        fn graded_is_idempotent_and_bounded(xs in proptest::collection::vec(-1.0f64..=1.0, 1..50), bits in 2u32..=16) {
            let once = quantize_graded(&xs, bits).unwrap();
            let twice = quantize_graded(&once, bits).unwrap();
            prop_assert_eq!(&once, &twice);
            let bound = libm::ldexp(1.0, 1 - bits as i32);
            for (x, q) in xs.iter().zip(&once) {
                prop_assert!((x - q).abs() <= bound);
                prop_assert!(q.abs() <= 1.0);
            }
        }
    }
}
