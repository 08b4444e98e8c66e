use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::encoding::EncoderModel;

/// Width of the band `|w| ∈ [1 − ε, 1]` counted as maximal amplitude.
pub const MAX_AMPLITUDE_EPS: f64 = 1.0 / 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub left: f64,
    pub right: f64,
    pub rel_freq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistBin>,
    pub count: usize,
    /// Fraction of entries with |w| ∈ [1 − ε, 1].
    pub max_amplitude_fraction: f64,
}

/// Relative-frequency histogram of every encoder matrix entry over the
/// symmetric range `[−r, r]`, `r = max(1, max|w|)`.
pub fn weight_histogram(encoder: &EncoderModel, n_bins: usize) -> Histogram {
    let n_bins = n_bins.max(1);
    let values = &encoder.matrices;
    let r = values.iter().fold(1.0f64, |m, w| m.max(w.abs()));
    let width = 2.0 * r / n_bins as f64;
    let mut counts = alloc::vec![0usize; n_bins];
    for &w in values {
        let k = libm::floor((w + r) / width) as usize;
        counts[k.min(n_bins - 1)] += 1;
    }
    let total = values.len().max(1) as f64;
    let bins = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| HistBin {
            left: -r + k as f64 * width,
            right: -r + (k + 1) as f64 * width,
            rel_freq: c as f64 / total,
        })
        .collect();
    let at_max = values
        .iter()
        .filter(|w| (1.0 - MAX_AMPLITUDE_EPS..=1.0).contains(&w.abs()))
        .count();
    Histogram {
        bins,
        count: values.len(),
        max_amplitude_fraction: at_max as f64 / total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{init_encoder, normalize_matrices, QuantRange};
    use crate::rng;

    fn fresh() -> EncoderModel {
        init_encoder(
            256,
            8,
            10,
            QuantRange::new(0.0, 1.0).unwrap(),
            &mut rng::stream(2, rng::INIT),
        )
    }

    fn normal_cdf(x: f64) -> f64 {
        0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
    }

    #[test]
    fn fresh_init_is_standard_normal() {
        let m = fresh();
        let h = weight_histogram(&m, 40);
        assert!((h.bins.iter().map(|b| b.rel_freq).sum::<f64>() - 1.0).abs() < 1e-12);
        // χ² goodness of fit over bins with expected count ≥ 5
        let n = h.count as f64;
        let (mut chi2, mut dof) = (0.0, 0usize);
        for b in &h.bins {
            let expected = n * (normal_cdf(b.right) - normal_cdf(b.left));
            if expected >= 5.0 {
                let observed = b.rel_freq * n;
                chi2 += (observed - expected).powi(2) / expected;
                dof += 1;
            }
        }
        // 0.99 quantile of χ² with ≤ 40 degrees of freedom is below 64
        assert!(dof > 20);
        assert!(chi2 < 64.0, "χ² = {chi2} over {dof} bins");
    }

    #[test]
    fn normalized_support_and_peak_mass() {
        let mut m = fresh();
        normalize_matrices(&mut m);
        let h = weight_histogram(&m, 64);
        assert_eq!(h.bins[0].left, -1.0);
        assert_eq!(h.bins[63].right, 1.0);
        // every matrix has at least one entry at ±1
        assert!(h.max_amplitude_fraction >= 256.0 / h.count as f64);
    }

    #[test]
    fn max_amplitude_band_edges() {
        let m = EncoderModel {
            n_classes: 1,
            m_neurons: 1,
            t_steps: 4,
            q_range: QuantRange::new(0.0, 1.0).unwrap(),
            graded_bits: None,
            matrices: alloc::vec![1.0, -(1.0 - MAX_AMPLITUDE_EPS), 0.99, 0.0],
        };
        assert_eq!(weight_histogram(&m, 4).max_amplitude_fraction, 0.5);
    }
}
