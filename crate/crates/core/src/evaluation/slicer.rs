use serde::{Deserialize, Serialize};

use crate::channel::{gray, SymbolBlock};
use crate::evaluation::Tally;

/// Memoryless minimum-distance decision on the received sample, with one
/// centroid per symbol fitted on labelled data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicerBaseline {
    pub centroids: [f64; 4],
}

impl SlicerBaseline {
    pub fn fit(block: &SymbolBlock) -> Self {
        let mut sum = [0.0; 4];
        let mut count = [0usize; 4];
        for (&s, &y) in block.symbol_indices.iter().zip(&block.received) {
            sum[s as usize] += y;
            count[s as usize] += 1;
        }
        let mut centroids = [0.0; 4];
        for k in 0..4 {
            centroids[k] = if count[k] > 0 {
                sum[k] / count[k] as f64
            } else {
                f64::INFINITY
            };
        }
        Self { centroids }
    }

    pub fn decide(&self, y: f64) -> u8 {
        let mut best = 0;
        for k in 1..4 {
            if (y - self.centroids[k]).abs() < (y - self.centroids[best]).abs() {
                best = k;
            }
        }
        best as u8
    }

    /// Decision thresholds: midpoints between adjacent sorted centroids.
    pub fn thresholds(&self) -> [f64; 3] {
        let mut c = self.centroids;
        c.sort_by(f64::total_cmp);
        [
            0.5 * (c[0] + c[1]),
            0.5 * (c[1] + c[2]),
            0.5 * (c[2] + c[3]),
        ]
    }

    pub fn evaluate(&self, block: &SymbolBlock) -> Tally {
        let mut tally = Tally::default();
        for (&s, &y) in block.symbol_indices.iter().zip(&block.received) {
            tally.symbols += 1;
            tally.bit_errors += u64::from(gray::bit_errors(s, self.decide(y)));
        }
        tally
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{simulate_link, LinkConfig, NOISELESS};
    use crate::rng;

    #[test]
    fn noiseless_back_to_back_is_error_free() {
        let link = LinkConfig {
            fiber_length_km: 0.0,
            ..LinkConfig::default()
        };
        let train = simulate_link(&link, 4096, NOISELESS, &mut rng::stream(0, rng::TRAIN)).unwrap();
        let slicer = SlicerBaseline::fit(&train);
        let test = simulate_link(&link, 10_032, NOISELESS, &mut rng::stream(0, rng::EVAL)).unwrap();
        let t = slicer.evaluate(&test);
        assert_eq!(t.symbols, 10_000);
        assert_eq!(t.bit_errors, 0);
        let th = slicer.thresholds();
        assert!(th[0] < th[1] && th[1] < th[2]);
    }

    #[test]
    fn nearest_centroid() {
        let s = SlicerBaseline {
            centroids: [0.0, 1.0, 2.0, 3.0],
        };
        assert_eq!(s.decide(-5.0), 0);
        assert_eq!(s.decide(1.4), 1);
        assert_eq!(s.decide(1.6), 2);
        assert_eq!(s.decide(9.0), 3);
        assert_eq!(s.thresholds(), [0.5, 1.5, 2.5]);
    }
}
