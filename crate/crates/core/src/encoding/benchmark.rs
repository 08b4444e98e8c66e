//! Fixed (non-learned) reference encodings used as benchmarks.
//!
//! * Log-scale: every neuron fires exactly once; its firing time is the
//!   number of logarithmically spaced thresholds the sample exceeds. Neurons
//!   come in pairs reading the sample from the bottom and from the top of the
//!   range, with log gains spread over four decades.
//! * Ternary: the sample is quantized to `3^M` levels and written in
//!   balanced ternary; neuron `m` carries digit `m` (least significant
//!   first) as a constant −1/0/+1 input for all steps.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::QuantRange;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogScaleEncoder {
    pub q_range: QuantRange,
    pub m_neurons: usize,
    pub t_steps: usize,
}

impl LogScaleEncoder {
    pub fn new(q_range: QuantRange) -> Self {
        Self {
            q_range,
            m_neurons: 10,
            t_steps: 30,
        }
    }

    fn gain(&self, neuron: usize) -> f64 {
        let pairs = self.m_neurons.div_ceil(2);
        let pair = neuron / 2;
        let exponent = if pairs > 1 {
            -1.0 + 4.0 * pair as f64 / (pairs - 1) as f64
        } else {
            1.0
        };
        libm::pow(10.0, exponent)
    }

    /// Firing step of each neuron for sample `y`.
    pub fn spike_times(&self, y: f64) -> Vec<usize> {
        let u = self.q_range.unit(y);
        let last = (self.t_steps - 1) as f64;
        (0..self.m_neurons)
            .map(|m| {
                let p = if m % 2 == 0 { u } else { 1.0 - u };
                let k = self.gain(m);
                // thresholds θ_j = ((1+k)^{j/(T-1)} - 1)/k, j = 1..T-1
                (1..self.t_steps)
                    .filter(|&j| (libm::pow(1.0 + k, j as f64 / last) - 1.0) / k <= p + 1e-12)
                    .count()
            })
            .collect()
    }

    /// `M×T` binary block, one spike per row.
    pub fn log_scale_encode(&self, y: f64) -> Vec<f64> {
        let mut block = vec![0.0; self.m_neurons * self.t_steps];
        self.write(y, &mut block);
        block
    }

    pub(crate) fn write(&self, y: f64, block: &mut [f64]) {
        block.fill(0.0);
        for (m, t) in self.spike_times(y).into_iter().enumerate() {
            block[m * self.t_steps + t] = 1.0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TernaryEncoder {
    pub q_range: QuantRange,
    pub m_neurons: usize,
    pub t_steps: usize,
}

/// Balanced-ternary digits of `index`, least significant first.
pub fn balanced_ternary(mut index: i64, digits: usize) -> Vec<i8> {
    let mut out = vec![0i8; digits];
    for d in out.iter_mut() {
        let r = index.rem_euclid(3);
        let digit = if r == 2 { -1 } else { r };
        *d = digit as i8;
        index = (index - digit) / 3;
    }
    out
}

impl TernaryEncoder {
    pub fn new(q_range: QuantRange) -> Self {
        Self {
            q_range,
            m_neurons: 8,
            t_steps: 10,
        }
    }

    /// Signed quantization index in `−(3^M−1)/2 ..= (3^M−1)/2`; zero sits at
    /// the centre of the range.
    pub fn index(&self, y: f64) -> i64 {
        let levels = 3i64.pow(self.m_neurons as u32);
        let q = (libm::floor(levels as f64 * self.q_range.unit(y)) as i64).min(levels - 1);
        q - (levels - 1) / 2
    }

    pub fn ternary_encode(&self, y: f64) -> Vec<f64> {
        let mut block = vec![0.0; self.m_neurons * self.t_steps];
        self.write(y, &mut block);
        block
    }

    pub(crate) fn write(&self, y: f64, block: &mut [f64]) {
        for (m, d) in balanced_ternary(self.index(y), self.m_neurons)
            .into_iter()
            .enumerate()
        {
            block[m * self.t_steps..(m + 1) * self.t_steps].fill(f64::from(d));
        }
    }
}
