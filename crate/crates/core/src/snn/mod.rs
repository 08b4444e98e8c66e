//! Feed-forward spiking equalizer: LIF hidden layer, leaky-integrator
//! readout, argmax decision, surrogate-gradient BPTT.

mod bptt;
mod network;
mod neuron;

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use bptt::Gradients;
pub use network::{decide, forward, NetTrace, Simulator};
pub use neuron::{
    li_readout_step, lif_step, surrogate_grad, LifParams, LifState, ReadoutParams, ResetMode,
    SpikeFn, DEFAULT_DECAY,
};

use crate::{Error, Result};

/// Per-output statistic of the readout membrane trace used as logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutStat {
    #[default]
    MaxOverTime,
    FinalStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnnModel {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    /// `n_hidden × n_in`, row-major.
    pub w_ih: Vec<f64>,
    /// `n_out × n_hidden`, row-major.
    pub w_ho: Vec<f64>,
    pub lif: LifParams,
    pub readout: ReadoutParams,
    pub readout_stat: ReadoutStat,
    pub spike_fn: SpikeFn,
}

/// Scale applied to the 1/√fan_in init standard deviation. The LIF and
/// readout recursions amplify a constant input by up to
/// 1/((1 − a_i)(1 − a_v)) ≈ 110, so unit-gain weights drive most hidden
/// neurons far from threshold where the surrogate gradient vanishes.
pub const DEFAULT_INIT_GAIN: f64 = 0.1;

/// Weights drawn i.i.d. from N(0, (gain² / fan_in)) with [`DEFAULT_INIT_GAIN`].
pub fn init_snn<R: Rng + ?Sized>(
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    lif: LifParams,
    readout: ReadoutParams,
    rng: &mut R,
) -> SnnModel {
    init_snn_with_gain(n_in, n_hidden, n_out, DEFAULT_INIT_GAIN, lif, readout, rng)
}

/// Weights drawn i.i.d. from N(0, gain² / fan_in).
pub fn init_snn_with_gain<R: Rng + ?Sized>(
    n_in: usize,
    n_hidden: usize,
    n_out: usize,
    gain: f64,
    lif: LifParams,
    readout: ReadoutParams,
    rng: &mut R,
) -> SnnModel {
    let mut layer = |rows: usize, cols: usize| -> Vec<f64> {
        let dist = Normal::new(0.0, gain / libm::sqrt(cols as f64)).expect("finite std");
        (0..rows * cols).map(|_| dist.sample(rng)).collect()
    };
    let w_ih = layer(n_hidden, n_in);
    let w_ho = layer(n_out, n_hidden);
    SnnModel {
        n_in,
        n_hidden,
        n_out,
        w_ih,
        w_ho,
        lif,
        readout,
        readout_stat: ReadoutStat::MaxOverTime,
        spike_fn: SpikeFn::Heaviside,
    }
}

impl SnnModel {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        if self.w_ih.len() != self.n_hidden * self.n_in {
            return Err(Error::ShapeMismatch {
                what: "w_ih",
                expected: self.n_hidden * self.n_in,
                got: self.w_ih.len(),
            });
        }
        if self.w_ho.len() != self.n_out * self.n_hidden {
            return Err(Error::ShapeMismatch {
                what: "w_ho",
                expected: self.n_out * self.n_hidden,
                got: self.w_ho.len(),
            });
        }
        if self.w_ih.iter().chain(&self.w_ho).any(|w| !w.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !(in_unit(self.lif.v_decay) && in_unit(self.lif.i_decay)) {
            return Err(Error::config(
                "snn.lif",
                "decays must lie strictly inside (0, 1)",
            ));
        }
        if !(in_unit(self.readout.v_decay) && in_unit(self.readout.i_decay)) {
            return Err(Error::config(
                "snn.readout",
                "decays must lie strictly inside (0, 1)",
            ));
        }
        if !(self.lif.threshold > 0.0 && self.lif.threshold.is_finite()) {
            return Err(Error::config("snn.lif.threshold", "must be > 0"));
        }
        if !(self.lif.surrogate_slope > 0.0) {
            return Err(Error::config("snn.lif.surrogate_slope", "must be > 0"));
        }
        Ok(())
    }

    /// Parameter count of both weight layers.
    pub fn n_weights(&self) -> usize {
        self.w_ih.len() + self.w_ho.len()
    }
}

/// Hidden spike rate S_h / (N_h · T).
pub fn spike_rate(spike_count: usize, n_hidden: usize, t_steps: usize) -> f64 {
    spike_count as f64 / (n_hidden * t_steps) as f64
}
