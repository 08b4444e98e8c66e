//! Discrete-time neuron dynamics.
//!
//! LIF (two-state, synaptic current then membrane):
//!
//! ```text
//! i[t] = a_i·i[t-1] + input[t]
//! v[t] = a_v·v[t-1]·(1 − s[t-1]) + i[t]        (reset to zero)
//! v[t] = a_v·v[t-1] − θ·s[t-1] + i[t]          (reset by subtraction)
//! s[t] = H(v[t] − θ)
//! ```
//!
//! The leaky-integrator readout uses the same recursion without threshold or
//! reset.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    Zero,
    Subtract,
}

/// Spike nonlinearity used in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpikeFn {
    /// Binary spikes; the backward pass substitutes [`surrogate_grad`].
    Heaviside,
    /// Smooth fast sigmoid ½(1 + k·x/(1 + k|x|)), differentiated exactly.
    /// Used to check the BPTT machinery against finite differences.
    FastSigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifParams {
    pub v_decay: f64,
    pub i_decay: f64,
    pub threshold: f64,
    pub reset: ResetMode,
    /// Slope `k` of the fast-sigmoid surrogate.
    pub surrogate_slope: f64,
}

/// exp(−1/10): a 10-step time constant.
pub const DEFAULT_DECAY: f64 = 0.904_837_418_035_959_6;

impl Default for LifParams {
    fn default() -> Self {
        Self {
            v_decay: DEFAULT_DECAY,
            i_decay: DEFAULT_DECAY,
            threshold: 1.0,
            reset: ResetMode::Zero,
            surrogate_slope: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutParams {
    pub v_decay: f64,
    pub i_decay: f64,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        Self {
            v_decay: DEFAULT_DECAY,
            i_decay: DEFAULT_DECAY,
        }
    }
}

/// Fast-sigmoid surrogate derivative 1/(1 + k|x|)², peaking at 1 for x = 0.
#[inline]
pub fn surrogate_grad(v_minus_theta: f64, slope: f64) -> f64 {
    let d = 1.0 + slope * v_minus_theta.abs();
    1.0 / (d * d)
}

impl SpikeFn {
    #[inline]
    pub fn forward(self, x: f64, slope: f64) -> f64 {
        match self {
            SpikeFn::Heaviside => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::FastSigmoid => 0.5 * (1.0 + slope * x / (1.0 + slope * x.abs())),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64, slope: f64) -> f64 {
        match self {
            SpikeFn::Heaviside => surrogate_grad(x, slope),
            SpikeFn::FastSigmoid => 0.5 * slope * surrogate_grad(x, slope),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LifState {
    pub v: alloc::vec::Vec<f64>,
    pub i: alloc::vec::Vec<f64>,
    /// Spike output of the previous step.
    pub spikes: alloc::vec::Vec<f64>,
}

impl LifState {
    pub fn zeros(width: usize) -> Self {
        Self {
            v: alloc::vec![0.0; width],
            i: alloc::vec![0.0; width],
            spikes: alloc::vec![0.0; width],
        }
    }
}

/// Advances a LIF layer by one step; the new spikes replace `state.spikes`.
pub fn lif_step(
    state: &mut LifState,
    input: &[f64],
    p: &LifParams,
    spike_fn: SpikeFn,
) -> Result<()> {
    if input.len() != state.v.len() {
        return Err(Error::ShapeMismatch {
            what: "LIF input",
            expected: state.v.len(),
            got: input.len(),
        });
    }
    if state.v.iter().chain(&state.i).any(|x| x.is_nan()) {
        return Err(Error::NanState);
    }
    for (((v, i), s), &x) in state
        .v
        .iter_mut()
        .zip(&mut state.i)
        .zip(&mut state.spikes)
        .zip(input)
    {
        (*v, *i, *s) = lif_update(*v, *i, *s, x, p, spike_fn);
    }
    Ok(())
}

/// One neuron's LIF update from `(v, i, s)` at t−1 to `(v, i, s)` at t.
#[inline(always)]
pub(crate) fn lif_update(
    v: f64,
    i: f64,
    s: f64,
    input: f64,
    p: &LifParams,
    spike_fn: SpikeFn,
) -> (f64, f64, f64) {
    let i = p.i_decay * i + input;
    let v = match p.reset {
        ResetMode::Zero => p.v_decay * v * (1.0 - s) + i,
        ResetMode::Subtract => p.v_decay * v - p.threshold * s + i,
    };
    (v, i, spike_fn.forward(v - p.threshold, p.surrogate_slope))
}

/// Advances the leaky-integrator readout (`v`, `i`) by one step.
pub fn li_readout_step(v: &mut [f64], i: &mut [f64], input: &[f64], p: &ReadoutParams) {
    for ((v, i), &x) in v.iter_mut().zip(i.iter_mut()).zip(input) {
        *i = p.i_decay * *i + x;
        *v = p.v_decay * *v + *i;
    }
}
