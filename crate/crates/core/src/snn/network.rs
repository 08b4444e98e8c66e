use alloc::vec;
use alloc::vec::Vec;

use super::neuron::lif_update;
use super::{ReadoutStat, SnnModel};
use crate::encoding::SpikeRaster;
use crate::{Error, Result};

/// Observable result of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct NetTrace {
    pub n_out: usize,
    pub n_hidden: usize,
    pub steps: usize,
    /// `n_out × steps`, row-major.
    pub out_membranes: Vec<f64>,
    /// `n_hidden × steps`, row-major; true where v > θ.
    pub hidden_spikes: Vec<bool>,
    /// S_h, the number of hidden spikes.
    pub spike_count: usize,
}

impl NetTrace {
    pub fn out_membrane(&self, neuron: usize) -> &[f64] {
        &self.out_membranes[neuron * self.steps..(neuron + 1) * self.steps]
    }
}

/// Index of the output neuron with the highest membrane value at any step;
/// ties go to the lowest index.
pub fn decide(trace: &NetTrace) -> usize {
    let peaks = (0..trace.n_out).map(|o| {
        trace
            .out_membrane(o)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    });
    argmax(peaks)
}

pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Runs one raster through a fresh copy of the network.
pub fn forward(raster: &SpikeRaster, model: &SnnModel) -> Result<NetTrace> {
    let mut sim = Simulator::new(model);
    sim.run(raster)?;
    Ok(sim.trace())
}

/// Reusable forward/backward engine for one model.
///
/// Holds the input weights transposed (`n_in × n_hidden`) so input currents
/// are accumulated as contiguous axpy updates, skipping zero raster entries,
/// plus the per-step state needed by backpropagation. State always starts
/// from zero; nothing carries over between samples.
pub struct Simulator<'m> {
    pub(crate) model: &'m SnnModel,
    pub(crate) w_in_t: Vec<f64>,
    pub(crate) steps: usize,
    /// Time-major `steps × n_hidden` buffers.
    pub(crate) current: Vec<f64>,
    pub(crate) i_h: Vec<f64>,
    pub(crate) v_h: Vec<f64>,
    pub(crate) s_h: Vec<f64>,
    /// Time-major `steps × n_out`.
    pub(crate) v_o: Vec<f64>,
    pub(crate) logits: Vec<f64>,
    /// Step at which each logit was read.
    pub(crate) logit_step: Vec<usize>,
    pub(crate) spike_count: usize,
    pub(crate) scratch: super::bptt::BackwardScratch,
}

impl<'m> Simulator<'m> {
    pub fn new(model: &'m SnnModel) -> Self {
        let (h, n) = (model.n_hidden, model.n_in);
        let mut w_in_t = vec![0.0; n * h];
        for (j, row) in model.w_ih.chunks_exact(n).enumerate() {
            for (r, &w) in row.iter().enumerate() {
                w_in_t[r * h + j] = w;
            }
        }
        Self {
            model,
            w_in_t,
            steps: 0,
            current: Vec::new(),
            i_h: Vec::new(),
            v_h: Vec::new(),
            s_h: Vec::new(),
            v_o: Vec::new(),
            logits: vec![0.0; model.n_out],
            logit_step: vec![0; model.n_out],
            spike_count: 0,
            scratch: Default::default(),
        }
    }

    pub fn model(&self) -> &SnnModel {
        self.model
    }

    fn resize(&mut self, steps: usize) {
        self.steps = steps;
        let hs = steps * self.model.n_hidden;
        for buf in [
            &mut self.current,
            &mut self.i_h,
            &mut self.v_h,
            &mut self.s_h,
        ] {
            buf.clear();
            buf.resize(hs, 0.0);
        }
        self.v_o.clear();
        self.v_o.resize(steps * self.model.n_out, 0.0);
    }

    pub fn run(&mut self, raster: &SpikeRaster) -> Result<()> {
        let model = self.model;
        let (h, o) = (model.n_hidden, model.n_out);
        if raster.rows != model.n_in {
            return Err(Error::ShapeMismatch {
                what: "raster rows",
                expected: model.n_in,
                got: raster.rows,
            });
        }
        let steps = raster.steps;
        self.resize(steps);

        // hidden input currents, current[t] = W_ih · x[:, t]
        for (r, row) in raster.values.chunks_exact(steps).enumerate() {
            let w = &self.w_in_t[r * h..(r + 1) * h];
            for (t, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    axpy(&mut self.current[t * h..(t + 1) * h], x, w);
                }
            }
        }

        let lif = &model.lif;
        let ro = &model.readout;
        let mut count = 0usize;
        let mut i_o = vec![0.0; o];
        let mut v_prev_o = vec![0.0; o];
        for t in 0..steps {
            let span = t * h..(t + 1) * h;
            for j in 0..h {
                let (v, i, s) = if t == 0 {
                    (0.0, 0.0, 0.0)
                } else {
                    let k = (t - 1) * h + j;
                    (self.v_h[k], self.i_h[k], self.s_h[k])
                };
                let k = t * h + j;
                let (v, i, s) = lif_update(v, i, s, self.current[k], lif, model.spike_fn);
                self.v_h[k] = v;
                self.i_h[k] = i;
                self.s_h[k] = s;
                count += usize::from(v > lif.threshold);
            }

            let spikes = &self.s_h[span];
            for (out, w_row) in model.w_ho.chunks_exact(h).enumerate() {
                let input: f64 = w_row
                    .iter()
                    .zip(spikes)
                    .filter(|(_, &s)| s != 0.0)
                    .map(|(w, s)| w * s)
                    .sum();
                i_o[out] = ro.i_decay * i_o[out] + input;
                v_prev_o[out] = ro.v_decay * v_prev_o[out] + i_o[out];
                self.v_o[t * o + out] = v_prev_o[out];
            }
        }
        self.spike_count = count;

        for out in 0..o {
            let (step, value) = match model.readout_stat {
                ReadoutStat::FinalStep => (steps - 1, self.v_o[(steps - 1) * o + out]),
                ReadoutStat::MaxOverTime => (0..steps).fold((0, f64::NEG_INFINITY), |best, t| {
                    let v = self.v_o[t * o + out];
                    if v > best.1 {
                        (t, v)
                    } else {
                        best
                    }
                }),
            };
            if value.is_nan() {
                return Err(Error::NanState);
            }
            self.logits[out] = value;
            self.logit_step[out] = step;
        }
        Ok(())
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn spike_count(&self) -> usize {
        self.spike_count
    }

    /// Argmax of the logits, lowest index on ties.
    pub fn decision(&self) -> usize {
        argmax(self.logits.iter().copied())
    }

    pub fn trace(&self) -> NetTrace {
        let (h, o, steps) = (self.model.n_hidden, self.model.n_out, self.steps);
        let mut out_membranes = vec![0.0; o * steps];
        let mut hidden_spikes = vec![false; h * steps];
        for t in 0..steps {
            for out in 0..o {
                out_membranes[out * steps + t] = self.v_o[t * o + out];
            }
            for j in 0..h {
                hidden_spikes[j * steps + t] = self.v_h[t * h + j] > self.model.lif.threshold;
            }
        }
        NetTrace {
            n_out: o,
            n_hidden: h,
            steps,
            out_membranes,
            hidden_spikes,
            spike_count: self.spike_count,
        }
    }
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
