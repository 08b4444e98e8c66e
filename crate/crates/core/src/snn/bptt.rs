//! Backpropagation through time for [`Simulator`].

use alloc::vec;
use alloc::vec::Vec;

use super::network::{axpy, dot, Simulator};
use super::{ResetMode, SnnModel};
use crate::encoding::SpikeRaster;
use crate::{Error, Result};

/// Loss gradients, laid out like the parameters they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `n_hidden × n_in`.
    pub w_ih: Vec<f64>,
    /// `n_out × n_hidden`.
    pub w_ho: Vec<f64>,
    /// Encoder matrices, class-major; `None` for fixed encoders.
    pub encoder: Option<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(model: &SnnModel, encoder_len: Option<usize>) -> Self {
        Self {
            w_ih: vec![0.0; model.w_ih.len()],
            w_ho: vec![0.0; model.w_ho.len()],
            encoder: encoder_len.map(|n| vec![0.0; n]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.w_ih
            .iter()
            .chain(&self.w_ho)
            .chain(self.encoder.iter().flatten())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w_ih
            .iter_mut()
            .chain(&mut self.w_ho)
            .chain(self.encoder.iter_mut().flatten())
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.iter().map(|g| g * g).sum())
    }

    pub fn scale(&mut self, factor: f64) {
        self.iter_mut().for_each(|g| *g *= factor);
    }

    /// Errors with the batch index if any entry is NaN or infinite.
    pub fn check_finite(&self, batch: u64) -> Result<()> {
        if self.iter().all(|g| g.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteGradient { batch })
        }
    }
}

/// Scratch for one backward pass.
#[derive(Default)]
pub(crate) struct BackwardScratch {
    /// Time-major `steps × n_hidden` adjoint of the hidden input current.
    grad_current: Vec<f64>,
    /// Transposed `n_in × n_hidden` accumulator for ∂L/∂W_ih.
    w_in_t: Vec<f64>,
}

impl Simulator<'_> {
    /// Backpropagates `d_logits` (∂L/∂logit) through the last [`Simulator::run`],
    /// accumulating weight gradients into `grads`. When `d_input` is given it
    /// receives ∂L/∂raster (`rows × steps`, overwritten).
    pub fn backward(
        &mut self,
        raster: &SpikeRaster,
        d_logits: &[f64],
        grads: &mut Gradients,
        d_input: Option<&mut [f64]>,
    ) -> Result<()> {
        let mut scratch = core::mem::take(&mut self.scratch);
        let result = self.backward_with(raster, d_logits, grads, d_input, &mut scratch);
        self.flush(grads, &mut scratch);
        self.scratch = scratch;
        result
    }

    fn backward_with(
        &self,
        raster: &SpikeRaster,
        d_logits: &[f64],
        grads: &mut Gradients,
        d_input: Option<&mut [f64]>,
        scratch: &mut BackwardScratch,
    ) -> Result<()> {
        let model = self.model;
        let (n_in, h, o, steps) = (model.n_in, model.n_hidden, model.n_out, self.steps);
        if d_logits.len() != o {
            return Err(Error::ShapeMismatch {
                what: "logit gradient",
                expected: o,
                got: d_logits.len(),
            });
        }
        if raster.rows != n_in || raster.steps != steps {
            return Err(Error::ShapeMismatch {
                what: "raster",
                expected: n_in * steps,
                got: raster.rows * raster.steps,
            });
        }
        let lif = &model.lif;
        let ro = &model.readout;

        scratch.grad_current.clear();
        scratch.grad_current.resize(steps * h, 0.0);
        if scratch.w_in_t.len() != n_in * h {
            scratch.w_in_t = vec![0.0; n_in * h];
        }

        let mut gv_o = vec![0.0; o];
        let mut gi_o = vec![0.0; o];
        let mut gc_o = vec![0.0; o];
        let mut gv_h = vec![0.0; h];
        let mut gi_h = vec![0.0; h];
        let mut gs = vec![0.0; h];

        for t in (0..steps).rev() {
            // readout adjoints
            for out in 0..o {
                let seed = if self.logit_step[out] == t {
                    d_logits[out]
                } else {
                    0.0
                };
                gv_o[out] = seed + ro.v_decay * gv_o[out];
                gi_o[out] = gv_o[out] + ro.i_decay * gi_o[out];
                gc_o[out] = gi_o[out];
            }
            let spikes = &self.s_h[t * h..(t + 1) * h];
            for (out, &g) in gc_o.iter().enumerate() {
                if g != 0.0 {
                    axpy(&mut grads.w_ho[out * h..(out + 1) * h], g, spikes);
                }
            }

            // ∂L/∂s[t]: through W_ho now and through the reset at t+1
            gs.fill(0.0);
            for (out, &g) in gc_o.iter().enumerate() {
                if g != 0.0 {
                    axpy(&mut gs, g, &model.w_ho[out * h..(out + 1) * h]);
                }
            }
            let v_t = &self.v_h[t * h..(t + 1) * h];
            for j in 0..h {
                let reset = match lif.reset {
                    ResetMode::Zero => -lif.v_decay * v_t[j],
                    ResetMode::Subtract => -lif.threshold,
                };
                gs[j] += gv_h[j] * reset;
            }

            let gc_t = &mut scratch.grad_current[t * h..(t + 1) * h];
            for j in 0..h {
                let carry = match lif.reset {
                    ResetMode::Zero => lif.v_decay * (1.0 - spikes[j]),
                    ResetMode::Subtract => lif.v_decay,
                };
                let slope = model
                    .spike_fn
                    .derivative(v_t[j] - lif.threshold, lif.surrogate_slope);
                gv_h[j] = gs[j] * slope + gv_h[j] * carry;
                gi_h[j] = gv_h[j] + lif.i_decay * gi_h[j];
                gc_t[j] = gi_h[j];
            }
        }

        for (r, row) in raster.values.chunks_exact(steps).enumerate() {
            let acc = &mut scratch.w_in_t[r * h..(r + 1) * h];
            for (t, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    axpy(acc, x, &scratch.grad_current[t * h..(t + 1) * h]);
                }
            }
        }

        if let Some(d_input) = d_input {
            if d_input.len() != n_in * steps {
                return Err(Error::ShapeMismatch {
                    what: "input gradient",
                    expected: n_in * steps,
                    got: d_input.len(),
                });
            }
            for (r, row) in d_input.chunks_exact_mut(steps).enumerate() {
                let w = &self.w_in_t[r * h..(r + 1) * h];
                for (t, g) in row.iter_mut().enumerate() {
                    *g = dot(w, &scratch.grad_current[t * h..(t + 1) * h]);
                }
            }
        }
        Ok(())
    }

    fn flush(&self, grads: &mut Gradients, scratch: &mut BackwardScratch) {
        let (n_in, h) = (self.model.n_in, self.model.n_hidden);
        if scratch.w_in_t.len() != n_in * h {
            return;
        }
        for r in 0..n_in {
            for j in 0..h {
                let g = &mut scratch.w_in_t[r * h + j];
                grads.w_ih[j * n_in + r] += *g;
                *g = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::snn::{init_snn_with_gain, LifParams, ReadoutParams, SpikeFn};
    use rand::Rng;

    fn smooth_model(reset: ResetMode) -> SnnModel {
        let lif = LifParams {
            reset,
            surrogate_slope: 5.0,
            ..LifParams::default()
        };
        let mut m = init_snn_with_gain(
            4,
            6,
            2,
            1.0,
            lif,
            ReadoutParams::default(),
            &mut rng::stream(11, rng::INIT),
        );
        m.spike_fn = SpikeFn::FastSigmoid;
        m.w_ih.iter_mut().for_each(|w| *w *= 2.0);
        m
    }

    fn raster() -> SpikeRaster {
        let mut r = rng::stream(12, "raster");
        let mut x = SpikeRaster::zeros(4, 5);
        x.values
            .iter_mut()
            .for_each(|v| *v = r.random::<f64>() * 2.0);
        x
    }

    fn loss(model: &SnnModel, x: &SpikeRaster, weights: &[f64]) -> f64 {
        let mut sim = Simulator::new(model);
        sim.run(x).unwrap();
        sim.logits().iter().zip(weights).map(|(l, w)| l * w).sum()
    }

    #[test]
    fn matches_central_differences() {
        for reset in [ResetMode::Zero, ResetMode::Subtract] {
            let model = smooth_model(reset);
            let x = raster();
            let d = [0.7, -1.3];
            let mut sim = Simulator::new(&model);
            sim.run(&x).unwrap();
            let mut grads = Gradients::zeros(&model, None);
            let mut gx = vec![0.0; 20];
            sim.backward(&x, &d, &mut grads, Some(&mut gx)).unwrap();

            let h = 1e-6;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-5 * (1.0 + a.abs().max(b.abs()));
            for k in 0..model.w_ih.len() {
                let (mut p, mut m) = (model.clone(), model.clone());
                p.w_ih[k] += h;
                m.w_ih[k] -= h;
                let fd = (loss(&p, &x, &d) - loss(&m, &x, &d)) / (2.0 * h);
                assert!(
                    close(fd, grads.w_ih[k]),
                    "{reset:?} w_ih[{k}] fd {fd} bptt {}",
                    grads.w_ih[k]
                );
            }
            for k in 0..model.w_ho.len() {
                let (mut p, mut m) = (model.clone(), model.clone());
                p.w_ho[k] += h;
                m.w_ho[k] -= h;
                let fd = (loss(&p, &x, &d) - loss(&m, &x, &d)) / (2.0 * h);
                assert!(
                    close(fd, grads.w_ho[k]),
                    "{reset:?} w_ho[{k}] fd {fd} bptt {}",
                    grads.w_ho[k]
                );
            }
            for k in 0..20 {
                let (mut p, mut m) = (x.clone(), x.clone());
                p.values[k] += h;
                m.values[k] -= h;
                let fd = (loss(&model, &p, &d) - loss(&model, &m, &d)) / (2.0 * h);
                assert!(close(fd, gx[k]), "{reset:?} x[{k}] fd {fd} bptt {}", gx[k]);
            }
        }
    }

    #[test]
    fn accumulates_across_calls() {
        let model = smooth_model(ResetMode::Zero);
        let x = raster();
        let mut sim = Simulator::new(&model);
        sim.run(&x).unwrap();
        let mut once = Gradients::zeros(&model, None);
        sim.backward(&x, &[1.0, 0.5], &mut once, None).unwrap();
        let mut twice = Gradients::zeros(&model, None);
        sim.backward(&x, &[1.0, 0.5], &mut twice, None).unwrap();
        sim.backward(&x, &[1.0, 0.5], &mut twice, None).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_is_reported() {
        let model = smooth_model(ResetMode::Zero);
        let mut g = Gradients::zeros(&model, Some(3));
        g.check_finite(0).unwrap();
        g.encoder.as_mut().unwrap()[1] = f64::NAN;
        assert!(matches!(
            g.check_finite(7),
            Err(Error::NonFiniteGradient { batch: 7 })
        ));
    }
}
