//! Learnable lookup encoding: each received sample selects one of `N` class
//! matrices W⁽ⁿ⁾ ∈ ℝ^{M×T}; row `m` of the matrix drives input neuron `m`
//! over the `T` simulation steps.

use alloc::borrow::Cow;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{quantize_graded, quantize_uniform, QuantRange, SpikeRaster};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderModel {
    pub n_classes: usize,
    pub m_neurons: usize,
    pub t_steps: usize,
    pub q_range: QuantRange,
    /// Graded-spike resolution applied on lookup; `None` keeps full precision.
    pub graded_bits: Option<u32>,
    /// Class-major, then row-major `M×T` matrices.
    pub matrices: Vec<f64>,
}

/// Draws every matrix entry i.i.d. from N(0, 1).
pub fn init_encoder<R: Rng + ?Sized>(
    n_classes: usize,
    m_neurons: usize,
    t_steps: usize,
    q_range: QuantRange,
    rng: &mut R,
) -> EncoderModel {
    let matrices = (0..n_classes * m_neurons * t_steps)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    EncoderModel {
        n_classes,
        m_neurons,
        t_steps,
        q_range,
        graded_bits: None,
        matrices,
    }
}

impl EncoderModel {
    pub fn matrix_len(&self) -> usize {
        self.m_neurons * self.t_steps
    }

    pub fn matrix(&self, class: usize) -> &[f64] {
        let size = self.matrix_len();
        &self.matrices[class * size..(class + 1) * size]
    }

    pub fn classify(&self, y: f64) -> Result<usize> {
        quantize_uniform(y, self.q_range, self.n_classes)
    }

    /// Matrix fed to the network for `class`, graded-quantized when
    /// `graded_bits` is set.
    pub fn learned_encode(&self, class: usize) -> Result<Cow<'_, [f64]>> {
        if class >= self.n_classes {
            return Err(Error::ClassOutOfRange {
                class,
                n_classes: self.n_classes,
            });
        }
        let m = self.matrix(class);
        match self.graded_bits {
            None => Ok(Cow::Borrowed(m)),
            Some(bits) => Ok(Cow::Owned(quantize_graded(m, bits)?)),
        }
    }

    /// All class matrices as the network sees them. Quantizes once up front
    /// so per-sample lookups stay cheap.
    pub fn lookup_table(&self) -> Result<Cow<'_, [f64]>> {
        match self.graded_bits {
            None => Ok(Cow::Borrowed(&self.matrices)),
            Some(bits) => Ok(Cow::Owned(quantize_graded(&self.matrices, bits)?)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.m_neurons == 0 || self.t_steps == 0 {
            return Err(Error::config("encoder", "N, M and T must be positive"));
        }
        let expected = self.n_classes * self.matrix_len();
        if self.matrices.len() != expected {
            return Err(Error::ShapeMismatch {
                what: "encoder matrices",
                expected,
                got: self.matrices.len(),
            });
        }
        if self.matrices.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(bits) = self.graded_bits {
            if bits < 2 {
                return Err(Error::GradedBits(bits));
            }
        }
        Ok(())
    }
}

/// Stacks the matrices selected by `classes` (one per tap) into a raster:
/// rows `tap·M .. tap·M + M` hold tap `tap`'s matrix, all taps sharing the
/// same `T`-step time axis.
pub fn build_snn_input(classes: &[usize], model: &EncoderModel) -> Result<SpikeRaster> {
    let table = model.lookup_table()?;
    let mut raster = SpikeRaster::zeros(classes.len() * model.m_neurons, model.t_steps);
    fill_raster(classes, &table, model.matrix_len(), &mut raster)?;
    Ok(raster)
}

pub(crate) fn fill_raster(
    classes: &[usize],
    table: &[f64],
    size: usize,
    raster: &mut SpikeRaster,
) -> Result<()> {
    let n_classes = table.len() / size;
    for (tap, &class) in classes.iter().enumerate() {
        if class >= n_classes {
            return Err(Error::ClassOutOfRange { class, n_classes });
        }
        raster.values[tap * size..(tap + 1) * size]
            .copy_from_slice(&table[class * size..(class + 1) * size]);
    }
    Ok(())
}
