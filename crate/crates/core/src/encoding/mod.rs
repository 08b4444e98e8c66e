//! Input encodings: received samples → input rasters for the network.

mod benchmark;
mod learned;
mod quantize;
mod sparsity;

use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use benchmark::{balanced_ternary, LogScaleEncoder, TernaryEncoder};
pub use learned::{build_snn_input, init_encoder, EncoderModel};
pub use quantize::{quantize_graded, quantize_uniform, QuantRange};
pub use sparsity::{
    l1_over_l2, l1_over_l2_grad, normalize_matrices, sparsity_penalty, sparsity_penalty_grad,
};

use crate::{Error, Result};

/// Network input over simulation time: `rows × steps`, row-major, rows
/// grouped tap by tap (tap 0 first, taps ordered oldest sample first).
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRaster {
    pub rows: usize,
    pub steps: usize,
    pub values: Vec<f64>,
}

impl SpikeRaster {
    pub fn zeros(rows: usize, steps: usize) -> Self {
        Self {
            rows,
            steps,
            values: vec![0.0; rows * steps],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.steps..(r + 1) * self.steps]
    }

    pub fn get(&self, row: usize, step: usize) -> f64 {
        self.values[row * self.steps + step]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Learned,
    LogScale,
    Ternary,
}

impl EncoderKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EncoderKind::Learned => "learned",
            EncoderKind::LogScale => "log_scale",
            EncoderKind::Ternary => "ternary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Encoder {
    Learned(EncoderModel),
    LogScale(LogScaleEncoder),
    Ternary(TernaryEncoder),
}

impl Encoder {
    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Learned(_) => EncoderKind::Learned,
            Encoder::LogScale(_) => EncoderKind::LogScale,
            Encoder::Ternary(_) => EncoderKind::Ternary,
        }
    }

    pub fn m_neurons(&self) -> usize {
        match self {
            Encoder::Learned(m) => m.m_neurons,
            Encoder::LogScale(e) => e.m_neurons,
            Encoder::Ternary(e) => e.m_neurons,
        }
    }

    pub fn t_steps(&self) -> usize {
        match self {
            Encoder::Learned(m) => m.t_steps,
            Encoder::LogScale(e) => e.t_steps,
            Encoder::Ternary(e) => e.t_steps,
        }
    }

    pub fn q_range(&self) -> QuantRange {
        match self {
            Encoder::Learned(m) => m.q_range,
            Encoder::LogScale(e) => e.q_range,
            Encoder::Ternary(e) => e.q_range,
        }
    }

    pub fn learned(&self) -> Option<&EncoderModel> {
        match self {
            Encoder::Learned(m) => Some(m),
            _ => None,
        }
    }

    pub fn learned_mut(&mut self) -> Option<&mut EncoderModel> {
        match self {
            Encoder::Learned(m) => Some(m),
            _ => None,
        }
    }

    /// Sets the graded-spike resolution of a learned encoder; no-op for the
    /// binary/ternary benchmarks.
    pub fn with_graded_bits(mut self, bits: Option<u32>) -> Self {
        if let Encoder::Learned(m) = &mut self {
            m.graded_bits = bits;
        }
        self
    }

    /// Encoder ready for repeated window encoding. With `graded == false` a
    /// learned encoder ignores its graded-spike quantizer.
    pub fn prepare(&self, graded: bool) -> Result<PreparedEncoder<'_>> {
        let table = match self {
            Encoder::Learned(m) if graded => Some(m.lookup_table()?),
            Encoder::Learned(m) => Some(Cow::Borrowed(&m.matrices[..])),
            _ => None,
        };
        Ok(PreparedEncoder {
            encoder: self,
            table,
        })
    }
}

pub struct PreparedEncoder<'a> {
    encoder: &'a Encoder,
    table: Option<Cow<'a, [f64]>>,
}

impl PreparedEncoder<'_> {
    pub fn encoder(&self) -> &Encoder {
        self.encoder
    }

    pub fn raster(&self, d_tap: usize) -> SpikeRaster {
        SpikeRaster::zeros(d_tap * self.encoder.m_neurons(), self.encoder.t_steps())
    }

    /// Encodes one window of received samples into `raster`. For the learned
    /// encoder the per-tap classes are written to `classes` (cleared
    /// otherwise).
    pub fn encode(
        &self,
        window: &[f64],
        raster: &mut SpikeRaster,
        classes: &mut Vec<usize>,
    ) -> Result<()> {
        let size = self.encoder.m_neurons() * self.encoder.t_steps();
        if raster.values.len() != window.len() * size {
            return Err(Error::ShapeMismatch {
                what: "raster",
                expected: window.len() * size,
                got: raster.values.len(),
            });
        }
        classes.clear();
        match (self.encoder, &self.table) {
            (Encoder::Learned(m), Some(table)) => {
                for &y in window {
                    classes.push(m.classify(y)?);
                }
                learned::fill_raster(classes, table, size, raster)?;
            }
            (Encoder::LogScale(e), _) => {
                for (&y, block) in window.iter().zip(raster.values.chunks_exact_mut(size)) {
                    e.write(y, block);
                }
            }
            (Encoder::Ternary(e), _) => {
                for (&y, block) in window.iter().zip(raster.values.chunks_exact_mut(size)) {
                    e.write(y, block);
                }
            }
            (Encoder::Learned(_), None) => unreachable!("learned encoder prepared without a table"),
        }
        Ok(())
    }
}
