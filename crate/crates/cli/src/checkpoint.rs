//! Checkpoint files: a JSON document whose numeric tensors are flat
//! little-endian float32 blocks in base64 with declared shapes, sealed by a
//! SHA-256 content hash.
//!
//! The hash covers the canonical (compact, key-sorted) JSON of every field
//! except `content_hash` itself, so it survives reformatting but not edits.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use spikeq::encoding::{Encoder, EncoderModel, LogScaleEncoder, QuantRange, TernaryEncoder};
use spikeq::snn::{LifParams, ReadoutParams, ReadoutStat, SnnModel, SpikeFn};
use spikeq::training::{AdamState, Moments};

use crate::config::{hex_digest, ExperimentConfig};
use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;
const DTYPE: &str = "f32le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub data: String,
}

impl Tensor {
    pub fn encode(shape: &[usize], values: &[f64]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        let mut bytes = Vec::with_capacity(4 * values.len());
        for &v in values {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        Self {
            shape: shape.to_vec(),
            dtype: DTYPE.to_owned(),
            data: BASE64.encode(bytes),
        }
    }

    pub fn decode(&self, name: &str, expected: &[usize]) -> Result<Vec<f64>> {
        if self.dtype != DTYPE {
            return Err(CliError::Checkpoint(format!(
                "{name}: unsupported dtype '{}'",
                self.dtype
            )));
        }
        if self.shape != expected {
            return Err(CliError::Checkpoint(format!(
                "{name}: shape {:?} does not match the model's {:?}",
                self.shape, expected
            )));
        }
        let bytes = BASE64
            .decode(&self.data)
            .map_err(|e| CliError::Checkpoint(format!("{name}: bad base64: {e}")))?;
        let n: usize = expected.iter().product();
        if bytes.len() != 4 * n {
            return Err(CliError::Checkpoint(format!(
                "{name}: {} bytes for {n} float32 values",
                bytes.len()
            )));
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderSection {
    Learned {
        n_classes: usize,
        m_neurons: usize,
        t_steps: usize,
        q_range: QuantRange,
        graded_bits: Option<u32>,
        /// Shape `[N, M, T]`.
        matrices: Tensor,
    },
    LogScale {
        q_range: QuantRange,
        m_neurons: usize,
        t_steps: usize,
    },
    Ternary {
        q_range: QuantRange,
        m_neurons: usize,
        t_steps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnnSection {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub lif: LifParams,
    pub readout: ReadoutParams,
    pub readout_stat: ReadoutStat,
    pub spike_fn: SpikeFn,
    pub w_ih: Tensor,
    pub w_ho: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSection {
    pub m: Tensor,
    pub v: Tensor,
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub w_ih: MomentSection,
    pub w_ho: MomentSection,
    pub encoder: Option<MomentSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointFile {
    pub format_version: u32,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub step: u64,
    pub epoch: usize,
    pub encoder: EncoderSection,
    pub snn: SnnSection,
    pub optimizer: Option<OptimizerSection>,
    pub content_hash: String,
}

/// In-memory checkpoint contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub step: u64,
    pub epoch: usize,
    pub encoder: Encoder,
    pub snn: SnnModel,
    pub moments: Option<Moments>,
}

fn moment_section(s: &AdamState) -> MomentSection {
    MomentSection {
        m: Tensor::encode(&[s.m.len()], &s.m),
        v: Tensor::encode(&[s.v.len()], &s.v),
        t: s.t,
    }
}

fn moment_state(name: &str, s: &MomentSection, len: usize) -> Result<AdamState> {
    Ok(AdamState {
        m: s.m.decode(&format!("{name}.m"), &[len])?,
        v: s.v.decode(&format!("{name}.v"), &[len])?,
        t: s.t,
    })
}

impl Checkpoint {
    pub fn to_file(&self) -> Result<CheckpointFile> {
        let encoder = match &self.encoder {
            Encoder::Learned(m) => EncoderSection::Learned {
                n_classes: m.n_classes,
                m_neurons: m.m_neurons,
                t_steps: m.t_steps,
                q_range: m.q_range,
                graded_bits: m.graded_bits,
                matrices: Tensor::encode(&[m.n_classes, m.m_neurons, m.t_steps], &m.matrices),
            },
            Encoder::LogScale(e) => EncoderSection::LogScale {
                q_range: e.q_range,
                m_neurons: e.m_neurons,
                t_steps: e.t_steps,
            },
            Encoder::Ternary(e) => EncoderSection::Ternary {
                q_range: e.q_range,
                m_neurons: e.m_neurons,
                t_steps: e.t_steps,
            },
        };
        let s = &self.snn;
        let snn = SnnSection {
            n_in: s.n_in,
            n_hidden: s.n_hidden,
            n_out: s.n_out,
            lif: s.lif,
            readout: s.readout,
            readout_stat: s.readout_stat,
            spike_fn: s.spike_fn,
            w_ih: Tensor::encode(&[s.n_hidden, s.n_in], &s.w_ih),
            w_ho: Tensor::encode(&[s.n_out, s.n_hidden], &s.w_ho),
        };
        let optimizer = self.moments.as_ref().map(|m| OptimizerSection {
            w_ih: moment_section(&m.w_ih),
            w_ho: moment_section(&m.w_ho),
            encoder: m.encoder.as_ref().map(moment_section),
        });
        let mut file = CheckpointFile {
            format_version: FORMAT_VERSION,
            config_hash: self.config.hash(),
            config: self.config.clone(),
            step: self.step,
            epoch: self.epoch,
            encoder,
            snn,
            optimizer,
            content_hash: String::new(),
        };
        file.content_hash = content_hash(&file)?;
        Ok(file)
    }

    pub fn from_file(file: &CheckpointFile) -> Result<Self> {
        let encoder = match &file.encoder {
            EncoderSection::Learned {
                n_classes,
                m_neurons,
                t_steps,
                q_range,
                graded_bits,
                matrices,
            } => {
                let model = EncoderModel {
                    n_classes: *n_classes,
                    m_neurons: *m_neurons,
                    t_steps: *t_steps,
                    q_range: *q_range,
                    graded_bits: *graded_bits,
                    matrices: matrices
                        .decode("encoder.matrices", &[*n_classes, *m_neurons, *t_steps])?,
                };
                model
                    .validate()
                    .map_err(|e| CliError::Checkpoint(format!("encoder: {e}")))?;
                Encoder::Learned(model)
            }
            EncoderSection::LogScale {
                q_range,
                m_neurons,
                t_steps,
            } => Encoder::LogScale(LogScaleEncoder {
                q_range: *q_range,
                m_neurons: *m_neurons,
                t_steps: *t_steps,
            }),
            EncoderSection::Ternary {
                q_range,
                m_neurons,
                t_steps,
            } => Encoder::Ternary(TernaryEncoder {
                q_range: *q_range,
                m_neurons: *m_neurons,
                t_steps: *t_steps,
            }),
        };
        let s = &file.snn;
        let snn = SnnModel {
            n_in: s.n_in,
            n_hidden: s.n_hidden,
            n_out: s.n_out,
            w_ih: s.w_ih.decode("snn.w_ih", &[s.n_hidden, s.n_in])?,
            w_ho: s.w_ho.decode("snn.w_ho", &[s.n_out, s.n_hidden])?,
            lif: s.lif,
            readout: s.readout,
            readout_stat: s.readout_stat,
            spike_fn: s.spike_fn,
        };
        snn.validate()
            .map_err(|e| CliError::Checkpoint(format!("snn: {e}")))?;
        if snn.n_in != encoder.m_neurons() * file.config.link.d_tap {
            return Err(CliError::Checkpoint(format!(
                "snn.n_in = {} but encoder M·d_tap = {}",
                snn.n_in,
                encoder.m_neurons() * file.config.link.d_tap
            )));
        }
        let moments = match &file.optimizer {
            None => None,
            Some(o) => {
                let encoder_moments = match (&o.encoder, encoder.learned()) {
                    (Some(m), Some(model)) => {
                        Some(moment_state("optimizer.encoder", m, model.matrices.len())?)
                    }
                    (None, None) => None,
                    _ => {
                        return Err(CliError::Checkpoint(
                            "optimizer.encoder does not match the encoder type".to_owned(),
                        ))
                    }
                };
                Some(Moments {
                    w_ih: moment_state("optimizer.w_ih", &o.w_ih, snn.w_ih.len())?,
                    w_ho: moment_state("optimizer.w_ho", &o.w_ho, snn.w_ho.len())?,
                    encoder: encoder_moments,
                })
            }
        };
        Ok(Self {
            config: file.config.clone(),
            step: file.step,
            epoch: file.epoch,
            encoder,
            snn,
            moments,
        })
    }

    /// Writes the checkpoint; returns its content hash.
    pub fn save(&self, path: &Path) -> Result<String> {
        let file = self.to_file()?;
        let mut text = serde_json::to_string_pretty(&file).expect("checkpoint serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())?;
        Ok(file.content_hash)
    }

    /// Reads and verifies a checkpoint.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file = parse_checkpoint(&text).map_err(|e| match e {
            CliError::Checkpoint(msg) => CliError::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let hash = file.content_hash.clone();
        Ok((Self::from_file(&file)?, hash))
    }

    /// Copy with every tensor rounded to the stored float32 precision.
    pub fn rounded(&self) -> Result<Self> {
        Self::from_file(&self.to_file()?)
    }
}

/// Parses and verifies checkpoint text without building models.
pub fn parse_checkpoint(text: &str) -> Result<CheckpointFile> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::Checkpoint(format!("not a checkpoint: {e}")))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(CliError::Checkpoint(format!(
                "format_version {v} is not supported; this build reads version {FORMAT_VERSION} and has no migration from {v}"
            )))
        }
        None => return Err(CliError::Checkpoint("missing format_version".to_owned())),
    }
    let file: CheckpointFile = serde_json::from_value(value)
        .map_err(|e| CliError::Checkpoint(format!("malformed checkpoint: {e}")))?;
    let expected = content_hash(&file)?;
    if expected != file.content_hash {
        return Err(CliError::Checkpoint(format!(
            "content hash mismatch (stored {}, computed {expected}); refusing to use a modified or corrupted file",
            file.content_hash
        )));
    }
    if file.config.hash() != file.config_hash {
        return Err(CliError::Checkpoint(
            "config_hash does not match the embedded config".to_owned(),
        ));
    }
    Ok(file)
}

fn content_hash(file: &CheckpointFile) -> Result<String> {
    let mut value = serde_json::to_value(file).map_err(|e| CliError::Checkpoint(e.to_string()))?;
    value
        .as_object_mut()
        .expect("checkpoint is an object")
        .remove("content_hash");
    // serde_json's default map is ordered by key, so this form is canonical
    let canonical = serde_json::to_vec(&value).expect("value serializes");
    Ok(hex_digest(&canonical))
}

/// Writes through a temporary sibling so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}
