//! Experiment configuration: one TOML document, dotted command-line
//! overrides, cross-field validation and a stable content hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spikeq::channel::LinkConfig;
use spikeq::encoding::{
    init_encoder, Encoder, EncoderKind, LogScaleEncoder, QuantRange, TernaryEncoder,
};
use spikeq::evaluation::SweepSpec;
use spikeq::rng;
use spikeq::snn::{
    init_snn_with_gain, LifParams, ReadoutParams, ReadoutStat, SnnModel, SpikeFn, DEFAULT_INIT_GAIN,
};
use spikeq::training::{calibrate_q_range, input_second_moment, TrainConfig};

use crate::error::{CliError, Result};

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SPIKEQ_OUTPUT_DIR";

/// Symbols in the quantizer calibration block.
pub const CALIBRATION_SYMBOLS: usize = 100_000;

/// Symbols used to measure the encoder's input second moment at init.
pub const MOMENT_SYMBOLS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    #[serde(rename = "type")]
    pub kind: EncoderKind,
    pub n_classes: usize,
    /// Defaults per type: 8 (learned, ternary) or 10 (log-scale).
    pub m_neurons: Option<usize>,
    /// Defaults per type: 10 (learned, ternary) or 30 (log-scale).
    pub t_steps: Option<usize>,
    pub graded_bits: Option<u32>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            kind: EncoderKind::Learned,
            n_classes: 256,
            m_neurons: None,
            t_steps: None,
            graded_bits: None,
        }
    }
}

impl EncoderConfig {
    pub fn m_neurons(&self) -> usize {
        self.m_neurons.unwrap_or(match self.kind {
            EncoderKind::LogScale => 10,
            _ => 8,
        })
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps.unwrap_or(match self.kind {
            EncoderKind::LogScale => 30,
            _ => 10,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnnConfig {
    pub n_hidden: usize,
    pub n_out: usize,
    /// Input weights start with standard deviation
    /// `init_gain / √(fan_in · E[x²])`, where `E[x²]` is the mean square of the
    /// encoder output; readout weights with `init_gain / √n_hidden`.
    pub init_gain: f64,
    pub lif: LifParams,
    pub readout: ReadoutParams,
    pub readout_stat: ReadoutStat,
    pub spike_fn: SpikeFn,
}

impl Default for SnnConfig {
    fn default() -> Self {
        Self {
            n_hidden: 80,
            n_out: 4,
            init_gain: DEFAULT_INIT_GAIN,
            lif: LifParams::default(),
            readout: ReadoutParams::default(),
            readout_stat: ReadoutStat::MaxOverTime,
            spike_fn: SpikeFn::Heaviside,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of the init and calibration streams.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub link: LinkConfig,
    pub encoder: EncoderConfig,
    pub snn: SnnConfig,
    pub train: TrainConfig,
    pub sweep: SweepSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            link: LinkConfig::default(),
            encoder: EncoderConfig::default(),
            snn: SnnConfig::default(),
            train: TrainConfig::default(),
            sweep: SweepSpec::default(),
        }
    }
}

fn config_err(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

impl ExperimentConfig {
    /// Reads `path`, applies `overrides` and validates.
    pub fn load(path: &Path, overrides: &[Override]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, overrides).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, overrides: &[Override]) -> Result<Self> {
        let mut value: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(e.message().to_owned()))?;
        apply_overrides(&mut value, overrides)?;
        Self::from_table(value)
    }

    pub fn from_table(value: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies overrides to an already-parsed config (e.g. one embedded in a
    /// checkpoint).
    pub fn with_overrides(&self, overrides: &[Override]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table = match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t,
            Ok(_) => unreachable!("config serializes to a table"),
            Err(e) => return Err(CliError::Config(e.to_string())),
        };
        apply_overrides(&mut table, overrides)?;
        Self::from_table(table)
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.train.validate()?;
        self.sweep.validate()?;
        if self.sweep.sigma2_db_list.iter().any(|s| !s.is_finite()) {
            return Err(config_err("sweep.sigma2_db_list", "entries must be finite"));
        }
        if !self.train.train_sigma2_db.is_finite() {
            return Err(config_err("train.train_sigma2_db", "must be finite"));
        }
        let e = &self.encoder;
        if e.kind == EncoderKind::Learned && e.n_classes < 2 {
            return Err(config_err("encoder.n_classes", "must be at least 2"));
        }
        if e.m_neurons() == 0 {
            return Err(config_err("encoder.m_neurons", "must be positive"));
        }
        if e.t_steps() == 0 {
            return Err(config_err("encoder.t_steps", "must be positive"));
        }
        if e.kind == EncoderKind::Ternary && e.m_neurons() > 39 {
            return Err(config_err(
                "encoder.m_neurons",
                "ternary encoding supports at most 39 neurons",
            ));
        }
        if let Some(bits) = e.graded_bits {
            if !(2..=32).contains(&bits) {
                return Err(config_err("encoder.graded_bits", "must lie in 2..=32"));
            }
        }
        if self.snn.n_hidden == 0 {
            return Err(config_err("snn.n_hidden", "must be positive"));
        }
        if self.snn.n_out != 4 {
            return Err(config_err(
                "snn.n_out",
                "must be 4, one output per PAM-4 symbol",
            ));
        }
        if !(self.snn.init_gain > 0.0 && self.snn.init_gain.is_finite()) {
            return Err(config_err("snn.init_gain", "must be > 0"));
        }
        Ok(())
    }

    /// Learned encoder required, e.g. for α sweeps.
    pub fn require_learned(&self, what: &str) -> Result<()> {
        if self.encoder.kind != EncoderKind::Learned {
            return Err(config_err(
                "encoder.type",
                format!("{what} needs the learned encoder"),
            ));
        }
        Ok(())
    }

    /// `output_dir`, replaced by the environment override when set.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded. `output_dir` is left
    /// out: where results go does not change them.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value
            .as_object_mut()
            .expect("config is an object")
            .remove("output_dir");
        let json = serde_json::to_vec(&value).expect("value serializes");
        hex_digest(&json)
    }

    /// Quantizer range, fresh encoder and network for this config.
    pub fn build_models(&self) -> Result<(Encoder, SnnModel)> {
        let q = calibrate_q_range(
            &self.link,
            self.train.train_sigma2_db,
            CALIBRATION_SYMBOLS,
            self.seed,
        )?;
        let encoder = self.build_encoder(q);
        let m = encoder.m_neurons();
        let mut snn = init_snn_with_gain(
            m * self.link.d_tap,
            self.snn.n_hidden,
            self.snn.n_out,
            self.snn.init_gain,
            self.snn.lif,
            self.snn.readout,
            &mut rng::indexed_stream(self.seed, rng::INIT, 1),
        );
        // keep the initial hidden drive independent of the input statistics
        let m2 = input_second_moment(
            &encoder,
            &self.link,
            self.train.train_sigma2_db,
            MOMENT_SYMBOLS,
            self.seed,
        )?;
        log::debug!("encoder input second moment {m2}");
        let scale = 1.0 / m2.sqrt();
        snn.w_ih.iter_mut().for_each(|w| *w *= scale);
        snn.readout_stat = self.snn.readout_stat;
        snn.spike_fn = self.snn.spike_fn;
        snn.validate()?;
        Ok((encoder, snn))
    }

    pub fn build_encoder(&self, q: QuantRange) -> Encoder {
        let e = &self.encoder;
        match e.kind {
            EncoderKind::Learned => {
                let mut r = rng::indexed_stream(self.seed, rng::INIT, 0);
                let mut model = init_encoder(e.n_classes, e.m_neurons(), e.t_steps(), q, &mut r);
                model.graded_bits = e.graded_bits;
                Encoder::Learned(model)
            }
            EncoderKind::LogScale => Encoder::LogScale(LogScaleEncoder {
                q_range: q,
                m_neurons: e.m_neurons(),
                t_steps: e.t_steps(),
            }),
            EncoderKind::Ternary => Encoder::Ternary(TernaryEncoder {
                q_range: q,
                m_neurons: e.m_neurons(),
                t_steps: e.t_steps(),
            }),
        }
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// One `--section.key value` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: String,
    pub raw: String,
}

/// Splits `["--train.alpha", "0.1", "--link.seed=3"]` into overrides.
pub fn parse_overrides(args: &[String]) -> Result<Vec<Override>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(CliError::Usage(format!("unexpected argument '{arg}'")));
        };
        let (path, raw) = match flag.split_once('=') {
            Some((p, v)) => (p.to_owned(), v.to_owned()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Usage(format!("--{flag} needs a value")))?;
                (flag.to_owned(), v.clone())
            }
        };
        if path.is_empty() || path.split('.').any(str::is_empty) {
            return Err(CliError::Usage(format!("malformed override '--{flag}'")));
        }
        out.push(Override { path, raw });
    }
    Ok(out)
}

/// Values are read as TOML literals (`0.1`, `[1, 2]`, `true`, `"x"`); anything
/// that does not parse is taken as a bare string.
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

pub fn apply_overrides(table: &mut toml::Table, overrides: &[Override]) -> Result<()> {
    for o in overrides {
        let mut parts: Vec<&str> = o.path.split('.').collect();
        let leaf = parts.pop().expect("nonempty path");
        let mut node = &mut *table;
        for (depth, part) in parts.iter().enumerate() {
            let entry = node
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = entry.as_table_mut().ok_or_else(|| {
                config_err(&parts[..=depth].join("."), "is a value, not a section")
            })?;
        }
        node.insert(leaf.to_owned(), override_value(&o.raw));
    }
    Ok(())
}
