//! Joint optimization of encoder matrices and network weights.
//!
//! Each step simulates a fresh block of the link at the training noise level,
//! frames it, encodes and runs a batch of windows, backpropagates
//! `(1 − α)·CE + α·penalty`, takes an Adam step and renormalizes the encoder
//! matrices.

mod adam;
mod loss;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{cross_entropy, cross_entropy_grad, total_loss};

use crate::channel::{frame_windows, simulate_link, LinkConfig, SymbolBlock};
use crate::encoding::{
    normalize_matrices, sparsity_penalty, sparsity_penalty_grad, Encoder, QuantRange,
};
use crate::evaluation::{check_shapes, evaluate, StopRule, BLOCK_SYMBOLS};
use crate::rng;
use crate::snn::{Gradients, Simulator, SnnModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub epochs: usize,
    pub train_sigma2_db: f64,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Global gradient-norm clip; off when `None`.
    pub grad_clip: Option<f64>,
    /// Apply the graded quantizer in the forward pass during training,
    /// passing gradients straight through it.
    pub quantization_aware: bool,
    /// Symbols decided per end-of-epoch validation.
    pub validation_symbols: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-9,
            learning_rate: 1e-3,
            batch_size: 256,
            batches_per_epoch: 200,
            epochs: 5,
            train_sigma2_db: -17.0,
            seed: 0,
            adam: AdamConfig::default(),
            grad_clip: None,
            quantization_aware: false,
            validation_symbols: 20_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("train.alpha", "must lie in [0, 1]"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be positive"));
        }
        if self.batches_per_epoch == 0 {
            return Err(Error::config("train.batches_per_epoch", "must be positive"));
        }
        if self.train_sigma2_db.is_nan() {
            return Err(Error::config("train.train_sigma2_db", "must be a number"));
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return Err(Error::config(
                "train.adam",
                "betas must lie in [0, 1) and epsilon be > 0",
            ));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::config("train.grad_clip", "must be > 0 when set"));
            }
        }
        if self.validation_symbols < 10_000 {
            return Err(Error::config(
                "train.validation_symbols",
                "must be at least 10000",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub ce: f64,
    pub penalty: f64,
    pub total: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub val_ber: f64,
    pub spike_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

/// Adam moments for every parameter group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub w_ih: AdamState,
    pub w_ho: AdamState,
    pub encoder: Option<AdamState>,
}

impl Moments {
    pub fn new(encoder: &Encoder, snn: &SnnModel) -> Self {
        Self {
            w_ih: AdamState::new(snn.w_ih.len()),
            w_ho: AdamState::new(snn.w_ho.len()),
            encoder: encoder.learned().map(|m| AdamState::new(m.matrices.len())),
        }
    }
}

/// Quantizer input range: the empirical extremes of a calibration block.
pub fn calibrate_q_range(
    link: &LinkConfig,
    sigma2_db: f64,
    n_symbols: usize,
    seed: u64,
) -> Result<QuantRange> {
    let block = simulate_link(
        link,
        n_symbols,
        sigma2_db,
        &mut rng::stream(seed, "calibrate"),
    )?;
    QuantRange::from_samples(&block.received)
}

/// Mean square of the network input entries the encoder produces on
/// `n_symbols` symbols of a dedicated stream.
pub fn input_second_moment(
    encoder: &Encoder,
    link: &LinkConfig,
    sigma2_db: f64,
    n_symbols: usize,
    seed: u64,
) -> Result<f64> {
    let block = simulate_link(
        link,
        n_symbols.max(link.min_symbols()),
        sigma2_db,
        &mut rng::stream(seed, "moment"),
    )?;
    let prepared = encoder.prepare(false)?;
    let mut raster = prepared.raster(link.d_tap);
    let mut classes = Vec::new();
    let (mut sum, mut count) = (0.0, 0usize);
    for w in frame_windows(&block, link.d_tap) {
        prepared.encode(w.samples, &mut raster, &mut classes)?;
        sum += raster.values.iter().map(|x| x * x).sum::<f64>();
        count += raster.values.len();
    }
    if count == 0 || !(sum > 0.0) {
        return Err(Error::config("encoder", "produces an all-zero input"));
    }
    Ok(sum / count as f64)
}

/// Training state that can be advanced step by step or epoch by epoch.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub link: LinkConfig,
    pub config: TrainConfig,
    pub encoder: Encoder,
    pub snn: SnnModel,
    pub moments: Moments,
    pub step: u64,
    pub history: TrainHistory,
}

impl Trainer {
    pub fn new(
        link: LinkConfig,
        encoder: Encoder,
        snn: SnnModel,
        config: TrainConfig,
    ) -> Result<Self> {
        link.validate()?;
        config.validate()?;
        check_shapes(&encoder, &snn, link.d_tap)?;
        if let Some(m) = encoder.learned() {
            m.validate()?;
        }
        let moments = Moments::new(&encoder, &snn);
        Ok(Self {
            link,
            config,
            encoder,
            snn,
            moments,
            step: 0,
            history: TrainHistory::default(),
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.history.epochs.len()
    }

    /// Training windows of step `step`, drawn from their own stream.
    fn batch_blocks(&self, step: u64) -> Result<Vec<SymbolBlock>> {
        let d = self.link.d_tap;
        let n = BLOCK_SYMBOLS.max(self.link.min_symbols());
        let per_block = n - self.link.rrc_span_symbols - d;
        let blocks = self.config.batch_size.div_ceil(per_block);
        let mut r = rng::indexed_stream(self.config.seed, rng::TRAIN, step);
        (0..blocks)
            .map(|_| simulate_link(&self.link, n, self.config.train_sigma2_db, &mut r))
            .collect()
    }

    /// One optimizer step. On error the models are left as they were.
    pub fn train_step(&mut self) -> Result<StepRecord> {
        let cfg = &self.config;
        let alpha = cfg.alpha;
        let blocks = self.batch_blocks(self.step)?;
        let learned = self.encoder.learned();
        let mut grads = Gradients::zeros(&self.snn, learned.map(|m| m.matrices.len()));

        let prepared = self.encoder.prepare(cfg.quantization_aware)?;
        let mut sim = Simulator::new(&self.snn);
        let mut raster = prepared.raster(self.link.d_tap);
        let mut d_input = vec![0.0; raster.values.len()];
        let mut classes = Vec::new();
        let mut d_logits = vec![0.0; self.snn.n_out];
        let scale = (1.0 - alpha) / cfg.batch_size as f64;
        let mut ce_sum = 0.0;

        let windows = blocks
            .iter()
            .flat_map(|b| frame_windows(b, self.link.d_tap))
            .take(cfg.batch_size);
        for w in windows {
            prepared.encode(w.samples, &mut raster, &mut classes)?;
            sim.run(&raster)?;
            ce_sum += cross_entropy_grad(sim.logits(), w.label as usize, scale, &mut d_logits)?;
            let want_input = grads.encoder.is_some();
            sim.backward(
                &raster,
                &d_logits,
                &mut grads,
                want_input.then_some(&mut d_input[..]),
            )?;
            if let (Some(g), Some(m)) = (grads.encoder.as_mut(), learned) {
                let size = m.matrix_len();
                for (tap, &class) in classes.iter().enumerate() {
                    let src = &d_input[tap * size..(tap + 1) * size];
                    for (a, b) in g[class * size..(class + 1) * size].iter_mut().zip(src) {
                        *a += b;
                    }
                }
            }
        }
        drop(sim);
        drop(prepared);

        let ce = ce_sum / cfg.batch_size as f64;
        let penalty = match learned {
            Some(m) => {
                let p = sparsity_penalty(m)?;
                if alpha != 0.0 {
                    sparsity_penalty_grad(
                        m,
                        alpha,
                        grads.encoder.as_mut().expect("learned gradient"),
                    )?;
                }
                p
            }
            None => 0.0,
        };
        let total = total_loss(ce, penalty, alpha);
        if !total.is_finite() {
            return Err(Error::Diverged {
                step: self.step,
                loss: total,
            });
        }
        grads.check_finite(self.step)?;
        let grad_norm = grads.norm();
        if let Some(clip) = cfg.grad_clip {
            if grad_norm > clip {
                grads.scale(clip / grad_norm);
            }
        }

        let lr = cfg.learning_rate;
        adam_step(
            &mut self.snn.w_ih,
            &grads.w_ih,
            &mut self.moments.w_ih,
            lr,
            &cfg.adam,
        )?;
        adam_step(
            &mut self.snn.w_ho,
            &grads.w_ho,
            &mut self.moments.w_ho,
            lr,
            &cfg.adam,
        )?;
        if let (Some(m), Some(g), Some(s)) = (
            self.encoder.learned_mut(),
            &grads.encoder,
            self.moments.encoder.as_mut(),
        ) {
            adam_step(&mut m.matrices, g, s, lr, &cfg.adam)?;
            normalize_matrices(m);
        }

        let record = StepRecord {
            step: self.step,
            ce,
            penalty,
            total,
            grad_norm,
        };
        self.history.steps.push(record);
        self.step += 1;
        Ok(record)
    }

    /// `batches_per_epoch` steps followed by validation at the training noise
    /// level.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        for _ in 0..self.config.batches_per_epoch {
            self.train_step()?;
        }
        let (val_ber, spike_rate) = validate(
            &self.encoder,
            &self.snn,
            &self.link,
            self.config.train_sigma2_db,
            self.config.validation_symbols,
            self.config.seed,
        )?;
        let record = EpochRecord {
            epoch: self.history.epochs.len(),
            val_ber,
            spike_rate,
        };
        self.history.epochs.push(record);
        Ok(record)
    }

    pub fn into_parts(self) -> (Encoder, SnnModel, TrainHistory) {
        (self.encoder, self.snn, self.history)
    }
}

/// Runs every epoch of `config`.
pub fn train(
    link: &LinkConfig,
    encoder: Encoder,
    snn: SnnModel,
    config: &TrainConfig,
) -> Result<(Encoder, SnnModel, TrainHistory)> {
    let mut trainer = Trainer::new(link.clone(), encoder, snn, config.clone())?;
    for _ in 0..config.epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.into_parts())
}

/// BER and mean spike rate over `n_symbols` symbols of the held-out
/// validation stream.
pub fn validate(
    encoder: &Encoder,
    snn: &SnnModel,
    link: &LinkConfig,
    sigma2_db: f64,
    n_symbols: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut r = rng::stream(seed, rng::VALIDATE);
    let p = evaluate(
        encoder,
        snn,
        link,
        sigma2_db,
        StopRule::symbols(n_symbols),
        true,
        &mut r,
    )?;
    Ok((p.ber, p.spike_rate))
}
