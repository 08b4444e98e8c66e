//! One function per subcommand. Each returns the directory it wrote to.

use std::path::{Path, PathBuf};

use serde::Serialize;
use spikeq::channel::{gray, simulate_link, LinkConfig, NOISELESS};
use spikeq::encoding::{Encoder, EncoderKind};
use spikeq::evaluation::{
    ber_sweep, fit_slicer, quantization_sweep, slicer_sweep, spike_rate_table, weight_histogram,
    CurvePoint, SpikeRateRow,
};
use spikeq::rng;
use spikeq::snn::SnnModel;
use spikeq::training::{TrainHistory, Trainer};

use crate::checkpoint::Checkpoint;
use crate::config::{hex_digest, ExperimentConfig, Override};
use crate::error::{CliError, Result};
use crate::output::{
    curve_rows, num, write_epochs, write_histogram, write_history, write_sidecar, CurveLabel,
    OutputDir, Seeds, Sidecar, Table, CURVE_HEADER,
};

/// Symbols used to fit the slicer centroids.
pub const SLICER_FIT_SYMBOLS: usize = 100_000;

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub dir: PathBuf,
    /// Final model, stored without optimizer moments.
    pub checkpoint: PathBuf,
    pub hash: String,
    /// Final model exactly as stored.
    pub model: Checkpoint,
    pub history: TrainHistory,
}

fn sidecar<'a, T: Serialize>(
    path: &Path,
    command: &'a str,
    hash: &'a str,
    cfg: &ExperimentConfig,
    details: T,
) -> Result<()> {
    let file = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    write_sidecar(
        path,
        &Sidecar {
            file,
            command,
            config_hash: hash,
            seeds: Seeds::of(cfg),
            details,
        },
    )
}

fn curve_label(cfg: &ExperimentConfig, encoder: &Encoder) -> CurveLabel {
    let learned = encoder.learned();
    CurveLabel {
        encoding: encoder.kind().as_str().to_owned(),
        alpha: learned.map(|_| cfg.train.alpha),
        bits: learned.and_then(|m| m.graded_bits),
    }
}

fn model_label(cfg: &ExperimentConfig, encoder: &Encoder) -> String {
    match encoder.kind() {
        EncoderKind::Learned => format!("learned alpha={}", num(cfg.train.alpha)),
        k => k.as_str().to_owned(),
    }
}

/// Trains `cfg` from scratch into `dir`, which the caller must own.
///
/// Writes `checkpoint_epoch{k}.json` after each epoch, then `model.json`,
/// `history.csv` and `epochs.csv`. If training diverges the history so far
/// is still written and the last good epoch checkpoint is kept.
pub fn train_into(cfg: &ExperimentConfig, dir: &Path) -> Result<TrainRun> {
    let hash = cfg.hash();
    let (encoder, snn) = cfg.build_models()?;
    let mut trainer = Trainer::new(cfg.link.clone(), encoder, snn, cfg.train.clone())?;
    let write_tables = |history: &TrainHistory| -> Result<()> {
        let steps = dir.join("history.csv");
        write_history(&steps, &hash, &history.steps)?;
        sidecar(&steps, "train", &hash, cfg, ())?;
        let epochs = dir.join("epochs.csv");
        write_epochs(&epochs, &hash, &history.epochs)?;
        sidecar(&epochs, "train", &hash, cfg, ())
    };

    for k in 0..cfg.train.epochs {
        let record = match trainer.run_epoch() {
            Ok(r) => r,
            Err(e) => {
                write_tables(&trainer.history)?;
                return Err(e.into());
            }
        };
        log::info!(
            "epoch {}/{}: val_ber={:.4e} spike_rate={:.4}",
            k + 1,
            cfg.train.epochs,
            record.val_ber,
            record.spike_rate
        );
        let ckpt = Checkpoint {
            config: cfg.clone(),
            step: trainer.step,
            epoch: k + 1,
            encoder: trainer.encoder.clone(),
            snn: trainer.snn.clone(),
            moments: Some(trainer.moments.clone()),
        };
        ckpt.save(&dir.join(format!("checkpoint_epoch{}.json", k + 1)))?;
    }

    let step = trainer.step;
    let epoch = trainer.epochs_done();
    let (encoder, snn, history) = trainer.into_parts();
    write_tables(&history)?;
    let model = Checkpoint {
        config: cfg.clone(),
        step,
        epoch,
        encoder,
        snn,
        moments: None,
    }
    .rounded()?;
    let checkpoint = dir.join("model.json");
    let ckpt_hash = model.save(&checkpoint)?;
    Ok(TrainRun {
        dir: dir.to_owned(),
        checkpoint,
        hash: ckpt_hash,
        model,
        history,
    })
}

pub fn cmd_train(config: &Path, overrides: &[Override]) -> Result<TrainRun> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let out = OutputDir::acquire(&cfg.resolved_output_dir())?;
    train_into(&cfg, out.path())
}

struct Loaded {
    path: PathBuf,
    hash: String,
    cfg: ExperimentConfig,
    ckpt: Checkpoint,
}

fn load_models(checkpoints: &[PathBuf], overrides: &[Override]) -> Result<Vec<Loaded>> {
    if checkpoints.is_empty() {
        return Err(CliError::Usage(
            "at least one --checkpoint is required".to_owned(),
        ));
    }
    checkpoints
        .iter()
        .map(|p| {
            let (ckpt, hash) = Checkpoint::load(p)?;
            let cfg = ckpt.config.with_overrides(overrides)?;
            Ok(Loaded {
                path: p.clone(),
                hash,
                cfg,
                ckpt,
            })
        })
        .collect()
}

/// One config hash for artifacts built from several models.
fn combined_hash(models: &[Loaded]) -> String {
    let hashes: Vec<String> = models.iter().map(|m| m.cfg.hash()).collect();
    if hashes.windows(2).all(|w| w[0] == w[1]) {
        return hashes[0].clone();
    }
    hex_digest(hashes.join(",").as_bytes())
}

#[derive(Serialize)]
struct ModelRef {
    checkpoint: String,
    content_hash: String,
    config_hash: String,
    label: String,
}

fn model_refs(models: &[Loaded]) -> Vec<ModelRef> {
    models
        .iter()
        .map(|m| ModelRef {
            checkpoint: m.path.display().to_string(),
            content_hash: m.hash.clone(),
            config_hash: m.cfg.hash(),
            label: model_label(&m.cfg, &m.ckpt.encoder),
        })
        .collect()
}

pub const SPIKE_TABLE_HEADER: [&str; 6] = [
    "label",
    "encoding",
    "alpha",
    "sigma2_dB",
    "spike_rate",
    "ber",
];

fn write_spike_table(
    path: &Path,
    hash: &str,
    labels: &[CurveLabel],
    rows: &[SpikeRateRow],
    sigma2_db: f64,
) -> Result<()> {
    let mut t = Table::create(path, hash, &SPIKE_TABLE_HEADER)?;
    for (label, row) in labels.iter().zip(rows) {
        let [enc, alpha, _] = label.fields();
        t.row([
            row.label.clone(),
            enc,
            alpha,
            num(sigma2_db),
            num(row.spike_rate),
            num(row.ber),
        ])?;
    }
    t.finish()
}

/// Spike-rate table of several models on identical link realizations.
fn spike_table(
    models: &[(String, CurveLabel, &ExperimentConfig, &Encoder, &SnnModel)],
    link: &LinkConfig,
    sigma2_db: f64,
    n_symbols: u64,
    seed: u64,
) -> Result<(Vec<CurveLabel>, Vec<SpikeRateRow>)> {
    let entries: Vec<(String, &Encoder, &SnnModel)> =
        models.iter().map(|m| (m.0.clone(), m.3, m.4)).collect();
    let rows = spike_rate_table(&entries, link, sigma2_db, n_symbols, seed)?;
    Ok((models.iter().map(|m| m.1.clone()).collect(), rows))
}

#[derive(Serialize)]
struct EvalDetails {
    models: Vec<ModelRef>,
    sigma2_db_list: Vec<f64>,
    min_bit_errors: u64,
    max_symbols: u64,
    /// σ² points that stopped at the symbol cap before reaching the error target.
    capped: Vec<(String, f64)>,
}

/// BER curves of each checkpoint, or with `table` the spike-rate table.
pub fn cmd_eval(
    checkpoints: &[PathBuf],
    overrides: &[Override],
    sigma2: Option<f64>,
    table: bool,
) -> Result<PathBuf> {
    let mut models = load_models(checkpoints, overrides)?;
    if let Some(s) = sigma2 {
        if !s.is_finite() {
            return Err(CliError::Usage("--sigma2 must be finite".to_owned()));
        }
        for m in &mut models {
            m.cfg.sweep.sigma2_db_list = vec![s];
        }
    }
    let first = &models[0].cfg;
    let out = OutputDir::acquire(&first.resolved_output_dir())?;
    let hash = combined_hash(&models);

    if table {
        let link = &first.link;
        if models.iter().any(|m| &m.cfg.link != link) {
            return Err(CliError::Usage(
                "spike-rate tables need every checkpoint on the same link".to_owned(),
            ));
        }
        let s2 = sigma2.unwrap_or(first.sweep.spike_rate_sigma2_db);
        let entries: Vec<_> = models
            .iter()
            .map(|m| {
                (
                    model_label(&m.cfg, &m.ckpt.encoder),
                    curve_label(&m.cfg, &m.ckpt.encoder),
                    &m.cfg,
                    &m.ckpt.encoder,
                    &m.ckpt.snn,
                )
            })
            .collect();
        let (labels, rows) = spike_table(
            &entries,
            link,
            s2,
            first.sweep.spike_rate_symbols,
            first.link.seed,
        )?;
        for r in &rows {
            log::info!(
                "{:<24} spike_rate={:.4} ber={:.4e}",
                r.label,
                r.spike_rate,
                r.ber
            );
        }
        let path = out.join("spike_rates.csv");
        write_spike_table(&path, &hash, &labels, &rows, s2)?;
        #[derive(Serialize)]
        struct Details {
            models: Vec<ModelRef>,
            sigma2_db: f64,
            symbols: u64,
        }
        let details = Details {
            models: model_refs(&models),
            sigma2_db: s2,
            symbols: first.sweep.spike_rate_symbols,
        };
        sidecar(&path, "eval", &hash, first, details)?;
        return Ok(out.path().to_owned());
    }

    let path = out.join("eval_curves.csv");
    let mut t = Table::create(&path, &hash, &CURVE_HEADER)?;
    let mut capped = Vec::new();
    for m in &models {
        let curve = ber_sweep(
            &m.ckpt.encoder,
            &m.ckpt.snn,
            &m.cfg.link,
            &m.cfg.sweep,
            m.cfg.link.seed,
        )?;
        let label = curve_label(&m.cfg, &m.ckpt.encoder);
        let name = model_label(&m.cfg, &m.ckpt.encoder);
        print_curve(&name, &curve);
        capped.extend(
            curve
                .iter()
                .filter(|p| p.capped)
                .map(|p| (name.clone(), p.sigma2_db)),
        );
        curve_rows(&mut t, &label, &curve)?;
    }
    t.finish()?;
    let details = EvalDetails {
        models: model_refs(&models),
        sigma2_db_list: first.sweep.sigma2_db_list.clone(),
        min_bit_errors: first.sweep.min_bit_errors,
        max_symbols: first.sweep.max_symbols,
        capped,
    };
    sidecar(&path, "eval", &hash, first, details)?;
    Ok(out.path().to_owned())
}

fn print_curve(name: &str, curve: &[CurvePoint]) {
    for p in curve {
        log::info!(
            "{name:<24} sigma2={:>6.1} dB ber={:.4e} errors={} spike_rate={:.4}",
            p.sigma2_db,
            p.ber,
            p.bit_errors,
            p.spike_rate
        );
    }
}

#[derive(Serialize)]
struct SweepDetails {
    alphas: Vec<f64>,
    models: Vec<SweepModel>,
    sigma2_db_list: Vec<f64>,
    capped: Vec<(String, f64)>,
}

#[derive(Serialize)]
struct SweepModel {
    label: String,
    checkpoint: String,
    content_hash: String,
    config_hash: String,
}

/// Config of benchmark encoder `kind` derived from a learned config.
pub fn benchmark_config(cfg: &ExperimentConfig, kind: EncoderKind) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.encoder.kind = kind;
    c.encoder.m_neurons = None;
    c.encoder.t_steps = None;
    c.encoder.graded_bits = None;
    c
}

/// Trains one model per α (all from the same seeds) plus each benchmark
/// encoding, then evaluates all of them on common link realizations.
pub fn cmd_sweep_alpha(config: &Path, overrides: &[Override]) -> Result<PathBuf> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    cfg.require_learned("sweep-alpha")?;
    if cfg.sweep.alpha_list.is_empty() {
        return Err(CliError::Config(
            "sweep.alpha_list: must not be empty".to_owned(),
        ));
    }
    let out = OutputDir::acquire(&cfg.resolved_output_dir())?;
    let hash = cfg.hash();

    let mut runs: Vec<(String, ExperimentConfig, TrainRun)> = Vec::new();
    for &alpha in &cfg.sweep.alpha_list {
        let mut c = cfg.clone();
        c.train.alpha = alpha;
        c.validate()?;
        log::info!("training alpha = {alpha}");
        let dir = out.subdir(&format!("alpha_{}", num(alpha)))?;
        let run = train_into(&c, &dir)?;
        runs.push((model_label(&c, &run.model.encoder), c, run));
    }
    for &kind in cfg
        .sweep
        .encodings
        .iter()
        .filter(|k| **k != EncoderKind::Learned)
    {
        let c = benchmark_config(&cfg, kind);
        c.validate()?;
        log::info!("training {} benchmark", kind.as_str());
        let dir = out.subdir(kind.as_str())?;
        let run = train_into(&c, &dir)?;
        runs.push((kind.as_str().to_owned(), c, run));
    }

    let path = out.join("curves.csv");
    let mut t = Table::create(&path, &hash, &CURVE_HEADER)?;
    let mut capped = Vec::new();
    for (name, c, run) in &runs {
        let m = &run.model;
        let curve = ber_sweep(&m.encoder, &m.snn, &c.link, &cfg.sweep, cfg.link.seed)?;
        print_curve(name, &curve);
        capped.extend(
            curve
                .iter()
                .filter(|p| p.capped)
                .map(|p| (name.clone(), p.sigma2_db)),
        );
        curve_rows(&mut t, &curve_label(c, &m.encoder), &curve)?;
    }
    t.finish()?;
    let models: Vec<SweepModel> = runs
        .iter()
        .map(|(name, c, run)| SweepModel {
            label: name.clone(),
            checkpoint: run.checkpoint.display().to_string(),
            content_hash: run.hash.clone(),
            config_hash: c.hash(),
        })
        .collect();
    let details = SweepDetails {
        alphas: cfg.sweep.alpha_list.clone(),
        models,
        sigma2_db_list: cfg.sweep.sigma2_db_list.clone(),
        capped,
    };
    sidecar(&path, "sweep-alpha", &hash, &cfg, details)?;

    let s2 = cfg.sweep.spike_rate_sigma2_db;
    let entries: Vec<_> = runs
        .iter()
        .map(|(name, c, run)| {
            (
                name.clone(),
                curve_label(c, &run.model.encoder),
                c,
                &run.model.encoder,
                &run.model.snn,
            )
        })
        .collect();
    let (labels, rows) = spike_table(
        &entries,
        &cfg.link,
        s2,
        cfg.sweep.spike_rate_symbols,
        cfg.link.seed,
    )?;
    let table = out.join("spike_rates.csv");
    write_spike_table(&table, &hash, &labels, &rows, s2)?;
    sidecar(&table, "sweep-alpha", &hash, &cfg, rows.clone())?;
    for r in &rows {
        log::info!(
            "{:<24} spike_rate={:.4} ber={:.4e}",
            r.label,
            r.spike_rate,
            r.ber
        );
    }
    Ok(out.path().to_owned())
}

/// The float checkpoint re-evaluated at each graded-spike width.
pub fn cmd_sweep_quant(checkpoint: &Path, overrides: &[Override]) -> Result<PathBuf> {
    let models = load_models(&[checkpoint.to_owned()], overrides)?;
    let m = &models[0];
    let out = OutputDir::acquire(&m.cfg.resolved_output_dir())?;
    let hash = m.cfg.hash();
    let curves = quantization_sweep(
        &m.ckpt.encoder,
        &m.ckpt.snn,
        &m.cfg.link,
        &m.cfg.sweep,
        m.cfg.link.seed,
    )?;
    let path = out.join("quant.csv");
    let mut t = Table::create(&path, &hash, &CURVE_HEADER)?;
    let mut capped = Vec::new();
    for (bits, curve) in &curves {
        let mut label = curve_label(&m.cfg, &m.ckpt.encoder);
        label.bits = *bits;
        let name = format!(
            "{} bits={}",
            model_label(&m.cfg, &m.ckpt.encoder),
            label.fields()[2]
        );
        print_curve(&name, curve);
        capped.extend(
            curve
                .iter()
                .filter(|p| p.capped)
                .map(|p| (name.clone(), p.sigma2_db)),
        );
        curve_rows(&mut t, &label, curve)?;
    }
    t.finish()?;
    let details = EvalDetails {
        models: model_refs(&models),
        sigma2_db_list: m.cfg.sweep.sigma2_db_list.clone(),
        min_bit_errors: m.cfg.sweep.min_bit_errors,
        max_symbols: m.cfg.sweep.max_symbols,
        capped,
    };
    sidecar(&path, "sweep-quant", &hash, &m.cfg, details)?;
    Ok(out.path().to_owned())
}

/// Threshold slicer BER on the same link realizations as the equalizer sweeps.
pub fn cmd_baseline(config: &Path, overrides: &[Override]) -> Result<PathBuf> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let out = OutputDir::acquire(&cfg.resolved_output_dir())?;
    let hash = cfg.hash();
    let slicer = fit_slicer(
        &cfg.link,
        cfg.train.train_sigma2_db,
        SLICER_FIT_SYMBOLS,
        cfg.train.seed,
    )?;
    let curve = slicer_sweep(&slicer, &cfg.link, &cfg.sweep, cfg.link.seed)?;
    print_curve("slicer", &curve);
    let path = out.join("baseline.csv");
    let mut t = Table::create(&path, &hash, &CURVE_HEADER)?;
    let label = CurveLabel {
        encoding: "slicer".to_owned(),
        alpha: None,
        bits: None,
    };
    curve_rows(&mut t, &label, &curve)?;
    t.finish()?;
    #[derive(Serialize)]
    struct Details {
        centroids: [f64; 4],
        thresholds: [f64; 3],
        fit_sigma2_db: f64,
        fit_symbols: usize,
    }
    let details = Details {
        centroids: slicer.centroids,
        thresholds: slicer.thresholds(),
        fit_sigma2_db: cfg.train.train_sigma2_db,
        fit_symbols: SLICER_FIT_SYMBOLS,
    };
    sidecar(&path, "baseline", &hash, &cfg, details)?;
    Ok(out.path().to_owned())
}

/// Where the encoder for `histogram` comes from.
#[derive(Debug, Clone)]
pub enum HistogramSource {
    Checkpoint(PathBuf),
    /// Fresh initialization of a config.
    Config(PathBuf),
}

pub fn cmd_histogram(
    source: &HistogramSource,
    overrides: &[Override],
    bins: usize,
) -> Result<PathBuf> {
    if bins == 0 {
        return Err(CliError::Usage("--bins must be positive".to_owned()));
    }
    let (cfg, encoder, origin) = match source {
        HistogramSource::Checkpoint(p) => {
            let (ckpt, h) = Checkpoint::load(p)?;
            (
                ckpt.config.with_overrides(overrides)?,
                ckpt.encoder,
                format!("{} ({h})", p.display()),
            )
        }
        HistogramSource::Config(p) => {
            let cfg = ExperimentConfig::load(p, overrides)?;
            let (encoder, _) = cfg.build_models()?;
            (cfg, encoder, "initialization".to_owned())
        }
    };
    let Some(model) = encoder.learned() else {
        return Err(CliError::Config(
            "encoder.type: histograms need the learned encoder".to_owned(),
        ));
    };
    let h = weight_histogram(model, bins);
    let out = OutputDir::acquire(&cfg.resolved_output_dir())?;
    let hash = cfg.hash();
    let path = out.join("histogram.csv");
    write_histogram(&path, &hash, &h)?;
    log::info!(
        "{} weights, fraction with |w| >= 1 - 1/256: {:.4}",
        h.count,
        h.max_amplitude_fraction
    );
    #[derive(Serialize)]
    struct Details {
        source: String,
        count: usize,
        max_amplitude_fraction: f64,
        bins: usize,
    }
    let details = Details {
        source: origin,
        count: h.count,
        max_amplitude_fraction: h.max_amplitude_fraction,
        bins,
    };
    sidecar(&path, "histogram", &hash, &cfg, details)?;
    Ok(out.path().to_owned())
}

/// Dumps transmitted symbols and received samples of one link realization.
pub fn cmd_simulate(
    config: &Path,
    overrides: &[Override],
    symbols: usize,
    sigma2: Option<f64>,
) -> Result<PathBuf> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let s2 = sigma2.unwrap_or(cfg.train.train_sigma2_db);
    if s2.is_nan() {
        return Err(CliError::Usage("--sigma2 must be a number".to_owned()));
    }
    let n = (symbols + cfg.link.rrc_span_symbols).max(cfg.link.min_symbols());
    let block = simulate_link(
        &cfg.link,
        n,
        s2,
        &mut rng::stream(cfg.link.seed, "simulate"),
    )?;
    let out = OutputDir::acquire(&cfg.resolved_output_dir())?;
    let hash = cfg.hash();
    let path = out.join("simulate.csv");
    let mut t = Table::create(&path, &hash, &["k", "b0", "b1", "amplitude", "y"])?;
    let rows = symbols.min(block.len());
    for k in 0..rows {
        let [b0, b1] = block.bits[k];
        t.row([
            k.to_string(),
            b0.to_string(),
            b1.to_string(),
            num(gray::AMPLITUDES[block.symbol_indices[k] as usize]),
            num(block.received[k]),
        ])?;
    }
    t.finish()?;
    #[derive(Serialize)]
    struct Details {
        symbols: usize,
        sigma2_db: Option<f64>,
    }
    let details = Details {
        symbols: rows,
        sigma2_db: (s2 != NOISELESS).then_some(s2),
    };
    sidecar(&path, "simulate", &hash, &cfg, details)?;
    Ok(out.path().to_owned())
}
