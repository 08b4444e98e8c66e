//! BER sweeps, spike-rate tables, quantization sweeps, weight histograms and
//! the memoryless slicer reference.

mod histogram;
mod slicer;

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use histogram::{weight_histogram, HistBin, Histogram, MAX_AMPLITUDE_EPS};
pub use slicer::SlicerBaseline;

use crate::channel::{frame_windows, gray, simulate_link, LinkConfig, SymbolBlock};
use crate::encoding::{Encoder, EncoderKind, PreparedEncoder, SpikeRaster};
use crate::rng;
use crate::snn::{Simulator, SnnModel};
use crate::{Error, Result};

/// Symbols simulated per link block during evaluation and training.
pub const BLOCK_SYMBOLS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub sigma2_db_list: Vec<f64>,
    pub encodings: Vec<EncoderKind>,
    pub alpha_list: Vec<f64>,
    /// `None` is the float passthrough, written `"float"` in config files.
    #[serde(with = "bits_list")]
    pub graded_bits_list: Vec<Option<u32>>,
    pub min_bit_errors: u64,
    pub max_symbols: u64,
    /// Noise level of the spike-rate table.
    pub spike_rate_sigma2_db: f64,
    /// Symbols decided per spike-rate table row.
    pub spike_rate_symbols: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            sigma2_db_list: (0..=16).map(|k| -15.0 - 0.5 * k as f64).collect(),
            encodings: alloc::vec![
                EncoderKind::Learned,
                EncoderKind::LogScale,
                EncoderKind::Ternary
            ],
            alpha_list: alloc::vec![1e-2, 5.8e-4, 1e-9],
            graded_bits_list: alloc::vec![Some(4), Some(6), Some(8), None],
            min_bit_errors: 100,
            max_symbols: 10_000_000,
            spike_rate_sigma2_db: -19.0,
            spike_rate_symbols: 100_000,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma2_db_list.is_empty() {
            return Err(Error::config("sweep.sigma2_db_list", "must not be empty"));
        }
        if self.encodings.is_empty() {
            return Err(Error::config("sweep.encodings", "must not be empty"));
        }
        if self.alpha_list.is_empty() || self.alpha_list.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::config(
                "sweep.alpha_list",
                "must be nonempty with entries in [0, 1]",
            ));
        }
        if self.graded_bits_list.is_empty() {
            return Err(Error::config("sweep.graded_bits_list", "must not be empty"));
        }
        if self
            .graded_bits_list
            .iter()
            .flatten()
            .any(|&b| !(2..=32).contains(&b))
        {
            return Err(Error::config(
                "sweep.graded_bits_list",
                "bit widths must lie in 2..=32",
            ));
        }
        if self.min_bit_errors < 10 {
            return Err(Error::config("sweep.min_bit_errors", "must be at least 10"));
        }
        if self.spike_rate_symbols == 0 {
            return Err(Error::config(
                "sweep.spike_rate_symbols",
                "must be positive",
            ));
        }
        if self.max_symbols == 0 {
            return Err(Error::config("sweep.max_symbols", "must be positive"));
        }
        Ok(())
    }
}

mod bits_list {
    use alloc::string::String;
    use alloc::vec::Vec;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Bits(u32),
        Label(String),
    }

    pub fn serialize<S: Serializer>(list: &[Option<u32>], s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = list
            .iter()
            .map(|b| b.map_or_else(|| Entry::Label("float".into()), Entry::Bits))
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Option<u32>>, D::Error> {
        Vec::<Entry>::deserialize(d)?
            .into_iter()
            .map(|e| match e {
                Entry::Bits(b) => Ok(Some(b)),
                Entry::Label(l) if l == "float" => Ok(None),
                Entry::Label(l) => Err(D::Error::custom(alloc::format!(
                    "graded bit width must be an integer or \"float\", got \"{l}\""
                ))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sigma2_db: f64,
    pub ber: f64,
    pub bit_errors: u64,
    pub bits_counted: u64,
    pub spike_rate: f64,
    /// The symbol cap was reached before `min_bit_errors`.
    pub capped: bool,
}

/// Running decision counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub symbols: u64,
    pub bit_errors: u64,
    pub spikes: u64,
    /// Σ N_h·T over decided symbols.
    pub spike_capacity: u64,
}

impl Tally {
    pub fn bits(&self) -> u64 {
        2 * self.symbols
    }

    pub fn ber(&self) -> f64 {
        if self.symbols == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits() as f64
        }
    }

    pub fn spike_rate(&self) -> f64 {
        if self.spike_capacity == 0 {
            0.0
        } else {
            self.spikes as f64 / self.spike_capacity as f64
        }
    }

    fn point(&self, sigma2_db: f64, capped: bool) -> CurvePoint {
        CurvePoint {
            sigma2_db,
            ber: self.ber(),
            bit_errors: self.bit_errors,
            bits_counted: self.bits(),
            spike_rate: self.spike_rate(),
            capped,
        }
    }
}

/// Encoder plus network, applied window by window.
pub struct Equalizer<'a> {
    prepared: PreparedEncoder<'a>,
    sim: Simulator<'a>,
    raster: SpikeRaster,
    classes: Vec<usize>,
    d_tap: usize,
}

impl<'a> Equalizer<'a> {
    /// With `graded` the learned encoder applies its `graded_bits` quantizer.
    pub fn new(
        encoder: &'a Encoder,
        snn: &'a SnnModel,
        d_tap: usize,
        graded: bool,
    ) -> Result<Self> {
        check_shapes(encoder, snn, d_tap)?;
        let prepared = encoder.prepare(graded)?;
        let raster = prepared.raster(d_tap);
        Ok(Self {
            prepared,
            sim: Simulator::new(snn),
            raster,
            classes: Vec::new(),
            d_tap,
        })
    }

    /// Symbol index decided for `window` and the hidden spike count.
    pub fn decide(&mut self, window: &[f64]) -> Result<(u8, usize)> {
        self.prepared
            .encode(window, &mut self.raster, &mut self.classes)?;
        self.sim.run(&self.raster)?;
        Ok((self.sim.decision() as u8, self.sim.spike_count()))
    }

    /// Decides every window of `block` (at most `limit`) into `tally`.
    pub fn run_block(
        &mut self,
        block: &SymbolBlock,
        limit: Option<u64>,
        tally: &mut Tally,
    ) -> Result<()> {
        let capacity = (self.sim.model().n_hidden * self.prepared.encoder().t_steps()) as u64;
        for (k, w) in frame_windows(block, self.d_tap).enumerate() {
            if limit.is_some_and(|l| k as u64 >= l) {
                break;
            }
            let (decided, spikes) = self.decide(w.samples)?;
            tally.symbols += 1;
            tally.bit_errors += u64::from(gray::bit_errors(w.label, decided));
            tally.spikes += spikes as u64;
            tally.spike_capacity += capacity;
        }
        Ok(())
    }
}

/// Checks that the network input width matches `M · d_tap`.
pub fn check_shapes(encoder: &Encoder, snn: &SnnModel, d_tap: usize) -> Result<()> {
    let expected = encoder.m_neurons() * d_tap;
    if snn.n_in != expected {
        return Err(Error::ShapeMismatch {
            what: "snn inputs (M·d_tap)",
            expected,
            got: snn.n_in,
        });
    }
    if snn.n_out != 4 {
        return Err(Error::ShapeMismatch {
            what: "snn outputs",
            expected: 4,
            got: snn.n_out,
        });
    }
    snn.validate()
}

/// Decision rule shared by sweeps: stop once `min_bit_errors` are seen or
/// `max_symbols` decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub min_bit_errors: u64,
    pub max_symbols: u64,
}

impl StopRule {
    /// Exactly `n` symbols.
    pub fn symbols(n: u64) -> Self {
        Self {
            min_bit_errors: u64::MAX,
            max_symbols: n,
        }
    }
}

/// Simulates fresh link blocks from `rng` until the stop rule fires.
pub fn evaluate<R: Rng + ?Sized>(
    encoder: &Encoder,
    snn: &SnnModel,
    link: &LinkConfig,
    sigma2_db: f64,
    stop: StopRule,
    graded: bool,
    rng: &mut R,
) -> Result<CurvePoint> {
    let mut eq = Equalizer::new(encoder, snn, link.d_tap, graded)?;
    let mut tally = Tally::default();
    let n = BLOCK_SYMBOLS.max(link.min_symbols());
    while tally.bit_errors < stop.min_bit_errors && tally.symbols < stop.max_symbols {
        let block = simulate_link(link, n, sigma2_db, rng)?;
        eq.run_block(&block, Some(stop.max_symbols - tally.symbols), &mut tally)?;
    }
    Ok(tally.point(sigma2_db, tally.bit_errors < stop.min_bit_errors))
}

/// Random stream of sweep point `index`. Every model evaluated at the same
/// point sees the same symbols and noise.
pub fn point_rng(seed: u64, index: usize) -> rng::StreamRng {
    rng::indexed_stream(seed, rng::EVAL, index as u64)
}

/// BER and spike rate at every σ² of `spec`.
pub fn ber_sweep(
    encoder: &Encoder,
    snn: &SnnModel,
    link: &LinkConfig,
    spec: &SweepSpec,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    let stop = StopRule {
        min_bit_errors: spec.min_bit_errors,
        max_symbols: spec.max_symbols,
    };
    let mut curve = Vec::with_capacity(spec.sigma2_db_list.len());
    for (i, &s2) in spec.sigma2_db_list.iter().enumerate() {
        let point = evaluate(encoder, snn, link, s2, stop, true, &mut point_rng(seed, i))?;
        if point.capped {
            log::info!(
                "σ² = {s2} dB hit the symbol cap with {} bit errors",
                point.bit_errors
            );
        }
        curve.push(point);
    }
    warn_non_monotone(&curve);
    Ok(curve)
}

fn warn_non_monotone(curve: &[CurvePoint]) {
    for a in curve {
        for b in curve {
            if b.sigma2_db < a.sigma2_db && b.ber > a.ber {
                // Poisson 3σ on the larger error count
                let slack = 3.0 * libm::sqrt(b.bit_errors as f64) / b.bits_counted.max(1) as f64;
                if b.ber - a.ber > slack {
                    log::warn!(
                        "BER rises as noise falls: {} at {} dB vs {} at {} dB",
                        b.ber,
                        b.sigma2_db,
                        a.ber,
                        a.sigma2_db
                    );
                }
            }
        }
    }
}

/// Float model re-evaluated at each graded-spike width of `spec`.
pub fn quantization_sweep(
    encoder: &Encoder,
    snn: &SnnModel,
    link: &LinkConfig,
    spec: &SweepSpec,
    seed: u64,
) -> Result<Vec<(Option<u32>, Vec<CurvePoint>)>> {
    if encoder.kind() != EncoderKind::Learned {
        return Err(Error::config(
            "encoder.type",
            "quantization sweeps need the learned encoder",
        ));
    }
    spec.graded_bits_list
        .iter()
        .map(|&bits| {
            let quantized = encoder.clone().with_graded_bits(bits);
            Ok((bits, ber_sweep(&quantized, snn, link, spec, seed)?))
        })
        .collect()
}

/// Slicer counterpart of [`evaluate`]: scores exactly the symbols an
/// equalizer would decide from the same `rng`.
pub fn slicer_evaluate<R: Rng + ?Sized>(
    slicer: &SlicerBaseline,
    link: &LinkConfig,
    sigma2_db: f64,
    stop: StopRule,
    rng: &mut R,
) -> Result<CurvePoint> {
    let n = BLOCK_SYMBOLS.max(link.min_symbols());
    let before = link.d_tap / 2;
    let mut tally = Tally::default();
    while tally.bit_errors < stop.min_bit_errors && tally.symbols < stop.max_symbols {
        let block = simulate_link(link, n, sigma2_db, rng)?;
        let count = (block.len().saturating_sub(link.d_tap) as u64)
            .min(stop.max_symbols - tally.symbols) as usize;
        for k in before..before + count {
            tally.symbols += 1;
            tally.bit_errors += u64::from(gray::bit_errors(
                block.symbol_indices[k],
                slicer.decide(block.received[k]),
            ));
        }
    }
    Ok(tally.point(sigma2_db, tally.bit_errors < stop.min_bit_errors))
}

/// Slicer BER at every σ² of `spec`, on the same link realizations as
/// [`ber_sweep`] with the same seed.
pub fn slicer_sweep(
    slicer: &SlicerBaseline,
    link: &LinkConfig,
    spec: &SweepSpec,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    spec.validate()?;
    let stop = StopRule {
        min_bit_errors: spec.min_bit_errors,
        max_symbols: spec.max_symbols,
    };
    spec.sigma2_db_list
        .iter()
        .enumerate()
        .map(|(i, &s2)| slicer_evaluate(slicer, link, s2, stop, &mut point_rng(seed, i)))
        .collect()
}

/// Slicer fitted on `n_symbols` symbols of a dedicated stream.
pub fn fit_slicer(
    link: &LinkConfig,
    sigma2_db: f64,
    n_symbols: usize,
    seed: u64,
) -> Result<SlicerBaseline> {
    let block = simulate_link(
        link,
        n_symbols.max(link.min_symbols()),
        sigma2_db,
        &mut rng::stream(seed, "slicer"),
    )?;
    Ok(SlicerBaseline::fit(&block))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeRateRow {
    pub label: String,
    pub spike_rate: f64,
    pub ber: f64,
}

/// Spike rate of each labelled model over `n_symbols` symbols at one noise
/// level, all on identical link realizations.
pub fn spike_rate_table(
    models: &[(String, &Encoder, &SnnModel)],
    link: &LinkConfig,
    sigma2_db: f64,
    n_symbols: u64,
    seed: u64,
) -> Result<Vec<SpikeRateRow>> {
    models
        .iter()
        .map(|(label, enc, snn)| {
            let p = evaluate(
                enc,
                snn,
                link,
                sigma2_db,
                StopRule::symbols(n_symbols),
                true,
                &mut point_rng(seed, 0),
            )?;
            Ok(SpikeRateRow {
                label: label.clone(),
                spike_rate: p.spike_rate,
                ber: p.ber,
            })
        })
        .collect()
}
