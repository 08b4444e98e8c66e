//! IM/DD link simulation and equalizer framing.
//!
//! The simulated chain is: Gray mapping → RRC pulse shaping → bias →
//! chromatic dispersion → photodiode → power normalization → AWGN →
//! matched filter and symbol-rate sampling.

mod fft;
mod fiber;
pub mod gray;
mod pulse;

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use fft::fft;
pub use fiber::{
    add_awgn, apply_chromatic_dispersion, beta2, normalize_power, photodiode, power_scale,
};
pub use gray::{map_bits_to_symbols, BitPair};
pub use pulse::{add_bias, pulse_shape, receiver_front_end, rrc_taps};

use crate::{Error, Result};

/// Noise level that disables the AWGN stage.
pub const NOISELESS: f64 = f64::NEG_INFINITY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub fiber_length_km: f64,
    pub baud_rate_gbd: f64,
    pub rolloff: f64,
    pub wavelength_nm: f64,
    pub dispersion_ps_nm_km: f64,
    pub samples_per_symbol: usize,
    /// Filter span in symbols; must be even so the pulse peak is symbol aligned.
    pub rrc_span_symbols: usize,
    pub bias: f64,
    pub d_tap: usize,
    pub seed: u64,
    /// RRC matched filter before symbol-rate sampling.
    pub matched_filter: bool,
    /// Square-law detection. When disabled the real part of the field is
    /// passed through (loopback testing).
    pub photodiode: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            fiber_length_km: 5.0,
            baud_rate_gbd: 100.0,
            rolloff: 0.2,
            wavelength_nm: 1270.0,
            dispersion_ps_nm_km: -17.0,
            samples_per_symbol: 4,
            rrc_span_symbols: 32,
            bias: DEFAULT_BIAS,
            d_tap: 41,
            seed: 0,
            matched_filter: true,
            photodiode: true,
        }
    }
}

/// Default DC bias added after pulse shaping. The unit-energy RRC waveform of
/// the {0, 1, √2, √3} constellation dips to about −0.38 at 4 samples/symbol;
/// this keeps the transmitted intensity waveform positive with some margin.
pub const DEFAULT_BIAS: f64 = 0.5;

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(self.fiber_length_km.is_finite() && self.fiber_length_km >= 0.0) {
            return Err(Error::config(
                "link.fiber_length_km",
                "must be finite and >= 0",
            ));
        }
        if !positive(self.baud_rate_gbd) {
            return Err(Error::config("link.baud_rate_gbd", "must be > 0"));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(Error::config(
                "link.rolloff",
                format!("must be in (0, 1], got {}", self.rolloff),
            ));
        }
        if !positive(self.wavelength_nm) {
            return Err(Error::config("link.wavelength_nm", "must be > 0"));
        }
        if !self.dispersion_ps_nm_km.is_finite() {
            return Err(Error::config("link.dispersion_ps_nm_km", "must be finite"));
        }
        if self.samples_per_symbol < 2 {
            return Err(Error::config("link.samples_per_symbol", "must be >= 2"));
        }
        if self.rrc_span_symbols == 0 || self.rrc_span_symbols % 2 != 0 {
            return Err(Error::config(
                "link.rrc_span_symbols",
                "must be a positive even number",
            ));
        }
        if !(self.bias.is_finite() && self.bias >= 0.0) {
            return Err(Error::config("link.bias", "must be finite and >= 0"));
        }
        if self.d_tap == 0 || self.d_tap % 2 == 0 {
            return Err(Error::config(
                "link.d_tap",
                format!("must be odd and positive, got {}", self.d_tap),
            ));
        }
        Ok(())
    }

    /// Smallest block `simulate_link` accepts.
    pub fn min_symbols(&self) -> usize {
        self.d_tap + self.rrc_span_symbols + 1
    }
}

/// Transmitted labels and received symbol-rate samples, aligned index by
/// index after the filter-span edges have been trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    pub bits: Vec<BitPair>,
    /// 0-based symbol indices in amplitude order.
    pub symbol_indices: Vec<u8>,
    pub received: Vec<f64>,
}

impl SymbolBlock {
    pub fn len(&self) -> usize {
        self.received.len()
    }

    pub fn is_empty(&self) -> bool {
        self.received.is_empty()
    }
}

/// Runs `n_symbols` random symbols through the full link.
///
/// The returned block holds `n_symbols - rrc_span_symbols` aligned entries.
/// Power normalization uses the scale measured over the samples that feed
/// the retained symbols, so the filter ramps at the block edges do not bias
/// it.
pub fn simulate_link<R: Rng + ?Sized>(
    cfg: &LinkConfig,
    n_symbols: usize,
    sigma2_db: f64,
    rng: &mut R,
) -> Result<SymbolBlock> {
    cfg.validate()?;
    if n_symbols < cfg.min_symbols() {
        return Err(Error::InsufficientLength {
            len: n_symbols,
            span: cfg.min_symbols(),
        });
    }
    let sps = cfg.samples_per_symbol;
    let span = cfg.rrc_span_symbols;

    let symbols: Vec<u8> = (0..n_symbols).map(|_| rng.random_range(0..4u8)).collect();
    let amplitudes: Vec<f64> = symbols
        .iter()
        .map(|&s| gray::AMPLITUDES[s as usize])
        .collect();

    let mut tx = pulse_shape(&amplitudes, cfg)?;
    add_bias(&mut tx, cfg.bias);
    let field = apply_chromatic_dispersion(&tx, cfg);
    let mut rx = if cfg.photodiode {
        photodiode(&field)
    } else {
        field.iter().map(|x| x.re).collect()
    };

    let scale = power_scale(&rx[span * sps..n_symbols * sps])?;
    for x in rx.iter_mut() {
        *x *= scale;
    }
    add_awgn(&mut rx, sigma2_db, rng);
    let received = receiver_front_end(&rx, cfg);

    let kept = &symbols[span / 2..n_symbols - span / 2];
    debug_assert_eq!(kept.len(), received.len());
    Ok(SymbolBlock {
        bits: kept.iter().map(|&s| gray::bits_of(s)).collect(),
        symbol_indices: kept.to_vec(),
        received,
    })
}

/// One equalizer input: `d_tap` received samples centred on the labelled symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    pub samples: &'a [f64],
    /// Index of the labelled symbol in the block.
    pub position: usize,
    pub label: u8,
    pub bits: BitPair,
}

/// Slides a `d_tap` window over the block. The window for label `k'` spans
/// `received[k' - ⌊d/2⌋ .. k' + ⌈d/2⌉ - 1]`; a block of length `L` yields
/// `L - d_tap` windows.
pub fn frame_windows(
    block: &SymbolBlock,
    d_tap: usize,
) -> impl ExactSizeIterator<Item = Window<'_>> + '_ {
    let before = d_tap / 2;
    let count = block.len().saturating_sub(d_tap);
    (0..count).map(move |i| {
        let k = i + before;
        Window {
            samples: &block.received[i..i + d_tap],
            position: k,
            label: block.symbol_indices[k],
            bits: block.bits[k],
        }
    })
}
