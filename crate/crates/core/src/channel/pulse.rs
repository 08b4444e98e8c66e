//! Root-raised-cosine transmit shaping and the matched-filter receiver.
//!
//! Timing convention: a block of `n` symbols is shaped into `(n + span) * sps`
//! samples with the peak of symbol `k` at sample `k * sps + span * sps / 2`.
//! The receiver drops `span / 2` symbols at each edge, so `n` symbols in give
//! `n - span` samples out.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::LinkConfig;
use crate::{Error, Result};

/// Unit-energy RRC taps spanning `span` symbols (`span * sps + 1` taps).
pub fn rrc_taps(samples_per_symbol: usize, rolloff: f64, span: usize) -> Vec<f64> {
    let len = span * samples_per_symbol + 1;
    let center = (len - 1) as f64 / 2.0;
    let beta = rolloff;
    let mut taps: Vec<f64> = (0..len)
        .map(|i| {
            let t = (i as f64 - center) / samples_per_symbol as f64;
            if t.abs() < 1e-12 {
                1.0 + beta * (4.0 / PI - 1.0)
            } else if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < 1e-12 {
                let a = PI / (4.0 * beta);
                beta / libm::sqrt(2.0)
                    * ((1.0 + 2.0 / PI) * libm::sin(a) + (1.0 - 2.0 / PI) * libm::cos(a))
            } else {
                let num = libm::sin(PI * t * (1.0 - beta))
                    + 4.0 * beta * t * libm::cos(PI * t * (1.0 + beta));
                let den = PI * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
                num / den
            }
        })
        .collect();
    let norm = libm::sqrt(taps.iter().map(|h| h * h).sum::<f64>());
    for h in &mut taps {
        *h /= norm;
    }
    taps
}

/// Upsamples `amplitudes` and convolves with the RRC pulse (full convolution).
pub fn pulse_shape(amplitudes: &[f64], cfg: &LinkConfig) -> Result<Vec<f64>> {
    let sps = cfg.samples_per_symbol;
    let span = cfg.rrc_span_symbols;
    if amplitudes.len() < span {
        return Err(Error::InsufficientLength {
            len: amplitudes.len() * sps,
            span: span * sps,
        });
    }
    let taps = rrc_taps(sps, cfg.rolloff, span);
    let mut out = vec![0.0; (amplitudes.len() + span) * sps];
    for (k, &a) in amplitudes.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, &h) in out[k * sps..].iter_mut().zip(&taps) {
            *o += a * h;
        }
    }
    Ok(out)
}

pub fn add_bias(waveform: &mut [f64], bias: f64) {
    for x in waveform {
        *x += bias;
    }
}

/// Matched filter (when enabled) and symbol-rate sampling.
///
/// `waveform` must follow the [`pulse_shape`] timing convention. With the
/// matched filter disabled the waveform is sampled directly at the
/// transmit-pulse peaks.
pub fn receiver_front_end(waveform: &[f64], cfg: &LinkConfig) -> Vec<f64> {
    let sps = cfg.samples_per_symbol;
    let span = cfg.rrc_span_symbols;
    let n_symbols = (waveform.len() / sps).saturating_sub(span);
    let kept = n_symbols.saturating_sub(span);
    let first = span / 2;

    if !cfg.matched_filter {
        return (first..first + kept)
            .map(|k| waveform[k * sps + span * sps / 2])
            .collect();
    }

    let taps = rrc_taps(sps, cfg.rolloff, span);
    let delay = span * sps;
    (first..first + kept)
        .map(|k| {
            let at = k * sps + delay;
            // RRC taps are symmetric, so correlation equals convolution.
            taps.iter()
                .zip(&waveform[at - delay..=at])
                .map(|(h, x)| h * x)
                .sum()
        })
        .collect()
}
