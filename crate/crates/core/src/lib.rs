//! Spiking-neural-network equalization of an IM/DD optical link.
//!
//! The crate is split along the signal path:
//!
//! * [`channel`] simulates the PAM-4 link (pulse shaping, bias, chromatic
//!   dispersion, square-law detection, noise, matched filter) and frames
//!   received samples into equalizer windows.
//! * [`encoding`] turns received samples into input rasters: the learnable
//!   per-class matrix encoding with its ℓ1/ℓ2 sparsity machinery, plus the
//!   log-scale and ternary benchmark encoders.
//! * [`snn`] is the discrete-time LIF network, its leaky-integrator readout and
//!   surrogate-gradient backpropagation through time.
//! * [`training`] jointly optimizes encoder matrices and network weights.
//! * [`evaluation`] runs BER sweeps, spike-rate tables, quantization sweeps and
//!   weight histograms.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. All IO lives in the companion command-line crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channel;
pub mod encoding;
mod error;
pub mod evaluation;
pub mod rng;
pub mod snn;
pub mod training;

pub use error::{Error, Result};
