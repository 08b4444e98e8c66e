//! Fiber propagation, square-law detection and receiver noise.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::fft::fft;
use super::LinkConfig;
use crate::{Error, Result};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Group-velocity dispersion β₂ in s²/m from the dispersion coefficient
/// D (ps/(nm·km)) and wavelength λ (nm): β₂ = −D·λ²/(2πc).
pub fn beta2(dispersion_ps_nm_km: f64, wavelength_nm: f64) -> f64 {
    let d = dispersion_ps_nm_km * 1e-6; // ps/(nm km) -> s/m^2
    let lambda = wavelength_nm * 1e-9;
    -d * lambda * lambda / (2.0 * PI * SPEED_OF_LIGHT)
}

/// Propagates the (real, zero-imaginary) field envelope through the fiber
/// with the all-pass filter H(ω) = exp(j·β₂/2·ω²·L).
///
/// The block is zero-padded to the next power of two and the transform is
/// circular over the padded length; the result is truncated back to the
/// input length. For power-of-two inputs the filter is exactly unitary.
pub fn apply_chromatic_dispersion(waveform: &[f64], cfg: &LinkConfig) -> Vec<Complex64> {
    let n = waveform.len().next_power_of_two();
    let mut field = vec![Complex64::new(0.0, 0.0); n];
    for (f, &x) in field.iter_mut().zip(waveform) {
        f.re = x;
    }
    let length_m = cfg.fiber_length_km * 1e3;
    if length_m == 0.0 || n < 2 {
        field.truncate(waveform.len());
        return field;
    }

    let sample_rate = cfg.baud_rate_gbd * 1e9 * cfg.samples_per_symbol as f64;
    let b2 = beta2(cfg.dispersion_ps_nm_km, cfg.wavelength_nm);
    fft(&mut field, false);
    for (k, f) in field.iter_mut().enumerate() {
        // FFT bin k maps to frequency k·fs/n, wrapped to the negative half.
        let bin = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        let omega = 2.0 * PI * bin * sample_rate / n as f64;
        let phase = 0.5 * b2 * omega * omega * length_m;
        *f *= Complex64::new(libm::cos(phase), libm::sin(phase));
    }
    fft(&mut field, true);
    field.truncate(waveform.len());
    field
}

/// Square-law detection |x|².
pub fn photodiode(field: &[Complex64]) -> Vec<f64> {
    field.iter().map(|x| x.norm_sqr()).collect()
}

/// Scale factor that brings `samples` to unit mean power.
pub fn power_scale(samples: &[f64]) -> Result<f64> {
    let power = samples.iter().map(|x| x * x).sum::<f64>() / samples.len().max(1) as f64;
    if power == 0.0 || !power.is_finite() {
        return Err(Error::ZeroPower);
    }
    Ok(1.0 / libm::sqrt(power))
}

/// Scales the waveform to unit average power and returns the applied scale.
pub fn normalize_power(waveform: &mut [f64]) -> Result<f64> {
    let scale = power_scale(waveform)?;
    for x in waveform.iter_mut() {
        *x *= scale;
    }
    Ok(scale)
}

/// Adds white Gaussian noise of variance 10^(σ²_dB/10). A σ² of −∞ disables
/// the noise and leaves the rng untouched.
pub fn add_awgn<R: Rng + ?Sized>(waveform: &mut [f64], sigma2_db: f64, rng: &mut R) {
    let variance = libm::pow(10.0, sigma2_db / 10.0);
    if variance == 0.0 {
        return;
    }
    let sigma = libm::sqrt(variance);
    for x in waveform {
        let z: f64 = StandardNormal.sample(rng);
        *x += sigma * z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn beta2_from_dispersion() {
        let b2 = beta2(-17.0, 1270.0);
        assert!((b2 - 1.4557e-26).abs() < 0.001e-26, "{b2}");
        // plug back: D = -2πc·β₂/λ²
        let d = -2.0 * PI * SPEED_OF_LIGHT * b2 / (1270e-9f64).powi(2);
        assert!((d * 1e6 + 17.0).abs() < 1e-9);
        // 14.55 ps²/km
        assert!((b2 * 1e24 * 1e3 - 14.557).abs() < 0.01);
    }

    #[test]
    fn zero_length_is_identity() {
        let cfg = LinkConfig {
            fiber_length_km: 0.0,
            ..LinkConfig::default()
        };
        let x: Vec<f64> = (0..100).map(|i| libm::sin(i as f64)).collect();
        let y = apply_chromatic_dispersion(&x, &cfg);
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(*a, b.re);
            assert_eq!(b.im, 0.0);
        }
    }

    #[test]
    fn dispersion_preserves_energy() {
        let cfg = LinkConfig::default();
        let mut r = rng::stream(1, "test");
        let x: Vec<f64> = (0..4096).map(|_| r.random::<f64>() - 0.3).collect();
        let y = apply_chromatic_dispersion(&x, &cfg);
        let ein: f64 = x.iter().map(|v| v * v).sum();
        let eout: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        assert!((eout / ein - 1.0).abs() < 1e-9);
    }

    #[test]
    fn photodiode_squares() {
        let y = photodiode(&[
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 2f64.sqrt()),
        ]);
        assert_eq!(y[0], 4.0);
        assert_eq!(y[1], 0.0);
        assert_eq!(y[2], 1.0);
        assert!((y[3] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn normalization() {
        let mut ones = vec![1.0; 10];
        assert_eq!(normalize_power(&mut ones).unwrap(), 1.0);
        assert_eq!(ones, vec![1.0; 10]);
        let mut twos = vec![2.0; 10];
        assert_eq!(normalize_power(&mut twos).unwrap(), 0.5);
        assert_eq!(twos, vec![1.0; 10]);
        assert_eq!(normalize_power(&mut [0.0; 4]), Err(Error::ZeroPower));

        let mut r = rng::stream(2, "test");
        let mut x: Vec<f64> = (0..1000).map(|_| r.random::<f64>() * 3.0 - 1.0).collect();
        normalize_power(&mut x).unwrap();
        let p = x.iter().map(|v| v * v).sum::<f64>() / 1000.0;
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disabled_noise_is_identity() {
        let mut r = rng::stream(3, "test");
        let mut x = vec![0.25; 16];
        add_awgn(&mut x, f64::NEG_INFINITY, &mut r);
        assert_eq!(x, vec![0.25; 16]);
    }

    fn empirical_variance(sigma2_db: f64) -> f64 {
        let n = 1_000_000;
        let mut r = rng::stream(4, "test");
        let mut x = vec![0.0; n];
        add_awgn(&mut x, sigma2_db, &mut r);
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    }

    #[test]
    fn noise_variance_matches_db() {
        // Var of the sample variance of N(0,s²) is 2s⁴/(n-1); 3σ bound.
        let v0 = empirical_variance(0.0);
        assert!((v0 - 1.0).abs() < 3.0 * (2.0f64 / 1e6).sqrt(), "{v0}");
        let target = libm::pow(10.0, -1.7);
        assert!((target - 0.019_95).abs() < 1e-5);
        let v17 = empirical_variance(-17.0);
        assert!(
            (v17 - target).abs() < 3.0 * target * (2.0f64 / 1e6).sqrt(),
            "{v17}"
        );
    }
}
