//! PAM-4 constellation {0, 1, √2, √3} with Gray labelling.
//!
//! Symbol indices are 0-based and ordered by amplitude. The bit labels are
//! `00, 01, 11, 10`, so neighbouring amplitudes differ in exactly one bit.

/// Amplitude of each symbol index.
pub const AMPLITUDES: [f64; 4] = [0.0, 1.0, core::f64::consts::SQRT_2, 1.732_050_807_568_877_2];

/// A transmitted bit pair `[b0, b1]`, `b0` being the more significant bit.
pub type BitPair = [u8; 2];

pub fn bits_of(symbol: u8) -> BitPair {
    let g = symbol ^ (symbol >> 1);
    [(g >> 1) & 1, g & 1]
}

pub fn symbol_of(bits: BitPair) -> u8 {
    let g = ((bits[0] & 1) << 1) | (bits[1] & 1);
    g ^ (g >> 1)
}

pub fn amplitude(bits: BitPair) -> f64 {
    AMPLITUDES[symbol_of(bits) as usize]
}

pub fn map_bits_to_symbols(bits: &[BitPair]) -> alloc::vec::Vec<f64> {
    bits.iter().map(|&b| amplitude(b)).collect()
}

/// Number of differing bits between the labels of two symbol indices.
pub fn bit_errors(sent: u8, decided: u8) -> u32 {
    let a = bits_of(sent);
    let b = bits_of(decided);
    u32::from(a[0] != b[0]) + u32::from(a[1] != b[1])
}
