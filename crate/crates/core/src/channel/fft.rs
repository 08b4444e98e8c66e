//! In-place iterative radix-2 FFT.

use core::f64::consts::PI;
use num_complex::Complex64;

/// Transforms `data` in place. The length must be a power of two. The inverse
/// transform is scaled by `1/n`, so `inverse(forward(x)) == x`.
pub fn fft(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length {n} is not a power of two");
    if n < 2 {
        return;
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }

    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = sign * 2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let angle = step * k as f64;
                let w = Complex64::new(libm::cos(angle), libm::sin(angle));
                let u = data[start + k];
                let v = data[start + k + half] * w;
                data[start + k] = u + v;
                data[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        for x in data.iter_mut() {
            *x *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .fold(Complex64::new(0.0, 0.0), |acc, (t, &v)| {
                        let a = -2.0 * PI * (k * t) as f64 / n as f64;
                        acc + v * Complex64::new(libm::cos(a), libm::sin(a))
                    })
            })
            .collect()
    }

    #[test]
    fn matches_direct_dft() {
        let x: Vec<Complex64> = (0..64)
            .map(|i| {
                Complex64::new(
                    libm::sin(0.3 * i as f64) + 0.1 * i as f64,
                    libm::cos(1.7 * i as f64),
                )
            })
            .collect();
        let mut y = x.clone();
        fft(&mut y, false);
        for (a, b) in y.iter().zip(naive_dft(&x)) {
            assert!((a - b).norm() < 1e-9);
        }
        fft(&mut y, true);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
