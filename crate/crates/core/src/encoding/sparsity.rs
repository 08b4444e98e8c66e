//! ℓ1-over-ℓ2 sparsity measure of the encoder matrices and the per-step
//! max-abs normalization.

use alloc::vec::Vec;

use super::EncoderModel;
use crate::{Error, Result};

/// Σ|w| / √(Σw²). Lies in [1, √len] for any nonzero matrix; smaller is sparser.
pub fn l1_over_l2(matrix: &[f64]) -> Result<f64> {
    let (l1, l2sq) = matrix
        .iter()
        .fold((0.0, 0.0), |(l1, l2), &w| (l1 + w.abs(), l2 + w * w));
    if l2sq == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(l1 / libm::sqrt(l2sq))
}

/// Adds `scale · ∂ℓ1,2/∂w` into `grad`.
///
/// ∂/∂w = sign(w)/‖w‖₂ − ‖w‖₁·w/‖w‖₂³. The subgradient at w = 0 is taken as 0.
pub fn l1_over_l2_grad(matrix: &[f64], scale: f64, grad: &mut [f64]) -> Result<()> {
    let (l1, l2sq) = matrix
        .iter()
        .fold((0.0, 0.0), |(l1, l2), &w| (l1 + w.abs(), l2 + w * w));
    if l2sq == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let l2 = libm::sqrt(l2sq);
    let inv = scale / l2;
    let cross = scale * l1 / (l2sq * l2);
    for (g, &w) in grad.iter_mut().zip(matrix) {
        let sign = if w > 0.0 {
            1.0
        } else if w < 0.0 {
            -1.0
        } else {
            0.0
        };
        *g += sign * inv - cross * w;
    }
    Ok(())
}

/// Average ℓ1/ℓ2 ratio over all class matrices (without the α weight).
pub fn sparsity_penalty(model: &EncoderModel) -> Result<f64> {
    let mut total = 0.0;
    for n in 0..model.n_classes {
        total += l1_over_l2(model.matrix(n))?;
    }
    Ok(total / model.n_classes as f64)
}

/// Adds `scale · ∇(sparsity_penalty)` into `grad` (laid out like the model's
/// matrices).
pub fn sparsity_penalty_grad(model: &EncoderModel, scale: f64, grad: &mut [f64]) -> Result<()> {
    let size = model.matrix_len();
    let per_class = scale / model.n_classes as f64;
    for (n, g) in grad.chunks_exact_mut(size).enumerate() {
        l1_over_l2_grad(model.matrix(n), per_class, g)?;
    }
    Ok(())
}

/// Divides every class matrix by its largest absolute entry. All-zero
/// matrices are left alone; their class indices are returned.
pub fn normalize_matrices(model: &mut EncoderModel) -> Vec<usize> {
    let size = model.matrix_len();
    let mut skipped = Vec::new();
    for (n, m) in model.matrices.chunks_exact_mut(size).enumerate() {
        let peak = m.iter().fold(0.0f64, |acc, w| acc.max(w.abs()));
        if peak == 0.0 {
            log::warn!("encoder matrix {n} is all zero; skipping normalization");
            skipped.push(n);
            continue;
        }
        if peak != 1.0 {
            for w in m.iter_mut() {
                *w /= peak;
            }
        }
    }
    skipped
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::QuantRange;
    use alloc::vec;
    use proptest::prelude::*;

    /// Two-pass reference: first the ℓ1 sum, then the ℓ2 norm, then divide.
    fn oracle(m: &[f64]) -> f64 {
        let mut l1 = 0.0;
        for w in m {
            l1 += w.abs();
        }
        let mut sq = 0.0;
        for w in m {
            sq += w.powi(2);
        }
        l1 / sq.sqrt()
    }

    fn model(matrices: Vec<f64>, m: usize, t: usize) -> EncoderModel {
        let n = matrices.len() / (m * t);
        EncoderModel {
            n_classes: n,
            m_neurons: m,
            t_steps: t,
            q_range: QuantRange::new(0.0, 1.0).unwrap(),
            graded_bits: None,
            matrices,
        }
    }

    #[test]
    fn ratio_extremes() {
        let mut single = vec![0.0; 80];
        single[17] = -3.0;
        assert_eq!(l1_over_l2(&single).unwrap(), 1.0);
        let ones = vec![1.0; 80];
        assert!((l1_over_l2(&ones).unwrap() - 80f64.sqrt()).abs() < 1e-12);
        assert!((80f64.sqrt() - 8.9443).abs() < 1e-4);
        assert_eq!(l1_over_l2(&[0.0; 9]), Err(Error::ZeroMatrix));
    }

    #[test]
    fn ratio_matches_two_pass_reference() {
        let m = [0.3, -1.2, 0.05, 2.0, -0.7, 0.0, 1.1, -0.25, 0.9];
        assert!((l1_over_l2(&m).unwrap() - oracle(&m)).abs() < 1e-12);
    }

    #[test]
    fn penalty_is_mean_of_ratios() {
        let mut data = vec![0.0; 3 * 8];
        data[0] = 1.0; // single spike
        data[8..16].fill(1.0); // all ones
        for (i, w) in data[16..].iter_mut().enumerate() {
            *w = (i as f64 - 3.5) * 0.3;
        }
        let mdl = model(data.clone(), 2, 4);
        let expected = (1.0 + 8f64.sqrt() + oracle(&data[16..])) / 3.0;
        assert!((sparsity_penalty(&mdl).unwrap() - expected).abs() < 1e-12);

        let all_single = model(vec![0.0, 0.0, 5.0, 0.0, 0.0, -2.0, 0.0, 0.0], 2, 2);
        assert_eq!(sparsity_penalty(&all_single).unwrap(), 1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = [0.3, -1.2, 0.05, 2.0, -0.7, 0.4, 1.1, -0.25, 0.9];
        let mut g = [0.0; 9];
        l1_over_l2_grad(&m, 1.0, &mut g).unwrap();
        for i in 0..m.len() {
            let h = 1e-6;
            let mut p = m;
            p[i] += h;
            let mut q = m;
            q[i] -= h;
            let fd = (oracle(&p) - oracle(&q)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "entry {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn normalization_divides_by_peak() {
        let mut mdl = model(vec![1.0, -4.0, 2.0, 0.5, 0.0, 0.0, 0.0, 0.0], 2, 2);
        let skipped = normalize_matrices(&mut mdl);
        assert_eq!(skipped, vec![1]);
        assert_eq!(mdl.matrix(0), &[0.25, -1.0, 0.5, 0.125]);
        assert_eq!(mdl.matrix(1), &[0.0; 4]);
    }

    proptest! {
        #[test]
        fn ratio_bounds_and_scale_invariance(
            m in proptest::collection::vec(-10.0f64..10.0, 80),
            c in 1e-3f64..1e3,
        ) {
            prop_assume!(m.iter().any(|&w| w != 0.0));
            let r = l1_over_l2(&m).unwrap();
            prop_assert!(r >= 1.0 - 1e-12 && r <= 80f64.sqrt() + 1e-12);
            let scaled: Vec<f64> = m.iter().map(|w| w * c).collect();
            prop_assert!((l1_over_l2(&scaled).unwrap() - r).abs() < 1e-12);
        }

        #[test]
        fn normalization_idempotent_sign_and_argmax_preserving(
            m in proptest::collection::vec(-10.0f64..10.0, 24),
        ) {
            prop_assume!(m.iter().any(|&w| w != 0.0));
            let mut once = model(m.clone(), 2, 3);
            normalize_matrices(&mut once);
            let mut twice = once.clone();
            normalize_matrices(&mut twice);
            prop_assert_eq!(&once.matrices, &twice.matrices);
            for (n, chunk) in m.chunks(6).enumerate() {
                let out = once.matrix(n);
                if chunk.iter().all(|&w| w == 0.0) { continue; }
                let peak = out.iter().fold(0.0f64, |a, w| a.max(w.abs()));
                prop_assert!((peak - 1.0).abs() < 1e-15);
                let arg = |v: &[f64]| v.iter().enumerate().fold((0, -1.0), |b, (i, w)| if w.abs() > b.1 { (i, w.abs()) } else { b }).0;
                prop_assert_eq!(arg(chunk), arg(out));
                for (a, b) in chunk.iter().zip(out) {
                    prop_assert_eq!(a.signum() * (a != &0.0) as i32 as f64, b.signum() * (b != &0.0) as i32 as f64);
                }
            }
        }
    }
}
