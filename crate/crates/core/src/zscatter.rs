//! Forward scattering for the discretized Zakharov-Shabat problem.
//!
//! Each rescaled sample `q_n = eps * E_n` contributes the transfer factor
//!
//! ```text
//! M_n(w) = [[1, q_n w], [-kappa conj(q_n), w]] / sqrt(1 + kappa |q_n|^2),   w = 1/z
//! ```
//!
//! and `[a(w), b(w)]^T = M_D ... M_1 [1, 0]^T`. The `z^{1/2}` prefactors of the
//! recursion cancel against the initial `z^{-D/2}` and are never formed, which leaves
//! `a` and `b` as polynomials of degree at most `D - 1` in `w`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normcoord::{Kappa, NormalizedSignal};
use crate::poly::{PolyArith, PolyMatrix};
use crate::spectral::{is_power_of_two, Spectral};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Leaves of the product tree are built by direct recursion.
const LEAF: usize = 32;

/// Polynomial scattering data `a(z) = sum a_i z^{-i}`, `b(z) = sum b_i z^{-i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringPair {
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    pub kappa: Kappa,
    pub eps: f64,
    /// Normalized position the data belongs to.
    pub x: f64,
}

impl ScatteringPair {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn at(mut self, x: f64) -> Self {
        self.x = x;
        self
    }

    /// `max_n | |a|^2 + kappa |b|^2 - 1 |` over the shifted roots of unity.
    pub fn unit_circle_defect(&self) -> f64 {
        let av = eval_shifted_roots(&self.a, true);
        let bv = eval_shifted_roots(&self.b, true);
        let k = self.kappa.value();
        av.iter()
            .zip(&bv)
            .map(|(a, b)| (a.norm_sqr() + k * b.norm_sqr() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `eps * E_n`. For normal dispersion every rescaled sample must stay inside the unit disk.
pub fn rescale_samples(sig: &NormalizedSignal) -> Result<Vec<C64>> {
    let eps = sig.eps();
    let q: Vec<C64> = sig.samples.iter().map(|&v| v * eps).collect();
    check_normalizer(&q, sig.kappa)?;
    Ok(q)
}

pub(crate) fn check_normalizer(q: &[C64], kappa: Kappa) -> Result<()> {
    if kappa == Kappa::Defocusing {
        if let Some((index, v)) = q.iter().enumerate().find(|(_, v)| v.norm_sqr() >= 1.0) {
            return Err(Error::NormalizerSingular {
                index,
                magnitude: v.norm(),
            });
        }
    }
    Ok(())
}

fn inv_gamma(q: C64, kappa: f64) -> f64 {
    1.0 / (1.0 + kappa * q.norm_sqr()).sqrt()
}

/// Direct O(D^2) evaluation of the recursion; the reference for [`scatter_fast`].
pub fn scatter_sequential(samples: &[C64], kappa: Kappa) -> Result<ScatteringPair> {
    check_normalizer(samples, kappa)?;
    let d = samples.len();
    let k = kappa.value();
    let mut a = vec![ZERO; d.max(1)];
    let mut b = vec![ZERO; d.max(1)];
    a[0] = C64::new(1.0, 0.0);
    for (n, &q) in samples.iter().enumerate() {
        let g = inv_gamma(q, k);
        let qc = -k * q.conj();
        // degree after n+1 factors is at most n
        for i in (0..=n.min(d - 1)).rev() {
            let b_prev = if i > 0 { b[i - 1] } else { ZERO };
            let ai = a[i];
            a[i] = (ai + q * b_prev) * g;
            b[i] = (qc * ai + b_prev) * g;
        }
    }
    Ok(ScatteringPair {
        a,
        b,
        kappa,
        eps: 1.0 / d.max(1) as f64,
        x: 0.0,
    })
}

fn leaf_transfer(samples: &[C64], kappa: f64) -> PolyMatrix {
    let mut m = PolyMatrix::identity();
    for &q in samples {
        let g = inv_gamma(q, kappa);
        let qc = -kappa * q.conj();
        for col in 0..2 {
            let r0 = std::mem::take(&mut m.e[col]);
            let r1 = std::mem::take(&mut m.e[2 + col]);
            let len = r0.len().max(r1.len() + 1);
            let mut n0 = vec![ZERO; len];
            let mut n1 = vec![ZERO; len];
            for (i, &v) in r0.iter().enumerate() {
                n0[i] += v * g;
                n1[i] += qc * v * g;
            }
            for (i, &v) in r1.iter().enumerate() {
                n0[i + 1] += q * v * g;
                n1[i + 1] += v * g;
            }
            m.e[col] = n0;
            m.e[2 + col] = n1;
        }
    }
    m
}

fn transfer(samples: &[C64], kappa: f64, arith: &mut PolyArith) -> PolyMatrix {
    if samples.len() <= LEAF {
        return leaf_transfer(samples, kappa);
    }
    let (early, late) = samples.split_at(samples.len() / 2);
    let first = transfer(early, kappa, arith);
    let second = transfer(late, kappa, arith);
    arith.mat_mul(&second, &first)
}

/// Balanced product tree of transfer factors with FFT-based polynomial products,
/// O(D log^2 D). Agrees with [`scatter_sequential`] up to rounding.
pub fn scatter_fast(samples: &[C64], kappa: Kappa) -> Result<ScatteringPair> {
    let d = samples.len();
    if !is_power_of_two(d) {
        return Err(Error::NotPowerOfTwo(d));
    }
    check_normalizer(samples, kappa)?;
    let mut arith = PolyArith::new();
    let mut m = transfer(samples, kappa.value(), &mut arith);
    let mut a = std::mem::take(&mut m.e[0]);
    let mut b = std::mem::take(&mut m.e[2]);
    a.resize(d, ZERO);
    b.resize(d, ZERO);
    Ok(ScatteringPair {
        a,
        b,
        kappa,
        eps: 1.0 / d as f64,
        x: 0.0,
    })
}

/// Step A for a normalized signal: rescale, then the fast product tree.
pub fn scatter_signal(sig: &NormalizedSignal) -> Result<ScatteringPair> {
    let q = rescale_samples(sig)?;
    Ok(scatter_fast(&q, sig.kappa)?.at(sig.x))
}

/// Values of `p(z) = sum_i c_i z^{-i}` at `z = w^{n - 1/2}` (or `w^n` without the half
/// shift), `n = 1..D`, `w = exp(-2 pi i / D)`: a chirp then one length-`D` DFT.
pub fn eval_shifted_roots(coeffs: &[C64], half_shift: bool) -> Vec<C64> {
    let d = coeffs.len();
    if d == 0 {
        return Vec::new();
    }
    let mut buf: Vec<C64> = if half_shift {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * C64::from_polar(1.0, -PI * i as f64 / d as f64))
            .collect()
    } else {
        coeffs.to_vec()
    };
    Spectral::new(d).inverse(&mut buf);
    buf.rotate_left(1);
    buf
}

/// Exact inverse of [`eval_shifted_roots`].
pub fn coeffs_from_shifted_values(values: &[C64], half_shift: bool) -> Vec<C64> {
    let d = values.len();
    if d == 0 {
        return Vec::new();
    }
    let mut buf = values.to_vec();
    buf.rotate_right(1);
    Spectral::new(d).forward(&mut buf);
    let scale = 1.0 / d as f64;
    if half_shift {
        buf.iter_mut().enumerate().for_each(|(i, c)| {
            *c *= C64::from_polar(scale, PI * i as f64 / d as f64);
        });
    } else {
        buf.iter_mut().for_each(|c| *c *= scale);
    }
    buf
}

/// Spectral parameter of shifted node `n` (1-based): `z_n = exp(-2 i lambda eps)`
/// with the principal logarithm, so `lambda` lies in `(-pi D/2, pi D/2)`.
pub fn node_lambda(n: usize, d: usize) -> f64 {
    let m = n as f64 - 0.5;
    if m < 0.5 * d as f64 {
        PI * m
    } else {
        PI * (m - d as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::horner;
    use crate::spectral::rel_max;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(rng: &mut ChaCha8Rng, d: usize, amp: f64) -> Vec<C64> {
        (0..d)
            .map(|_| C64::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp)))
            .collect()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn rescale_divides_by_length() {
        let sig = NormalizedSignal::new(vec![c(2.0, 0.0); 4], Kappa::Focusing).unwrap();
        assert!(rescale_samples(&sig)
            .unwrap()
            .iter()
            .all(|v| *v == c(0.5, 0.0)));
        let zero = NormalizedSignal::new(vec![c(0.0, 0.0); 8], Kappa::Defocusing).unwrap();
        assert!(rescale_samples(&zero)
            .unwrap()
            .iter()
            .all(|v| v.norm() == 0.0));
    }

    #[test]
    fn defocusing_rejects_unit_magnitude_sample() {
        let mut samples = vec![c(0.0, 0.0); 4];
        samples[2] = c(4.0, 0.0); // eps * 4 = 1
        let sig = NormalizedSignal::new(samples.clone(), Kappa::Defocusing).unwrap();
        assert!(matches!(
            rescale_samples(&sig),
            Err(Error::NormalizerSingular { index: 2, .. })
        ));
        let sig = NormalizedSignal::new(samples, Kappa::Focusing).unwrap();
        assert!(rescale_samples(&sig).is_ok());
    }

    #[test]
    fn zero_input_gives_trivial_pair() {
        for d in [1usize, 2, 16, 128] {
            let z = vec![c(0.0, 0.0); d];
            for kappa in [Kappa::Focusing, Kappa::Defocusing] {
                let p = scatter_sequential(&z, kappa).unwrap();
                assert_eq!(p.a[0], c(1.0, 0.0));
                assert!(p.a[1..].iter().chain(&p.b).all(|v| v.norm() == 0.0));
                let f = scatter_fast(&z, kappa).unwrap();
                assert_eq!(f.a, p.a);
                assert_eq!(f.b, p.b);
            }
        }
    }

    #[test]
    fn single_sample_closed_form() {
        let q = c(0.3, -0.4);
        let p = scatter_sequential(&[q], Kappa::Defocusing).unwrap();
        let g = (1.0 - q.norm_sqr()).sqrt();
        assert!((p.a[0] - c(1.0 / g, 0.0)).norm() < 1e-15);
        assert!((p.b[0] - q.conj() / g).norm() < 1e-15);
    }

    #[test]
    fn two_sample_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = random_samples(&mut rng, 2, 0.6);
            for kappa in [Kappa::Focusing, Kappa::Defocusing] {
                let k = kappa.value();
                let g1 = (1.0 + k * q[0].norm_sqr()).sqrt();
                let g2 = (1.0 + k * q[1].norm_sqr()).sqrt();
                let n = 1.0 / (g1 * g2);
                let a = [c(n, 0.0), -k * q[1] * q[0].conj() * n];
                let b = [-k * q[1].conj() * n, -k * q[0].conj() * n];
                let p = scatter_sequential(&q, kappa).unwrap();
                for i in 0..2 {
                    assert!((p.a[i] - a[i]).norm() < 1e-14);
                    assert!((p.b[i] - b[i]).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn leading_a_coefficient_is_product_of_normalizers() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_samples(&mut rng, 256, 0.05);
        for kappa in [Kappa::Focusing, Kappa::Defocusing] {
            let k = kappa.value();
            let expect: f64 = q.iter().map(|v| inv_gamma(*v, k)).product();
            let p = scatter_fast(&q, kappa).unwrap();
            assert!((p.a[0] - c(expect, 0.0)).norm() < 1e-13);
            assert!(p.a[0].im.abs() < 1e-15 && p.a[0].re > 0.0);
        }
    }

    #[test]
    fn small_signal_is_first_order_born() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 64;
        let q = random_samples(&mut rng, d, 1e-6);
        for kappa in [Kappa::Focusing, Kappa::Defocusing] {
            let p = scatter_sequential(&q, kappa).unwrap();
            for (n, qn) in q.iter().enumerate() {
                // sample n (0-based) lands on w^(D-1-n)
                let born = -kappa.value() * qn.conj();
                assert!((p.b[d - 1 - n] - born).norm() < 1e-9 * 1e-6);
            }
        }
    }

    #[test]
    fn defocusing_energy_identity_on_unit_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = random_samples(&mut rng, 512, 0.05);
        let p = scatter_fast(&q, Kappa::Defocusing).unwrap();
        assert!(p.unit_circle_defect() < 1e-9);
        let p = scatter_fast(&q, Kappa::Focusing).unwrap();
        assert!(p.unit_circle_defect() < 1e-9);
    }

    #[test]
    fn fast_matches_sequential_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let amp = if trial % 2 == 0 { 0.01 } else { 0.2 };
            let q = random_samples(&mut rng, 256, amp);
            for kappa in [Kappa::Focusing, Kappa::Defocusing] {
                let s = scatter_sequential(&q, kappa).unwrap();
                let f = scatter_fast(&q, kappa).unwrap();
                assert!(rel_max(&f.a, &s.a) < 1e-10);
                assert!(rel_max(&f.b, &s.b) < 1e-10);
            }
        }
    }

    #[test]
    fn fast_requires_power_of_two() {
        assert!(matches!(
            scatter_fast(&[c(0.0, 0.0); 3], Kappa::Focusing),
            Err(Error::NotPowerOfTwo(3))
        ));
    }

    #[test]
    fn shifted_root_evaluation_matches_horner() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = 64;
        let coeffs = random_samples(&mut rng, d, 1.0);
        for half in [true, false] {
            let vals = eval_shifted_roots(&coeffs, half);
            for n in 1..=d {
                let s = if half { 0.5 } else { 0.0 };
                let z = C64::from_polar(1.0, -2.0 * PI * (n as f64 - s) / d as f64);
                let brute = horner(&coeffs, z.inv());
                assert!((vals[n - 1] - brute).norm() < 1e-12 * d as f64);
            }
        }
    }

    #[test]
    fn constant_and_monomial_node_values() {
        let d = 16;
        let mut constant = vec![c(0.0, 0.0); d];
        constant[0] = c(2.5, -1.0);
        assert!(eval_shifted_roots(&constant, true)
            .iter()
            .all(|v| (v - constant[0]).norm() < 1e-14));
        let mut mono = vec![c(0.0, 0.0); d];
        mono[1] = c(1.0, 0.0);
        let vals = eval_shifted_roots(&mono, true);
        for n in 1..=d {
            let expect = C64::from_polar(1.0, 2.0 * PI * (n as f64 - 0.5) / d as f64);
            assert!((vals[n - 1] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn node_lambdas_follow_principal_branch() {
        let d = 8;
        assert!((node_lambda(1, d) - 0.5 * PI).abs() < 1e-15);
        assert!((node_lambda(4, d) - 3.5 * PI).abs() < 1e-15);
        assert!((node_lambda(5, d) + 3.5 * PI).abs() < 1e-15);
        assert!((node_lambda(8, d) + 0.5 * PI).abs() < 1e-15);
        for n in 1..=d {
            let z = C64::from_polar(1.0, -2.0 * node_lambda(n, d) / d as f64);
            let node = C64::from_polar(1.0, -2.0 * PI * (n as f64 - 0.5) / d as f64);
            assert!((z - node).norm() < 1e-14);
        }
    }

    proptest! {
        #[test]
        fn shifted_transform_round_trips(
            re in proptest::collection::vec(-1.0f64..1.0, 32),
            im in proptest::collection::vec(-1.0f64..1.0, 32),
            half in any::<bool>(),
        ) {
            let v: Vec<C64> = re.iter().zip(&im).map(|(&r, &i)| c(r, i)).collect();
            let back = coeffs_from_shifted_values(&eval_shifted_roots(&v, half), half);
            prop_assert!(rel_max(&back, &v) < 1e-12);
            let back = eval_shifted_roots(&coeffs_from_shifted_values(&v, half), half);
            prop_assert!(rel_max(&back, &v) < 1e-12);
        }

        #[test]
        fn fast_equals_sequential_across_sizes(
            log_d in 0u32..9,
            amp in 1e-4f64..0.5,
            seed in any::<u64>(),
            focusing in any::<bool>(),
        ) {
            let d = 1usize << log_d;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_samples(&mut rng, d, amp);
            let kappa = if focusing { Kappa::Focusing } else { Kappa::Defocusing };
            let s = scatter_sequential(&q, kappa).unwrap();
            let f = scatter_fast(&q, kappa).unwrap();
            prop_assert!(rel_max(&f.a, &s.a) < 1e-10);
            prop_assert!(rel_max(&f.b, &s.b) < 1e-10);
        }
    }
}
