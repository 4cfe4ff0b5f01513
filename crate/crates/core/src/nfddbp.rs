//! Backpropagation in the nonlinear Fourier domain.
//!
//! Forward scattering turns the received window into `(a, b)`. Propagation over `x`
//! leaves `a` untouched and multiplies `b` by `exp(4 i lambda^2 x)` for the equation
//! `i E_x + E_tt + 2 kappa |E|^2 E = 0` with the scattering matrix
//! `[[-i lambda, E], [-kappa conj(E), i lambda]]`, so undoing a span of length `x1`
//! rotates `b` by `exp(-4 i lambda^2 x1)` at the `D` shifted roots of unity.
//! Layer peeling then recovers the samples one at a time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normcoord::{Kappa, NormalizedSignal};
use crate::poly::{PolyArith, PolyMatrix};
use crate::spectral::is_power_of_two;
use crate::zscatter::{
    coeffs_from_shifted_values, eval_shifted_roots, node_lambda, rescale_samples, scatter_fast,
    ScatteringPair,
};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Leaves of the fast peeling recursion run the direct algorithm.
const PEEL_LEAF: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InverseMode {
    /// O(D^2) layer peeling.
    #[default]
    Reference,
    /// Divide-and-conquer layer peeling with FFT products, O(D log^2 D).
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbpNfdConfig {
    /// Normalized distance to undo.
    pub x1: f64,
    /// Zero samples added on each side before scattering.
    #[serde(default)]
    pub window_pad: usize,
    #[serde(default)]
    pub inverse_mode: InverseMode,
}

impl DbpNfdConfig {
    pub fn new(x1: f64) -> Self {
        Self {
            x1,
            window_pad: 0,
            inverse_mode: InverseMode::Reference,
        }
    }
}

/// Multiplier applied at shifted node `n` (1-based) to move `b` by `-x` along the fiber.
pub fn backrotation_factor(n: usize, d: usize, x: f64) -> C64 {
    let lambda = node_lambda(n, d);
    C64::from_polar(1.0, -4.0 * lambda * lambda * x)
}

/// Undoes propagation over `x1`: `a` is kept, `b` is phase-rotated node by node.
pub fn backrotate(pair: &ScatteringPair, x1: f64) -> ScatteringPair {
    let mut out = pair.clone();
    out.x = pair.x - x1;
    if x1 == 0.0 {
        return out;
    }
    let d = pair.b.len();
    let mut vals = eval_shifted_roots(&pair.b, true);
    vals.iter_mut()
        .enumerate()
        .for_each(|(i, v)| *v *= backrotation_factor(i + 1, d, x1));
    out.b = coeffs_from_shifted_values(&vals, true);
    out
}

fn peeled_sample(a0: C64, b0: C64, kappa: Kappa, layer: usize) -> Result<(C64, f64)> {
    if a0 == ZERO || !a0.is_finite() {
        return Err(Error::DegeneratePair { layer });
    }
    let ratio = b0 / a0;
    if !ratio.is_finite() {
        return Err(Error::DegeneratePair { layer });
    }
    let k = kappa.value();
    if kappa == Kappa::Defocusing && ratio.norm_sqr() >= 1.0 {
        return Err(Error::NonContractive {
            layer,
            ratio: ratio.norm(),
        });
    }
    let q = -k * ratio.conj();
    let g = 1.0 / (1.0 + k * q.norm_sqr()).sqrt();
    Ok((q, g))
}

/// Removes the outermost transfer factor in place; `a`, `b` shrink by one coefficient.
fn peel_in_place(a: &mut Vec<C64>, b: &mut Vec<C64>, kappa: Kappa, layer: usize) -> Result<C64> {
    let (q, g) = peeled_sample(a[0], b[0], kappa, layer)?;
    let kq = kappa.value() * q.conj();
    let m = a.len();
    for i in 0..m {
        let (ai, bi) = (a[i], b[i]);
        if i >= 1 {
            b[i - 1] = (bi + kq * ai) * g;
        }
        a[i] = (ai - q * bi) * g;
    }
    a.truncate(m - 1);
    b.truncate(m - 1);
    Ok(q)
}

/// One layer of peeling: returns the rescaled sample `q = eps E` of the last layer and
/// the scattering data of the remaining layers.
pub fn invert_layer(a: &[C64], b: &[C64], kappa: Kappa) -> Result<(C64, Vec<C64>, Vec<C64>)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::DegeneratePair { layer: 0 });
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    let q = peel_in_place(&mut a, &mut b, kappa, 0)?;
    Ok((q, a, b))
}

fn peel_reference(pair: &ScatteringPair) -> Result<Vec<C64>> {
    let d = pair.a.len();
    let mut a = pair.a.clone();
    let mut b = pair.b.clone();
    let mut q = vec![ZERO; d];
    for layer in 0..d {
        q[d - 1 - layer] = peel_in_place(&mut a, &mut b, pair.kappa, layer)?;
    }
    Ok(q)
}

/// Peels `n` layers using the first `n` coefficients of `(a, b)`. Appends the samples in
/// peeling order and, when asked, returns `R = prod_j w M_j^{-1}` (degree `n`) such that
/// the remaining data are `w^{-n} R [a, b]^T`.
#[allow(clippy::too_many_arguments)]
fn peel_block(
    a: &[C64],
    b: &[C64],
    n: usize,
    kappa: Kappa,
    first_layer: usize,
    arith: &mut PolyArith,
    out: &mut Vec<C64>,
    want_matrix: bool,
) -> Result<Option<PolyMatrix>> {
    if n <= PEEL_LEAF {
        let mut wa = a[..n].to_vec();
        let mut wb = b[..n].to_vec();
        let mut r = PolyMatrix::identity();
        let k = kappa.value();
        for j in 0..n {
            let q = peel_in_place(&mut wa, &mut wb, kappa, first_layer + j)?;
            out.push(q);
            if want_matrix {
                let g = 1.0 / (1.0 + k * q.norm_sqr()).sqrt();
                let kq = k * q.conj();
                for col in 0..2 {
                    let r0 = std::mem::take(&mut r.e[col]);
                    let r1 = std::mem::take(&mut r.e[2 + col]);
                    let len = r0.len().max(r1.len());
                    let mut n0 = vec![ZERO; len + 1];
                    let mut n1 = vec![ZERO; len];
                    for i in 0..len {
                        let x0 = r0.get(i).copied().unwrap_or(ZERO);
                        let x1 = r1.get(i).copied().unwrap_or(ZERO);
                        n0[i + 1] = (x0 - q * x1) * g;
                        n1[i] = (kq * x0 + x1) * g;
                    }
                    r.e[col] = n0;
                    r.e[2 + col] = n1;
                }
            }
        }
        return Ok(want_matrix.then_some(r));
    }
    let h = n / 2;
    let r1 = peel_block(a, b, h, kappa, first_layer, arith, out, true)?.expect("matrix requested");
    let (a_n, b_n) = (&a[..n], &b[..n]);
    let shifted = |arith: &mut PolyArith, row: usize| -> Vec<C64> {
        let mut s = crate::poly::add(
            &arith.mul(&r1.e[2 * row], a_n),
            &arith.mul(&r1.e[2 * row + 1], b_n),
        );
        s.resize(n, ZERO);
        s[h..n].to_vec()
    };
    let next_a = shifted(arith, 0);
    let next_b = shifted(arith, 1);
    let r2 = peel_block(
        &next_a,
        &next_b,
        n - h,
        kappa,
        first_layer + h,
        arith,
        out,
        want_matrix,
    )?;
    Ok(r2.map(|r2| arith.mat_mul(&r2, &r1)))
}

fn peel_fast(pair: &ScatteringPair) -> Result<Vec<C64>> {
    let d = pair.a.len();
    let mut arith = PolyArith::new();
    let mut q = Vec::with_capacity(d);
    peel_block(
        &pair.a, &pair.b, d, pair.kappa, 0, &mut arith, &mut q, false,
    )?;
    q.reverse();
    Ok(q)
}

/// Recovers the normalized samples from scattering data by layer peeling.
pub fn inverse_scatter(pair: &ScatteringPair, mode: InverseMode) -> Result<NormalizedSignal> {
    let d = pair.a.len();
    if pair.b.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            got: pair.b.len(),
        });
    }
    if d < 2 || !is_power_of_two(d) {
        return Err(Error::NotPowerOfTwo(d));
    }
    let q = match mode {
        InverseMode::Reference => peel_reference(pair)?,
        InverseMode::Fast => peel_fast(pair)?,
    };
    let inv_eps = 1.0 / pair.eps;
    let samples = q.into_iter().map(|v| v * inv_eps).collect();
    Ok(NormalizedSignal::new(samples, pair.kappa)?.at(pair.x))
}

/// Estimated fiber input with per-burst health figures.
#[derive(Debug, Clone)]
pub struct NfdOutcome {
    pub signal: NormalizedSignal,
    /// `max | |a|^2 + kappa |b|^2 - 1 |` over the nodes after back-rotation.
    pub unit_circle_defect: f64,
    /// L1 norm of the received window.
    pub l1_norm: f64,
    /// Focusing burst whose L1 norm is at least pi/2: discrete eigenvalues may exist and
    /// the phase rotation does not account for them.
    pub solitonic_warning: bool,
}

/// Forward scattering, phase back-rotation, layer peeling.
pub fn dbp_nfd(received: &NormalizedSignal, cfg: &DbpNfdConfig) -> Result<NfdOutcome> {
    if !(cfg.x1 >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "x1 must be non-negative, got {}",
            cfg.x1
        )));
    }
    let d = received.len();
    let total = d + 2 * cfg.window_pad;
    if !is_power_of_two(total) {
        return Err(Error::NotPowerOfTwo(total));
    }
    // Padding stretches the unit window: E -> s E(s t), x -> x / s^2 keeps the equation.
    let s = total as f64 / d as f64;
    let mut padded = vec![ZERO; total];
    padded[cfg.window_pad..cfg.window_pad + d]
        .iter_mut()
        .zip(&received.samples)
        .for_each(|(p, &v)| *p = v * s);
    let window = NormalizedSignal::new(padded, received.kappa)?;
    let l1_norm = received.eps() * received.samples.iter().map(|v| v.norm()).sum::<f64>();
    let q = rescale_samples(&window)?;
    let pair = scatter_fast(&q, received.kappa)?.at(cfg.x1 / (s * s));
    let rotated = backrotate(&pair, cfg.x1 / (s * s));
    let unit_circle_defect = rotated.unit_circle_defect();
    let recovered = inverse_scatter(&rotated, cfg.inverse_mode)?;
    let samples = recovered.samples[cfg.window_pad..cfg.window_pad + d]
        .iter()
        .map(|&v| v / s)
        .collect();
    Ok(NfdOutcome {
        signal: NormalizedSignal::new(samples, received.kappa)?.at(received.x - cfg.x1),
        unit_circle_defect,
        l1_norm,
        solitonic_warning: received.kappa == Kappa::Focusing
            && l1_norm >= std::f64::consts::FRAC_PI_2,
    })
}
