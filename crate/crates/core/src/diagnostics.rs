//! Solitonic-content instrumentation: L1 norm, discrete eigenvalues (roots of `a` outside
//! the unit circle in `z`), and the share of energy carried by them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normcoord::{Kappa, NormalizedSignal};
use crate::poly::horner;
use crate::spectral::{bin_index, Spectral};
use crate::zscatter::{rescale_samples, scatter_fast, ScatteringPair};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `eps * sum |E_n|`.
pub fn l1_norm(sig: &NormalizedSignal) -> f64 {
    sig.eps() * sig.samples.iter().map(|v| v.norm()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RootMethod {
    /// Aberth-Ehrlich simultaneous iteration, O(n^2) per sweep.
    #[default]
    Aberth,
    /// Eigenvalues of the companion matrix, O(n^3).
    Companion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenConfig {
    /// Accept roots with `|z| > 1 + tol`.
    pub tol: f64,
    pub degree_cap: usize,
    pub method: RootMethod,
    /// Accepted `|a(w)| / sum |a_k| |w|^k` at a root.
    pub residual_tol: f64,
    pub max_iterations: usize,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            degree_cap: 4096,
            method: RootMethod::Aberth,
            residual_tol: 1e-6,
            max_iterations: 500,
        }
    }
}

/// Leading coefficients below this fraction of the largest are dropped before root finding.
const TRIM_REL: f64 = 1e-15;

fn trimmed(coeffs: &[C64]) -> &[C64] {
    let max = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let last = coeffs
        .iter()
        .rposition(|c| c.norm() > TRIM_REL * max)
        .unwrap_or(0);
    &coeffs[..=last]
}

/// Upper convex hull of `(k, ln|c_k|)`; each edge gives a root radius and a count.
fn newton_polygon_guesses(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    let pts: Vec<(usize, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(k, c)| (k, c.norm().ln()))
        .collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &p in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross =
                (b.0 as f64 - a.0 as f64) * (p.1 - a.1) - (b.1 - a.1) * (p.0 as f64 - a.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out = Vec::with_capacity(n);
    for (seg, pair) in hull.windows(2).enumerate() {
        let (i, li) = pair[0];
        let (j, lj) = pair[1];
        let count = j - i;
        let radius = ((li - lj) / count as f64).exp();
        let sigma = 0.7 + 0.37 * seg as f64;
        for k in 0..count {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / count as f64 + sigma;
            out.push(C64::from_polar(radius, theta));
        }
    }
    out
}

/// `p(x)/p'(x)` and the rounding-error bound of `p(x)`, switching to the reversed
/// polynomial outside the unit disk.
fn newton_ratio(coeffs: &[C64], x: C64) -> (C64, bool) {
    let n = coeffs.len() - 1;
    let r = x.norm();
    let u = f64::EPSILON;
    if r <= 1.0 {
        let (mut p, mut dp) = (ZERO, ZERO);
        let mut bound = 0.0;
        for &c in coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
            bound = bound * r + c.norm();
        }
        (p / dp, p.norm() <= 4.0 * n as f64 * u * bound)
    } else {
        let y = x.inv();
        let ry = y.norm();
        let (mut q, mut dq) = (ZERO, ZERO);
        let mut bound = 0.0;
        for &c in coeffs.iter() {
            dq = dq * y + q;
            q = q * y + c;
            bound = bound * ry + c.norm();
        }
        let denom = n as f64 * y - y * y * dq / q;
        (denom.inv(), q.norm() <= 4.0 * n as f64 * u * bound)
    }
}

/// All roots of `sum c_k x^k` by Aberth-Ehrlich iteration.
pub fn aberth_roots(coeffs: &[C64], max_iterations: usize) -> Result<Vec<C64>> {
    let coeffs = trimmed(coeffs);
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut x = newton_polygon_guesses(coeffs);
    let mut done = vec![false; n];
    for _ in 0..max_iterations {
        let mut active = 0;
        for i in 0..n {
            if done[i] {
                continue;
            }
            active += 1;
            let (ratio, small) = newton_ratio(coeffs, x[i]);
            if small || !ratio.is_finite() {
                done[i] = true;
                continue;
            }
            let xi = x[i];
            let sum: C64 = x
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| (xi - xj).inv())
                .sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * sum);
            x[i] = xi - step;
            if step.norm() <= 4.0 * f64::EPSILON * x[i].norm() {
                done[i] = true;
            }
        }
        if active == 0 {
            return Ok(x);
        }
    }
    if done.iter().all(|&d| d) {
        Ok(x)
    } else {
        Err(Error::NoConvergence(max_iterations))
    }
}

/// All roots via eigenvalues of the companion matrix.
pub fn companion_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let coeffs = trimmed(coeffs);
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[n];
    let mut m = nalgebra::DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        m[(i, n - 1)] = -coeffs[i] / lead;
    }
    nalgebra::Schur::new(m)
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .ok_or(Error::NoConvergence(0))
}

fn relative_residual(coeffs: &[C64], w: C64) -> f64 {
    let r = w.norm();
    let scale = coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm());
    if r <= 1.0 {
        horner(coeffs, w).norm() / scale
    } else {
        let rev: Vec<C64> = coeffs.iter().rev().copied().collect();
        let ry = 1.0 / r;
        let rscale = rev.iter().rev().fold(0.0, |acc, c| acc * ry + c.norm());
        horner(&rev, w.inv()).norm() / rscale
    }
}

/// Upper-half-plane eigenvalues `lambda` from the roots of `a`, with
/// `z = exp(-2 i lambda eps)` and `w = 1/z`.
pub fn find_discrete_eigenvalues(pair: &ScatteringPair, cfg: &EigenConfig) -> Result<Vec<C64>> {
    if pair.kappa == Kappa::Defocusing {
        return Ok(Vec::new());
    }
    let coeffs = trimmed(&pair.a);
    let degree = coeffs.len() - 1;
    if degree > cfg.degree_cap {
        return Err(Error::DegreeTooLarge {
            degree,
            cap: cfg.degree_cap,
        });
    }
    let roots = match cfg.method {
        RootMethod::Aberth => aberth_roots(coeffs, cfg.max_iterations)?,
        RootMethod::Companion => companion_roots(coeffs)?,
    };
    let inner = 1.0 / (1.0 + cfg.tol);
    let half_d = 0.5 / pair.eps;
    let mut out = Vec::new();
    for w in roots {
        if w.norm() >= inner {
            continue;
        }
        if relative_residual(coeffs, w) > cfg.residual_tol {
            return Err(Error::NoConvergence(cfg.max_iterations));
        }
        // lambda = -i log(w) / (2 eps)
        out.push(C64::new(0.0, -half_d) * w.ln());
    }
    out.sort_by(|a, b| b.im.total_cmp(&a.im).then(a.re.total_cmp(&b.re)));
    Ok(out)
}

/// Scattering data of the nonzero part of `sig`. Zero samples at either end leave `a`
/// unchanged, so the polynomial degree drops to the support length.
pub fn support_pair(sig: &NormalizedSignal) -> Result<ScatteringPair> {
    let q = rescale_samples(sig)?;
    let first = q.iter().position(|v| *v != ZERO);
    let Some(first) = first else {
        let mut a = vec![ZERO; 2];
        a[0] = C64::new(1.0, 0.0);
        return Ok(ScatteringPair {
            a,
            b: vec![ZERO; 2],
            kappa: sig.kappa,
            eps: sig.eps(),
            x: sig.x,
        });
    };
    let last = q.iter().rposition(|v| *v != ZERO).unwrap_or(first);
    let span = last - first + 1;
    let mut padded = q[first..=last].to_vec();
    padded.resize(span.next_power_of_two().max(2), ZERO);
    let mut pair = scatter_fast(&padded, sig.kappa)?;
    pair.eps = sig.eps();
    pair.x = sig.x;
    Ok(pair)
}

/// Band-limited resampling of the window to `len` samples (power of two).
pub fn resample(sig: &NormalizedSignal, len: usize) -> Result<NormalizedSignal> {
    let d = sig.len();
    if len == d {
        return Ok(sig.clone());
    }
    let mut spec = sig.samples.clone();
    Spectral::new(d).forward(&mut spec);
    let mut out = vec![ZERO; len];
    let keep = (d.min(len) / 2) as f64;
    for (k, v) in spec.iter().enumerate() {
        let f = bin_index(k, d);
        if f.abs() >= keep {
            continue;
        }
        let idx = (f as i64).rem_euclid(len as i64) as usize;
        out[idx] = *v / d as f64;
    }
    Spectral::new(len).inverse(&mut out);
    Ok(NormalizedSignal::new(out, sig.kappa)?.at(sig.x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDiag {
    pub l1_norm: f64,
    pub eigenvalues: Vec<C64>,
    pub soliton_energy: f64,
    pub total_energy: f64,
    /// `soliton_energy / total_energy`, clamped to `[0, 1]`.
    pub ratio: f64,
}

/// Share of energy attached to the discrete spectrum, `sum_k 4 Im lambda_k` over
/// `eps sum |E_n|^2`. Windows longer than the degree cap are resampled down first.
pub fn soliton_power_ratio(sig: &NormalizedSignal, cfg: &EigenConfig) -> Result<SpectrumDiag> {
    let l1 = l1_norm(sig);
    let total_energy = sig.energy();
    let eigenvalues = if sig.kappa == Kappa::Defocusing || total_energy == 0.0 {
        Vec::new()
    } else {
        let mut pair = support_pair(sig)?;
        let mut work = sig.clone();
        while trimmed(&pair.a).len() - 1 > cfg.degree_cap {
            work = resample(&work, work.len() / 2)?;
            pair = support_pair(&work)?;
        }
        find_discrete_eigenvalues(&pair, cfg)?
    };
    let soliton_energy = eigenvalues.iter().fold(0.0, |acc, l| acc + 4.0 * l.im);
    let ratio = if total_energy > 0.0 {
        (soliton_energy / total_energy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(SpectrumDiag {
        l1_norm: l1,
        eigenvalues,
        soliton_energy,
        total_energy,
        ratio,
    })
}
