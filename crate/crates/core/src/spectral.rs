//! FFT plumbing shared by the propagators, the scattering transforms and the modems.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::C64;

/// Forward/inverse plan pair for one transform length.
///
/// The inverse is unnormalized (rustfft convention); use [`Spectral::inverse_normalized`]
/// when the round trip should be the identity.
pub struct Spectral {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
}

impl Spectral {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self::with_planner(&mut planner, len)
    }

    pub fn with_planner(planner: &mut FftPlanner<f64>, len: usize) -> Self {
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            len,
            fwd,
            inv,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `X[k] = sum_n x[n] e^{-2 pi i k n / N}`
    pub fn forward(&mut self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    /// `x[n] = sum_k X[k] e^{+2 pi i k n / N}` (no 1/N)
    pub fn inverse(&mut self, buf: &mut [C64]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inv.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse_normalized(&mut self, buf: &mut [C64]) {
        self.inverse(buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Signed integer frequency index of FFT bin `k` for a length-`n` transform
/// (numpy `fftfreq(n) * n`).
pub fn bin_index(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

pub fn is_power_of_two(n: usize) -> bool {
    n >= 1 && n & (n - 1) == 0
}

pub fn energy(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// `||a - b||_2 / ||b||_2`; returns the absolute error when `b` is zero.
pub fn rel_l2(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den = energy(b);
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// `max |a - b| / max |b|`; returns the absolute error when `b` is zero.
pub fn rel_max(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let den = b.iter().map(|y| y.norm()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
