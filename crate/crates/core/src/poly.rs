//! Dense complex polynomials in `w = z^{-1}` and 2x2 polynomial matrices.
//!
//! Coefficients are stored lowest degree first. Products switch from schoolbook
//! to FFT convolution once both operands are long enough to amortize the transforms.

use std::collections::HashMap;

use rustfft::FftPlanner;

use crate::spectral::Spectral;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Below this operand length schoolbook convolution wins.
const SCHOOLBOOK_MAX: usize = 48;

/// Caches FFT plans by length across the many products of a tree evaluation.
pub struct PolyArith {
    planner: FftPlanner<f64>,
    plans: HashMap<usize, Spectral>,
}

impl Default for PolyArith {
    fn default() -> Self {
        Self::new()
    }
}

impl PolyArith {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
            plans: HashMap::new(),
        }
    }

    fn plan(&mut self, len: usize) -> &mut Spectral {
        let planner = &mut self.planner;
        self.plans
            .entry(len)
            .or_insert_with(|| Spectral::with_planner(planner, len))
    }

    fn transformed(&mut self, p: &[C64], len: usize) -> Vec<C64> {
        let mut buf = vec![ZERO; len];
        buf[..p.len()].copy_from_slice(p);
        self.plan(len).forward(&mut buf);
        buf
    }

    /// Full product `p * q`, length `p.len() + q.len() - 1`.
    pub fn mul(&mut self, p: &[C64], q: &[C64]) -> Vec<C64> {
        if p.is_empty() || q.is_empty() {
            return Vec::new();
        }
        if p.len().min(q.len()) <= SCHOOLBOOK_MAX {
            return schoolbook(p, q);
        }
        let out_len = p.len() + q.len() - 1;
        let n = out_len.next_power_of_two();
        let fp = self.transformed(p, n);
        let mut fq = self.transformed(q, n);
        fq.iter_mut().zip(&fp).for_each(|(y, x)| *y *= x);
        self.plan(n).inverse_normalized(&mut fq);
        fq.truncate(out_len);
        fq
    }

    /// 2x2 matrix product `lhs * rhs` with entries convolved.
    pub fn mat_mul(&mut self, lhs: &PolyMatrix, rhs: &PolyMatrix) -> PolyMatrix {
        let short = lhs
            .e
            .iter()
            .chain(rhs.e.iter())
            .map(Vec::len)
            .min()
            .unwrap_or(0);
        if short <= SCHOOLBOOK_MAX {
            let entry = |i: usize, j: usize| {
                add(
                    &schoolbook(&lhs.e[2 * i], &rhs.e[j]),
                    &schoolbook(&lhs.e[2 * i + 1], &rhs.e[2 + j]),
                )
            };
            return PolyMatrix {
                e: [entry(0, 0), entry(0, 1), entry(1, 0), entry(1, 1)],
            };
        }
        let llen = lhs.e.iter().map(Vec::len).max().unwrap_or(0);
        let rlen = rhs.e.iter().map(Vec::len).max().unwrap_or(0);
        let out_len = llen + rlen - 1;
        let n = out_len.next_power_of_two();
        let fl: Vec<Vec<C64>> = lhs.e.iter().map(|p| self.transformed(p, n)).collect();
        let fr: Vec<Vec<C64>> = rhs.e.iter().map(|p| self.transformed(p, n)).collect();
        let mut out: [Vec<C64>; 4] = Default::default();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc: Vec<C64> = (0..n)
                    .map(|k| fl[2 * i][k] * fr[j][k] + fl[2 * i + 1][k] * fr[2 + j][k])
                    .collect();
                self.plan(n).inverse_normalized(&mut acc);
                let len = (lhs.e[2 * i].len() + rhs.e[j].len())
                    .max(lhs.e[2 * i + 1].len() + rhs.e[2 + j].len())
                    - 1;
                acc.truncate(len);
                out[2 * i + j] = acc;
            }
        }
        PolyMatrix { e: out }
    }
}

pub fn schoolbook(p: &[C64], q: &[C64]) -> Vec<C64> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; p.len() + q.len() - 1];
    for (i, &x) in p.iter().enumerate() {
        if x == ZERO {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(q) {
            *o += x * y;
        }
    }
    out
}

pub fn add(p: &[C64], q: &[C64]) -> Vec<C64> {
    let (long, short) = if p.len() >= q.len() { (p, q) } else { (q, p) };
    let mut out = long.to_vec();
    out.iter_mut().zip(short).for_each(|(o, s)| *o += s);
    out
}

/// Horner evaluation of `sum_i c_i w^i`.
pub fn horner(coeffs: &[C64], w: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * w + c)
}

/// Row-major 2x2 matrix of polynomials: `e = [m00, m01, m10, m11]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    pub e: [Vec<C64>; 4],
}

impl PolyMatrix {
    pub fn identity() -> Self {
        let one = C64::new(1.0, 0.0);
        Self {
            e: [vec![one], vec![ZERO], vec![ZERO], vec![one]],
        }
    }
}
