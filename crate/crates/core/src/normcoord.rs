//! Physical units <-> the normalized frame in which the lossless NSE reads
//! `i E_x + E_tt + 2 kappa |E|^2 E = 0` on the unit window `[-1, 0]`.
//!
//! With `T0` the processing window duration:
//!
//! ```text
//! t = (T - t_origin) / T0 - 1
//! x = z * |beta2| / (2 T0^2)
//! E = sqrt(gamma T0^2 / |beta2|) * A          (anomalous, beta2 < 0, kappa = +1)
//! E = sqrt(gamma T0^2 / |beta2|) * conj(A)    (normal,    beta2 > 0, kappa = -1)
//! ```
//!
//! The physical model is `A_z = -i beta2/2 A_TT + i gamma |A|^2 A`.

use serde::{Deserialize, Serialize};

use crate::channel::LinkConfig;
use crate::error::{Error, Result};
use crate::spectral::is_power_of_two;
use crate::C64;

/// Sign of the nonlinear term relative to dispersion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kappa {
    /// `kappa = +1`, anomalous dispersion; supports solitons.
    Focusing,
    /// `kappa = -1`, normal dispersion.
    Defocusing,
}

impl Kappa {
    pub fn value(self) -> f64 {
        match self {
            Kappa::Focusing => 1.0,
            Kappa::Defocusing => -1.0,
        }
    }

    /// Anomalous (`beta2 < 0`) maps to focusing.
    pub fn from_beta2(beta2: f64) -> Self {
        if beta2 < 0.0 {
            Kappa::Focusing
        } else {
            Kappa::Defocusing
        }
    }
}

/// Baseband envelope in sqrt(W), sampled at `t_start + k * sample_interval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSignal {
    pub samples: Vec<C64>,
    pub sample_interval: f64,
    pub t_start: f64,
}

impl PhysicalSignal {
    pub fn new(samples: Vec<C64>, sample_interval: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig(
                "physical signal has no samples".into(),
            ));
        }
        if !(sample_interval > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample interval must be positive, got {sample_interval}"
            )));
        }
        Ok(Self {
            samples,
            sample_interval,
            t_start: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.sample_interval
    }

    /// Mean power in W over all samples.
    pub fn mean_power(&self) -> f64 {
        crate::spectral::energy(&self.samples) / self.samples.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    /// Duration in seconds mapped onto the unit interval.
    pub t_window: f64,
    /// Field power multiplier in 1/W.
    pub power_scale: f64,
    /// Physical length to normalized distance, 1/m.
    pub distance_scale: f64,
    pub kappa: Kappa,
    pub conjugate_field: bool,
    /// Physical start time restored by [`from_normalized`].
    pub t_origin: f64,
}

impl NormalizationParams {
    pub fn anchored_to(mut self, sig: &PhysicalSignal) -> Self {
        self.t_origin = sig.t_start;
        self
    }
}

/// Samples of `E(x, t_n)` on `t_n = -1 + n eps - eps/2`, `eps = 1/D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSignal {
    pub samples: Vec<C64>,
    pub kappa: Kappa,
    pub x: f64,
}

impl NormalizedSignal {
    /// Requires a power-of-two length of at least 2.
    pub fn new(samples: Vec<C64>, kappa: Kappa) -> Result<Self> {
        let d = samples.len();
        if d < 2 || !is_power_of_two(d) {
            return Err(Error::NotPowerOfTwo(d));
        }
        Ok(Self {
            samples,
            kappa,
            x: 0.0,
        })
    }

    pub fn at(mut self, x: f64) -> Self {
        self.x = x;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.samples.len() as f64
    }

    /// Normalized time of sample `n` (0-based).
    pub fn time(&self, n: usize) -> f64 {
        let eps = self.eps();
        -1.0 + (n as f64 + 0.5) * eps
    }

    /// `eps * sum |E_n|^2`.
    pub fn energy(&self) -> f64 {
        self.eps() * crate::spectral::energy(&self.samples)
    }
}

pub fn derive_normalization(link: &LinkConfig, t_window: f64) -> Result<NormalizationParams> {
    if !(t_window > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "normalization window must be positive, got {t_window}"
        )));
    }
    if link.beta2 == 0.0 || link.gamma_nl == 0.0 {
        return Err(Error::InvalidConfig(
            "normalization needs nonzero beta2 and gamma".into(),
        ));
    }
    let b2 = link.beta2.abs();
    let t0_sq = t_window * t_window;
    Ok(NormalizationParams {
        t_window,
        power_scale: link.gamma_nl * t0_sq / b2,
        distance_scale: b2 / (2.0 * t0_sq),
        kappa: Kappa::from_beta2(link.beta2),
        conjugate_field: link.beta2 > 0.0,
        t_origin: 0.0,
    })
}

pub fn to_normalized(sig: &PhysicalSignal, p: &NormalizationParams) -> Result<NormalizedSignal> {
    let duration = sig.duration();
    if (duration - p.t_window).abs() > sig.sample_interval {
        return Err(Error::WindowMismatch {
            duration,
            window: p.t_window,
        });
    }
    let scale = p.power_scale.sqrt();
    let samples = sig
        .samples
        .iter()
        .map(|&v| {
            let v = v * scale;
            if p.conjugate_field {
                v.conj()
            } else {
                v
            }
        })
        .collect();
    NormalizedSignal::new(samples, p.kappa)
}

pub fn from_normalized(sig: &NormalizedSignal, p: &NormalizationParams) -> PhysicalSignal {
    let scale = 1.0 / p.power_scale.sqrt();
    let samples = sig
        .samples
        .iter()
        .map(|&v| {
            let v = if p.conjugate_field { v.conj() } else { v };
            v * scale
        })
        .collect();
    PhysicalSignal {
        samples,
        sample_interval: p.t_window / sig.samples.len() as f64,
        t_start: p.t_origin,
    }
}

/// Total link length in normalized distance units.
pub fn normalized_distance(link: &LinkConfig, p: &NormalizationParams) -> f64 {
    link.total_length() * p.distance_scale
}
