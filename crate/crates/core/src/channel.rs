//! Multi-span fiber link: split-step propagation of the lossless path-average model
//! with distributed-Raman ASE injected after every span.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normcoord::{
    derive_normalization, from_normalized, to_normalized, Kappa, NormalizedSignal, PhysicalSignal,
};
use crate::spectral::{bin_index, is_power_of_two, Spectral};
use crate::C64;

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Physical link description, SI units throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// m
    pub span_length: f64,
    pub num_spans: usize,
    /// Power attenuation coefficient, 1/m. Enters only the ASE density.
    pub loss_coeff: f64,
    /// s^2/m, signed: negative is anomalous.
    pub beta2: f64,
    /// 1/(W m)
    pub gamma_nl: f64,
    /// Raman pump frequency, Hz.
    pub pump_freq: f64,
    /// Photon occupancy factor K_T.
    pub photon_occupancy: f64,
    /// Carrier wavelength used to convert ps/nm/km dispersion to beta2, m.
    pub carrier_wavelength: f64,
}

impl LinkConfig {
    /// 80 km spans, 0.2 dB/km, 1.22 /W/km, |D| = 16 ps/nm/km at 1550 nm,
    /// 206 THz pump, K_T = 4. `Focusing` selects anomalous dispersion.
    pub fn standard(num_spans: usize, kappa: Kappa) -> Self {
        let wavelength = 1550e-9;
        let d = match kappa {
            Kappa::Focusing => 16.0,
            Kappa::Defocusing => -16.0,
        };
        Self {
            span_length: 80e3,
            num_spans,
            loss_coeff: db_per_km_to_neper_per_m(0.2),
            beta2: beta2_from_dispersion(d, wavelength),
            gamma_nl: 1.22e-3,
            pump_freq: 206e12,
            photon_occupancy: 4.0,
            carrier_wavelength: wavelength,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.span_length * self.num_spans as f64
    }

    /// Chromatic-dispersion memory `2 pi B |beta2| L` for signal bandwidth `B` in Hz.
    pub fn dispersion_memory(&self, bandwidth: f64) -> f64 {
        2.0 * std::f64::consts::PI * bandwidth * self.beta2.abs() * self.total_length()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("span_length", self.span_length),
            ("gamma_nl", self.gamma_nl),
            ("pump_freq", self.pump_freq),
            ("carrier_wavelength", self.carrier_wavelength),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.loss_coeff < 0.0 || self.photon_occupancy < 0.0 {
            return Err(Error::InvalidConfig(
                "loss and photon occupancy must be non-negative".into(),
            ));
        }
        if self.beta2 == 0.0 || !self.beta2.is_finite() {
            return Err(Error::InvalidConfig("beta2 must be nonzero".into()));
        }
        Ok(())
    }
}

/// dB/km power loss to the field-power attenuation coefficient in 1/m.
pub fn db_per_km_to_neper_per_m(db_per_km: f64) -> f64 {
    db_per_km * std::f64::consts::LN_10 / 10.0 / 1e3
}

/// `beta2 = -D lambda^2 / (2 pi c)` with `D` in ps/nm/km; returns s^2/m.
pub fn beta2_from_dispersion(d_ps_nm_km: f64, wavelength: f64) -> f64 {
    let d = d_ps_nm_km * 1e-12 / (1e-9 * 1e3);
    -d * wavelength * wavelength / (2.0 * std::f64::consts::PI * SPEED_OF_LIGHT)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitScheme {
    /// Strang splitting, second order.
    #[default]
    Symmetric,
    /// Lie splitting (nonlinear then linear), first order.
    Asymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepConfig {
    pub steps_per_span: usize,
    #[serde(default)]
    pub scheme: SplitScheme,
}

impl StepConfig {
    pub fn symmetric(steps_per_span: usize) -> Self {
        Self {
            steps_per_span,
            scheme: SplitScheme::Symmetric,
        }
    }
}

/// Reusable split-step integrator for the normalized equation on a fixed grid.
///
/// The grid spacing is `1/D` on the unit window, so FFT bin `k` is angular
/// frequency `2 pi k`. A linear step of length `h` multiplies the spectrum by
/// `exp(-i omega^2 h)`, a nonlinear step multiplies the field by
/// `exp(2 i kappa |E|^2 h)`. Negative distances integrate backwards.
pub struct SplitStep {
    spectral: Spectral,
    kappa: f64,
    scheme: SplitScheme,
    omega_sq: Vec<f64>,
    phase_cache: Vec<(f64, Vec<C64>)>,
}

impl SplitStep {
    pub fn new(len: usize, kappa: Kappa, scheme: SplitScheme) -> Result<Self> {
        if len < 2 || !is_power_of_two(len) {
            return Err(Error::NotPowerOfTwo(len));
        }
        let omega_sq = (0..len)
            .map(|k| {
                let w = 2.0 * std::f64::consts::PI * bin_index(k, len);
                w * w
            })
            .collect();
        Ok(Self {
            spectral: Spectral::new(len),
            kappa: kappa.value(),
            scheme,
            omega_sq,
            phase_cache: Vec::new(),
        })
    }

    fn linear_phase(&mut self, h: f64) -> usize {
        if let Some(i) = self.phase_cache.iter().position(|(k, _)| *k == h) {
            return i;
        }
        let scale = 1.0 / self.omega_sq.len() as f64;
        let phase = self
            .omega_sq
            .iter()
            .map(|&w2| C64::from_polar(scale, -w2 * h))
            .collect();
        self.phase_cache.push((h, phase));
        self.phase_cache.len() - 1
    }

    fn linear(&mut self, field: &mut [C64], h: f64) {
        let idx = self.linear_phase(h);
        self.spectral.forward(field);
        field
            .iter_mut()
            .zip(&self.phase_cache[idx].1)
            .for_each(|(v, p)| *v *= p);
        self.spectral.inverse(field);
    }

    fn nonlinear(&self, field: &mut [C64], h: f64) {
        let g = 2.0 * self.kappa * h;
        field
            .iter_mut()
            .for_each(|v| *v *= C64::from_polar(1.0, g * v.norm_sqr()));
    }

    pub fn propagate(&mut self, field: &mut [C64], distance: f64, steps: usize) {
        if distance == 0.0 || steps == 0 {
            return;
        }
        let h = distance / steps as f64;
        match self.scheme {
            SplitScheme::Symmetric => {
                self.linear(field, 0.5 * h);
                for s in 0..steps {
                    self.nonlinear(field, h);
                    let lin = if s + 1 == steps { 0.5 * h } else { h };
                    self.linear(field, lin);
                }
            }
            SplitScheme::Asymmetric => {
                for _ in 0..steps {
                    self.nonlinear(field, h);
                    self.linear(field, h);
                }
            }
        }
    }
}

/// Propagates `sig` over normalized distance `x_total` with `steps` Strang steps.
pub fn ssfm_propagate(
    sig: &NormalizedSignal,
    x_total: f64,
    steps: usize,
) -> Result<NormalizedSignal> {
    ssfm_propagate_with(sig, x_total, steps, SplitScheme::Symmetric)
}

pub fn ssfm_propagate_with(
    sig: &NormalizedSignal,
    x_total: f64,
    steps: usize,
    scheme: SplitScheme,
) -> Result<NormalizedSignal> {
    if steps == 0 {
        return Err(Error::InvalidConfig(
            "split-step needs at least one step".into(),
        ));
    }
    let mut stepper = SplitStep::new(sig.len(), sig.kappa, scheme)?;
    let mut out = sig.clone();
    stepper.propagate(&mut out.samples, x_total, steps);
    out.x = sig.x + x_total;
    Ok(out)
}

/// `N_ASE = loss * L_span * h * f_pump * K_T` in W/Hz.
pub fn ase_psd_per_span(link: &LinkConfig) -> f64 {
    link.loss_coeff * link.span_length * PLANCK * link.pump_freq * link.photon_occupancy
}

fn add_ase_in_place(samples: &mut [C64], psd: f64, sample_interval: f64, rng: &mut ChaCha8Rng) {
    if psd <= 0.0 {
        return;
    }
    let sigma = (0.5 * psd / sample_interval).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for v in samples.iter_mut() {
        let re = normal.sample(rng);
        let im = normal.sample(rng);
        *v += C64::new(re, im);
    }
}

/// White circular Gaussian noise with per-sample variance `psd / sample_interval`.
pub fn add_ase(sig: &PhysicalSignal, psd: f64, seed: u64) -> PhysicalSignal {
    let mut out = sig.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    add_ase_in_place(&mut out.samples, psd, sig.sample_interval, &mut rng);
    out
}

/// Span-by-span propagation followed by ASE after each span.
pub fn propagate_link(
    sig: &PhysicalSignal,
    link: &LinkConfig,
    steps: &StepConfig,
    seed: u64,
) -> Result<PhysicalSignal> {
    if link.num_spans == 0 {
        return Ok(sig.clone());
    }
    link.validate()?;
    if steps.steps_per_span == 0 {
        return Err(Error::InvalidConfig(
            "steps_per_span must be at least 1".into(),
        ));
    }
    let p = derive_normalization(link, sig.duration())?.anchored_to(sig);
    let span_x = link.span_length * p.distance_scale;
    let psd = ase_psd_per_span(link);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stepper = SplitStep::new(sig.len(), p.kappa, steps.scheme)?;

    let mut current = sig.clone();
    for _ in 0..link.num_spans {
        let mut norm = to_normalized(&current, &p)?;
        stepper.propagate(&mut norm.samples, span_x, steps.steps_per_span);
        current = from_normalized(&norm, &p);
        add_ase_in_place(&mut current.samples, psd, current.sample_interval, &mut rng);
    }
    Ok(current)
}
