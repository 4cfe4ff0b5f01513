//! Reference compensators: split-step backpropagation and linear dispersion compensation.

use serde::{Deserialize, Serialize};

use crate::channel::{LinkConfig, SplitScheme, SplitStep};
use crate::error::{Error, Result};
use crate::normcoord::{derive_normalization, from_normalized, to_normalized, PhysicalSignal};
use crate::spectral::{bin_index, Spectral};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineConfig {
    DbpSsfm { steps_per_span: usize },
    Cdc,
}

impl BaselineConfig {
    pub fn apply(&self, received: &PhysicalSignal, link: &LinkConfig) -> Result<PhysicalSignal> {
        match *self {
            BaselineConfig::DbpSsfm { steps_per_span } => dbp_ssfm(received, link, steps_per_span),
            BaselineConfig::Cdc => cdc(received, link),
        }
    }
}

/// Runs the lossless link model backwards, span by span, with the same splitting as the
/// forward channel and negated distance.
pub fn dbp_ssfm(
    received: &PhysicalSignal,
    link: &LinkConfig,
    steps_per_span: usize,
) -> Result<PhysicalSignal> {
    if steps_per_span == 0 {
        return Err(Error::InvalidConfig(
            "steps_per_span must be at least 1".into(),
        ));
    }
    if link.num_spans == 0 {
        return Ok(received.clone());
    }
    link.validate()?;
    let p = derive_normalization(link, received.duration())?.anchored_to(received);
    let span_x = link.span_length * p.distance_scale;
    let mut norm = to_normalized(received, &p)?;
    let mut stepper = SplitStep::new(norm.len(), p.kappa, SplitScheme::Symmetric)?;
    for _ in 0..link.num_spans {
        stepper.propagate(&mut norm.samples, -span_x, steps_per_span);
    }
    Ok(from_normalized(&norm, &p))
}

/// All-pass quadratic spectral phase that undoes the accumulated dispersion of the link.
///
/// The forward link multiplies the spectrum by `exp(i beta2/2 omega^2 L)`, so the
/// compensator applies the conjugate phase.
pub fn cdc(received: &PhysicalSignal, link: &LinkConfig) -> Result<PhysicalSignal> {
    let n = received.len();
    let total = link.total_length();
    if total == 0.0 {
        return Ok(received.clone());
    }
    link.validate()?;
    let mut buf = received.samples.clone();
    let mut fft = Spectral::new(n);
    fft.forward(&mut buf);
    let df = 1.0 / (n as f64 * received.sample_interval);
    for (k, v) in buf.iter_mut().enumerate() {
        let omega = 2.0 * std::f64::consts::PI * bin_index(k, n) * df;
        *v *= C64::from_polar(1.0, -0.5 * link.beta2 * omega * omega * total);
    }
    fft.inverse_normalized(&mut buf);
    Ok(PhysicalSignal {
        samples: buf,
        ..received.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{propagate_link, StepConfig};
    use crate::normcoord::Kappa;
    use crate::spectral::rel_l2;

    fn pulse(n: usize, dt: f64, peak_power: f64) -> PhysicalSignal {
        let width = 40.0 * dt;
        let center = 0.5 * n as f64 * dt;
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 * dt - center;
                C64::from_polar(
                    peak_power.sqrt() * (-t * t / (2.0 * width * width)).exp(),
                    1e20 * t * t,
                )
            })
            .collect();
        PhysicalSignal::new(samples, dt).unwrap()
    }

    fn quiet(mut link: LinkConfig) -> LinkConfig {
        link.photon_occupancy = 0.0;
        link
    }

    #[test]
    fn split_step_backpropagation_inverts_the_channel() {
        for kappa in [Kappa::Focusing, Kappa::Defocusing] {
            let link = quiet(LinkConfig::standard(4, kappa));
            let tx = pulse(2048, 2e-12, 10e-3);
            let rx = propagate_link(&tx, &link, &StepConfig::symmetric(40), 1).unwrap();
            assert!(rel_l2(&rx.samples, &tx.samples) > 0.1);
            let back = dbp_ssfm(&rx, &link, 40).unwrap();
            assert!(rel_l2(&back.samples, &tx.samples) < 1e-6);
        }
    }

    #[test]
    fn coarser_backpropagation_is_less_accurate() {
        let link = quiet(LinkConfig::standard(4, Kappa::Focusing));
        let tx = pulse(2048, 2e-12, 10e-3);
        let rx = propagate_link(&tx, &link, &StepConfig::symmetric(200), 1).unwrap();
        let errs: Vec<f64> = [2usize, 8, 32]
            .iter()
            .map(|&m| rel_l2(&dbp_ssfm(&rx, &link, m).unwrap().samples, &tx.samples))
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn zero_length_link_is_identity() {
        let link = LinkConfig::standard(0, Kappa::Focusing);
        let tx = pulse(256, 2e-12, 1e-3);
        assert_eq!(dbp_ssfm(&tx, &link, 10).unwrap(), tx);
        assert_eq!(cdc(&tx, &link).unwrap(), tx);
    }

    #[test]
    fn cdc_inverts_a_linear_channel() {
        for kappa in [Kappa::Focusing, Kappa::Defocusing] {
            let mut link = quiet(LinkConfig::standard(4, kappa));
            link.gamma_nl = 1e-30;
            let tx = pulse(2048, 2e-12, 10e-3);
            let rx = propagate_link(&tx, &link, &StepConfig::symmetric(4), 1).unwrap();
            assert!(rel_l2(&rx.samples, &tx.samples) > 0.1);
            let back = cdc(&rx, &link).unwrap();
            assert!(rel_l2(&back.samples, &tx.samples) < 1e-8);
        }
    }

    #[test]
    fn cdc_leaves_a_nonlinear_penalty() {
        let link = quiet(LinkConfig::standard(4, Kappa::Defocusing));
        let tx = pulse(2048, 2e-12, 100e-3);
        let rx = propagate_link(&tx, &link, &StepConfig::symmetric(40), 1).unwrap();
        let lin = rel_l2(&cdc(&rx, &link).unwrap().samples, &tx.samples);
        let full = rel_l2(&dbp_ssfm(&rx, &link, 40).unwrap().samples, &tx.samples);
        assert!(lin > 100.0 * full, "{lin} {full}");
    }
}
