//! Fast end-to-end sanity checks, run by the `selftest` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{cdc, dbp_ssfm};
use crate::channel::{propagate_link, LinkConfig, StepConfig};
use crate::diagnostics::{find_discrete_eigenvalues, l1_norm, support_pair, EigenConfig};
use crate::nfddbp::{inverse_scatter, InverseMode};
use crate::normcoord::{Kappa, NormalizedSignal, PhysicalSignal};
use crate::spectral::{rel_l2, rel_max};
use crate::txrx::q_factor;
use crate::zscatter::{rescale_samples, scatter_fast, scatter_sequential};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check {
        name,
        passed: value <= limit,
        detail: format!("{value:.3e} <= {limit:.0e}"),
    }
}

fn random_signal(rng: &mut ChaCha8Rng, d: usize, amp: f64, kappa: Kappa) -> NormalizedSignal {
    let samples = (0..d)
        .map(|_| C64::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp)))
        .collect();
    NormalizedSignal::new(samples, kappa).expect("power-of-two length")
}

fn gaussian_pulse(n: usize, dt: f64, peak_power: f64) -> PhysicalSignal {
    let width = 40.0 * dt;
    let center = 0.5 * n as f64 * dt;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 * dt - center;
            C64::new(
                peak_power.sqrt() * (-t * t / (2.0 * width * width)).exp(),
                0.0,
            )
        })
        .collect();
    PhysicalSignal::new(samples, dt).expect("valid grid")
}

fn worst<F: FnMut(Kappa, &mut ChaCha8Rng) -> crate::Result<f64>>(mut f: F) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut err: f64 = 0.0;
    for kappa in [Kappa::Focusing, Kappa::Defocusing] {
        for _ in 0..4 {
            err = err.max(f(kappa, &mut rng).unwrap_or(f64::INFINITY));
        }
    }
    err
}

pub fn run_selftest() -> Vec<Check> {
    let mut out = Vec::new();

    let round_trip = worst(|kappa, rng| {
        let s = random_signal(rng, 256, 0.5, kappa);
        let pair = scatter_fast(&rescale_samples(&s)?, kappa)?;
        let back = inverse_scatter(&pair, InverseMode::Fast)?;
        Ok(rel_l2(&back.samples, &s.samples))
    });
    out.push(check("scatter round trip", round_trip, 1e-9));

    let fast_vs_seq = worst(|kappa, rng| {
        let s = random_signal(rng, 256, 0.5, kappa);
        let q = rescale_samples(&s)?;
        let fast = scatter_fast(&q, kappa)?;
        let seq = scatter_sequential(&q, kappa)?;
        Ok(rel_max(&fast.a, &seq.a).max(rel_max(&fast.b, &seq.b)))
    });
    out.push(check("fast scatter matches sequential", fast_vs_seq, 1e-8));

    let q_err = (q_factor(0.0228).unwrap_or(f64::NAN) - 6.02)
        .abs()
        .max((q_factor(1e-3).unwrap_or(f64::NAN) - 9.80).abs());
    out.push(check("Q-factor spot values", q_err, 5e-2));

    let dbp_err = worst(|kappa, _| {
        let mut link = LinkConfig::standard(2, kappa);
        link.photon_occupancy = 0.0;
        let tx = gaussian_pulse(1024, 2e-12, 10e-3);
        let rx = propagate_link(&tx, &link, &StepConfig::symmetric(20), 1)?;
        Ok(rel_l2(&dbp_ssfm(&rx, &link, 20)?.samples, &tx.samples))
    });
    out.push(check(
        "split-step backpropagation inverts the link",
        dbp_err,
        1e-6,
    ));

    let cdc_err = worst(|kappa, _| {
        let mut link = LinkConfig::standard(2, kappa);
        link.photon_occupancy = 0.0;
        link.gamma_nl = 1e-30;
        let tx = gaussian_pulse(1024, 2e-12, 10e-3);
        let rx = propagate_link(&tx, &link, &StepConfig::symmetric(2), 1)?;
        Ok(rel_l2(&cdc(&rx, &link)?.samples, &tx.samples))
    });
    out.push(check(
        "dispersion compensation inverts a linear link",
        cdc_err,
        1e-8,
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut found = 0usize;
    for _ in 0..8 {
        let s = random_signal(&mut rng, 256, 1.0, Kappa::Focusing);
        let scale = 1.0 / l1_norm(&s);
        let s = NormalizedSignal::new(s.samples.iter().map(|v| v * scale).collect(), s.kappa)
            .expect("same length");
        let eig =
            support_pair(&s).and_then(|p| find_discrete_eigenvalues(&p, &EigenConfig::default()));
        found += eig.map(|e| e.len()).unwrap_or(usize::MAX / 16);
    }
    out.push(Check {
        name: "no eigenvalues below the L1 bound",
        passed: found == 0,
        detail: format!("{found} eigenvalues found"),
    });
    out
}
