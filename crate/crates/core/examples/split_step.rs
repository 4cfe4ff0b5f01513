//! Propagates a chirp-free Gaussian over a lossless-equivalent link and reports how it spreads.
use nfdbp::channel::{propagate_link, LinkConfig, StepConfig};
use nfdbp::normcoord::{Kappa, PhysicalSignal};
use nfdbp::spectral::energy;
use nfdbp::C64;

fn rms_width(s: &PhysicalSignal) -> f64 {
    let w: Vec<f64> = s.samples.iter().map(|v| v.norm_sqr()).collect();
    let total: f64 = w.iter().sum();
    let mean = w.iter().enumerate().map(|(k, p)| k as f64 * p).sum::<f64>() / total;
    let var = w
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 - mean).powi(2) * p)
        .sum::<f64>()
        / total;
    var.sqrt() * s.sample_interval
}

fn main() -> nfdbp::Result<()> {
    let dt = 1e-12;
    let tx = PhysicalSignal::new(
        (0..4096)
            .map(|k| {
                let t = (k as f64 - 2048.0) * dt;
                C64::new(0.1 * (-t * t / (2.0 * (10.0 * dt).powi(2))).exp(), 0.0)
            })
            .collect(),
        dt,
    )?;
    println!("launch rms width {:.2} ps", rms_width(&tx) * 1e12);
    for kappa in [Kappa::Focusing, Kappa::Defocusing] {
        let mut link = LinkConfig::standard(2, kappa);
        link.photon_occupancy = 0.0;
        let rx = propagate_link(&tx, &link, &StepConfig::symmetric(80), 1)?;
        println!(
            "{kappa:?}: rms width {:.2} ps, energy ratio {:.12}",
            rms_width(&rx) * 1e12,
            energy(&rx.samples) / energy(&tx.samples)
        );
    }
    Ok(())
}
