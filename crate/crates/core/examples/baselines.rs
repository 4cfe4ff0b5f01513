//! Compares linear dispersion compensation with split-step backpropagation as the
//! launch power rises.
use nfdbp::baselines::{cdc, dbp_ssfm};
use nfdbp::channel::{propagate_link, LinkConfig, StepConfig};
use nfdbp::normcoord::{Kappa, PhysicalSignal};
use nfdbp::spectral::rel_l2;
use nfdbp::C64;

fn main() -> nfdbp::Result<()> {
    let mut link = LinkConfig::standard(4, Kappa::Defocusing);
    link.photon_occupancy = 0.0;
    let dt = 2e-12;
    println!("peak mW   cdc error   dbp_ssfm(5) error   dbp_ssfm(40) error");
    for peak_mw in [1.0, 10.0, 50.0, 100.0] {
        let tx = PhysicalSignal::new(
            (0..2048)
                .map(|k| {
                    let t = (k as f64 - 1024.0) * dt;
                    C64::new(
                        (peak_mw * 1e-3f64).sqrt() * (-t * t / (2.0 * (40.0 * dt).powi(2))).exp(),
                        0.0,
                    )
                })
                .collect(),
            dt,
        )?;
        let rx = propagate_link(&tx, &link, &StepConfig::symmetric(80), 1)?;
        println!(
            "{peak_mw:7}   {:.2e}    {:.2e}            {:.2e}",
            rel_l2(&cdc(&rx, &link)?.samples, &tx.samples),
            rel_l2(&dbp_ssfm(&rx, &link, 5)?.samples, &tx.samples),
            rel_l2(&dbp_ssfm(&rx, &link, 40)?.samples, &tx.samples)
        );
    }
    Ok(())
}
