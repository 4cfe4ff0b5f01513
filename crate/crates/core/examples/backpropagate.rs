//! Undoes a normalized split-step propagation with a single phase rotation of the
//! scattering data, and compares with the un-equalized field.
use nfdbp::channel::ssfm_propagate;
use nfdbp::nfddbp::{dbp_nfd, DbpNfdConfig};
use nfdbp::normcoord::{Kappa, NormalizedSignal};
use nfdbp::spectral::rel_l2;
use nfdbp::C64;

fn main() -> nfdbp::Result<()> {
    let d = 4096;
    let x1 = 1e-3;
    for kappa in [Kappa::Focusing, Kappa::Defocusing] {
        let mut s = NormalizedSignal::new(vec![C64::new(0.0, 0.0); d], kappa)?;
        for n in 0..d {
            let t = s.time(n) + 0.5;
            let env = 8.0 * (-t * t / (2.0 * 0.04f64.powi(2))).exp();
            s.samples[n] = C64::from_polar(env, 30.0 * t);
        }
        let rx = ssfm_propagate(&s, x1, 2000)?;
        let out = dbp_nfd(&rx, &DbpNfdConfig::new(x1))?;
        println!(
            "{kappa:?}: L1 {:.3}, distorted {:.2e}, after NFD backpropagation {:.2e}, defect {:.1e}",
            out.l1_norm,
            rel_l2(&rx.samples, &s.samples),
            rel_l2(&out.signal.samples, &s.samples),
            out.unit_circle_defect
        );
    }
    Ok(())
}
