//! Discrete eigenvalues and soliton energy share of sech bursts of growing amplitude.
use nfdbp::diagnostics::{soliton_power_ratio, EigenConfig};
use nfdbp::normcoord::{Kappa, NormalizedSignal};
use nfdbp::C64;

fn main() -> nfdbp::Result<()> {
    let (d, eta) = (2048, 20.0);
    let cfg = EigenConfig::default();
    println!("amplitude  L1      soliton ratio  eigenvalues");
    for amp in [0.3, 0.45, 0.6, 1.0, 1.6, 2.2] {
        let mut s = NormalizedSignal::new(vec![C64::new(0.0, 0.0); d], Kappa::Focusing)?;
        for n in 0..d {
            let t = s.time(n) + 0.5;
            s.samples[n] = C64::new(amp * eta / (eta * t).cosh(), 0.0);
        }
        let diag = soliton_power_ratio(&s, &cfg)?;
        let ev: Vec<String> = diag
            .eigenvalues
            .iter()
            .map(|l| format!("{:.3}i", l.im))
            .collect();
        println!(
            "{amp:9}  {:.3}  {:13.4}  [{}]",
            diag.l1_norm,
            diag.ratio,
            ev.join(", ")
        );
    }
    Ok(())
}
