//! Maps a physical burst onto the unit window and back.
use nfdbp::channel::LinkConfig;
use nfdbp::normcoord::{
    derive_normalization, from_normalized, normalized_distance, to_normalized, Kappa,
    PhysicalSignal,
};
use nfdbp::spectral::rel_l2;
use nfdbp::C64;

fn main() -> nfdbp::Result<()> {
    let dt = 2e-12;
    let samples: Vec<C64> = (0..1024)
        .map(|k| {
            let t = (k as f64 - 512.0) * dt;
            C64::new(3e-2 * (-t * t / (2.0 * (60.0 * dt).powi(2))).exp(), 0.0)
        })
        .collect();
    let sig = PhysicalSignal::new(samples, dt)?;

    for kappa in [Kappa::Focusing, Kappa::Defocusing] {
        let link = LinkConfig::standard(4, kappa);
        let p = derive_normalization(&link, sig.duration())?.anchored_to(&sig);
        let norm = to_normalized(&sig, &p)?;
        let back = from_normalized(&norm, &p);
        println!("{kappa:?}");
        println!("  window            {:.3e} s", p.t_window);
        println!("  power scale       {:.3e} 1/W", p.power_scale);
        println!("  distance scale    {:.3e} 1/m", p.distance_scale);
        println!(
            "  link length       x1 = {:.3e}",
            normalized_distance(&link, &p)
        );
        println!("  conjugated field  {}", p.conjugate_field);
        println!(
            "  peak |E|          {:.3}",
            norm.samples.iter().map(|v| v.norm()).fold(0.0, f64::max)
        );
        println!(
            "  round trip error  {:.1e}",
            rel_l2(&back.samples, &sig.samples)
        );
    }
    Ok(())
}
