//! Forward scattering with the sequential and fast algorithms, then layer peeling back.
use std::time::Instant;

use nfdbp::nfddbp::{inverse_scatter, InverseMode};
use nfdbp::normcoord::{Kappa, NormalizedSignal};
use nfdbp::spectral::{rel_l2, rel_max};
use nfdbp::zscatter::{rescale_samples, scatter_fast, scatter_sequential};
use nfdbp::C64;
use rand::{Rng, SeedableRng};

fn main() -> nfdbp::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for d in [256usize, 1024, 4096] {
        let s = NormalizedSignal::new(
            (0..d)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
            Kappa::Focusing,
        )?;
        let q = rescale_samples(&s)?;
        let t = Instant::now();
        let seq = scatter_sequential(&q, s.kappa)?;
        let t_seq = t.elapsed();
        let t = Instant::now();
        let fast = scatter_fast(&q, s.kappa)?;
        let t_fast = t.elapsed();
        let back = inverse_scatter(&fast, InverseMode::Fast)?;
        println!(
            "D={d:5}  sequential {t_seq:>10.2?}  fast {t_fast:>10.2?}  |fast-seq| {:.1e}  unit-circle defect {:.1e}  round trip {:.1e}",
            rel_max(&fast.b, &seq.b).max(rel_max(&fast.a, &seq.a)),
            fast.unit_circle_defect(),
            rel_l2(&back.samples, &s.samples)
        );
    }
    Ok(())
}
