//! Runtime of the NFD stages against window size, and of both backpropagators against
//! span count.
use nfdbp::experiment::bench_scaling;

fn main() -> nfdbp::Result<()> {
    let r = bench_scaling(&[1024, 2048, 4096, 8192, 16384], &[1, 2, 4, 8], 2048, 5)?;
    println!("D       scatter ms  backrotate ms  inverse ms");
    for row in &r.sizes {
        println!(
            "{:<6}  {:10.3}  {:13.3}  {:10.3}",
            row.d, row.scatter_ms, row.backrotate_ms, row.inverse_ms
        );
    }
    println!("scatter doubling ratios {:.2?}", r.scatter_doubling());
    println!("spans   nfd ms   dbp_ssfm ms");
    for row in &r.spans {
        println!("{:<6}  {:7.3}  {:11.3}", row.spans, row.nfd_ms, row.ssfm_ms);
    }
    Ok(())
}
