//! Back-to-back Nyquist and OFDM round trips, then the EVM -> BER -> Q chain.
use nfdbp::txrx::{
    ber_from_evm, evm, map_bits, q_factor, random_bits, ModFormat, NyquistConfig, OfdmConfig,
    Transceiver,
};
use nfdbp::C64;
use rand::{Rng, SeedableRng};

fn main() -> nfdbp::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let setups = [
        (
            Transceiver::Nyquist(NyquistConfig {
                symbols_per_packet: 64,
                ..Default::default()
            }),
            ModFormat::Qpsk,
        ),
        (Transceiver::Ofdm(OfdmConfig::default()), ModFormat::Qam64),
    ];
    for (trx, fmt) in setups {
        let n = trx.symbols_per_packet();
        let symbols = map_bits(&random_bits(&mut rng, n * fmt.bits_per_symbol()), fmt)?;
        let wave = trx.modulate(&symbols, 2 * trx.packet_samples())?;
        let rx = trx.demodulate(&wave, n)?;
        println!("{trx:?}\n  back-to-back EVM {:.1e}", evm(&rx, &symbols)?);

        let noisy: Vec<C64> = rx
            .iter()
            .map(|v| v + C64::new(rng.random_range(-0.08..0.08), rng.random_range(-0.08..0.08)))
            .collect();
        let e = evm(&noisy, &symbols)?;
        let ber = ber_from_evm(e, fmt)?;
        println!(
            "  with noise: EVM {e:.3}, BER {ber:.2e}, Q {:.2} dB",
            q_factor(ber)?
        );
    }
    Ok(())
}
