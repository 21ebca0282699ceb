//! Shared fixtures for the criterion benchmarks: one reference-grid link
//! snapshot (channel, transmitted frame, received transform-domain
//! observation) built deterministically so every benchmark measures the
//! same problem instance.

use afdm_core::channel::{apply_time_domain, generate_channel, PowerProfile};
use afdm_core::modem::{assemble_frame, daft, idaft};
use afdm_core::{
    ChannelRealization, Complex, Constellation, ModemParams, PilotConfig, PilotScheme,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// One frozen link instance on the 512-point reference grid at 10 dB SNR.
pub struct LinkFixture {
    pub params: ModemParams,
    pub pilot: PilotConfig,
    pub constellation: Constellation,
    pub channel: ChannelRealization,
    /// Received frame in the transform domain.
    pub y: Vec<Complex>,
    pub n0: f64,
}

/// Build the fixture: P = 3 paths, BPSK data, pilot 45 dB above the noise
/// floor, additive noise at 10 dB SNR.
pub fn link_fixture(seed: u64) -> LinkFixture {
    let params = ModemParams::for_grid(512, 4, 10, 1e3, 4e9).expect("reference grid");
    let n0 = 10f64.powf(-1.0);
    let e_p = n0 * 10f64.powf(4.5);
    let pilot = PilotConfig::new(PilotScheme::GiFree, Complex::new(e_p.sqrt(), 0.0), 10, 4);
    let constellation = Constellation::bpsk();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let channel = generate_channel(3, 10, 4, n0, PowerProfile::Uniform, &mut rng).expect("channel");
    let data_positions = pilot.data_positions(params.n).expect("positions");
    let bits: Vec<u8> = (0..data_positions.len())
        .map(|_| rng.gen_range(0..2u8))
        .collect();
    let data = constellation.map_bits(&bits).expect("mapping");
    let frame = assemble_frame(&data, &pilot, params.n).expect("frame");
    let body = idaft(&frame.symbols, &params).expect("idaft");
    let rx = apply_time_domain(&body, &channel, &params, &mut rng).expect("channel pass");
    let y = daft(&rx, &params).expect("daft");
    LinkFixture {
        params,
        pilot,
        constellation,
        channel,
        y,
        n0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_well_formed() {
        let fx = link_fixture(1);
        assert_eq!(fx.y.len(), 512, "observation fills the frame");
        assert_eq!(fx.channel.paths.len(), 3, "three propagation paths");
        assert!(fx.n0 > 0.0, "noisy operating point");
    }
}
