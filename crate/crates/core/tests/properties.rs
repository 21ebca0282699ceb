//! Property tests for the algebraic invariants the rest of the system
//! leans on.

use afdm_core::channel::{loc_of, ChannelPath};
use afdm_core::estimation::decompose_loc;
use afdm_core::modem::{daft, idaft};
use afdm_core::params::{Chirp, PilotScheme};
use afdm_core::{Complex, Constellation, ModemParams, PilotConfig};
use proptest::prelude::*;

proptest! {
    #[test]
    fn bits_survive_map_and_slice(bits in proptest::collection::vec(0u8..2, 1..64)) {
        for c in [Constellation::bpsk(), Constellation::qpsk()] {
            let mut padded = bits.clone();
            while padded.len() % c.bits_per_symbol() != 0 {
                padded.push(0);
            }
            let symbols = c.map_bits(&padded).unwrap();
            let (_, back) = c.slice(&symbols);
            prop_assert_eq!(&back, &padded);
        }
    }

    #[test]
    fn transforms_are_unitary_for_any_chirps(
        c1 in -0.5f64..0.5,
        c2 in -0.5f64..0.5,
        seed in 0u64..1000,
    ) {
        let n = 32;
        let params = ModemParams::new(n, Chirp::Real(c1), Chirp::Real(c2), 1e3, 4e9, 4).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let x: Vec<Complex> = (0..n)
            .map(|_| Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let s = idaft(&x, &params).unwrap();
        let energy_in: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let energy_out: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((energy_in - energy_out).abs() < 1e-9 * energy_in.max(1.0));
        let back = daft(&s, &params).unwrap();
        let dev = back
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        prop_assert!(dev < 1e-9);
    }

    #[test]
    fn every_grid_cell_round_trips_through_its_sample(
        l_max in 0usize..=6,
        k_max in 0usize..=5,
    ) {
        let n = 256;
        let params = ModemParams::for_grid(n, k_max, l_max, 1e3, 4e9).unwrap();
        let pilot = PilotConfig::new(
            PilotScheme::GiFree,
            Complex::new(1.0, 0.0),
            l_max,
            k_max,
        );
        for l in 0..=l_max {
            for k in -(k_max as i64)..=k_max as i64 {
                let tap = ChannelPath {
                    gain: Complex::new(1.0, 0.0),
                    delay: l,
                    doppler: k,
                    theta: 0.0,
                };
                let m = (n - loc_of(&tap, &params)) % n;
                prop_assert_eq!(decompose_loc(m, &params, &pilot).unwrap(), (l, k));
            }
        }
    }
}
