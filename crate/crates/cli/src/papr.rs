//! Peak-to-average power comparison between the two pilot layouts, over
//! random data frames at configurable symbol and pilot power levels.

use afdm_core::modem::{add_cpp, assemble_frame, idaft, papr_db};
use afdm_core::params::PilotScheme;
use afdm_core::{Complex, PilotConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::config::SimConfig;

/// Mean peak-to-average power, in dB, of each pilot layout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PaprReport {
    pub frames: usize,
    pub classic_mean_db: f64,
    pub gifree_mean_db: f64,
}

impl PaprReport {
    /// Extra peak power paid for filling the guard region with data.
    pub fn gap_db(&self) -> f64 {
        self.gifree_mean_db - self.classic_mean_db
    }
}

fn layout_rng(master_seed: u64, layout: PilotScheme) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"linksim.papr.v1");
    hasher.update(master_seed.to_le_bytes());
    hasher.update(match layout {
        PilotScheme::ClassicGi => b"classic".as_slice(),
        PilotScheme::GiFree => b"gifree".as_slice(),
    });
    ChaCha12Rng::from_seed(hasher.finalize().into())
}

fn mean_papr_db(
    config: &SimConfig,
    layout: PilotScheme,
    e_s: f64,
    e_p: f64,
    frames: usize,
    dump: Option<&Path>,
) -> Result<f64, String> {
    let params = config.modem_params().map_err(|e| e.to_string())?;
    let constellation = config.parsed_constellation()?;
    let pilot = PilotConfig::new(
        layout,
        Complex::new(e_p.sqrt(), 0.0),
        config.l_max,
        config.k_max,
    );
    let data_len = pilot.data_len(params.n).map_err(|e| e.to_string())?;
    let bit_count = data_len * constellation.bits_per_symbol();
    let scale = e_s.sqrt();
    let mut rng = layout_rng(config.master_seed, layout);
    let mut sum = 0.0f64;
    for f in 0..frames {
        let bits: Vec<u8> = (0..bit_count).map(|_| rng.gen_range(0..2u8)).collect();
        let data: Vec<Complex> = constellation
            .map_bits(&bits)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|s| s * scale)
            .collect();
        let frame = assemble_frame(&data, &pilot, params.n).map_err(|e| e.to_string())?;
        let body = idaft(&frame.symbols, &params).map_err(|e| e.to_string())?;
        let tx = add_cpp(&body, &params).map_err(|e| e.to_string())?;
        sum += papr_db(&tx).map_err(|e| e.to_string())?;
        if f == 0 {
            if let Some(path) = dump {
                dump_waveform(&tx.samples, path)?;
            }
        }
    }
    if frames == 0 {
        return Err("frame count must be positive".into());
    }
    Ok(sum / frames as f64)
}

fn dump_waveform(samples: &[Complex], path: &Path) -> Result<(), String> {
    let mut bytes = Vec::with_capacity(samples.len() * 16);
    for s in samples {
        bytes.extend_from_slice(&s.re.to_le_bytes());
        bytes.extend_from_slice(&s.im.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| format!("writing {}: {e}", path.display()))
}

/// Measure mean peak-to-average power of both layouts over `frames`
/// random frames each. Power levels are absolute: `E_s = 10^(s/10)` per
/// data symbol and `E_p = 10^(p/10)` for the pilot. When `dump` is given,
/// the first prefixed frame of the guard-free layout is written there as
/// interleaved little-endian f64 (re, im) pairs.
pub fn compare_papr(
    config: &SimConfig,
    symbol_power_db: f64,
    pilot_power_db: f64,
    frames: usize,
    dump: Option<&Path>,
) -> Result<PaprReport, String> {
    config.validate()?;
    let e_s = 10f64.powf(symbol_power_db / 10.0);
    let e_p = 10f64.powf(pilot_power_db / 10.0);
    let classic_mean_db = mean_papr_db(config, PilotScheme::ClassicGi, e_s, e_p, frames, None)?;
    let gifree_mean_db = mean_papr_db(config, PilotScheme::GiFree, e_s, e_p, frames, dump)?;
    Ok(PaprReport {
        frames,
        classic_mean_db,
        gifree_mean_db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_is_deterministic() {
        let cfg = SimConfig::default();
        let a = compare_papr(&cfg, 10.0, 45.0, 20, None).unwrap();
        let b = compare_papr(&cfg, 10.0, 45.0, 20, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.frames, 20);
    }

    #[test]
    fn guard_free_layout_pays_a_small_peak_power_premium() {
        let cfg = SimConfig::default();
        let report = compare_papr(&cfg, 10.0, 45.0, 200, None).unwrap();
        assert!(
            report.gap_db() > 0.05 && report.gap_db() < 1.5,
            "gap {} dB outside the plausible band",
            report.gap_db()
        );
    }

    #[test]
    fn dump_writes_interleaved_components_of_the_prefixed_frame() {
        let cfg = SimConfig::default();
        let path =
            std::env::temp_dir().join(format!("linksim-papr-dump-{}.bin", std::process::id()));
        compare_papr(&cfg, 10.0, 45.0, 1, Some(&path)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::remove_file(&path).ok();
        let expected = (cfg.n + cfg.l_max) * 16;
        assert_eq!(bytes.len(), expected, "(N + prefix) complex samples");
        let first = f64::from_le_bytes(bytes[0..8].try_into().unwrap());
        assert!(first.is_finite());
    }
}
