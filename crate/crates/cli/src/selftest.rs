//! Built-in consistency checks. Each check exercises one load-bearing
//! identity against the slow reference implementations, so a deployed
//! binary can prove its numerics on the machine it runs on.

use afdm_core::channel::{
    apply_time_domain, build_heff, generate_channel, loc_of, ChannelPath, PowerProfile,
};
use afdm_core::detection::{lmmse_detect, lmmse_detect_paths};
use afdm_core::estimation::{
    cancel_id2p, cancel_ip2d, coarse_threshold, decompose_loc, refined_threshold,
    run_gifree_estimator, scan_and_estimate,
};
use afdm_core::modem::{add_cpp, assemble_frame, daft, idaft, papr_db};
use afdm_core::reference;
use afdm_core::{Complex, Constellation, ModemParams, PilotConfig, PilotScheme, TimeFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::config::{Scheme, SimConfig};
use crate::sim::trial_rng;

type Check = fn() -> Result<(), String>;

fn err(msg: impl Into<String>) -> Result<(), String> {
    Err(msg.into())
}

fn rng(tag: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(0x5e1f_7e57 ^ tag)
}

fn random_frame(n: usize, rng: &mut impl Rng) -> Vec<Complex> {
    (0..n)
        .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn small_params() -> ModemParams {
    ModemParams::for_grid(64, 2, 5, 1e3, 4e9).expect("valid grid")
}

fn full_params() -> ModemParams {
    ModemParams::for_grid(512, 4, 10, 1e3, 4e9).expect("valid grid")
}

fn max_abs_diff(a: &[Complex], b: &[Complex]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn transforms_match_their_matrix_forms() -> Result<(), String> {
    let params = ModemParams::for_grid(16, 1, 3, 1e3, 4e9).map_err(|e| e.to_string())?;
    let mut r = rng(1);
    let x = random_frame(16, &mut r);
    let a = reference::daft_matrix(&params);
    let ah = reference::idaft_matrix(&params);
    let fast = daft(&x, &params).map_err(|e| e.to_string())?;
    let slow = a.mul_vec(&x).map_err(|e| e.to_string())?;
    let d1 = max_abs_diff(&fast, &slow);
    let back = idaft(&fast, &params).map_err(|e| e.to_string())?;
    let slow_back = ah.mul_vec(&fast).map_err(|e| e.to_string())?;
    let d2 = max_abs_diff(&back, &slow_back);
    let d3 = max_abs_diff(&back, &x);
    if d1 > 1e-10 || d2 > 1e-10 || d3 > 1e-10 {
        return err(format!("transform deviations {d1:.2e} {d2:.2e} {d3:.2e}"));
    }
    Ok(())
}

fn prefix_makes_the_linear_channel_circular() -> Result<(), String> {
    let params = small_params();
    let mut r = rng(2);
    let ch =
        generate_channel(3, 5, 2, 0.0, PowerProfile::Uniform, &mut r).map_err(|e| e.to_string())?;
    let x = random_frame(64, &mut r);
    let body = idaft(&x, &params).map_err(|e| e.to_string())?;
    let tx = add_cpp(&body, &params).map_err(|e| e.to_string())?;
    let stream = reference::linear_stream_output(&tx.samples, &ch.paths, &params);
    let rx_body = &stream[tx.body_offset..];
    let circular = apply_time_domain(&body, &ch, &params, &mut r).map_err(|e| e.to_string())?;
    let d = max_abs_diff(rx_body, &circular);
    if d > 1e-9 {
        return err(format!("linear and circular outputs differ by {d:.2e}"));
    }
    Ok(())
}

fn effective_channel_routes_agree() -> Result<(), String> {
    let params = small_params();
    let mut r = rng(3);
    let ch =
        generate_channel(3, 5, 2, 0.0, PowerProfile::Uniform, &mut r).map_err(|e| e.to_string())?;
    let direct = build_heff(&ch.paths, &params);
    let product = reference::heff_product(&ch.paths, &params);
    let mut worst = 0.0f64;
    for i in 0..64 {
        for j in 0..64 {
            worst = worst.max((direct[(i, j)] - product[(i, j)]).norm());
        }
    }
    if worst > 1e-9 {
        return err(format!("matrix routes differ by {worst:.2e}"));
    }
    Ok(())
}

fn pilot_grid_is_bijective() -> Result<(), String> {
    let params = full_params();
    let pilot = PilotConfig::new(PilotScheme::GiFree, Complex::new(1.0, 0.0), 10, 4);
    let mut seen = std::collections::HashSet::new();
    for l in 0..=10usize {
        for k in -4..=4i64 {
            let p = ChannelPath {
                gain: Complex::new(1.0, 0.0),
                delay: l,
                doppler: k,
                theta: 0.0,
            };
            let m = (params.n - loc_of(&p, &params)) % params.n;
            if !seen.insert(m) {
                return err(format!("sample {m} is shared by two grid cells"));
            }
            let (l2, k2) = decompose_loc(m, &params, &pilot).map_err(|e| e.to_string())?;
            if (l2, k2) != (l, k) {
                return err(format!("cell ({l},{k}) decoded as ({l2},{k2})"));
            }
        }
    }
    if seen.len() != 99 {
        return err(format!("expected 99 distinct samples, got {}", seen.len()));
    }
    Ok(())
}

fn thresholds_follow_the_residual_energy() -> Result<(), String> {
    let coarse = coarse_threshold(0.1, 1.0);
    if (coarse - 3.0 * 1.1f64.sqrt()).abs() > 1e-12 {
        return err(format!("coarse threshold {coarse}"));
    }
    let full = refined_threshold(0.1, 1.0, 4, 0);
    if (full - coarse).abs() > 1e-12 {
        return err("no paths found should leave the threshold coarse".to_string());
    }
    let settled = refined_threshold(0.1, 1.0, 4, 4);
    if (settled - 3.0 * 0.1f64.sqrt()).abs() > 1e-12 {
        return err(format!("settled threshold {settled}"));
    }
    let mid = refined_threshold(0.1, 1.0, 4, 3);
    if (mid - 3.0 * 0.35f64.sqrt()).abs() > 1e-12 {
        return err(format!("partial threshold {mid}"));
    }
    Ok(())
}

fn efficiency_accounting_matches_hand_values() -> Result<(), String> {
    use afdm_core::params::spectral_efficiency;
    let classic =
        spectral_efficiency(PilotScheme::ClassicGi, 512, 98, 1).map_err(|e| e.to_string())?;
    let gifree = spectral_efficiency(PilotScheme::GiFree, 512, 98, 1).map_err(|e| e.to_string())?;
    if (classic - 315.0 / 512.0).abs() > 1e-12 || (gifree - 511.0 / 512.0).abs() > 1e-12 {
        return err(format!("efficiencies {classic} {gifree}"));
    }
    let improvement = 100.0 * (gifree - classic) / classic;
    if (improvement - 62.2).abs() > 0.1 {
        return err(format!("improvement {improvement:.2}%"));
    }
    Ok(())
}

fn scan_reads_paths_off_a_pilot_frame() -> Result<(), String> {
    let params = full_params();
    let pilot = PilotConfig::new(PilotScheme::GiFree, Complex::new(100.0, 0.0), 10, 4);
    let truth = [
        ChannelPath {
            gain: Complex::new(0.6, 0.0),
            delay: 0,
            doppler: -4,
            theta: 0.0,
        },
        ChannelPath {
            gain: Complex::new(-0.35, 0.2),
            delay: 7,
            doppler: 3,
            theta: 0.0,
        },
        ChannelPath {
            gain: Complex::new(0.0, 0.45),
            delay: 10,
            doppler: 0,
            theta: 0.0,
        },
    ];
    let data = vec![Complex::new(0.0, 0.0); 511];
    let frame = assemble_frame(&data, &pilot, 512).map_err(|e| e.to_string())?;
    let y = build_heff(&truth, &params)
        .mul_vec(&frame.symbols)
        .map_err(|e| e.to_string())?;
    let found = scan_and_estimate(&y, 1.0, &params, &pilot, 4);
    if found.len() != 3 {
        return err(format!("expected 3 paths, found {}", found.len()));
    }
    for t in &truth {
        let hit = found
            .iter()
            .find(|f| f.delay_index == t.delay && f.doppler_index == t.doppler)
            .ok_or_else(|| format!("path ({}, {}) missed", t.delay, t.doppler))?;
        let d = (hit.gain - t.gain).norm();
        if d > 1e-9 {
            return err(format!(
                "gain error {d:.2e} on ({}, {})",
                t.delay, t.doppler
            ));
        }
    }
    Ok(())
}

fn cancellations_split_the_observation() -> Result<(), String> {
    let params = small_params();
    let pilot = PilotConfig::new(PilotScheme::GiFree, Complex::new(9.0, 0.0), 5, 2);
    let mut r = rng(8);
    let ch =
        generate_channel(3, 5, 2, 0.0, PowerProfile::Uniform, &mut r).map_err(|e| e.to_string())?;
    let c = Constellation::bpsk();
    let bits: Vec<u8> = (0..63).map(|_| r.gen_range(0..2u8)).collect();
    let data = c.map_bits(&bits).map_err(|e| e.to_string())?;
    let frame = assemble_frame(&data, &pilot, 64).map_err(|e| e.to_string())?;
    let h = build_heff(&ch.paths, &params);
    let y = h.mul_vec(&frame.symbols).map_err(|e| e.to_string())?;
    let est = crate::sim::as_estimated(&ch.paths, &params);

    // Data-to-pilot cancellation leaves exactly the pilot contribution on
    // the pilot region; pilot-to-data cancellation leaves exactly the data
    // contribution everywhere.
    let mut pilot_only = frame.symbols.clone();
    for &p in pilot.data_positions(64).map_err(|e| e.to_string())?.iter() {
        pilot_only[p] = Complex::new(0.0, 0.0);
    }
    let y_pilot = h.mul_vec(&pilot_only).map_err(|e| e.to_string())?;
    let y_data: Vec<Complex> = y.iter().zip(&y_pilot).map(|(a, b)| a - b).collect();

    let y_ic1 = cancel_id2p(&y, &est, &frame.symbols, &params, &pilot);
    let y_ic2 = cancel_ip2d(&y, &est, &params, &pilot);
    let region = afdm_core::estimation::pilot_region(&params, &pilot);
    let worst1 = region
        .iter()
        .map(|&m| (y_ic1[m] - y_pilot[m]).norm())
        .fold(0.0, f64::max);
    let worst2 = max_abs_diff(&y_ic2, &y_data);
    if worst1 > 1e-9 || worst2 > 1e-9 {
        return err(format!("cancellation residuals {worst1:.2e} {worst2:.2e}"));
    }
    Ok(())
}

fn equalizer_routes_agree() -> Result<(), String> {
    let params = small_params();
    let mut r = rng(9);
    let ch =
        generate_channel(4, 5, 2, 0.0, PowerProfile::Uniform, &mut r).map_err(|e| e.to_string())?;
    let y = random_frame(64, &mut r);
    let n0 = 0.05;
    let banded = lmmse_detect_paths(&ch.paths, &params, &y, n0).map_err(|e| e.to_string())?;
    let h = build_heff(&ch.paths, &params);
    let dense = lmmse_detect(&h, &y, n0).map_err(|e| e.to_string())?;
    let slow = reference::lmmse_reference(&h, &y, n0).map_err(|e| e.to_string())?;
    let d1 = max_abs_diff(&banded, &dense);
    let d2 = max_abs_diff(&dense, &slow);
    if d1 > 1e-8 || d2 > 1e-8 {
        return err(format!("equalizer routes differ by {d1:.2e} / {d2:.2e}"));
    }
    Ok(())
}

fn estimator_recovers_a_noise_free_channel() -> Result<(), String> {
    let params = small_params();
    let pilot = PilotConfig::new(PilotScheme::GiFree, Complex::new(56.0, 0.0), 5, 2);
    let truth = [
        ChannelPath {
            gain: Complex::new(0.7, -0.1),
            delay: 1,
            doppler: 2,
            theta: 0.0,
        },
        ChannelPath {
            gain: Complex::new(-0.4, 0.5),
            delay: 4,
            doppler: -1,
            theta: 0.0,
        },
    ];
    let c = Constellation::bpsk();
    let bits: Vec<u8> = (0..63).map(|i| ((i * 5 + 2) % 3 == 0) as u8).collect();
    let data = c.map_bits(&bits).map_err(|e| e.to_string())?;
    let frame = assemble_frame(&data, &pilot, 64).map_err(|e| e.to_string())?;
    let y = build_heff(&truth, &params)
        .mul_vec(&frame.symbols)
        .map_err(|e| e.to_string())?;
    let out =
        run_gifree_estimator(&y, &params, &pilot, &c, 0.0, 4, 2).map_err(|e| e.to_string())?;
    let fin = out.final_state();
    if fin.paths.len() != 2 {
        return err(format!("found {} paths, wanted 2", fin.paths.len()));
    }
    for t in &truth {
        let hit = fin
            .paths
            .iter()
            .find(|f| f.delay_index == t.delay && f.doppler_index == t.doppler)
            .ok_or_else(|| format!("path ({}, {}) missed", t.delay, t.doppler))?;
        if (hit.gain - t.gain).norm() > 1e-3 {
            return err(format!("gain error on ({}, {})", t.delay, t.doppler));
        }
    }
    for (i, &d) in data.iter().enumerate() {
        if fin.detected_symbols[i + 1] != d {
            return err(format!("symbol {i} sliced wrongly"));
        }
    }
    Ok(())
}

fn trial_streams_are_reproducible() -> Result<(), String> {
    use rand::RngCore;
    let a = trial_rng(1, 10.0, Scheme::ProposedIter(2), 7).next_u64();
    let b = trial_rng(1, 10.0, Scheme::ProposedIter(2), 7).next_u64();
    if a != b {
        return err("identical keys produced different streams".to_string());
    }
    let c = trial_rng(1, 10.0, Scheme::ProposedIter(2), 8).next_u64();
    if a == c {
        return err("distinct trial indices share a stream".to_string());
    }
    Ok(())
}

fn papr_of_a_known_frame() -> Result<(), String> {
    let frame = TimeFrame {
        samples: vec![
            Complex::new(2.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
        ],
        body_offset: 0,
    };
    let papr = papr_db(&frame).map_err(|e| e.to_string())?;
    let expected = 10.0 * 4.0f64.log10();
    if (papr - expected).abs() > 1e-12 {
        return err(format!("papr {papr} instead of {expected}"));
    }
    Ok(())
}

fn default_configuration_is_valid() -> Result<(), String> {
    let cfg = SimConfig::default();
    cfg.validate()?;
    let params = cfg.modem_params().map_err(|e| e.to_string())?;
    if params.n != 512 || params.l_cp != 10 {
        return err(format!(
            "unexpected defaults n={} l_cp={}",
            params.n, params.l_cp
        ));
    }
    Ok(())
}

/// Run every check, print one line per check, and return overall success.
pub fn run_selftest() -> bool {
    let checks: [(&str, Check); 13] = [
        (
            "transforms match their matrix forms",
            transforms_match_their_matrix_forms,
        ),
        (
            "prefix makes the linear channel circular",
            prefix_makes_the_linear_channel_circular,
        ),
        (
            "effective channel routes agree",
            effective_channel_routes_agree,
        ),
        ("pilot grid is bijective", pilot_grid_is_bijective),
        (
            "thresholds follow the residual energy",
            thresholds_follow_the_residual_energy,
        ),
        (
            "efficiency accounting matches hand values",
            efficiency_accounting_matches_hand_values,
        ),
        (
            "scan reads paths off a pilot frame",
            scan_reads_paths_off_a_pilot_frame,
        ),
        (
            "cancellations split the observation",
            cancellations_split_the_observation,
        ),
        ("equalizer routes agree", equalizer_routes_agree),
        (
            "estimator recovers a noise-free channel",
            estimator_recovers_a_noise_free_channel,
        ),
        (
            "trial streams are reproducible",
            trial_streams_are_reproducible,
        ),
        ("papr of a known frame", papr_of_a_known_frame),
        (
            "default configuration is valid",
            default_configuration_is_valid,
        ),
    ];
    let mut passed = 0usize;
    for (name, check) in &checks {
        match check() {
            Ok(()) => {
                println!("ok - {name}");
                passed += 1;
            }
            Err(msg) => println!("FAIL - {name}: {msg}"),
        }
    }
    println!("{passed}/{} checks passed", checks.len());
    passed == checks.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        assert!(run_selftest(), "selftest must be green");
    }
}
