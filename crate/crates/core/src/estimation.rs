//! Pilot-aided channel estimation.
//!
//! Both estimators scan the pilot's response region for threshold
//! crossings and read each crossing's delay and Doppler straight off its
//! sample index. The guard-interval baseline can use the noise-only
//! threshold `3 sqrt(N0)` because guards keep data out of the region. The
//! guard-free scheme must budget for data interference: it starts from an
//! inflated threshold, then alternates between subtracting the estimated
//! data interference from the pilot region (sharpening the scan) and
//! subtracting the estimated pilot responses from the data (sharpening
//! detection), lowering the threshold as paths are found.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{coupling_coef, loc_of, DelayDopplerTap, PathRecord};
use crate::constellation::Constellation;
use crate::detection::lmmse_detect_paths;
use crate::error::{AfdmError, Result};
use crate::params::{ModemParams, PilotConfig};

/// One detected path with the evidence it was detected from.
#[derive(Clone, Copy, Debug)]
pub struct EstimatedPath {
    pub gain: Complex64,
    pub delay_index: usize,
    pub doppler_index: i64,
    /// Sample the crossing was observed at; always `(N - loc) mod N` for
    /// the path's own `loc`.
    pub sample_index: usize,
    /// Observation magnitude at detection time, before gain scaling.
    pub magnitude: f64,
}

impl DelayDopplerTap for EstimatedPath {
    fn gain(&self) -> Complex64 {
        self.gain
    }
    fn delay(&self) -> usize {
        self.delay_index
    }
    fn doppler(&self) -> i64 {
        self.doppler_index
    }
}

/// Snapshot of one estimator iteration.
#[derive(Clone, Debug)]
pub struct EstimationState {
    pub iteration: usize,
    pub threshold: f64,
    /// Path budget: at most this many strongest crossings are kept.
    pub p_prime: usize,
    pub paths: Vec<EstimatedPath>,
    /// Observations after data-interference cancellation (the scan input);
    /// the raw observations on iteration 0.
    pub y_ic1: Vec<Complex64>,
    /// Observations after pilot-response cancellation (the detector input);
    /// the raw observations on iteration 0.
    pub y_ic2: Vec<Complex64>,
    /// Hard symbol decisions, full frame length, pilot amplitude at bin 0.
    pub detected_symbols: Vec<Complex64>,
}

/// Full estimator run: iteration 0 (coarse) through iteration R.
#[derive(Clone, Debug)]
pub struct EstimatorOutput {
    pub iterations: Vec<EstimationState>,
}

impl EstimatorOutput {
    pub fn final_state(&self) -> &EstimationState {
        self.iterations
            .last()
            .expect("estimator runs at least once")
    }
}

/// Serializable per-iteration diagnostic.
#[derive(Clone, Debug, Serialize)]
pub struct IterationDiag {
    pub iteration: usize,
    pub threshold: f64,
    pub paths_found: usize,
    pub paths: Vec<PathRecord>,
    /// Energy of `y_ic2 - H_est x_detected`, the model mismatch after
    /// this iteration.
    pub residual_energy: f64,
}

impl EstimationState {
    pub fn diagnostic(&self, params: &ModemParams) -> IterationDiag {
        let n = params.n;
        let mut residual = self.y_ic2.clone();
        for path in &self.paths {
            let loc = loc_of(path, params);
            for (m, slot) in residual.iter_mut().enumerate() {
                let q = (m + loc) % n;
                *slot -= path.gain
                    * coupling_coef(path.delay_index, q, m, params)
                    * self.detected_symbols[q];
            }
        }
        IterationDiag {
            iteration: self.iteration,
            threshold: self.threshold,
            paths_found: self.paths.len(),
            paths: self
                .paths
                .iter()
                .map(|p| PathRecord {
                    gain_re: p.gain.re,
                    gain_im: p.gain.im,
                    delay: p.delay_index,
                    doppler: p.doppler_index,
                })
                .collect(),
            residual_energy: residual.iter().map(|v| v.norm_sqr()).sum(),
        }
    }
}

/// The Q+1 sample indices where the pilot can respond, in ascending order
/// of the underlying shift: `{(N - loc) mod N : loc in [-k_max, Q - k_max]}`.
pub fn pilot_region(params: &ModemParams, pilot: &PilotConfig) -> Vec<usize> {
    let n = params.n as i64;
    let q = pilot.guard_width() as i64;
    let k_max = pilot.k_max as i64;
    assert!(q < n, "pilot region must fit the frame");
    (-k_max..=q - k_max)
        .map(|loc| (n - loc).rem_euclid(n) as usize)
        .collect()
}

/// Invert the region geometry: recover `(delay, doppler)` from the sample
/// index a pilot response was seen at.
pub fn decompose_loc(m: usize, params: &ModemParams, pilot: &PilotConfig) -> Result<(usize, i64)> {
    let n = params.n as i64;
    assert!((m as i64) < n, "sample index {m} out of frame");
    let q = pilot.guard_width() as i64;
    let k_max = pilot.k_max as i64;
    let v = (n - m as i64).rem_euclid(n);
    let loc = if v <= q - k_max {
        v
    } else if v >= n - k_max {
        v - n
    } else {
        return Err(AfdmError::OutsidePilotRegion { sample: m });
    };
    let alpha = 2 * pilot.k_max as i64 + 1;
    let l = (loc + k_max).div_euclid(alpha);
    let k = loc - alpha * l;
    Ok((l as usize, k))
}

/// Detection threshold when data interference is fully present.
pub fn coarse_threshold(n0: f64, e_s: f64) -> f64 {
    3.0 * (n0 + e_s).sqrt()
}

/// Detection threshold after `p_found` of the `p_prime` budgeted paths
/// have had their data interference cancelled.
pub fn refined_threshold(n0: f64, e_s: f64, p_prime: usize, p_found: usize) -> f64 {
    assert!(p_prime >= 1, "path budget must be positive");
    assert!(p_found <= p_prime, "found paths exceed the budget");
    let remaining = (p_prime - p_found) as f64 / p_prime as f64;
    3.0 * (n0 + remaining * e_s).sqrt()
}

/// Scan the pilot region for threshold crossings and turn each into a
/// path estimate. Keeps at most `p_prime` crossings, strongest first;
/// ties break toward the lower sample index for determinism.
pub fn scan_and_estimate(
    y_obs: &[Complex64],
    threshold: f64,
    params: &ModemParams,
    pilot: &PilotConfig,
    p_prime: usize,
) -> Vec<EstimatedPath> {
    assert!(
        pilot.amplitude.norm_sqr() > 0.0,
        "pilot amplitude must be nonzero to invert responses"
    );
    let mut found = Vec::new();
    for m in pilot_region(params, pilot) {
        let magnitude = y_obs[m].norm();
        if magnitude < threshold {
            continue;
        }
        let (l, k) = decompose_loc(m, params, pilot).expect("scan stays inside the region");
        let gain = y_obs[m] / (coupling_coef(l, 0, m, params) * pilot.amplitude);
        found.push(EstimatedPath {
            gain,
            delay_index: l,
            doppler_index: k,
            sample_index: m,
            magnitude,
        });
    }
    found.sort_by(|a, b| {
        b.magnitude
            .total_cmp(&a.magnitude)
            .then(a.sample_index.cmp(&b.sample_index))
    });
    found.truncate(p_prime);
    found
}

/// Subtract the estimated data interference from the pilot region:
/// for each region sample `m` and estimated path, remove the path's
/// contribution from data bin `q = (m + loc) mod N`, skipping `q = 0`
/// (that term is the pilot response, not data). Other samples unchanged.
pub fn cancel_id2p(
    y: &[Complex64],
    paths: &[EstimatedPath],
    symbols: &[Complex64],
    params: &ModemParams,
    pilot: &PilotConfig,
) -> Vec<Complex64> {
    let n = params.n;
    assert!(symbols.len() == n, "need a full frame of symbol decisions");
    let mut out = y.to_vec();
    for m in pilot_region(params, pilot) {
        for path in paths {
            let q = (m + loc_of(path, params)) % n;
            if q == 0 {
                continue;
            }
            out[m] -= path.gain * coupling_coef(path.delay_index, q, m, params) * symbols[q];
        }
    }
    out
}

/// Subtract the estimated pilot responses from the observations: each
/// estimated path touches exactly one sample, `(N - loc) mod N`.
pub fn cancel_ip2d(
    y: &[Complex64],
    paths: &[EstimatedPath],
    params: &ModemParams,
    pilot: &PilotConfig,
) -> Vec<Complex64> {
    let n = params.n;
    let mut out = y.to_vec();
    for path in paths {
        let m = (n - loc_of(path, params)) % n;
        out[m] -= path.gain * coupling_coef(path.delay_index, 0, m, params) * pilot.amplitude;
    }
    out
}

/// Run LMMSE detection with the current path estimates and slice to hard
/// decisions, producing a full frame with the pilot amplitude at bin 0.
fn detect_symbols(
    paths: &[EstimatedPath],
    y_obs: &[Complex64],
    params: &ModemParams,
    pilot: &PilotConfig,
    constellation: &Constellation,
    n0: f64,
    data_positions: &[usize],
) -> Result<Vec<Complex64>> {
    let soft = lmmse_detect_paths(paths, params, y_obs, n0)?;
    let data_soft: Vec<Complex64> = data_positions.iter().map(|&p| soft[p]).collect();
    let (hard, _) = constellation.slice(&data_soft);
    let mut detected = vec![Complex64::new(0.0, 0.0); params.n];
    detected[0] = pilot.amplitude;
    for (&p, h) in data_positions.iter().zip(hard) {
        detected[p] = h;
    }
    Ok(detected)
}

/// The guard-free iterative estimator.
///
/// Iteration 0 scans the raw observations at the coarse threshold and
/// detects symbols from them. Each further iteration r in 1..=R cancels
/// data interference using the previous decisions, rescans at the refined
/// threshold, cancels the rescanned pilot responses from the data, and
/// re-detects. Detector failures (singular systems) propagate as errors.
pub fn run_gifree_estimator(
    y: &[Complex64],
    params: &ModemParams,
    pilot: &PilotConfig,
    constellation: &Constellation,
    n0: f64,
    p_prime: usize,
    r_max: usize,
) -> Result<EstimatorOutput> {
    let n = params.n;
    if y.len() != n {
        return Err(AfdmError::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if p_prime == 0 {
        return Err(AfdmError::InvalidParameter("path budget is zero".into()));
    }
    let e_s = constellation.energy();
    let data_positions = pilot.data_positions(n)?;
    let mut iterations = Vec::with_capacity(r_max + 1);

    let threshold = coarse_threshold(n0, e_s);
    let paths = scan_and_estimate(y, threshold, params, pilot, p_prime);
    let detected = detect_symbols(&paths, y, params, pilot, constellation, n0, &data_positions)?;
    iterations.push(EstimationState {
        iteration: 0,
        threshold,
        p_prime,
        paths,
        y_ic1: y.to_vec(),
        y_ic2: y.to_vec(),
        detected_symbols: detected,
    });

    for r in 1..=r_max {
        let prev = iterations.last().expect("iteration 0 exists");
        let y_ic1 = cancel_id2p(y, &prev.paths, &prev.detected_symbols, params, pilot);
        let threshold = refined_threshold(n0, e_s, p_prime, prev.paths.len());
        let paths = scan_and_estimate(&y_ic1, threshold, params, pilot, p_prime);
        let y_ic2 = cancel_ip2d(y, &paths, params, pilot);
        let detected = detect_symbols(
            &paths,
            &y_ic2,
            params,
            pilot,
            constellation,
            n0,
            &data_positions,
        )?;
        iterations.push(EstimationState {
            iteration: r,
            threshold,
            p_prime,
            paths,
            y_ic1,
            y_ic2,
            detected_symbols: detected,
        });
    }
    Ok(EstimatorOutput { iterations })
}

/// The guard-interval baseline estimator: one scan at the noise-only
/// threshold `3 sqrt(N0)`, no cancellation, no path budget beyond the
/// region size. Guards make this exact when they actually isolate the
/// pilot; on a guard-free frame the same threshold drowns in data
/// interference, which is the point of comparison.
pub fn run_classic_estimator(
    y: &[Complex64],
    params: &ModemParams,
    pilot: &PilotConfig,
    n0: f64,
) -> Vec<EstimatedPath> {
    let budget = pilot.guard_width() + 1;
    scan_and_estimate(y, 3.0 * n0.sqrt(), params, pilot, budget)
}
