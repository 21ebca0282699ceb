//! Doubly dispersive channel: random path generation, time-domain
//! application, and the effective matrix seen in the transform domain.
//!
//! A path with delay `l` and integer Doppler `k` couples transform bin
//! `q = (m + loc) mod N` into output bin `m`, where
//! `loc = (k + (2 k_max + 1) l) mod N`. With the tuned `c1` every grid
//! cell `(l, k)` owns a distinct `loc`, which is what makes pilot-aided
//! path identification possible in the first place.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{AfdmError, Result};
use crate::linalg::Matrix;
use crate::params::{phasor, ModemParams};

/// One propagation path of a delay-Doppler channel.
#[derive(Clone, Copy, Debug)]
pub struct ChannelPath {
    pub gain: Complex64,
    /// Delay in samples, `0..=l_max`.
    pub delay: usize,
    /// Integer Doppler in bins, `-k_max..=k_max`.
    pub doppler: i64,
    /// Angle of arrival the Doppler was drawn from (generation record).
    pub theta: f64,
}

/// Anything that behaves like a delay-Doppler tap; implemented by both
/// true channel paths and estimator output so the same channel-matrix and
/// cancellation code serves either.
pub trait DelayDopplerTap {
    fn gain(&self) -> Complex64;
    fn delay(&self) -> usize;
    fn doppler(&self) -> i64;
}

impl DelayDopplerTap for ChannelPath {
    fn gain(&self) -> Complex64 {
        self.gain
    }
    fn delay(&self) -> usize {
        self.delay
    }
    fn doppler(&self) -> i64 {
        self.doppler
    }
}

/// A drawn channel plus the noise level it is simulated at.
#[derive(Clone, Debug)]
pub struct ChannelRealization {
    pub paths: Vec<ChannelPath>,
    /// Complex noise variance per time sample.
    pub n0: f64,
}

/// Per-path power allocation used by [`generate_channel`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PowerProfile {
    /// Equal mean power `1/P` per path.
    #[default]
    Uniform,
    /// Mean power decaying as `exp(-3 delay / l_max)`, normalised to unit
    /// total power (reduces to uniform when `l_max = 0`).
    Exponential,
}

/// Draw a `path_count`-path channel on the `(0..=l_max, -k_max..=k_max)`
/// grid: delays uniform, Doppler from the Jakes angle law
/// `k = round(k_max cos theta)` with `theta ~ U[-pi, pi)`, gains complex
/// Gaussian with unit total mean power. Placements are redrawn until all
/// paths occupy distinct grid cells (equivalently distinct `loc` bins).
pub fn generate_channel(
    path_count: usize,
    l_max: usize,
    k_max: usize,
    n0: f64,
    profile: PowerProfile,
    rng: &mut impl Rng,
) -> Result<ChannelRealization> {
    let grid = (l_max + 1) * (2 * k_max + 1);
    if path_count == 0 {
        return Err(AfdmError::InvalidParameter("path count is zero".into()));
    }
    if path_count > grid {
        return Err(AfdmError::GridTooLarge {
            needed: path_count,
            available: grid,
        });
    }
    if n0 < 0.0 || !n0.is_finite() {
        return Err(AfdmError::InvalidParameter(format!(
            "noise variance {n0} must be finite and non-negative"
        )));
    }

    let alpha = 2 * k_max as i64 + 1;
    let mut used = Vec::with_capacity(path_count);
    let mut placements = Vec::with_capacity(path_count);
    let mut collisions = 0u32;
    for _ in 0..path_count {
        loop {
            let delay = rng.gen_range(0..=l_max);
            let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let doppler = (k_max as f64 * theta.cos()).round() as i64;
            let key = doppler + alpha * delay as i64;
            if used.contains(&key) {
                collisions += 1;
                continue;
            }
            used.push(key);
            placements.push((delay, doppler, theta));
            break;
        }
    }
    if collisions > 0 {
        log::debug!("channel generation redrew {collisions} colliding placement(s)");
    }

    let weights: Vec<f64> = match profile {
        PowerProfile::Uniform => vec![1.0; path_count],
        PowerProfile::Exponential => placements
            .iter()
            .map(|&(l, _, _)| (-3.0 * l as f64 / l_max.max(1) as f64).exp())
            .collect(),
    };
    let total: f64 = weights.iter().sum();

    let paths = placements
        .into_iter()
        .zip(weights)
        .map(|((delay, doppler, theta), w)| {
            let sigma = (w / total / 2.0).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            ChannelPath {
                gain: Complex64::new(re * sigma, im * sigma),
                delay,
                doppler,
                theta,
            }
        })
        .collect();

    Ok(ChannelRealization { paths, n0 })
}

/// Transform-domain bin shift of a tap: `(k + 2 N c1 l) mod N`.
pub fn loc_of<T: DelayDopplerTap>(tap: &T, params: &ModemParams) -> usize {
    let n = params.n as i64;
    let loc = tap.doppler() + params.shift_per_delay() * tap.delay() as i64;
    loc.rem_euclid(n) as usize
}

/// Unit-modulus coupling coefficient from input bin `q` to output bin `m`
/// for a tap with delay `l`: `exp(j 2 pi (c1 l^2 - q l / N + c2 (q^2 - m^2)))`.
/// The full matrix entry is the tap gain times this.
pub(crate) fn coupling_coef(l: usize, q: usize, m: usize, params: &ModemParams) -> Complex64 {
    let n = params.n as i64;
    let ql = ((q * l) as i64).rem_euclid(n);
    let cycles = params.c1.cycles((l * l) as i64) - ql as f64 / n as f64
        + params.c2.cycles((q * q) as i64 - (m * m) as i64);
    phasor(cycles)
}

/// Apply the channel in the time domain:
/// `r[n] = sum_i h_i exp(-j 2 pi k_i n / N) s[(n - l_i) mod N] + w[n]`
/// with `w ~ CN(0, n0)`. The Doppler rotation is referenced to the
/// receive instant; the transform-domain coupling relation implemented by
/// [`build_heff`] assumes exactly this orientation, and the prefix makes
/// the modular shift equal to what a linear delay line would deliver.
pub fn apply_time_domain(
    s: &[Complex64],
    ch: &ChannelRealization,
    params: &ModemParams,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>> {
    let n = params.n;
    if s.len() != n {
        return Err(AfdmError::LengthMismatch {
            expected: n,
            got: s.len(),
        });
    }
    let mut r = vec![Complex64::new(0.0, 0.0); n];
    for path in &ch.paths {
        let l = path.delay % n;
        for (t, out) in r.iter_mut().enumerate() {
            let src = (t + n - l) % n;
            let cycles = (path.doppler * t as i64).rem_euclid(n as i64) as f64 / n as f64;
            *out += path.gain * phasor(cycles).conj() * s[src];
        }
    }
    if ch.n0 > 0.0 {
        let sigma = (ch.n0 / 2.0).sqrt();
        for out in r.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *out += Complex64::new(re * sigma, im * sigma);
        }
    }
    Ok(r)
}

/// Dense effective channel matrix in the transform domain: for each tap
/// and each output bin `m` it adds `gain * coupling_coef` at column
/// `q = (m + loc) mod N`.
pub fn build_heff<T: DelayDopplerTap>(taps: &[T], params: &ModemParams) -> Matrix {
    let n = params.n;
    let mut h = Matrix::zeros(n, n);
    for tap in taps {
        let loc = loc_of(tap, params);
        let l = tap.delay();
        for m in 0..n {
            let q = (m + loc) % n;
            h[(m, q)] += tap.gain() * coupling_coef(l, q, m, params);
        }
    }
    h
}

/// Flat serialisable form of one path.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct PathRecord {
    pub gain_re: f64,
    pub gain_im: f64,
    pub delay: usize,
    pub doppler: i64,
}

/// Flat serialisable form of a channel realization.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ChannelRecord {
    pub n0: f64,
    pub paths: Vec<PathRecord>,
}

impl From<&ChannelRealization> for ChannelRecord {
    fn from(ch: &ChannelRealization) -> Self {
        ChannelRecord {
            n0: ch.n0,
            paths: ch
                .paths
                .iter()
                .map(|p| PathRecord {
                    gain_re: p.gain.re,
                    gain_im: p.gain.im,
                    delay: p.delay,
                    doppler: p.doppler,
                })
                .collect(),
        }
    }
}

impl From<&ChannelRecord> for ChannelRealization {
    fn from(rec: &ChannelRecord) -> Self {
        ChannelRealization {
            n0: rec.n0,
            paths: rec
                .paths
                .iter()
                .map(|p| ChannelPath {
                    gain: Complex64::new(p.gain_re, p.gain_im),
                    delay: p.delay,
                    doppler: p.doppler,
                    theta: 0.0,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::guard_width;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn sec4_params() -> ModemParams {
        ModemParams::for_grid(512, 4, 10, 1e3, 4e9).unwrap()
    }

    fn tap(gain: Complex64, delay: usize, doppler: i64) -> ChannelPath {
        ChannelPath {
            gain,
            delay,
            doppler,
            theta: 0.0,
        }
    }

    #[test]
    fn loc_examples() {
        let p = sec4_params();
        assert_eq!(loc_of(&tap(1.0.into(), 0, 0), &p), 0);
        assert_eq!(loc_of(&tap(1.0.into(), 0, -4), &p), 508);
        assert_eq!(loc_of(&tap(1.0.into(), 10, 4), &p), 94);
    }

    #[test]
    fn loc_is_injective_on_the_grid() {
        let p = sec4_params();
        let q = guard_width(10, 4);
        let mut seen = std::collections::HashSet::new();
        for l in 0..=10usize {
            for k in -4i64..=4 {
                let loc = loc_of(&tap(1.0.into(), l, k), &p);
                assert!(seen.insert(loc), "duplicate loc {loc} for (l={l}, k={k})");
                // Representative range: [-k_max, Q - k_max] modulo N.
                let signed = if loc > q {
                    loc as i64 - 512
                } else {
                    loc as i64
                };
                assert!((-4..=(q as i64 - 4)).contains(&signed));
            }
        }
        assert_eq!(seen.len(), q + 1);
    }

    #[test]
    fn generation_respects_grid_and_power() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let mut total_power = 0.0;
        let draws = 4000;
        for _ in 0..draws {
            let ch = generate_channel(3, 10, 4, 0.1, PowerProfile::Uniform, &mut rng).unwrap();
            assert_eq!(ch.paths.len(), 3);
            let mut locs = Vec::new();
            for p in &ch.paths {
                assert!(p.delay <= 10);
                assert!((-4..=4).contains(&p.doppler));
                locs.push(p.doppler + 9 * p.delay as i64);
                total_power += p.gain.norm_sqr();
            }
            locs.sort_unstable();
            locs.dedup();
            assert_eq!(locs.len(), 3, "loc values must be pairwise distinct");
        }
        let mean_power = total_power / draws as f64;
        assert!(
            (mean_power - 1.0).abs() < 0.05,
            "mean total path power {mean_power} should be 1"
        );
    }

    #[test]
    fn generation_rejects_oversubscribed_grid() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        assert!(generate_channel(2, 0, 0, 0.0, PowerProfile::Uniform, &mut rng).is_err());
        assert!(generate_channel(0, 10, 4, 0.0, PowerProfile::Uniform, &mut rng).is_err());
        // Exactly filling the grid is allowed.
        let ch = generate_channel(9, 0, 4, 0.0, PowerProfile::Uniform, &mut rng).unwrap();
        assert_eq!(ch.paths.len(), 9);
    }

    #[test]
    fn doppler_follows_the_jakes_angle_law() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let draws = 100_000;
        let mut counts = [0usize; 9];
        for _ in 0..draws {
            let ch = generate_channel(1, 10, 4, 0.0, PowerProfile::Uniform, &mut rng).unwrap();
            counts[(ch.paths[0].doppler + 4) as usize] += 1;
        }
        for v in -4i64..=4 {
            let hi = ((v as f64 - 0.5) / 4.0).clamp(-1.0, 1.0).acos();
            let lo = ((v as f64 + 0.5) / 4.0).clamp(-1.0, 1.0).acos();
            let expect = (hi - lo) / std::f64::consts::PI;
            let got = counts[(v + 4) as usize] as f64 / draws as f64;
            assert!(
                (got - expect).abs() < 0.01,
                "bin {v}: empirical {got:.4} vs analytic {expect:.4}"
            );
        }
    }

    #[test]
    fn exponential_profile_keeps_unit_power_and_favours_short_delays() {
        let mut rng = ChaCha12Rng::seed_from_u64(24);
        let draws = 20_000;
        let mut total = 0.0;
        let mut short = 0.0;
        let mut long = 0.0;
        for _ in 0..draws {
            let ch = generate_channel(3, 10, 4, 0.0, PowerProfile::Exponential, &mut rng).unwrap();
            for p in &ch.paths {
                total += p.gain.norm_sqr();
                if p.delay <= 3 {
                    short += p.gain.norm_sqr();
                } else if p.delay >= 7 {
                    long += p.gain.norm_sqr();
                }
            }
        }
        assert!((total / draws as f64 - 1.0).abs() < 0.05);
        assert!(short > 2.0 * long);
    }

    #[test]
    fn pure_delay_and_pure_doppler_paths() {
        let p = ModemParams::for_grid(64, 2, 4, 1e3, 4e9).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(25);
        let s: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();

        let g = Complex64::new(0.3, -0.8);
        let delayed = ChannelRealization {
            paths: vec![tap(g, 3, 0)],
            n0: 0.0,
        };
        let r = apply_time_domain(&s, &delayed, &p, &mut rng).unwrap();
        for t in 0..64 {
            assert!((r[t] - g * s[(t + 64 - 3) % 64]).norm() < 1e-12);
        }

        let rotated = ChannelRealization {
            paths: vec![tap(g, 0, -2)],
            n0: 0.0,
        };
        let r = apply_time_domain(&s, &rotated, &p, &mut rng).unwrap();
        for t in 0..64 {
            let ph = phasor((-2.0 * t as f64 / 64.0).rem_euclid(1.0)).conj();
            assert!((r[t] - g * ph * s[t]).norm() < 1e-12);
        }
    }

    #[test]
    fn noise_variance_matches_n0() {
        let p = sec4_params();
        let mut rng = ChaCha12Rng::seed_from_u64(26);
        let silent = vec![Complex64::new(0.0, 0.0); 512];
        let ch = ChannelRealization {
            paths: vec![tap(1.0.into(), 0, 0)],
            n0: 0.25,
        };
        let mut sum = 0.0;
        let frames = 2000;
        for _ in 0..frames {
            let r = apply_time_domain(&silent, &ch, &p, &mut rng).unwrap();
            sum += r.iter().map(|v| v.norm_sqr()).sum::<f64>();
        }
        let var = sum / (frames * 512) as f64;
        assert!(
            (var - 0.25).abs() < 0.03 * 0.25,
            "noise variance {var} should be 0.25 within 3%"
        );
    }

    #[test]
    fn heff_has_one_band_per_tap() {
        let p = ModemParams::for_grid(64, 2, 4, 1e3, 4e9).unwrap();
        let g = Complex64::new(0.6, 0.2);
        let taps = [tap(g, 3, -1)];
        let loc = loc_of(&taps[0], &p);
        let h = build_heff(&taps, &p);
        for m in 0..64 {
            for q in 0..64 {
                let v = h[(m, q)];
                if q == (m + loc) % 64 {
                    assert!((v.norm() - g.norm()).abs() < 1e-12);
                } else {
                    assert_eq!(v, Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn record_round_trip() {
        let mut rng = ChaCha12Rng::seed_from_u64(27);
        let ch = generate_channel(3, 10, 4, 0.5, PowerProfile::Uniform, &mut rng).unwrap();
        let rec = ChannelRecord::from(&ch);
        let text = serde_json::to_string(&rec).unwrap();
        let back: ChannelRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(rec, back);
        let ch2 = ChannelRealization::from(&back);
        assert_eq!(ch2.paths.len(), ch.paths.len());
        for (a, b) in ch.paths.iter().zip(&ch2.paths) {
            assert_eq!(a.gain, b.gain);
            assert_eq!(a.delay, b.delay);
            assert_eq!(a.doppler, b.doppler);
        }
    }
}
