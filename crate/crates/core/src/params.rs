//! Modem parameterisation: chirp rates, delay-Doppler grid sizing, pilot
//! frame layout, and spectral-efficiency accounting.

use num_complex::Complex64;

use crate::error::{AfdmError, Result};

/// One full turn per unit cycle value.
pub fn phasor(cycles: f64) -> Complex64 {
    let (sin, cos) = (std::f64::consts::TAU * cycles).sin_cos();
    Complex64::new(cos, sin)
}

/// Chirp-rate coefficient of an affine-transform exponent.
///
/// Tuned rates are kept as exact rationals so derived integer quantities
/// (the per-delay bin shift `2N*c1` above all) never suffer float drift,
/// and so quadratic phase arguments can be reduced modulo one turn in
/// integer arithmetic before any trigonometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Chirp {
    /// Exact rational `num/den`, `den > 0`.
    Ratio(i64, i64),
    /// Arbitrary real rate (configuration override).
    Real(f64),
}

impl Chirp {
    pub fn value(self) -> f64 {
        match self {
            Chirp::Ratio(num, den) => num as f64 / den as f64,
            Chirp::Real(v) => v,
        }
    }

    /// `self * k` reduced modulo 1 (in turns). Exact for `Ratio`.
    pub fn cycles(self, k: i64) -> f64 {
        match self {
            Chirp::Ratio(num, den) => {
                debug_assert!(den > 0, "chirp denominator must be positive");
                let r = (num as i128 * k as i128).rem_euclid(den as i128);
                r as f64 / den as f64
            }
            Chirp::Real(v) => (v * k as f64).fract(),
        }
    }

    /// `exp(+j 2 pi self k)`.
    pub fn phasor(self, k: i64) -> Complex64 {
        phasor(self.cycles(k))
    }
}

/// First chirp rate that places distinct delay-Doppler paths on distinct
/// transform bins: `c1 = (2 k_max + 1) / (2 N)`.
pub fn tune_c1(k_max: usize, n: usize) -> Result<Chirp> {
    let needed = 2 * k_max + 1;
    if needed > n {
        return Err(AfdmError::GridTooLarge {
            needed,
            available: n,
        });
    }
    Ok(Chirp::Ratio(needed as i64, 2 * n as i64))
}

/// Default second chirp rate, `1/(2 N^2)`: small enough not to disturb the
/// bin mapping fixed by `c1`, irrational-like in effect but kept rational
/// for exact phase reduction.
pub fn default_c2(n: usize) -> Chirp {
    Chirp::Ratio(1, 2 * (n as i64) * (n as i64))
}

/// Number of transform bins one delay-Doppler spread occupies beyond the
/// pilot bin itself: `Q = (l_max + 1)(2 k_max + 1) - 1`.
pub fn guard_width(l_max: usize, k_max: usize) -> usize {
    (l_max + 1) * (2 * k_max + 1) - 1
}

/// Pilot frame layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PilotScheme {
    /// Pilot at bin 0 flanked by `Q` zero guards on each side; data on the
    /// remaining `N - 2Q - 1` bins.
    ClassicGi,
    /// Pilot at bin 0, data everywhere else; interference between pilot and
    /// data is handled at the receiver instead of being avoided by guards.
    GiFree,
}

/// Pilot placement and power for one frame format.
#[derive(Clone, Debug)]
pub struct PilotConfig {
    pub scheme: PilotScheme,
    /// Transmitted pilot symbol (bin 0).
    pub amplitude: Complex64,
    /// Largest delay the receiver must resolve, in samples.
    pub l_max: usize,
    /// Largest integer Doppler the receiver must resolve, in bins.
    pub k_max: usize,
}

impl PilotConfig {
    pub fn new(scheme: PilotScheme, amplitude: Complex64, l_max: usize, k_max: usize) -> Self {
        Self {
            scheme,
            amplitude,
            l_max,
            k_max,
        }
    }

    /// Guard width `Q` implied by the delay-Doppler spread.
    pub fn guard_width(&self) -> usize {
        guard_width(self.l_max, self.k_max)
    }

    /// Pilot energy `|amplitude|^2`.
    pub fn energy(&self) -> f64 {
        self.amplitude.norm_sqr()
    }

    /// Data-bearing bins of an `n`-bin frame, ascending.
    pub fn data_positions(&self, n: usize) -> Result<Vec<usize>> {
        match self.scheme {
            PilotScheme::ClassicGi => {
                let q = self.guard_width();
                if 2 * q + 1 >= n {
                    return Err(AfdmError::GridTooLarge {
                        needed: 2 * q + 2,
                        available: n,
                    });
                }
                Ok((q + 1..=n - q - 1).collect())
            }
            PilotScheme::GiFree => {
                if n < 2 {
                    return Err(AfdmError::GridTooLarge {
                        needed: 2,
                        available: n,
                    });
                }
                Ok((1..n).collect())
            }
        }
    }

    /// Number of data-bearing bins of an `n`-bin frame.
    pub fn data_len(&self, n: usize) -> Result<usize> {
        Ok(self.data_positions(n)?.len())
    }
}

/// Spectral efficiency in bit/s/Hz for an `n`-bin frame with guard width
/// `q` and `bits_per_symbol`-bit data symbols.
pub fn spectral_efficiency(
    scheme: PilotScheme,
    n: usize,
    q: usize,
    bits_per_symbol: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(AfdmError::InvalidParameter("frame length is zero".into()));
    }
    let b = bits_per_symbol as f64;
    match scheme {
        PilotScheme::ClassicGi => {
            if 2 * q + 1 > n {
                return Err(AfdmError::GridTooLarge {
                    needed: 2 * q + 1,
                    available: n,
                });
            }
            Ok((n - 2 * q - 1) as f64 * b / n as f64)
        }
        PilotScheme::GiFree => Ok((n - 1) as f64 * b / n as f64),
    }
}

/// Static transform parameters of one AFDM frame.
#[derive(Clone, Debug)]
pub struct ModemParams {
    /// Frame length in samples / transform bins.
    pub n: usize,
    /// First (quadratic-in-time) chirp rate.
    pub c1: Chirp,
    /// Second (quadratic-in-bin) chirp rate.
    pub c2: Chirp,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Chirp-periodic prefix length in samples.
    pub l_cp: usize,
}

impl ModemParams {
    pub fn new(
        n: usize,
        c1: Chirp,
        c2: Chirp,
        delta_f: f64,
        carrier_freq: f64,
        l_cp: usize,
    ) -> Result<Self> {
        if n < 2 {
            return Err(AfdmError::InvalidParameter(format!(
                "frame length {n} is too short"
            )));
        }
        if l_cp >= n {
            return Err(AfdmError::InvalidParameter(format!(
                "prefix length {l_cp} must be shorter than the frame ({n})"
            )));
        }
        if !delta_f.is_finite() || delta_f <= 0.0 {
            return Err(AfdmError::InvalidParameter(format!(
                "subcarrier spacing {delta_f} must be positive"
            )));
        }
        if carrier_freq < 0.0 || !carrier_freq.is_finite() {
            return Err(AfdmError::InvalidParameter(format!(
                "carrier frequency {carrier_freq} must be finite and non-negative"
            )));
        }
        Ok(Self {
            n,
            c1,
            c2,
            delta_f,
            carrier_freq,
            l_cp,
        })
    }

    /// Parameters tuned for a `(l_max, k_max)` delay-Doppler grid: `c1`
    /// from the grid, default `c2`, prefix sized to the delay spread.
    pub fn for_grid(
        n: usize,
        k_max: usize,
        l_max: usize,
        delta_f: f64,
        carrier_freq: f64,
    ) -> Result<Self> {
        Self::new(
            n,
            tune_c1(k_max, n)?,
            default_c2(n),
            delta_f,
            carrier_freq,
            l_max,
        )
    }

    /// Bin shift contributed by one sample of delay: `2 N c1`, rounded to
    /// the nearest integer (exact for tuned rates).
    pub fn shift_per_delay(&self) -> i64 {
        match self.c1 {
            Chirp::Ratio(num, den) => {
                let t = num as i128 * 2 * self.n as i128;
                if t % den as i128 == 0 {
                    (t / den as i128) as i64
                } else {
                    (t as f64 / den as f64).round() as i64
                }
            }
            Chirp::Real(v) => (2.0 * self.n as f64 * v).round() as i64,
        }
    }

    /// Frame duration in seconds (prefix excluded).
    pub fn frame_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Occupied bandwidth in Hz.
    pub fn bandwidth(&self) -> f64 {
        self.n as f64 * self.delta_f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuned_c1_is_exact() {
        assert_eq!(tune_c1(4, 512).unwrap(), Chirp::Ratio(9, 1024));
        assert_eq!(tune_c1(4, 512).unwrap().value(), 0.0087890625);
        assert_eq!(tune_c1(0, 2).unwrap(), Chirp::Ratio(1, 4));
        assert_eq!(tune_c1(1, 16).unwrap(), Chirp::Ratio(3, 32));
        assert!(tune_c1(8, 16).is_err(), "2*8+1 = 17 exceeds N = 16");
    }

    #[test]
    fn tuned_c1_keeps_two_n_c1_odd() {
        for k_max in 0..6 {
            for n in [16usize, 64, 128, 512] {
                if 2 * k_max + 1 > n {
                    continue;
                }
                let p = ModemParams::for_grid(n, k_max, 3, 1e3, 4e9).unwrap();
                let s = p.shift_per_delay();
                assert_eq!(s, 2 * k_max as i64 + 1);
                assert_eq!(s.rem_euclid(2), 1, "2N*c1 must be odd");
            }
        }
    }

    #[test]
    fn default_c2_values() {
        assert_eq!(default_c2(512), Chirp::Ratio(1, 524288));
        assert_eq!(default_c2(2), Chirp::Ratio(1, 8));
        assert_eq!(default_c2(16), Chirp::Ratio(1, 512));
        for n in [2usize, 16, 512] {
            assert!(default_c2(n).value() < tune_c1(0, n).unwrap().value());
        }
    }

    #[test]
    fn rational_cycles_are_exact() {
        let c1 = tune_c1(4, 512).unwrap();
        // 9 * 1024^2 / 1024 = 9 * 1024, an integer number of turns.
        assert_eq!(c1.cycles(1024 * 1024), 0.0);
        assert_eq!(c1.cycles(2), 18.0 / 1024.0);
        // Negative arguments reduce into [0, 1).
        let c = c1.cycles(-3);
        assert!((0.0..1.0).contains(&c));
        assert_eq!(c, 1.0 - 27.0 / 1024.0);
    }

    #[test]
    fn guard_width_examples() {
        assert_eq!(guard_width(10, 4), 98);
        assert_eq!(guard_width(0, 0), 0);
        assert_eq!(guard_width(1, 1), 5);
    }

    #[test]
    fn guard_width_monotone() {
        for l in 0..12 {
            for k in 0..6 {
                assert!(guard_width(l + 1, k) > guard_width(l, k));
                assert!(guard_width(l, k + 1) > guard_width(l, k));
            }
        }
    }

    #[test]
    fn spectral_efficiency_examples() {
        let classic = spectral_efficiency(PilotScheme::ClassicGi, 512, 98, 1).unwrap();
        let gifree = spectral_efficiency(PilotScheme::GiFree, 512, 98, 1).unwrap();
        assert!((classic - 315.0 / 512.0).abs() < 1e-15);
        assert!((gifree - 511.0 / 512.0).abs() < 1e-15);
        assert!((spectral_efficiency(PilotScheme::GiFree, 2, 0, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(gifree > classic);
        // Degenerate but allowed: guards fill the whole frame.
        assert_eq!(
            spectral_efficiency(PilotScheme::ClassicGi, 197, 98, 1).unwrap(),
            0.0
        );
        assert!(spectral_efficiency(PilotScheme::ClassicGi, 196, 98, 1).is_err());
    }

    #[test]
    fn data_positions_layouts() {
        let classic = PilotConfig::new(PilotScheme::ClassicGi, 1.0.into(), 1, 0);
        assert_eq!(classic.guard_width(), 1);
        assert_eq!(
            classic.data_positions(16).unwrap(),
            (2..=14).collect::<Vec<_>>()
        );

        let gifree = PilotConfig::new(PilotScheme::GiFree, 1.0.into(), 1, 0);
        assert_eq!(
            gifree.data_positions(16).unwrap(),
            (1..16).collect::<Vec<_>>()
        );

        let sec4 = PilotConfig::new(PilotScheme::ClassicGi, 1.0.into(), 10, 4);
        assert_eq!(sec4.guard_width(), 98);
        assert_eq!(sec4.data_len(512).unwrap(), 315);
        // Guards leave no room in a short frame.
        assert!(sec4.data_positions(197).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModemParams::for_grid(512, 4, 10, 1e3, 4e9).is_ok());
        assert!(ModemParams::new(1, Chirp::Real(0.0), Chirp::Real(0.0), 1e3, 4e9, 0).is_err());
        assert!(ModemParams::new(8, Chirp::Real(0.0), Chirp::Real(0.0), 0.0, 4e9, 0).is_err());
        assert!(ModemParams::new(8, Chirp::Real(0.0), Chirp::Real(0.0), 1e3, 4e9, 8).is_err());
    }

    #[test]
    fn shift_per_delay_handles_real_rates() {
        let p = ModemParams::new(
            512,
            Chirp::Real(9.0 / 1024.0),
            default_c2(512),
            1e3,
            4e9,
            10,
        )
        .unwrap();
        assert_eq!(p.shift_per_delay(), 9);
    }
}
