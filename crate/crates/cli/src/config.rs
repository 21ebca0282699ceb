//! Simulation configuration: file format, defaults, and validation.
//!
//! The config file is TOML whose keys mirror the field names below;
//! unknown keys are rejected so typos fail loudly instead of silently
//! running the defaults.

use afdm_core::params::{default_c2, guard_width, tune_c1, Chirp};
use afdm_core::{AfdmError, Constellation, ModemParams};
use serde::{Deserialize, Serialize};

/// Receiver scheme simulated for one curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// True channel handed to the detector; the ideal reference curve.
    PerfectCsi,
    /// Noise-only threshold applied to the guard-free frame; the
    /// mismatched baseline.
    ClassicThreshold,
    /// Guard-free estimator, coarse pass only.
    ProposedNoIter,
    /// Guard-free estimator with this many refinement iterations (>= 1).
    ProposedIter(usize),
    /// Guard-interval frame with the matching classic estimator.
    ClassicGi,
}

impl Scheme {
    pub fn token(self) -> String {
        match self {
            Scheme::PerfectCsi => "perfect_csi".into(),
            Scheme::ClassicThreshold => "classic_threshold".into(),
            Scheme::ProposedNoIter => "proposed_no_iter".into(),
            Scheme::ProposedIter(r) => format!("proposed_iter_{r}"),
            Scheme::ClassicGi => "classic_gi".into(),
        }
    }

    /// Parse a scheme token. A bare `proposed_iter` uses `default_r`.
    pub fn parse(token: &str, default_r: usize) -> Result<Scheme, String> {
        match token {
            "perfect_csi" => Ok(Scheme::PerfectCsi),
            "classic_threshold" => Ok(Scheme::ClassicThreshold),
            "proposed_no_iter" => Ok(Scheme::ProposedNoIter),
            "classic_gi" => Ok(Scheme::ClassicGi),
            "proposed_iter" => {
                if default_r == 0 {
                    Err("proposed_iter needs R >= 1; use proposed_no_iter for R = 0".into())
                } else {
                    Ok(Scheme::ProposedIter(default_r))
                }
            }
            other => {
                if let Some(rest) = other.strip_prefix("proposed_iter_") {
                    match rest.parse::<usize>() {
                        Ok(r) if r >= 1 => Ok(Scheme::ProposedIter(r)),
                        Ok(_) => Err("proposed_iter_0 is spelled proposed_no_iter".into()),
                        Err(_) => Err(format!("bad iteration count in scheme '{other}'")),
                    }
                } else {
                    Err(format!(
                        "unknown scheme '{other}' (expected perfect_csi, classic_threshold, \
                         proposed_no_iter, proposed_iter_<r>, or classic_gi)"
                    ))
                }
            }
        }
    }

    /// Refinement iterations this scheme runs.
    pub fn iterations(self) -> usize {
        match self {
            Scheme::ProposedIter(r) => r,
            _ => 0,
        }
    }

    /// Whether the frame uses the guard-interval layout.
    pub fn uses_classic_frame(self) -> bool {
        matches!(self, Scheme::ClassicGi)
    }
}

/// Full sweep description. Field names are the config file keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    #[serde(rename = "N")]
    pub n: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Carrier frequency in Hz (scenario bookkeeping; the discrete model
    /// works in integer Doppler bins).
    pub carrier_freq: f64,
    pub l_max: usize,
    pub k_max: usize,
    /// True path count per channel draw.
    #[serde(rename = "P")]
    pub p: usize,
    /// Estimator path budget.
    #[serde(rename = "P_prime")]
    pub p_prime: usize,
    /// Default refinement iteration count for `proposed_iter`.
    #[serde(rename = "R")]
    pub r: usize,
    pub snr_db_list: Vec<f64>,
    /// Pilot SNR in dB: pilot energy is N0 * 10^(pilot_snr_db/10).
    pub pilot_snr_db: f64,
    pub schemes: Vec<String>,
    pub frames_per_point: usize,
    pub master_seed: u64,
    pub constellation: String,
    /// Optional override for the second chirp rate; the default is
    /// 1/(2 N^2).
    pub c2_override: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 512,
            delta_f: 1e3,
            carrier_freq: 4e9,
            l_max: 10,
            k_max: 4,
            p: 3,
            p_prime: 4,
            r: 2,
            snr_db_list: (0..=10).map(|i| (2 * i) as f64).collect(),
            pilot_snr_db: 45.0,
            schemes: vec![
                "perfect_csi".into(),
                "classic_threshold".into(),
                "proposed_no_iter".into(),
                "proposed_iter_1".into(),
                "proposed_iter_2".into(),
                "classic_gi".into(),
            ],
            frames_per_point: 500,
            master_seed: 1,
            constellation: "bpsk".into(),
            c2_override: None,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<SimConfig, String> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| format!("config parse: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n < 2 {
            return Err("N must be at least 2".into());
        }
        if self.frames_per_point == 0 {
            return Err("frames_per_point must be at least 1".into());
        }
        if self.snr_db_list.is_empty() {
            return Err("snr_db_list must not be empty".into());
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return Err("snr_db_list entries must be finite".into());
        }
        if !self.pilot_snr_db.is_finite() {
            return Err("pilot_snr_db must be finite".into());
        }
        let grid = (self.l_max + 1) * (2 * self.k_max + 1);
        if self.p == 0 || self.p > grid {
            return Err(format!(
                "P = {} must be in 1..={} for the (l_max, k_max) grid",
                self.p, grid
            ));
        }
        if self.p_prime == 0 {
            return Err("P_prime must be at least 1".into());
        }
        if 2 * self.k_max + 1 > self.n {
            return Err("2 k_max + 1 must not exceed N".into());
        }
        if self.l_max >= self.n {
            return Err("l_max must be smaller than N".into());
        }
        let q = guard_width(self.l_max, self.k_max);
        if q >= self.n {
            return Err(format!(
                "pilot region width Q + 1 = {} exceeds the frame",
                q + 1
            ));
        }
        let schemes = self.parsed_schemes()?;
        if schemes.iter().any(|s| s.uses_classic_frame()) && 2 * q + 1 >= self.n {
            return Err(format!(
                "classic_gi needs N > 2 Q + 1 = {}, got N = {}",
                2 * q + 1,
                self.n
            ));
        }
        self.parsed_constellation()?;
        if let Some(c2) = self.c2_override {
            if !c2.is_finite() {
                return Err("c2_override must be finite".into());
            }
        }
        Ok(())
    }

    pub fn parsed_schemes(&self) -> Result<Vec<Scheme>, String> {
        if self.schemes.is_empty() {
            return Err("schemes must not be empty".into());
        }
        let mut out = Vec::with_capacity(self.schemes.len());
        for token in &self.schemes {
            let s = Scheme::parse(token, self.r)?;
            if out.contains(&s) {
                return Err(format!("scheme '{token}' listed twice"));
            }
            out.push(s);
        }
        Ok(out)
    }

    pub fn parsed_constellation(&self) -> Result<Constellation, String> {
        match self.constellation.as_str() {
            "bpsk" => Ok(Constellation::bpsk()),
            "qpsk" => Ok(Constellation::qpsk()),
            other => Err(format!("unknown constellation '{other}' (bpsk or qpsk)")),
        }
    }

    pub fn modem_params(&self) -> Result<ModemParams, AfdmError> {
        let c1 = tune_c1(self.k_max, self.n)?;
        let c2 = match self.c2_override {
            Some(v) => Chirp::Real(v),
            None => default_c2(self.n),
        };
        ModemParams::new(self.n, c1, c2, self.delta_f, self.carrier_freq, self.l_max)
    }
}

/// Parse an SNR list given as comma-separated values (`0,4,8`) or a
/// `start:step:stop` range (`0:2:20`, stop inclusive).
pub fn parse_snr_list(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range '{text}' must be start:step:stop"));
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| "bad range start")?;
        let step: f64 = parts[1].trim().parse().map_err(|_| "bad range step")?;
        let stop: f64 = parts[2].trim().parse().map_err(|_| "bad range stop")?;
        if !step.is_finite() || step <= 0.0 {
            return Err("range step must be positive".into());
        }
        let mut out = Vec::new();
        let mut i = 0u32;
        loop {
            let v = start + step * i as f64;
            if v > stop + 1e-9 {
                break;
            }
            out.push(v);
            i += 1;
        }
        if out.is_empty() {
            return Err(format!("range '{text}' produced no points"));
        }
        Ok(out)
    } else {
        let mut out = Vec::new();
        for piece in text.split(',') {
            let v: f64 = piece
                .trim()
                .parse()
                .map_err(|_| format!("bad SNR value '{piece}'"))?;
            out.push(v);
        }
        if out.is_empty() {
            return Err("empty SNR list".into());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_the_reference_setup() {
        let cfg = SimConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n, 512);
        assert_eq!(cfg.snr_db_list.len(), 11);
        assert_eq!(cfg.snr_db_list[10], 20.0);
        let params = cfg.modem_params().unwrap();
        assert_eq!(params.shift_per_delay(), 9);
        assert_eq!(params.l_cp, 10);
    }

    #[test]
    fn scheme_tokens_round_trip() {
        for token in [
            "perfect_csi",
            "classic_threshold",
            "proposed_no_iter",
            "proposed_iter_1",
            "proposed_iter_2",
            "classic_gi",
        ] {
            let s = Scheme::parse(token, 2).unwrap();
            assert_eq!(s.token(), token);
        }
        assert_eq!(
            Scheme::parse("proposed_iter", 2).unwrap(),
            Scheme::ProposedIter(2)
        );
        assert!(Scheme::parse("proposed_iter_0", 2).is_err());
        assert!(Scheme::parse("bogus", 2).is_err());
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let cfg = SimConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back = SimConfig::from_toml(&text).unwrap();
        assert_eq!(back.n, cfg.n);
        assert_eq!(back.schemes, cfg.schemes);

        assert!(SimConfig::from_toml("N = 512\nunknown_key = 1").is_err());
        assert!(SimConfig::from_toml("N = 1").is_err());
        assert!(SimConfig::from_toml("frames_per_point = 0").is_err());
        assert!(SimConfig::from_toml("P = 0").is_err());
        assert!(SimConfig::from_toml("schemes = [\"bogus\"]").is_err());
        let sparse = SimConfig::from_toml("N = 256\nl_max = 5").unwrap();
        assert_eq!(sparse.n, 256);
        assert_eq!(sparse.k_max, 4);
    }

    #[test]
    fn snr_list_parsing() {
        assert_eq!(parse_snr_list("0,2,4").unwrap(), vec![0.0, 2.0, 4.0]);
        assert_eq!(
            parse_snr_list("0:2:20").unwrap(),
            (0..=10).map(|i| (2 * i) as f64).collect::<Vec<_>>()
        );
        assert_eq!(parse_snr_list("10").unwrap(), vec![10.0]);
        assert!(parse_snr_list("0:0:10").is_err());
        assert!(parse_snr_list("a,b").is_err());
    }
}
