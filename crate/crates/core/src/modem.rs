//! The affine transform pair, chirp-periodic prefix handling, frame
//! assembly, and PAPR measurement.
//!
//! Both transforms are computed as chirp multiply, FFT, chirp multiply,
//! so a frame costs O(N log N). The matching direct-summation matrices
//! live in [`crate::reference`] and the agreement between the two is part
//! of the self-test suite.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{AfdmError, Result};
use crate::params::{ModemParams, PilotConfig};

/// Cached FFT plans keyed by (length, forward?).
type PlanMap = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static PLANS: RefCell<PlanMap> = RefCell::new(PlanMap::new());
}

fn fft_plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry((n, forward))
            .or_insert_with(|| {
                PLANNER.with(|p| {
                    let dir = if forward {
                        FftDirection::Forward
                    } else {
                        FftDirection::Inverse
                    };
                    p.borrow_mut().plan_fft(n, dir)
                })
            })
            .clone()
    })
}

/// One transform-domain frame: `symbols[0]` is the pilot bin, `data_mask`
/// marks the data-bearing bins.
#[derive(Clone, Debug)]
pub struct DaftFrame {
    pub symbols: Vec<Complex64>,
    pub data_mask: Vec<bool>,
}

impl DaftFrame {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Ascending indices of the data-bearing bins.
    pub fn data_positions(&self) -> Vec<usize> {
        self.data_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| d.then_some(i))
            .collect()
    }
}

/// Place pilot, guards, and `data` symbols into an `n`-bin frame.
pub fn assemble_frame(data: &[Complex64], pilot: &PilotConfig, n: usize) -> Result<DaftFrame> {
    let positions = pilot.data_positions(n)?;
    if data.len() != positions.len() {
        return Err(AfdmError::LengthMismatch {
            expected: positions.len(),
            got: data.len(),
        });
    }
    let mut symbols = vec![Complex64::new(0.0, 0.0); n];
    let mut data_mask = vec![false; n];
    symbols[0] = pilot.amplitude;
    for (&pos, &sym) in positions.iter().zip(data) {
        symbols[pos] = sym;
        data_mask[pos] = true;
    }
    Ok(DaftFrame { symbols, data_mask })
}

/// Inverse transform: bins to time samples,
/// `s[n] = (1/sqrt N) sum_m x[m] exp(+j 2 pi (c1 n^2 + m n / N + c2 m^2))`.
pub fn idaft(x: &[Complex64], params: &ModemParams) -> Result<Vec<Complex64>> {
    let n = params.n;
    if x.len() != n {
        return Err(AfdmError::LengthMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let mut buf: Vec<Complex64> = x
        .iter()
        .enumerate()
        .map(|(m, &v)| v * params.c2.phasor((m * m) as i64))
        .collect();
    fft_plan(n, false).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    for (t, v) in buf.iter_mut().enumerate() {
        *v *= scale * params.c1.phasor((t * t) as i64);
    }
    Ok(buf)
}

/// Forward transform: time samples to bins,
/// `y[m] = (1/sqrt N) sum_n r[n] exp(-j 2 pi (c1 n^2 + m n / N + c2 m^2))`.
pub fn daft(r: &[Complex64], params: &ModemParams) -> Result<Vec<Complex64>> {
    let n = params.n;
    if r.len() != n {
        return Err(AfdmError::LengthMismatch {
            expected: n,
            got: r.len(),
        });
    }
    let mut buf: Vec<Complex64> = r
        .iter()
        .enumerate()
        .map(|(t, &v)| v * params.c1.phasor((t * t) as i64).conj())
        .collect();
    fft_plan(n, true).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    for (m, v) in buf.iter_mut().enumerate() {
        *v *= scale * params.c2.phasor((m * m) as i64).conj();
    }
    Ok(buf)
}

/// A time-domain frame with its prefix attached.
#[derive(Clone, Debug)]
pub struct TimeFrame {
    pub samples: Vec<Complex64>,
    /// Index of the first body sample (= prefix length).
    pub body_offset: usize,
}

impl TimeFrame {
    pub fn body(&self) -> &[Complex64] {
        &self.samples[self.body_offset..]
    }

    pub fn prefix(&self) -> &[Complex64] {
        &self.samples[..self.body_offset]
    }
}

/// Prepend the chirp-periodic prefix: for n in [-L_cp, -1] the prefix
/// sample is `s[N + n] * exp(-j 2 pi c1 (N^2 + 2 N n))`, which continues
/// the quadratic chirp of the frame body across the frame boundary.
pub fn add_cpp(body: &[Complex64], params: &ModemParams) -> Result<TimeFrame> {
    let n = params.n;
    if body.len() != n {
        return Err(AfdmError::LengthMismatch {
            expected: n,
            got: body.len(),
        });
    }
    let l_cp = params.l_cp;
    let mut samples = Vec::with_capacity(l_cp + n);
    for i in 0..l_cp {
        let neg = i as i64 - l_cp as i64; // n in [-L_cp, -1]
        let arg = (n as i64) * (n as i64) + 2 * (n as i64) * neg;
        let phase = params.c1.phasor(arg).conj();
        samples.push(body[(n as i64 + neg) as usize] * phase);
    }
    samples.extend_from_slice(body);
    Ok(TimeFrame {
        samples,
        body_offset: l_cp,
    })
}

/// Drop the prefix, returning the frame body.
pub fn remove_cpp(frame: &TimeFrame) -> Vec<Complex64> {
    frame.body().to_vec()
}

/// Peak-to-average power ratio of the frame body in dB. The prefix is a
/// phase-rotated copy of body samples, so it is excluded by convention.
pub fn papr_db(frame: &TimeFrame) -> Result<f64> {
    let body = frame.body();
    if body.is_empty() {
        return Err(AfdmError::ZeroEnergyFrame);
    }
    let mut peak = 0.0f64;
    let mut sum = 0.0f64;
    for s in body {
        let p = s.norm_sqr();
        peak = peak.max(p);
        sum += p;
    }
    if sum == 0.0 {
        return Err(AfdmError::ZeroEnergyFrame);
    }
    let mean = sum / body.len() as f64;
    Ok(10.0 * (peak / mean).log10())
}
