//! Bit-to-symbol maps and hard-decision slicing.

use num_complex::Complex64;

use crate::error::{AfdmError, Result};

/// A unit-mean-energy symbol alphabet with an implicit bit labelling: the
/// point at index `i` carries the bits of `i`, most significant first.
#[derive(Clone, Debug)]
pub struct Constellation {
    name: &'static str,
    points: Vec<Complex64>,
    bits_per_symbol: usize,
}

impl Constellation {
    /// Binary phase shift keying: bit 0 -> +1, bit 1 -> -1.
    pub fn bpsk() -> Self {
        Self {
            name: "bpsk",
            points: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            bits_per_symbol: 1,
        }
    }

    /// Gray-labelled quadrature phase shift keying.
    pub fn qpsk() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            name: "qpsk",
            // Indices 0b00, 0b01, 0b10, 0b11: adjacent points differ in one bit.
            points: vec![
                Complex64::new(a, a),
                Complex64::new(-a, a),
                Complex64::new(a, -a),
                Complex64::new(-a, -a),
            ],
            bits_per_symbol: 2,
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Mean symbol energy (1 for the built-in alphabets).
    pub fn energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Map a bit stream (one bit per byte, values 0/1) onto symbols.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        if !bits.len().is_multiple_of(self.bits_per_symbol) {
            return Err(AfdmError::InvalidParameter(format!(
                "bit count {} is not a multiple of {} bits per symbol",
                bits.len(),
                self.bits_per_symbol
            )));
        }
        bits.chunks(self.bits_per_symbol)
            .map(|chunk| {
                let mut idx = 0usize;
                for &b in chunk {
                    if b > 1 {
                        return Err(AfdmError::InvalidParameter(format!(
                            "bit value {b} is not 0 or 1"
                        )));
                    }
                    idx = (idx << 1) | b as usize;
                }
                Ok(self.points[idx])
            })
            .collect()
    }

    /// Hard-decide each soft symbol to the nearest constellation point.
    /// Returns the sliced points and the recovered bits. Distance ties
    /// resolve to the lowest point index, so the result is deterministic.
    pub fn slice(&self, soft: &[Complex64]) -> (Vec<Complex64>, Vec<u8>) {
        let mut hard = Vec::with_capacity(soft.len());
        let mut bits = Vec::with_capacity(soft.len() * self.bits_per_symbol);
        for &s in soft {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, p) in self.points.iter().enumerate() {
                let d = (s - p).norm_sqr();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            hard.push(self.points[best]);
            for shift in (0..self.bits_per_symbol).rev() {
                bits.push(((best >> shift) & 1) as u8);
            }
        }
        (hard, bits)
    }
}
