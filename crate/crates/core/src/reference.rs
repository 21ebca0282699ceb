//! Slow direct-from-definition constructions. Everything here is built
//! entry by entry from the defining formulas, with no shared code paths
//! into the fast implementations, so the two sides can be checked against
//! each other by tests and by the CLI self-test.

use num_complex::Complex64;

use crate::channel::DelayDopplerTap;
use crate::error::{AfdmError, Result};
use crate::linalg::Matrix;
use crate::params::{phasor, ModemParams};

/// Dense analysis matrix: `A[m, t] = exp(-j 2 pi (c1 t^2 + m t / N + c2 m^2)) / sqrt(N)`.
/// Applying it to a time frame performs the forward transform.
pub fn daft_matrix(params: &ModemParams) -> Matrix {
    let n = params.n;
    let scale = 1.0 / (n as f64).sqrt();
    Matrix::from_fn(n, n, |m, t| {
        let cycles = params.c1.cycles((t * t) as i64)
            + ((m * t) % n) as f64 / n as f64
            + params.c2.cycles((m * m) as i64);
        phasor(cycles).conj() * scale
    })
}

/// Dense synthesis matrix, the conjugate transpose of [`daft_matrix`]:
/// applying it to transform-domain symbols produces the time frame.
pub fn idaft_matrix(params: &ModemParams) -> Matrix {
    let n = params.n;
    let scale = 1.0 / (n as f64).sqrt();
    Matrix::from_fn(n, n, |t, m| {
        let cycles = params.c1.cycles((t * t) as i64)
            + ((m * t) % n) as f64 / n as f64
            + params.c2.cycles((m * m) as i64);
        phasor(cycles) * scale
    })
}

/// Dense circular time-domain channel matrix:
/// `H[t, (t - l) mod N] += h exp(-j 2 pi k t / N)` per tap.
pub fn time_channel_matrix<T: DelayDopplerTap>(taps: &[T], params: &ModemParams) -> Matrix {
    let n = params.n;
    let mut h = Matrix::zeros(n, n);
    for tap in taps {
        let l = tap.delay() % n;
        for t in 0..n {
            let cycles = (tap.doppler() * t as i64).rem_euclid(n as i64) as f64 / n as f64;
            h[(t, (t + n - l) % n)] += tap.gain() * phasor(cycles).conj();
        }
    }
    h
}

/// Effective transform-domain channel assembled the long way round, as the
/// triple product `A H A^H` of dense matrices.
pub fn heff_product<T: DelayDopplerTap>(taps: &[T], params: &ModemParams) -> Matrix {
    let a = daft_matrix(params);
    let h = time_channel_matrix(taps, params);
    a.mul(&h)
        .and_then(|ah| ah.mul(&idaft_matrix(params)))
        .expect("square factors of matching size")
}

/// Physical linear (non-circular) channel acting on a prefixed stream.
/// Sample `u` of the output is
/// `sum_i h_i exp(-j 2 pi k_i (u - l_cp) / N) stream[u - l_i]`,
/// with taps reaching before the start of the stream contributing zero.
/// The Doppler rotation is referenced to the body so that after prefix
/// removal the body equals the circular model output exactly.
pub fn linear_stream_output<T: DelayDopplerTap>(
    stream: &[Complex64],
    taps: &[T],
    params: &ModemParams,
) -> Vec<Complex64> {
    let n = params.n as i64;
    let l_cp = params.l_cp as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); stream.len()];
    for tap in taps {
        for (u, slot) in out.iter_mut().enumerate() {
            let src = u as i64 - tap.delay() as i64;
            if src < 0 {
                continue;
            }
            let cycles = (tap.doppler() * (u as i64 - l_cp)).rem_euclid(n) as f64 / n as f64;
            *slot += tap.gain() * phasor(cycles).conj() * stream[src as usize];
        }
    }
    out
}

/// Matrix inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    assert!(n == a.cols(), "inverse requires a square matrix");
    let mut work = a.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, work[(r, col)].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty pivot search");
        if pivot_mag < 1e-300 || !pivot_mag.is_finite() {
            return Err(AfdmError::NotPositiveDefinite {
                index: col,
                pivot: pivot_mag,
            });
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = work[(col, c)];
                work[(col, c)] = work[(pivot_row, c)];
                work[(pivot_row, c)] = tmp;
                let tmp = inv[(col, c)];
                inv[(col, c)] = inv[(pivot_row, c)];
                inv[(pivot_row, c)] = tmp;
            }
        }
        let pivot = work[(col, col)];
        for c in 0..n {
            work[(col, c)] /= pivot;
            inv[(col, c)] /= pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = work[(r, col)];
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in 0..n {
                let w = work[(col, c)];
                let v = inv[(col, c)];
                work[(r, c)] -= factor * w;
                inv[(r, c)] -= factor * v;
            }
        }
    }
    Ok(inv)
}

/// Linear MMSE equaliser computed the textbook way:
/// `x = inv(H^H H + n0 I) H^H y`.
pub fn lmmse_reference(h: &Matrix, y: &[Complex64], n0: f64) -> Result<Vec<Complex64>> {
    let n = h.rows();
    if y.len() != n {
        return Err(AfdmError::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let hh = h.conj_transpose();
    let mut g = hh.mul(h)?;
    for i in 0..n {
        g[(i, i)] += Complex64::new(n0, 0.0);
    }
    let ginv = gauss_jordan_inverse(&g)?;
    let rhs = hh.mul_vec(y)?;
    ginv.mul_vec(&rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelPath;
    use crate::params::Chirp;

    fn small_params() -> ModemParams {
        ModemParams::for_grid(16, 2, 3, 1e3, 4e9).unwrap()
    }

    #[test]
    fn daft_matrix_is_unitary() {
        let p = small_params();
        let a = daft_matrix(&p);
        let prod = a.mul(&idaft_matrix(&p)).unwrap();
        let eye = Matrix::identity(16);
        assert!(prod.max_abs_diff(&eye) < 1e-12);
    }

    #[test]
    fn idaft_is_conjugate_transpose_of_daft() {
        let p = ModemParams::new(12, Chirp::Real(0.21), Chirp::Real(0.007), 1e3, 4e9, 3).unwrap();
        let a = daft_matrix(&p);
        let b = idaft_matrix(&p);
        assert!(a.conj_transpose().max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn time_channel_matrix_matches_manual_entry() {
        let p = small_params();
        let g = Complex64::new(0.4, -0.9);
        let taps = [ChannelPath {
            gain: g,
            delay: 2,
            doppler: -1,
            theta: 0.0,
        }];
        let h = time_channel_matrix(&taps, &p);
        let t = 5usize;
        let expect = g * phasor((-(t as f64) / 16.0).rem_euclid(1.0)).conj();
        assert!((h[(t, 3)] - expect).norm() < 1e-15);
        assert_eq!(h[(t, 4)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn gauss_jordan_inverts() {
        let n = 8;
        let a = Matrix::from_fn(n, n, |r, c| {
            let base = Complex64::new(
                ((r * 7 + c * 3) % 11) as f64 * 0.1,
                ((r + 2 * c) % 5) as f64 * 0.2 - 0.3,
            );
            if r == c {
                base + Complex64::new(3.0, 0.0)
            } else {
                base
            }
        });
        let inv = gauss_jordan_inverse(&a).unwrap();
        let eye = Matrix::identity(n);
        assert!(a.mul(&inv).unwrap().max_abs_diff(&eye) < 1e-11);
        assert!(inv.mul(&a).unwrap().max_abs_diff(&eye) < 1e-11);
    }

    #[test]
    fn gauss_jordan_rejects_singular() {
        let mut a = Matrix::zeros(3, 3);
        a[(0, 0)] = 1.0.into();
        a[(1, 1)] = 1.0.into();
        assert!(gauss_jordan_inverse(&a).is_err());
    }

    #[test]
    fn lmmse_reference_identity_channel() {
        let n = 6;
        let h = Matrix::identity(n);
        let y: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let x = lmmse_reference(&h, &y, 1.0).unwrap();
        for i in 0..n {
            assert!((x[i] - y[i] / 2.0).norm() < 1e-12, "shrinkage by 1/(1+n0)");
        }
    }
}
