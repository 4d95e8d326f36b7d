//! Eigenvalue containers, target matching, and the iterative solvers that
//! work through a banded LU: shift-invert inverse iteration and the
//! smallest singular value.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::banded::{BandedLu, ComplexBandedMatrix};
use super::vec_norm;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    DenseQr,
    ShiftInvert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub eigenvalues: Vec<Complex64>,
    /// `||A v - lambda v|| / ||v||` per eigenvalue, when vectors were computed.
    pub residuals: Option<Vec<f64>>,
    pub method: EigenMethod,
    pub tol: f64,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Greedy nearest-distance matching: repeatedly takes the closest remaining
/// (target, eigenvalue) pair, consuming both. Ties go to the eigenvalue with
/// the smaller `|Im|`. Returns pairs in target order; a target is `None`
/// when the eigenvalues ran out.
pub fn match_to_targets(eigenvalues: &[Complex64], targets: &[Complex64]) -> Vec<(Complex64, Option<Complex64>)> {
    let mut pairs: Vec<(f64, f64, usize, usize)> = Vec::with_capacity(eigenvalues.len() * targets.len());
    for (ti, t) in targets.iter().enumerate() {
        for (ei, e) in eigenvalues.iter().enumerate() {
            pairs.push(((t - e).norm(), e.im.abs(), ti, ei));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let mut used_t = vec![false; targets.len()];
    let mut used_e = vec![false; eigenvalues.len()];
    let mut out: Vec<(Complex64, Option<Complex64>)> = targets.iter().map(|&t| (t, None)).collect();
    for (_, _, ti, ei) in pairs {
        if used_t[ti] || used_e[ei] {
            continue;
        }
        used_t[ti] = true;
        used_e[ei] = true;
        out[ti].1 = Some(eigenvalues[ei]);
    }
    out
}

/// Deterministic, non-degenerate start vector for the iterative solvers.
pub(crate) fn start_vector(n: usize) -> Vec<Complex64> {
    // Weyl sequence: fixed, dense, and never orthogonal to a smooth mode.
    let g = 0.618_033_988_749_894_9_f64;
    let v: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 1.0) * g;
            Complex64::new(1.0 + (t.fract() - 0.5), 0.5 * ((t * 1.7).fract() - 0.5))
        })
        .collect();
    let nrm = vec_norm(&v);
    v.into_iter().map(|z| z / nrm).collect()
}

fn rayleigh(m: &ComplexBandedMatrix, v: &[Complex64]) -> (Complex64, f64) {
    let av = m.matvec(v);
    let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let q: Complex64 = v.iter().zip(&av).map(|(a, b)| a.conj() * b).sum::<Complex64>() / vv;
    let res = av
        .iter()
        .zip(v)
        .map(|(a, b)| (a - q * b).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / vv.sqrt();
    (q, res)
}

/// Outcome of shift-invert inverse iteration.
#[derive(Debug, Clone)]
pub struct ShiftInvertOutcome {
    pub eigenvalue: Complex64,
    pub residual: f64,
    /// Normalized eigenvector.
    pub vector: Vec<Complex64>,
    pub iterations: usize,
}

/// Eigenvalue of `m` nearest `shift` by inverse iteration on
/// `(m - shift)^{-1}` with a Rayleigh-quotient estimate at every step.
///
/// When the fixed shift stalls, the factorization is refreshed once at the
/// current Rayleigh quotient. A shift that makes the LU singular is reported
/// as [`Error::ShiftIsEigenvalue`].
pub fn shift_invert_eigenvalue(
    m: &ComplexBandedMatrix,
    shift: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<(Complex64, f64)> {
    shift_invert_eigenpair(m, shift, tol, max_iter).map(|o| (o.eigenvalue, o.residual))
}

pub fn shift_invert_eigenpair(
    m: &ComplexBandedMatrix,
    shift: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<ShiftInvertOutcome> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = m.n();
    let lu = match m.shifted(shift).lu() {
        Ok(lu) => lu,
        Err(Error::Singular { .. }) => return Err(Error::ShiftIsEigenvalue { shift }),
        Err(e) => return Err(e),
    };
    let mut lu = lu;
    let mut v = start_vector(n);
    let mut best = (shift, f64::INFINITY);
    let mut refreshed = 0;
    let mut last_res = f64::INFINITY;
    for it in 1..=max_iter {
        let mut w = lu.solve(&v);
        let nrm = vec_norm(&w);
        if !nrm.is_finite() || nrm == 0.0 {
            return Err(Error::ShiftIsEigenvalue { shift });
        }
        w.iter_mut().for_each(|z| *z /= nrm);
        let (q, res) = rayleigh(m, &w);
        if res < best.1 {
            best = (q, res);
        }
        if res <= tol {
            return Ok(ShiftInvertOutcome {
                eigenvalue: q,
                residual: res,
                vector: w,
                iterations: it,
            });
        }
        // Stalled: refresh the shift at the Rayleigh quotient.
        if it % 25 == 0 && res > 0.5 * last_res && refreshed < 3 {
            if let Ok(new_lu) = m.shifted(q).lu() {
                lu = new_lu;
                refreshed += 1;
            }
        }
        if it % 25 == 0 {
            last_res = res;
        }
        v = w;
    }
    Err(Error::NoConvergence {
        what: "shift-invert inverse iteration",
        iterations: max_iter,
        best: best.0,
        residual: best.1,
    })
}

/// Residual of `(lambda, v)` after one inverse-iteration step from a fixed
/// start vector, using the factorization of `m - lambda I`.
pub fn one_step_residual(m: &ComplexBandedMatrix, lambda: Complex64) -> f64 {
    // Nudge off the eigenvalue so the solve stays finite.
    let scale = lambda.norm().max(1.0);
    let shift = lambda + Complex64::new(1e-13 * scale, 1e-13 * scale);
    match m.shifted(shift).lu() {
        Ok(lu) => {
            let w = lu.solve(&start_vector(m.n()));
            let nrm = vec_norm(&w);
            if !nrm.is_finite() || nrm == 0.0 {
                return 0.0;
            }
            let w: Vec<_> = w.into_iter().map(|z| z / nrm).collect();
            let av = m.matvec(&w);
            av.iter()
                .zip(&w)
                .map(|(a, b)| (a - lambda * b).norm_sqr())
                .sum::<f64>()
                .sqrt()
        }
        Err(_) => 0.0,
    }
}

/// Smallest singular value of `m` by inverse power iteration on
/// `(m^H m)^{-1}`, each step one solve and one conjugate-transpose solve.
///
/// Returns 0 when the LU is singular.
pub fn smallest_singular_value(m: &ComplexBandedMatrix, tol: f64) -> Result<f64> {
    match m.lu() {
        Ok(lu) => Ok(smallest_singular_value_lu(&lu, tol, 500)),
        Err(Error::Singular { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

pub fn smallest_singular_value_lu(lu: &BandedLu, tol: f64, max_iter: usize) -> f64 {
    let mut v = start_vector(lu.n());
    let mut prev = 0.0f64;
    let mut est = 0.0f64;
    for _ in 0..max_iter {
        let y = lu.solve_adjoint(&v);
        let x = lu.solve(&y);
        let nx = vec_norm(&x);
        if !nx.is_finite() || nx == 0.0 {
            return 0.0;
        }
        // ||(A^H A)^{-1} v|| with ||v|| = 1 approaches 1 / sigma_min^2.
        est = nx;
        v = x.into_iter().map(|z| z / nx).collect();
        if prev > 0.0 && (est - prev).abs() <= tol * est {
            break;
        }
        prev = est;
    }
    1.0 / est.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{dense_eigenvalues, DenseComplexMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn laplacian(n: usize) -> ComplexBandedMatrix {
        let h = 1.0 / (n as f64 + 1.0);
        let mut m = ComplexBandedMatrix::zeros(n, 1, 1).unwrap();
        for i in 0..n {
            m.set(i, i, c(2.0 / (h * h), 0.0));
            if i + 1 < n {
                m.set(i, i + 1, c(-1.0 / (h * h), 0.0));
                m.set(i + 1, i, c(-1.0 / (h * h), 0.0));
            }
        }
        m
    }

    #[test]
    fn shift_invert_diagonal() {
        let m = ComplexBandedMatrix::from_diagonal(&[c(1.0, 0.0), c(2.0, 0.0), c(10.0, 0.0)]).unwrap();
        let (l, r) = shift_invert_eigenvalue(&m, c(1.9, 0.0), 1e-12, 100).unwrap();
        assert!((l - c(2.0, 0.0)).norm() < 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn shift_invert_laplacian_finds_pi_squared() {
        let m = laplacian(255);
        let (l, _) = shift_invert_eigenvalue(&m, c(9.0, 0.0), 1e-9, 200).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((l.re - pi2).abs() < 2e-4, "{l}");
        assert!(l.im.abs() < 1e-12);
    }

    #[test]
    fn exact_eigenvalue_shift_is_reported() {
        let m = ComplexBandedMatrix::from_diagonal(&[c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert!(matches!(
            shift_invert_eigenvalue(&m, c(2.0, 0.0), 1e-12, 10),
            Err(Error::ShiftIsEigenvalue { .. })
        ));
    }

    #[test]
    fn shift_invert_result_is_in_dense_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = ComplexBandedMatrix::zeros(60, 2, 3).unwrap();
        for i in 0..60 {
            for j in m.row_range(i) {
                m.set(i, j, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            }
        }
        let all = dense_eigenvalues(&m.to_dense(), 1e-14).unwrap().eigenvalues;
        for target in [c(0.3, 0.2), c(-1.0, 0.5), c(0.0, -1.5)] {
            let (l, _) = shift_invert_eigenvalue(&m, target, 1e-11, 2000).unwrap();
            let d = all.iter().map(|z| (z - l).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9, "distance {d}");
        }
    }

    #[test]
    fn singular_value_of_diagonal() {
        let m = ComplexBandedMatrix::from_diagonal(&[c(3.0, 0.0), c(1.0, 0.0), c(0.0, 5.0)]).unwrap();
        let s = smallest_singular_value(&m, 1e-12).unwrap();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn singular_value_of_scaled_unitary() {
        // Q from Gram-Schmidt of a random complex matrix.
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut cols: Vec<Vec<Complex64>> = Vec::new();
        for _ in 0..n {
            let mut v: Vec<Complex64> = (0..n)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            for q in &cols {
                let p: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
            let nv = vec_norm(&v);
            cols.push(v.into_iter().map(|z| z / nv).collect());
        }
        let scale = c(2.5, -1.0);
        let mut d = DenseComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                d.set(i, j, scale * cols[j][i]);
            }
        }
        let m = ComplexBandedMatrix::from_dense(&d, n - 1, n - 1).unwrap();
        let s = smallest_singular_value(&m, 1e-12).unwrap();
        assert!((s - scale.norm()).abs() < 1e-9, "{s}");
    }

    #[test]
    fn zero_row_gives_zero_singular_value() {
        let m = ComplexBandedMatrix::from_diagonal(&[c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert_eq!(smallest_singular_value(&m, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn resolvent_norm_grows_toward_eigenvalue() {
        let m = laplacian(63);
        let (l, _) = shift_invert_eigenvalue(&m, c(9.0, 0.0), 1e-10, 100).unwrap();
        let mut prev = 0.0;
        for k in 1..=8 {
            let z = l + c(0.0, 2.0f64.powi(-k));
            let s = smallest_singular_value(&m.shifted(z), 1e-12).unwrap();
            let norm = 1.0 / s;
            assert!(norm > prev);
            prev = norm;
        }
    }

    #[test]
    fn greedy_matching_consumes_targets() {
        let eig = [c(1.0, 0.1), c(1.0, -0.1), c(5.0, 0.0)];
        let m = match_to_targets(&eig, &[c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(m[0].1, Some(c(1.0, 0.1)));
        assert_eq!(m[1].1, Some(c(1.0, -0.1)));
        let m = match_to_targets(&eig[..1], &[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(m[0].1, None);
    }
}
