//! Fourier-side reduction of the rotated system to the scalar quartic
//! operator `M_lambda`, used as an independent route to the system
//! eigenvalues: `0` is an eigenvalue of `M_lambda` exactly when
//! `eps^{2/3} lambda` is an eigenvalue of the system.
//!
//! Everything here is in the rescaled variables `eps_check = eps^{4/3}` and
//! `lambda = eps^{-2/3} Lambda`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::asymptotics::mu_k0;
use crate::error::{Error, Result};
use crate::grid::{richardson_extrapolate, Grid1D};
use crate::linalg::{l2_norm, shift_invert_eigenpair};
use crate::operators::{build_scalar, OperatorKind, OperatorSpec};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Iteration cap of the secant search.
pub const SECANT_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionProbe {
    pub lambda: Complex64,
    pub eps_check: f64,
    pub grid: Grid1D,
    /// Eigenvalue of `M_lambda` nearest 0.
    pub smallest_eig: Complex64,
    pub residual: f64,
    /// Eigenvector for `smallest_eig`, unit Euclidean norm.
    #[serde(skip)]
    pub vector: Vec<Complex64>,
}

fn check_lambda(lambda: Complex64) -> Result<()> {
    if lambda.im == 0.0 && lambda.re >= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} lies on the nonnegative real axis"
        )));
    }
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::InvalidArgument("lambda must be finite".into()));
    }
    Ok(())
}

/// Builds `M_lambda` on `grid` and returns its eigenvalue nearest 0.
pub fn probe_mlambda(lambda: Complex64, eps_check: f64, grid: Grid1D) -> Result<ReductionProbe> {
    check_lambda(lambda)?;
    let spec = OperatorSpec::new(OperatorKind::QuarticM, grid)
        .with_eps(eps_check)
        .with_lambda(lambda);
    let m = build_scalar(&spec)?;
    let scale = m.norm_inf();
    let out = match shift_invert_eigenpair(&m, ZERO, 1e-12 * scale, 500) {
        Ok(o) => o,
        Err(Error::ShiftIsEigenvalue { .. }) => {
            return Ok(ReductionProbe {
                lambda,
                eps_check,
                grid,
                smallest_eig: ZERO,
                residual: 0.0,
                vector: Vec::new(),
            })
        }
        Err(Error::NoConvergence { best, residual, .. }) if residual < 1e-8 * scale => {
            return Ok(ReductionProbe {
                lambda,
                eps_check,
                grid,
                smallest_eig: best,
                residual,
                vector: Vec::new(),
            })
        }
        Err(e) => return Err(e),
    };
    Ok(ReductionProbe {
        lambda,
        eps_check,
        grid,
        smallest_eig: out.eigenvalue,
        residual: out.residual,
        vector: out.vector,
    })
}

/// Grid for the `omega` variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaGrid {
    pub radius: f64,
    pub n: usize,
    /// Probe on the refined grid too and extrapolate.
    pub extrapolate: bool,
}

impl Default for OmegaGrid {
    fn default() -> Self {
        Self {
            radius: 8.0,
            n: 2000,
            extrapolate: true,
        }
    }
}

/// Eigenvalue of `M_lambda` nearest 0, two-grid extrapolated when asked.
pub fn probe_value(lambda: Complex64, eps_check: f64, omega: &OmegaGrid) -> Result<Complex64> {
    let grid = Grid1D::truncation(omega.radius, omega.n)?;
    if !omega.extrapolate {
        return Ok(probe_mlambda(lambda, eps_check, grid)?.smallest_eig);
    }
    let fine = grid.refined();
    let (a, b) = rayon::join(
        || probe_mlambda(lambda, eps_check, grid),
        || probe_mlambda(lambda, eps_check, fine),
    );
    richardson_extrapolate(&[(grid.h(), a?.smallest_eig), (fine.h(), b?.smallest_eig)], 2)
}

/// Secant start for mode `k`: `eps_check^{-1/2} (i + eps_check^{3/4} mu_{k,0})`.
pub fn heuristic_start(k: usize, eps_check: f64) -> Result<Complex64> {
    let mu = mu_k0(k)?;
    Ok((Complex64::new(0.0, 1.0) + eps_check.powf(0.75) * mu) / eps_check.sqrt())
}

/// Secant iteration on `lambda -> smallest_eig(M_lambda)` until
/// `|smallest_eig| < tol`, confined to the disc of radius
/// `max(|start|, 1)/2` around `start`.
pub fn find_lambda_root(start: Complex64, eps_check: f64, tol: f64) -> Result<Complex64> {
    find_lambda_root_with(start, eps_check, tol, &OmegaGrid::default())
}

pub fn find_lambda_root_with(start: Complex64, eps_check: f64, tol: f64, omega: &OmegaGrid) -> Result<Complex64> {
    check_lambda(start)?;
    let diverged = |best: Complex64, residual: f64| Error::NoConvergence {
        what: "secant search for a zero of the M_lambda spectrum",
        iterations: SECANT_MAX_ITER,
        best,
        residual,
    };
    let mut x0 = start;
    let mut f0 = probe_value(x0, eps_check, omega)?;
    if f0.norm() < tol {
        return Ok(x0);
    }
    let step = 1e-4 * start.norm().max(1.0);
    // The search is local: iterates leaving this disc count as divergence.
    let trust = 0.5 * start.norm().max(1.0);
    let mut x1 = start + Complex64::new(step, step);
    let mut f1 = probe_value(x1, eps_check, omega).map_err(|_| diverged(x0, f0.norm()))?;
    let mut best = if f1.norm() < f0.norm() {
        (x1, f1.norm())
    } else {
        (x0, f0.norm())
    };
    for _ in 0..SECANT_MAX_ITER {
        if f1.norm() < tol {
            return Ok(x1);
        }
        let df = f1 - f0;
        if df.norm() == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / df;
        if check_lambda(x2).is_err() || (x2 - start).norm() > trust {
            break;
        }
        let f2 = match probe_value(x2, eps_check, omega) {
            Ok(v) => v,
            Err(_) => break,
        };
        if f2.norm() < best.1 {
            best = (x2, f2.norm());
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
    }
    Err(diverged(best.0, best.1))
}

/// Fourier-side components `(u_s, u_d, u_3)` of the system eigenfunction
/// recovered from a kernel vector `v` of `M_lambda` on `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub u_s: Vec<Complex64>,
    pub u_d: Vec<Complex64>,
    pub u_3: Vec<Complex64>,
}

/// `u_s = (w^2 - lambda)^{1/2} v`, `u_d = u_s' / (w^2 - lambda)`,
/// `u_3 = eps_check^{-1/2} u_s / (sqrt 2 (w^2 - lambda))`.
///
/// The square root is the principal branch; derivatives are central
/// differences with the Dirichlet zeros at both ends.
pub fn reconstruct_components(lambda: Complex64, v: &[Complex64], grid: &Grid1D, eps_check: f64) -> Result<Components> {
    check_lambda(lambda)?;
    if v.len() != grid.n() {
        return Err(Error::InvalidArgument(format!(
            "vector has {} entries for {} nodes",
            v.len(),
            grid.n()
        )));
    }
    let d: Vec<Complex64> = grid
        .nodes()
        .iter()
        .map(|&w| Complex64::new(w * w, 0.0) - lambda)
        .collect();
    let u_s: Vec<Complex64> = v.iter().zip(&d).map(|(vi, di)| di.sqrt() * vi).collect();
    let du = central_difference(&u_s, grid.h());
    let u_d = du.iter().zip(&d).map(|(a, b)| a / b).collect();
    let c3 = 1.0 / (std::f64::consts::SQRT_2 * eps_check.sqrt());
    let u_3 = u_s.iter().zip(&d).map(|(a, b)| a / b * c3).collect();
    Ok(Components { u_s, u_d, u_3 })
}

pub fn central_difference(u: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let r = if i + 1 < n { u[i + 1] } else { ZERO };
            let l = if i > 0 { u[i - 1] } else { ZERO };
            (r - l) / (2.0 * h)
        })
        .collect()
}

/// Residuals of the first-order Fourier system with zero right-hand side,
/// each relative to `||u_s||`:
/// `(w^2 - lambda) u_1 - u_1' + c u_3`, `(w^2 - lambda) u_2 + u_2' + c u_3`,
/// `(w^2 - lambda) u_3 - c (u_1 + u_2)`, with `c = eps_check^{-1/2}/sqrt 2`.
pub fn system_residuals(lambda: Complex64, comps: &Components, grid: &Grid1D, eps_check: f64) -> [f64; 3] {
    let h = grid.h();
    let c = 1.0 / (std::f64::consts::SQRT_2 * eps_check.sqrt());
    let u1: Vec<Complex64> = comps.u_s.iter().zip(&comps.u_d).map(|(s, d)| (s + d) * 0.5).collect();
    let u2: Vec<Complex64> = comps.u_s.iter().zip(&comps.u_d).map(|(s, d)| (s - d) * 0.5).collect();
    let du1 = central_difference(&u1, h);
    let du2 = central_difference(&u2, h);
    let n = grid.n();
    let mut r = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
    for i in 0..n {
        let w = grid.x(i);
        let d = Complex64::new(w * w, 0.0) - lambda;
        r[0][i] = d * u1[i] - du1[i] + c * comps.u_3[i];
        r[1][i] = d * u2[i] + du2[i] + c * comps.u_3[i];
        r[2][i] = d * comps.u_3[i] - c * (u1[i] + u2[i]);
    }
    let scale = l2_norm(&comps.u_s, h).max(f64::MIN_POSITIVE);
    [
        l2_norm(&r[0], h) / scale,
        l2_norm(&r[1], h) / scale,
        l2_norm(&r[2], h) / scale,
    ]
}

/// Relative defect of `||u_s'/(w^2-lambda)||^2 + eps_check^{-1} ||u_s/(w^2-lambda)||^2 = ||u_s||^2`.
pub fn energy_identity_defect(lambda: Complex64, u_s: &[Complex64], grid: &Grid1D, eps_check: f64) -> f64 {
    let h = grid.h();
    let du = central_difference(u_s, h);
    let mut a = 0.0;
    let mut b = 0.0;
    let mut c = 0.0;
    for i in 0..u_s.len() {
        let w = grid.x(i);
        let d = Complex64::new(w * w, 0.0) - lambda;
        a += (du[i] / d).norm_sqr();
        b += (u_s[i] / d).norm_sqr();
        c += u_s[i].norm_sqr();
    }
    let lhs = (a + b / eps_check) * h;
    let rhs = c * h;
    (lhs - rhs).abs() / rhs.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn probe_far_from_spectrum_is_bounded_away_from_zero() {
        let ec = 0.05f64.powf(4.0 / 3.0);
        let p = probe_mlambda(c(-5.0, 0.0), ec, Grid1D::truncation(8.0, 800).unwrap()).unwrap();
        assert!(p.smallest_eig.norm() > 0.5 / ec);
    }

    #[test]
    fn conjugate_probe_gives_conjugate_eigenvalue() {
        let ec = 0.05f64.powf(4.0 / 3.0);
        let g = Grid1D::truncation(8.0, 600).unwrap();
        let a = probe_mlambda(c(1.0, 5.0), ec, g).unwrap().smallest_eig;
        let b = probe_mlambda(c(1.0, -5.0), ec, g).unwrap().smallest_eig;
        assert!((a.conj() - b).norm() < 1e-8 * a.norm().max(1.0));
    }

    #[test]
    fn positive_real_lambda_is_rejected() {
        let g = Grid1D::truncation(8.0, 100).unwrap();
        assert!(probe_mlambda(c(2.0, 0.0), 0.1, g).is_err());
        assert!(reconstruct_components(c(0.0, 0.0), &[ZERO; 100], &g, 0.1).is_err());
    }

    #[test]
    fn zero_vector_reconstructs_to_zero() {
        let g = Grid1D::truncation(8.0, 100).unwrap();
        let comps = reconstruct_components(c(0.0, 1.0), &[ZERO; 100], &g, 0.1).unwrap();
        assert!(comps.u_s.iter().chain(&comps.u_d).chain(&comps.u_3).all(|z| *z == ZERO));
    }

    #[test]
    fn principal_branch_is_conjugation_covariant() {
        let g = Grid1D::truncation(4.0, 40).unwrap();
        let v: Vec<Complex64> = (0..40).map(|i| c((i as f64).sin(), (i as f64).cos())).collect();
        let vc: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
        let lam = c(0.5, 2.0);
        let a = reconstruct_components(lam, &v, &g, 0.1).unwrap();
        let b = reconstruct_components(lam.conj(), &vc, &g, 0.1).unwrap();
        for (x, y) in a.u_s.iter().zip(&b.u_s) {
            assert!((x.conj() - y).norm() < 1e-14);
        }
    }

    #[test]
    fn divergence_from_the_left_half_plane() {
        let ec = 0.05f64.powf(4.0 / 3.0);
        let omega = OmegaGrid {
            radius: 8.0,
            n: 400,
            extrapolate: false,
        };
        assert!(find_lambda_root_with(c(-5.0, 0.0), ec, 1e-8, &omega).is_err());
    }
}
