//! The variational constant `rho0 = inf (||(x w)'||^2 + ||w'||^2) / ||(1 + x^2)^{1/2} w||^2`,
//! the self-adjoint family `P_Lambda - Lambda` whose lowest eigenvalue
//! `nu(Lambda)` crosses zero at the lowest real eigenvalue of the interval
//! system, and the `eps^2` scaling of that eigenvalue.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airy::airy_threshold;
use crate::error::{Error, Result};
use crate::grid::{derivative_norm_sqr, richardson_extrapolate, second_derivative_matrix, Grid1D, StencilOrder};
use crate::linalg::symmetric::{is_positive_definite, tridiagonalize, SymmetricTridiagonal};
use crate::linalg::ComplexBandedMatrix;
use crate::operators::{airy_resolvent_matrix, build_interval_plambda, build_limit_atilde, OperatorKind, OperatorSpec};
use crate::spectra::{fmt17, locate_eigenvalue};

/// Number of higher generalized eigenvalues reported alongside `rho0`.
const HIGHER_MODES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalResult {
    pub interval: (f64, f64),
    pub rho0: f64,
    /// `(n, rho0_n)` per grid.
    pub rho0_history: Vec<(usize, f64)>,
    /// Pairwise Richardson extrapolants of the history.
    pub extrapolants: Vec<f64>,
    /// Minimizer on the finest grid, positive, with `||(1 + x^2)^{1/2} w|| = 1`.
    pub minimizer: Vec<f64>,
    pub minimizer_grid: Grid1D,
    /// `||A w - rho_n B w||` on the finest grid.
    pub euler_lagrange_residual: f64,
    /// Next generalized eigenvalues on the finest grid; exploratory.
    pub higher: Vec<f64>,
}

impl VariationalResult {
    /// Header `n,rho0_n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,rho0_n")?;
        for (n, v) in &self.rho0_history {
            writeln!(w, "{n},{}", fmt17(*v))?;
        }
        Ok(())
    }

    /// Largest gap between consecutive extrapolants.
    pub fn extrapolant_spread(&self) -> f64 {
        self.extrapolants
            .windows(2)
            .map(|p| (p[1] - p[0]).abs())
            .fold(0.0, f64::max)
    }
}

fn real_tridiagonal(m: &ComplexBandedMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.n();
    let diag = (0..n).map(|i| m.get(i, i).re).collect();
    let off = (0..n - 1).map(|i| m.get(i, i + 1).re).collect();
    (diag, off)
}

struct GeneralizedGround {
    rho: f64,
    w: Vec<f64>,
    residual: f64,
    higher: Vec<f64>,
}

/// Smallest eigenpair of `A w = rho B w` by inverse iteration in the
/// `B`-inner product, confirmed by a Sturm count of `B^{-1/2} A B^{-1/2}`.
fn generalized_ground(grid: &Grid1D) -> Result<GeneralizedGround> {
    let spec = OperatorSpec::new(OperatorKind::LimitAtilde, *grid);
    let (a, bw) = build_limit_atilde(&spec)?;
    let n = grid.n();
    let h = grid.h();
    let b: Vec<f64> = (0..n).map(|i| bw.get(i, i).re).collect();
    let (ad, ao) = real_tridiagonal(&a);
    let scaled = SymmetricTridiagonal::new(
        ad.iter().zip(&b).map(|(x, y)| x / y).collect(),
        (0..n - 1).map(|i| ao[i] / (b[i] * b[i + 1]).sqrt()).collect(),
    )?;

    let bnorm = |w: &[f64]| (w.iter().zip(&b).map(|(x, y)| x * x * y).sum::<f64>() * h).sqrt();
    let rayleigh = |w: &[f64]| {
        let aw = a.matvec(&w.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>());
        let num: f64 = aw.iter().zip(w).map(|(p, q)| p.re * q).sum();
        let den: f64 = w.iter().zip(&b).map(|(x, y)| x * x * y).sum();
        num / den
    };
    let mut w: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&x| ((x - grid.a()) * (grid.b() - x)).max(0.0))
        .collect();
    let mut lu = a.lu()?;
    let mut rho = rayleigh(&w);
    for it in 0..200 {
        let rhs: Vec<Complex64> = w.iter().zip(&b).map(|(x, y)| Complex64::new(x * y, 0.0)).collect();
        let next: Vec<f64> = lu.solve(&rhs).into_iter().map(|z| z.re).collect();
        let nrm = bnorm(&next);
        w = next.into_iter().map(|x| x / nrm).collect();
        let r = rayleigh(&w);
        let done = (r - rho).abs() <= 1e-15 * r.abs();
        rho = r;
        if done {
            break;
        }
        // Move the shift close to the ground state once it is isolated.
        if it == 5 && scaled.count_below(rho * (1.0 + 1e-6)) == 1 {
            let shift = rho * (1.0 - 1e-6);
            let shifted = a.plus(&bw.scaled(Complex64::new(-shift, 0.0)))?;
            lu = shifted.lu()?;
        }
    }
    if scaled.count_below(rho * (1.0 + 1e-10)) != 1 {
        return Err(Error::NoConvergence {
            what: "generalized inverse iteration",
            iterations: 200,
            best: Complex64::new(rho, 0.0),
            residual: f64::NAN,
        });
    }
    let aw = a.matvec(&w.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>());
    let residual = (aw
        .iter()
        .zip(&w)
        .zip(&b)
        .map(|((p, x), y)| (p.re - rho * y * x).powi(2))
        .sum::<f64>()
        * h)
        .sqrt();
    if w.iter().sum::<f64>() < 0.0 {
        w.iter_mut().for_each(|x| *x = -*x);
    }
    let tol = 1e-13 * rho;
    let higher = (1..=HIGHER_MODES.min(n - 1))
        .map(|k| scaled.kth_smallest(k, tol))
        .collect();
    Ok(GeneralizedGround {
        rho,
        w,
        residual,
        higher,
    })
}

/// `rho0` on `(a, b)` from the grids with `n` interior nodes, extrapolated.
pub fn compute_rho0(a: f64, b: f64, n_values: &[usize]) -> Result<VariationalResult> {
    if !(a < b) {
        return Err(Error::InvalidArgument("need a < b".into()));
    }
    if n_values.is_empty() {
        return Err(Error::InvalidArgument("need at least one grid size".into()));
    }
    let grids = n_values
        .iter()
        .map(|&n| Grid1D::new(a, b, n))
        .collect::<Result<Vec<_>>>()?;
    let results = grids.par_iter().map(generalized_ground).collect::<Result<Vec<_>>>()?;
    let history: Vec<(usize, f64)> = n_values.iter().zip(&results).map(|(&n, r)| (n, r.rho)).collect();
    let pairs: Vec<(f64, Complex64)> = grids
        .iter()
        .zip(&results)
        .map(|(g, r)| (g.h(), Complex64::new(r.rho, 0.0)))
        .collect();
    let extrapolants = pairs
        .windows(2)
        .map(|p| richardson_extrapolate(p, 2).map(|z| z.re))
        .collect::<Result<Vec<_>>>()?;
    let rho0 = extrapolants.last().copied().unwrap_or(history[history.len() - 1].1);
    let (finest, finest_grid) = results
        .into_iter()
        .zip(grids)
        .min_by(|x, y| x.1.h().total_cmp(&y.1.h()))
        .expect("non-empty");
    Ok(VariationalResult {
        interval: (a, b),
        rho0,
        rho0_history: history,
        extrapolants,
        minimizer: finest.w,
        minimizer_grid: finest_grid,
        euler_lagrange_residual: finest.residual,
        higher: finest.higher,
    })
}

/// Reference grids for `rho0`.
pub const RHO0_GRIDS: [usize; 3] = [511, 1023, 2047];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuCurve {
    pub eps: f64,
    pub interval: (f64, f64),
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub nus: Vec<f64>,
    /// `Lambda_1` with `nu(Lambda_1) = 0`, when the samples bracket one.
    pub crossing: Option<f64>,
}

impl NuCurve {
    /// Header `lambda,nu`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lambda,nu")?;
        for (l, v) in self.lambdas.iter().zip(&self.nus) {
            writeln!(w, "{},{}", fmt17(*l), fmt17(*v))?;
        }
        Ok(())
    }
}

fn plambda_minus_lambda(eps: f64, grid: &Grid1D, lambda: f64) -> Result<Vec<f64>> {
    let spec = OperatorSpec::new(OperatorKind::IntervalPLambda, *grid)
        .with_eps(eps)
        .with_lambda(Complex64::new(lambda, 0.0));
    let p = build_interval_plambda(&spec)?;
    let n = grid.n();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = p.get(i, j).re;
        }
        out[i * n + i] -= lambda;
    }
    Ok(out)
}

/// `nu(Lambda)`: lowest eigenvalue of the symmetrized `P_Lambda - Lambda`.
pub fn nu_value(eps: f64, grid: &Grid1D, lambda: f64) -> Result<f64> {
    let m = plambda_minus_lambda(eps, grid, lambda)?;
    let t = tridiagonalize(&m, grid.n())?;
    let (lo, hi) = t.bounds();
    Ok(t.kth_smallest(0, 1e-15 * (lo.abs() + hi.abs()).max(f64::MIN_POSITIVE)))
}

/// Whether `P_Lambda - Lambda` is positive definite, i.e. `nu(Lambda) > 0`.
pub fn nu_positive(eps: f64, grid: &Grid1D, lambda: f64) -> Result<bool> {
    let m = plambda_minus_lambda(eps, grid, lambda)?;
    Ok(is_positive_definite(&m, grid.n()))
}

/// Samples `nu` and bisects the first sign change down to `1e-12`.
pub fn nu_curve(eps: f64, a: f64, b: f64, lambda_samples: &[f64]) -> Result<NuCurve> {
    nu_curve_on(eps, &Grid1D::new(a, b, DEFAULT_NU_NODES)?, lambda_samples)
}

/// Interior nodes used for `P_Lambda`.
pub const DEFAULT_NU_NODES: usize = 400;

pub fn nu_curve_on(eps: f64, grid: &Grid1D, lambda_samples: &[f64]) -> Result<NuCurve> {
    let thr = airy_threshold(eps);
    if lambda_samples.iter().any(|&l| !(l > 0.0 && l < thr)) {
        return Err(Error::InvalidArgument(format!(
            "Lambda samples must lie in (0, {thr}), the range where P_Lambda exists"
        )));
    }
    let nus = lambda_samples
        .par_iter()
        .map(|&l| nu_value(eps, grid, l))
        .collect::<Result<Vec<_>>>()?;
    let mut crossing = None;
    if let Some(i) = (0..nus.len().saturating_sub(1)).find(|&i| nus[i] > 0.0 && nus[i + 1] <= 0.0) {
        let (mut lo, mut hi) = (lambda_samples[i], lambda_samples[i + 1]);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if nu_positive(eps, grid, mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        crossing = Some(0.5 * (lo + hi));
    }
    Ok(NuCurve {
        eps,
        interval: (grid.a(), grid.b()),
        n: grid.n(),
        lambdas: lambda_samples.to_vec(),
        nus,
        crossing,
    })
}

/// `count` uniform samples of `[pi^2 eps^2/(b-a)^2, min(K eps^2, 0.99 threshold)]`.
pub fn default_lambda_samples(eps: f64, a: f64, b: f64, k: f64, count: usize) -> Vec<f64> {
    let lo = (std::f64::consts::PI * eps / (b - a)).powi(2);
    let hi = (k * eps * eps).min(0.99 * airy_threshold(eps));
    let count = count.max(2);
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub eps: f64,
    pub lambda1: f64,
    /// `Lambda_1 / eps^2`.
    pub scaled: f64,
    /// `(Lambda_1/eps^2 - rho0) / rho0`.
    pub rel_err: f64,
    /// Eigenvalue of the interval system located from `Lambda_1`.
    pub direct: Complex64,
    pub direct_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub interval: (f64, f64),
    pub rho0: f64,
    pub rows: Vec<ScalingRow>,
    /// Upper-direction constant fitted at the largest eps.
    pub r_plus: f64,
    /// Lower-direction constant fitted at the largest eps.
    pub r_minus: f64,
    pub error_decreasing: bool,
    /// Every row satisfies the two-sided bound with the frozen constants doubled.
    pub bounds_hold: bool,
    pub floor_respected: bool,
}

impl ScalingReport {
    /// Header `eps,lambda1,scaled,rel_err,direct_gap`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eps,lambda1,scaled,rel_err,direct_gap")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt17(r.eps),
                fmt17(r.lambda1),
                fmt17(r.scaled),
                fmt17(r.rel_err),
                fmt17(r.direct_gap)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    pub n: usize,
    pub samples: usize,
    /// `K` in the ceiling `Lambda <= K eps^2`; `None` means `2 rho0`.
    pub k: Option<f64>,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            n: DEFAULT_NU_NODES,
            samples: 32,
            k: None,
        }
    }
}

/// `Lambda_1(eps)/eps^2` against `rho0` for decreasing `eps`.
pub fn verify_scaling_law(eps_values: &[f64], a: f64, b: f64) -> Result<ScalingReport> {
    let rho = compute_rho0(a, b, &RHO0_GRIDS)?.rho0;
    verify_scaling_law_with(eps_values, a, b, rho, &ScalingOptions::default())
}

pub fn verify_scaling_law_with(
    eps_values: &[f64],
    a: f64,
    b: f64,
    rho0: f64,
    opts: &ScalingOptions,
) -> Result<ScalingReport> {
    if eps_values.is_empty() || eps_values.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidArgument("eps values must be strictly decreasing".into()));
    }
    let grid = Grid1D::new(a, b, opts.n)?;
    let k = opts.k.unwrap_or(2.0 * rho0);
    let rows = eps_values
        .iter()
        .map(|&eps| {
            let samples = default_lambda_samples(eps, a, b, k, opts.samples);
            let curve = nu_curve_on(eps, &grid, &samples)?;
            let lambda1 = curve
                .crossing
                .ok_or_else(|| Error::InvalidArgument(format!("no nu crossing found at eps = {eps}")))?;
            let spec = OperatorSpec::bloch_torrey_interval(eps, grid);
            let (direct, _) = locate_eigenvalue(&spec, Complex64::new(lambda1, 0.0), 1e-12)?;
            let scaled = lambda1 / (eps * eps);
            Ok(ScalingRow {
                eps,
                lambda1,
                scaled,
                rel_err: (scaled - rho0) / rho0,
                direct,
                direct_gap: (direct - lambda1).norm(),
            })
        })
        .collect::<Result<Vec<ScalingRow>>>()?;
    let first = &rows[0];
    let r_plus = (first.rel_err / first.eps.powf(2.0 / 3.0)).max(0.0);
    let r_minus = (-first.rel_err / (first.eps * first.eps)).max(0.0);
    let slack = 1e-12;
    let bounds_hold = rows.iter().all(|r| {
        r.rel_err <= 2.0 * r_plus * r.eps.powf(2.0 / 3.0) + slack && -r.rel_err <= 2.0 * r_minus * r.eps * r.eps + slack
    });
    let error_decreasing = rows.windows(2).all(|w| w[1].rel_err.abs() < w[0].rel_err.abs());
    let floor_respected = rows
        .iter()
        .all(|r| r.lambda1 > (std::f64::consts::PI * r.eps / (b - a)).powi(2));
    Ok(ScalingReport {
        interval: (a, b),
        rho0,
        rows,
        r_plus,
        r_minus,
        error_decreasing,
        bounds_hold,
        floor_respected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiryEstimateRow {
    pub lambda: f64,
    /// `(||w~|| + eps^{2/3} ||w~'||) / (eps^{4/3} ||w0||_{2,2})` for `L_+` and `L_-`.
    pub ratio_plus: f64,
    pub ratio_minus: f64,
    pub tilde_norm_plus: f64,
    pub tilde_norm_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiryEstimateReport {
    pub eps: f64,
    pub k: f64,
    pub w0_h2_norm: f64,
    pub rows: Vec<AiryEstimateRow>,
    pub max_ratio: f64,
}

/// Discrete `||w||_{2,2} = (||w||^2 + ||w'||^2 + ||w''||^2)^{1/2}`.
pub fn h2_norm(w: &[f64], grid: &Grid1D) -> Result<f64> {
    let h = grid.h();
    let wc: Vec<Complex64> = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let d2 = second_derivative_matrix(grid, StencilOrder::Second)?.matvec(&wc);
    let l2 = wc.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
    let d1 = derivative_norm_sqr(&wc, h);
    let dd = d2.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
    Ok((l2 + d1 + dd).sqrt())
}

/// Solves `(L_+- - Lambda) w_+- = x w0` at `Lambda in {0, K eps^2/2, K eps^2}`
/// and measures `w~_+- = w_+- +- i w0` against `eps^{4/3} ||w0||_{2,2}`.
pub fn auxiliary_airy_estimate(eps: f64, k: f64, w0: &[f64], grid: &Grid1D) -> Result<AiryEstimateReport> {
    if w0.len() != grid.n() {
        return Err(Error::InvalidArgument("w0 does not match the grid".into()));
    }
    let thr = airy_threshold(eps);
    if !(k >= 0.0 && k * eps * eps < thr) {
        return Err(Error::InvalidArgument(format!("K eps^2 must stay below {thr}")));
    }
    let h = grid.h();
    let w0n = h2_norm(w0, grid)?;
    let rhs: Vec<Complex64> = grid
        .nodes()
        .iter()
        .zip(w0)
        .map(|(x, w)| Complex64::new(x * w, 0.0))
        .collect();
    let e23 = eps.powf(2.0 / 3.0);
    let e43 = eps.powf(4.0 / 3.0);
    let rows = [0.0, 0.5 * k * eps * eps, k * eps * eps]
        .iter()
        .map(|&lambda| {
            let mut out = [(0.0, 0.0); 2];
            for (slot, sign) in [(0usize, 1.0f64), (1, -1.0)] {
                let m = airy_resolvent_matrix(grid, StencilOrder::Second, eps, sign, Complex64::new(lambda, 0.0))?;
                let w = m.lu()?.solve(&rhs);
                let tilde: Vec<Complex64> = w
                    .iter()
                    .zip(w0)
                    .map(|(wi, &z)| wi + Complex64::new(0.0, sign * z))
                    .collect();
                let norm = tilde.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() * h.sqrt();
                let dnorm = derivative_norm_sqr(&tilde, h).sqrt();
                let num = norm + e23 * dnorm;
                let ratio = if num == 0.0 { 0.0 } else { num / (e43 * w0n) };
                out[slot] = (ratio, norm);
            }
            Ok(AiryEstimateRow {
                lambda,
                ratio_plus: out[0].0,
                ratio_minus: out[1].0,
                tilde_norm_plus: out[0].1,
                tilde_norm_minus: out[1].1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio_plus.max(r.ratio_minus)).fold(0.0, f64::max);
    Ok(AiryEstimateReport {
        eps,
        k,
        w0_h2_norm: w0n,
        rows,
        max_ratio,
    })
}
