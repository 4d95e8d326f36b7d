//! Asymptotic eigenvalue predictions for the Bloch-Torrey system on the line
//! and the experiments that test them: error slopes against
//! `kappa_n^0(eps) = i + (2n - 1)/2 (1 + i) eps`, the sampled resolvent bound,
//! and the strip estimate in the rescaled variables.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{richardson_extrapolate, Grid1D};
use crate::linalg::{l2_norm, vec_norm, ComplexBandedMatrix};
use crate::operators::{build, default_truncation_radius, OperatorKind, OperatorSpec};
use crate::rng;
use crate::spectra::{fmt17, locate_eigenpair, resolvent_norm_of, two_grid_eigenvalue};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `mu_{k,0} = (2k - 1)/sqrt(2) e^{i pi/4}`.
pub fn mu_k0(k: usize) -> Result<Complex64> {
    if k < 1 {
        return Err(Error::InvalidArgument("mode index k starts at 1".into()));
    }
    Ok(Complex64::from_polar((2 * k - 1) as f64 * FRAC_1_SQRT_2, FRAC_PI_4))
}

/// `kappa_k^0(eps) = i + (2k - 1)/2 (1 + i) eps`.
pub fn kappa0(k: usize, eps: f64) -> Complex64 {
    let c = (2 * k - 1) as f64 / 2.0 * eps;
    Complex64::new(c, 1.0 + c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mu1Method {
    /// Gaussian moments of `f_{1,0}`; defined for `k = 1` only.
    ClosedFormK1,
    Quadrature,
}

/// How `f^2` enters the quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// `f(w)^2`, as the formula requires.
    Bilinear,
    /// `|f(w)|^2`; wrong on purpose, kept as a negative control.
    Sesquilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub radius: f64,
    pub n: usize,
    pub pairing: Pairing,
    /// Also evaluate on the refined grid and Richardson-extrapolate.
    pub extrapolate: bool,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            radius: 12.0,
            n: 3200,
            pairing: Pairing::Bilinear,
            extrapolate: true,
        }
    }
}

/// Residual above which a computed `f_{k,0}` is refused.
pub const EIGENFUNCTION_RESIDUAL_LIMIT: f64 = 1e-8;

/// `mu_{k,1} = int ([w^2 - mu_{k,0}]^2 - 1) f^2 / (2 i int f^2)`.
pub fn mu_k1(k: usize, method: Mu1Method) -> Result<Complex64> {
    match method {
        Mu1Method::ClosedFormK1 => mu_11_closed_form(k),
        Mu1Method::Quadrature => mu_k1_quadrature(k, &QuadratureOptions::default()),
    }
}

/// `k = 1` from `<1> = sqrt(pi/a)`, `<w^2> = <1>/(2a)`, `<w^4> = 3<1>/(4a^2)`
/// with `a = 1 - i`; the `<1>` factor cancels in the ratio.
fn mu_11_closed_form(k: usize) -> Result<Complex64> {
    if k != 1 {
        return Err(Error::InvalidArgument("the closed form covers k = 1 only".into()));
    }
    let a = Complex64::new(1.0, -1.0);
    let m0 = mu_k0(1)?;
    let w2 = 1.0 / (2.0 * a);
    let w4 = 3.0 / (4.0 * a * a);
    Ok((w4 - 2.0 * m0 * w2 + m0 * m0 - 1.0) / (2.0 * I))
}

/// `f_{k,0}` on `[-radius, radius]`: the eigenvector of `-d^2 - 2 i w^2`
/// for the eigenvalue `-2 i mu_{k,0} = (2k - 1)(1 - i)`.
pub fn harmonic_eigenfunction(k: usize, grid: Grid1D) -> Result<Vec<Complex64>> {
    let m0 = mu_k0(k)?;
    let spec = OperatorSpec::new(OperatorKind::ComplexHarmonic, grid);
    let out = locate_eigenpair(&spec, -2.0 * I * m0, 1e-10)?;
    let scale = out.eigenvalue.norm().max(1.0);
    let residual = out.residual / scale;
    if residual > EIGENFUNCTION_RESIDUAL_LIMIT {
        return Err(Error::ResidualTooLarge {
            what: "harmonic-oscillator eigenfunction",
            residual,
            limit: EIGENFUNCTION_RESIDUAL_LIMIT,
        });
    }
    Ok(out.vector)
}

fn ratio_on_grid<F>(k: usize, grid: Grid1D, pairing: Pairing, weight: F) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let f = harmonic_eigenfunction(k, grid)?;
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for (i, fi) in f.iter().enumerate() {
        let f2 = match pairing {
            Pairing::Bilinear => fi * fi,
            Pairing::Sesquilinear => Complex64::new(fi.norm_sqr(), 0.0),
        };
        num += weight(grid.x(i)) * f2;
        den += f2;
    }
    // Trapezoid weights are h at interior nodes and the endpoint values are
    // zero, so the common factor h cancels.
    Ok(num / (2.0 * I * den))
}

fn quadrature_with<F>(k: usize, opts: &QuadratureOptions, weight: F) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    let grid = Grid1D::truncation(opts.radius, opts.n)?;
    if !opts.extrapolate {
        return ratio_on_grid(k, grid, opts.pairing, &weight);
    }
    let fine = grid.refined();
    let (a, b) = rayon::join(
        || ratio_on_grid(k, grid, opts.pairing, &weight),
        || ratio_on_grid(k, fine, opts.pairing, &weight),
    );
    richardson_extrapolate(&[(grid.h(), a?), (fine.h(), b?)], 2)
}

/// Quadrature of the `mu_{k,1}` formula on a discretized `f_{k,0}`.
pub fn mu_k1_quadrature(k: usize, opts: &QuadratureOptions) -> Result<Complex64> {
    let m0 = mu_k0(k)?;
    quadrature_with(k, opts, |w| {
        let d = w * w - m0;
        d * d - 1.0
    })
}

/// Exploratory second-order coefficient from the solvability condition with
/// `Phi(0, w, mu) = -i`: `-int ([w^2 - mu_{k,0}]^2 - i) f^2 / (2 i int f^2)`.
///
/// This is the value the computed eigenvalues approach (`5/16` for `k = 1`);
/// it carries no acceptance claim.
pub fn mu_k1_corrected(k: usize, opts: &QuadratureOptions) -> Result<Complex64> {
    let m0 = mu_k0(k)?;
    quadrature_with(k, opts, |w| {
        let d = w * w - m0;
        -(d * d - I)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPrediction {
    pub k: usize,
    pub mu0: Complex64,
    pub mu1: Complex64,
}

impl AsymptoticPrediction {
    pub fn new(k: usize, method: Mu1Method) -> Result<Self> {
        Ok(Self {
            k,
            mu0: mu_k0(k)?,
            mu1: mu_k1(k, method)?,
        })
    }

    pub fn kappa0(&self, eps: f64) -> Complex64 {
        kappa0(self.k, eps)
    }

    /// `i + eps mu_{k,0} + eps^2 mu_{k,1}`.
    pub fn kappa_refined(&self, eps: f64) -> Complex64 {
        I + eps * self.mu0 + eps * eps * self.mu1
    }
}

/// Grid policy for the system on the line: spacing resolves the
/// `eps^{2/3}` layer with a fixed number of points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineGridPolicy {
    pub points_per_layer: f64,
    pub max_h: f64,
}

impl Default for LineGridPolicy {
    fn default() -> Self {
        Self {
            points_per_layer: 50.0,
            max_h: 0.004,
        }
    }
}

impl LineGridPolicy {
    pub fn grid(&self, eps: f64, target: Complex64) -> Result<Grid1D> {
        let l = default_truncation_radius(eps, target);
        let h = (eps.powf(2.0 / 3.0) / self.points_per_layer).min(self.max_h);
        Grid1D::truncation(l, ((2.0 * l / h).ceil() as usize).max(4) - 1)
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() || y.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    pub eps: f64,
    pub n: usize,
    pub kappa: Complex64,
    pub kappa0: Complex64,
    /// `|kappa - kappa0|`.
    pub err: f64,
    /// `|kappa - i - eps mu_{n,0} - eps^2 mu_{n,1}|` with the formula's `mu_{n,1}`.
    pub refined_err: f64,
    /// Same with [`mu_k1_corrected`]; exploratory.
    pub corrected_err: f64,
    /// `|fine - coarse|` of the two-grid location.
    pub grid_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSlopes {
    pub n: usize,
    pub mu1: Complex64,
    pub mu1_corrected: Complex64,
    pub slope: Option<f64>,
    pub refined_slope: Option<f64>,
    pub corrected_slope: Option<f64>,
    /// `(kappa - i - eps mu_{n,0}) / eps^2` at the smallest eps.
    pub observed_mu1: Option<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub eps_values: Vec<f64>,
    pub rows: Vec<AsymptoticsRow>,
    pub slopes: Vec<ModeSlopes>,
}

impl AsymptoticsReport {
    pub fn mode(&self, n: usize) -> Option<&ModeSlopes> {
        self.slopes.iter().find(|s| s.n == n)
    }

    /// Header `eps,n,kappa_re,kappa_im,err,refined_err,corrected_err`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eps,n,kappa_re,kappa_im,err,refined_err,corrected_err")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt17(r.eps),
                r.n,
                fmt17(r.kappa.re),
                fmt17(r.kappa.im),
                fmt17(r.err),
                fmt17(r.refined_err),
                fmt17(r.corrected_err)
            )?;
        }
        Ok(())
    }

    /// Header `n,slope,refined_slope,corrected_slope`.
    pub fn write_slopes_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,slope,refined_slope,corrected_slope")?;
        let f = |s: Option<f64>| s.map(fmt17).unwrap_or_else(|| "nan".into());
        for s in &self.slopes {
            writeln!(
                w,
                "{},{},{},{}",
                s.n,
                f(s.slope),
                f(s.refined_slope),
                f(s.corrected_slope)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsOptions {
    pub policy: LineGridPolicy,
    pub tol: f64,
    pub quadrature: QuadratureOptions,
}

impl Default for AsymptoticsOptions {
    fn default() -> Self {
        Self {
            policy: LineGridPolicy::default(),
            tol: 1e-9,
            quadrature: QuadratureOptions::default(),
        }
    }
}

/// Locates `kappa_n(eps)` from the shift `kappa_n^0(eps)` for each mode
/// `n <= modes` and each `eps`, and fits error slopes.
pub fn verify_eigenvalue_asymptotics(eps_values: &[f64], modes: usize) -> Result<AsymptoticsReport> {
    verify_eigenvalue_asymptotics_with(eps_values, modes, &AsymptoticsOptions::default())
}

/// System eigenvalue nearest `kappa_n^0(eps)`, two-grid extrapolated.
pub fn locate_kappa(n: usize, eps: f64, opts: &AsymptoticsOptions) -> Result<(Complex64, f64)> {
    let target = kappa0(n, eps);
    let run = || -> Result<(Complex64, f64)> {
        let spec = OperatorSpec::bloch_torrey_line(eps, opts.policy.grid(eps, target)?);
        let r = two_grid_eigenvalue(&spec, target, opts.tol)?;
        Ok((r.extrapolated, r.difference))
    };
    run().map_err(|e| Error::LocationFailed {
        mode: n,
        eps,
        source: Box::new(e),
    })
}

pub fn verify_eigenvalue_asymptotics_with(
    eps_values: &[f64],
    modes: usize,
    opts: &AsymptoticsOptions,
) -> Result<AsymptoticsReport> {
    if eps_values.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidArgument("eps values must be positive".into()));
    }
    if modes == 0 {
        return Ok(AsymptoticsReport {
            eps_values: eps_values.to_vec(),
            rows: Vec::new(),
            slopes: Vec::new(),
        });
    }
    let coefficients = (1..=modes)
        .into_par_iter()
        .map(|n| {
            let mu1 = if n == 1 {
                mu_k1(1, Mu1Method::ClosedFormK1)?
            } else {
                mu_k1_quadrature(n, &opts.quadrature)?
            };
            Ok((n, mu_k0(n)?, mu1, mu_k1_corrected(n, &opts.quadrature)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = (1..=modes)
        .flat_map(|n| eps_values.iter().map(move |&e| (n, e)))
        .collect();
    let located = jobs
        .par_iter()
        .map(|&(n, eps)| locate_kappa(n, eps, opts).map(|r| (n, eps, r)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(located.len());
    for (n, eps, (kappa, diff)) in located {
        let (_, mu0, mu1, mu1c) = coefficients[n - 1];
        let lead = I + eps * mu0;
        rows.push(AsymptoticsRow {
            eps,
            n,
            kappa,
            kappa0: kappa0(n, eps),
            err: (kappa - kappa0(n, eps)).norm(),
            refined_err: (kappa - lead - eps * eps * mu1).norm(),
            corrected_err: (kappa - lead - eps * eps * mu1c).norm(),
            grid_difference: diff,
        });
    }
    let slopes = coefficients
        .iter()
        .map(|&(n, mu0, mu1, mu1c)| {
            let mode_rows: Vec<&AsymptoticsRow> = rows.iter().filter(|r| r.n == n).collect();
            let eps: Vec<f64> = mode_rows.iter().map(|r| r.eps).collect();
            let pick = |f: fn(&AsymptoticsRow) -> f64| -> Vec<f64> { mode_rows.iter().map(|r| f(r)).collect() };
            let smallest = mode_rows.iter().min_by(|a, b| a.eps.total_cmp(&b.eps));
            ModeSlopes {
                n,
                mu1,
                mu1_corrected: mu1c,
                slope: fitted_slope(&eps, &pick(|r| r.err)),
                refined_slope: fitted_slope(&eps, &pick(|r| r.refined_err)),
                corrected_slope: fitted_slope(&eps, &pick(|r| r.corrected_err)),
                observed_mu1: smallest.map(|r| (r.kappa - I - r.eps * mu0) / (r.eps * r.eps)),
            }
        })
        .collect();
    Ok(AsymptoticsReport {
        eps_values: eps_values.to_vec(),
        rows,
        slopes,
    })
}

/// Frozen-constant protocol: the constant is the largest ratio at the first
/// parameter value; later values pass while they stay within `factor` of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenConstant {
    pub eps_values: Vec<f64>,
    pub max_ratios: Vec<f64>,
    pub constant: f64,
    pub factor: f64,
    pub passed: bool,
}

impl FrozenConstant {
    pub fn evaluate(eps_values: &[f64], max_ratios: &[f64], factor: f64) -> Self {
        let constant = max_ratios.first().copied().unwrap_or(f64::NAN);
        let passed = !max_ratios.is_empty()
            && max_ratios.iter().all(|r| r.is_finite())
            && max_ratios.iter().skip(1).all(|&r| r <= factor * constant);
        Self {
            eps_values: eps_values.to_vec(),
            max_ratios: max_ratios.to_vec(),
            constant,
            factor,
            passed,
        }
    }
}

/// `N_rho = floor((2 rho + 1)/2)`.
pub fn n_rho(rho: f64) -> usize {
    ((2.0 * rho + 1.0) / 2.0).floor().max(0.0) as usize
}

/// Membership in the sampled part of `D(rhat, rho, eps)`: `Re <= rho eps`,
/// `Im != 0`, and outside every ball `B(kappa_n^0, rhat eps^2)` and its
/// conjugate that reaches the half-plane.
pub fn in_resolvent_domain(lambda: Complex64, eps: f64, rho: f64, rhat: f64) -> bool {
    if lambda.re > rho * eps || lambda.im == 0.0 {
        return false;
    }
    let r = rhat * eps * eps;
    let mut n = 1;
    loop {
        let k = kappa0(n, eps);
        if k.re - r > rho * eps {
            return true;
        }
        if (lambda - k).norm() < r || (lambda - k.conj()).norm() < r {
            return false;
        }
        n += 1;
    }
}

/// `1 + eps^{2/3}/|Im|^2 + 1/(rhat eps^{5/3})`.
pub fn resolvent_bound_rhs(lambda: Complex64, eps: f64, rhat: f64) -> f64 {
    1.0 + eps.powf(2.0 / 3.0) / (lambda.im * lambda.im) + 1.0 / (rhat * eps.powf(5.0 / 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBox {
    pub re_min: f64,
    pub im_max: f64,
    pub im_floor: f64,
}

impl Default for SamplingBox {
    fn default() -> Self {
        Self {
            re_min: -0.5,
            im_max: 1.5,
            im_floor: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventSample {
    pub index: usize,
    pub lambda: Complex64,
    pub norm: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// For `Re lambda < 0`: whether `norm <= 1.05/|Re lambda|`.
    pub accretive_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventBoundReport {
    pub eps: f64,
    pub rho: f64,
    pub rhat: f64,
    pub grid: Grid1D,
    pub samples: Vec<ResolventSample>,
    pub rejected_draws: usize,
    pub max_ratio: f64,
    pub accretive_violations: usize,
}

impl ResolventBoundReport {
    /// Header `index,lambda_re,lambda_im,norm,rhs,ratio`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,lambda_re,lambda_im,norm,rhs,ratio")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.index,
                fmt17(s.lambda.re),
                fmt17(s.lambda.im),
                fmt17(s.norm),
                fmt17(s.rhs),
                fmt17(s.ratio)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventOptions {
    pub policy: LineGridPolicy,
    pub sampling: SamplingBox,
    pub sigma_tol: f64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self {
            policy: LineGridPolicy {
                points_per_layer: 20.0,
                max_h: 0.01,
            },
            sampling: SamplingBox::default(),
            sigma_tol: 1e-6,
        }
    }
}

/// Samples `lambda` uniformly from the box intersected with the domain and
/// measures `||(B - lambda)^{-1}||` against the bound's right-hand side.
pub fn verify_resolvent_bound(
    eps: f64,
    rho: f64,
    rhat: f64,
    samples: usize,
    seed: u64,
) -> Result<ResolventBoundReport> {
    verify_resolvent_bound_with(eps, rho, rhat, samples, seed, &ResolventOptions::default())
}

pub fn verify_resolvent_bound_with(
    eps: f64,
    rho: f64,
    rhat: f64,
    samples: usize,
    seed: u64,
    opts: &ResolventOptions,
) -> Result<ResolventBoundReport> {
    if !(eps > 0.0 && rho > 0.0) {
        return Err(Error::InvalidArgument("eps and rho must be positive".into()));
    }
    if !(rhat > 0.0 && rhat < 1.0 / (2f64.sqrt() * eps)) {
        return Err(Error::InvalidArgument(format!(
            "rhat must lie in (0, 1/(sqrt 2 eps)) = (0, {})",
            1.0 / (2f64.sqrt() * eps)
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let sb = opts.sampling;
    let mut r = rng::stream(seed, &format!("resolvent-bound/{eps}"));
    let mut points = Vec::with_capacity(samples);
    let mut rejected = 0;
    while points.len() < samples {
        if rejected > 100 * samples {
            return Err(Error::InvalidArgument("sampling box barely meets the domain".into()));
        }
        let re = r.random_range(sb.re_min..=rho * eps);
        let mag = r.random_range(sb.im_floor..=sb.im_max);
        let im = if r.random::<bool>() { mag } else { -mag };
        let z = Complex64::new(re, im);
        if in_resolvent_domain(z, eps, rho, rhat) {
            points.push(z);
        } else {
            rejected += 1;
        }
    }
    let reach = Complex64::new(sb.re_min.abs().max(rho * eps), sb.im_max);
    let grid = opts.policy.grid(eps, reach)?;
    let m = build(&OperatorSpec::bloch_torrey_line(eps, grid))?;
    let rows: Vec<ResolventSample> = points
        .par_iter()
        .enumerate()
        .map(|(index, &lambda)| {
            let norm = resolvent_norm_of(&m, lambda, opts.sigma_tol);
            let rhs = resolvent_bound_rhs(lambda, eps, rhat);
            ResolventSample {
                index,
                lambda,
                norm,
                rhs,
                ratio: norm / rhs,
                accretive_ok: (lambda.re < 0.0).then(|| norm <= 1.05 / lambda.re.abs()),
            }
        })
        .collect();
    let max_ratio = rows.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let accretive_violations = rows.iter().filter(|s| s.accretive_ok == Some(false)).count();
    Ok(ResolventBoundReport {
        eps,
        rho,
        rhat,
        grid,
        samples: rows,
        rejected_draws: rejected,
        max_ratio,
        accretive_violations,
    })
}

/// Resolvent-bound runs over several `eps` with the frozen-constant verdict.
pub fn resolvent_bound_experiment(
    eps_values: &[f64],
    rho: f64,
    rhat: f64,
    samples: usize,
    seed: u64,
    opts: &ResolventOptions,
) -> Result<(Vec<ResolventBoundReport>, FrozenConstant)> {
    let reports = eps_values
        .iter()
        .map(|&e| verify_resolvent_bound_with(e, rho, rhat, samples, seed, opts))
        .collect::<Result<Vec<_>>>()?;
    let maxes: Vec<f64> = reports.iter().map(|r| r.max_ratio).collect();
    Ok((reports, FrozenConstant::evaluate(eps_values, &maxes, 2.0)))
}

/// The rescaled system: `eps_check = eps^{4/3}`, spectral parameter
/// `lambda = eps^{-2/3} Lambda`, unit diffusion and coupling
/// `eps_check^{-1/2}`.
pub fn rescaled_system_spec(eps: f64, radius: f64, h: f64) -> Result<OperatorSpec> {
    let eps_check = eps.powf(4.0 / 3.0);
    let n = ((2.0 * radius / h).ceil() as usize).max(4) - 1;
    Ok(
        OperatorSpec::new(OperatorKind::RotatedBlochTorrey, Grid1D::truncation(radius, n)?)
            .with_eps(1.0)
            .with_b0(eps_check.powf(-0.5)),
    )
}

/// `1 + [1 + eps_check^{1/2} (lambda_r)_+^{1/2}] / |lambda_i|`.
fn strip_factor(lambda: Complex64, eps_check: f64) -> f64 {
    1.0 + (1.0 + eps_check.sqrt() * lambda.re.max(0.0).sqrt()) / lambda.im.abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripSample {
    pub index: usize,
    pub lambda: Complex64,
    /// `||u_1 + u_2|| / ||f||`.
    pub sum_gain: f64,
    pub sum_ratio: f64,
    pub resolvent_norm: f64,
    pub resolvent_ratio: f64,
    /// For `lambda_r < 0`: whether `||u|| <= 1.05 ||f|| / |lambda_r|`.
    pub accretive_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripReport {
    pub eps: f64,
    pub eps_check: f64,
    pub delta: f64,
    pub grid: Grid1D,
    pub samples: Vec<StripSample>,
    pub resampled: usize,
    pub max_sum_ratio: f64,
    pub max_resolvent_ratio: f64,
    pub accretive_violations: usize,
}

impl StripReport {
    /// Header `index,lambda_re,lambda_im,sum_gain,sum_ratio,resolvent_norm,resolvent_ratio`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "index,lambda_re,lambda_im,sum_gain,sum_ratio,resolvent_norm,resolvent_ratio"
        )?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.index,
                fmt17(s.lambda.re),
                fmt17(s.lambda.im),
                fmt17(s.sum_gain),
                fmt17(s.sum_ratio),
                fmt17(s.resolvent_norm),
                fmt17(s.resolvent_ratio)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripOptions {
    /// Margin added to `eps_check^{-1/2}` for the truncation radius.
    pub margin: f64,
    pub h: f64,
    pub im_floor: f64,
    pub sigma_tol: f64,
}

impl Default for StripOptions {
    fn default() -> Self {
        Self {
            margin: 10.0,
            h: 0.05,
            im_floor: 0.05,
            sigma_tol: 1e-6,
        }
    }
}

/// Checks a candidate `lambda` against the strip hypothesis
/// `0 < |lambda_i| <= (1 - 2 delta^4)^{1/2} eps_check^{-1/2}`.
pub fn in_strip(lambda: Complex64, eps_check: f64, delta: f64) -> bool {
    let top = (1.0 - 2.0 * delta.powi(4)).max(0.0).sqrt() / eps_check.sqrt();
    lambda.im != 0.0 && lambda.im.abs() <= top
}

pub fn verify_strip_estimate(eps: f64, delta: f64, samples: usize, seed: u64) -> Result<StripReport> {
    verify_strip_estimate_with(eps, delta, samples, seed, &StripOptions::default())
}

pub fn verify_strip_estimate_with(
    eps: f64,
    delta: f64,
    samples: usize,
    seed: u64,
    opts: &StripOptions,
) -> Result<StripReport> {
    if !(eps > 0.0) || !(delta > 0.0 && 2.0 * delta.powi(4) < 1.0) {
        return Err(Error::InvalidArgument("need eps > 0 and 0 < delta < 2^{-1/4}".into()));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let eps_check = eps.powf(4.0 / 3.0);
    let top = (1.0 - 2.0 * delta.powi(4)).sqrt() / eps_check.sqrt();
    let re_span = 1.0 / eps_check.sqrt();
    let spec = rescaled_system_spec(eps, re_span + opts.margin, opts.h)?;
    let m = build(&spec)?;
    let n = spec.grid.n();
    let h = spec.grid.h();

    let mut r = rng::stream(seed, &format!("strip-estimate/{eps}"));
    let mut rows: Vec<StripSample> = Vec::with_capacity(samples);
    let mut resampled = 0;
    let mut next_index = 0;
    while rows.len() < samples {
        if resampled > 100 * samples {
            return Err(Error::InvalidArgument(
                "strip sampling keeps hitting the spectrum".into(),
            ));
        }
        let mut draws = Vec::with_capacity(samples - rows.len());
        for _ in rows.len()..samples {
            let re = r.random_range(-re_span..=re_span);
            let mag = r.random_range(opts.im_floor.min(top)..=top);
            let im = if r.random::<bool>() { mag } else { -mag };
            let f: Vec<Complex64> = (0..3 * n)
                .map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
                .collect();
            draws.push((next_index, Complex64::new(re, im), f));
            next_index += 1;
        }
        let results: Vec<Option<StripSample>> = draws
            .par_iter()
            .map(|(index, lambda, f)| strip_sample(&m, *lambda, f, h, eps_check, opts.sigma_tol, *index))
            .collect();
        resampled += results.iter().filter(|s| s.is_none()).count();
        rows.extend(results.into_iter().flatten());
    }
    Ok(StripReport {
        eps,
        eps_check,
        delta,
        grid: spec.grid,
        max_sum_ratio: rows.iter().map(|s| s.sum_ratio).fold(0.0, f64::max),
        max_resolvent_ratio: rows.iter().map(|s| s.resolvent_ratio).fold(0.0, f64::max),
        accretive_violations: rows.iter().filter(|s| s.accretive_ok == Some(false)).count(),
        samples: rows,
        resampled,
    })
}

/// Strip-estimate runs over several `eps`; the frozen-constant verdicts are
/// for `||u_1 + u_2||` and for the full resolvent, in that order.
pub fn strip_estimate_experiment(
    eps_values: &[f64],
    delta: f64,
    samples: usize,
    seed: u64,
    opts: &StripOptions,
) -> Result<(Vec<StripReport>, FrozenConstant, FrozenConstant)> {
    let reports = eps_values
        .iter()
        .map(|&e| verify_strip_estimate_with(e, delta, samples, seed, opts))
        .collect::<Result<Vec<_>>>()?;
    let sums: Vec<f64> = reports.iter().map(|r| r.max_sum_ratio).collect();
    let full: Vec<f64> = reports.iter().map(|r| r.max_resolvent_ratio).collect();
    Ok((
        reports,
        FrozenConstant::evaluate(eps_values, &sums, 2.0),
        FrozenConstant::evaluate(eps_values, &full, 2.0),
    ))
}

fn strip_sample(
    m: &ComplexBandedMatrix,
    lambda: Complex64,
    f: &[Complex64],
    h: f64,
    eps_check: f64,
    sigma_tol: f64,
    index: usize,
) -> Option<StripSample> {
    let lu = m.shifted(lambda).lu().ok()?;
    let u = lu.solve(f);
    if !vec_norm(&u).is_finite() {
        return None;
    }
    let fnorm = l2_norm(f, h);
    let sum: Vec<Complex64> = u.chunks(3).map(|c| c[0] + c[1]).collect();
    let sum_gain = l2_norm(&sum, h) / fnorm;
    let unorm = l2_norm(&u, h) / fnorm;
    let sigma = crate::linalg::eigen::smallest_singular_value_lu(&lu, sigma_tol, crate::spectra::SIGMA_MAX_ITER);
    let resolvent_norm = 1.0 / sigma;
    let factor = strip_factor(lambda, eps_check);
    Some(StripSample {
        index,
        lambda,
        sum_gain,
        sum_ratio: sum_gain / (eps_check.sqrt() * factor),
        resolvent_norm,
        resolvent_ratio: resolvent_norm / ((1.0 + 1.0 / lambda.im.abs()) * factor),
        accretive_ok: (lambda.re < 0.0).then(|| unorm <= 1.05 / lambda.re.abs()),
    })
}
