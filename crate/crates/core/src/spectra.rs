//! Eigenvalue surveys, targeted location, resolvent norms, and the
//! truncation and two-grid gates that separate physical eigenvalues from
//! discretization artifacts.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{richardson_extrapolate, Grid1D};
use crate::linalg::dense::dense_eigenvalues_capped;
use crate::linalg::eigen::{one_step_residual, smallest_singular_value_lu};
use crate::linalg::{shift_invert_eigenpair, ComplexBandedMatrix, EigenResult, ShiftInvertOutcome, DEFAULT_DENSE_CAP};
use crate::operators::{build, OperatorSpec};

/// Residual above which a surveyed eigenvalue is flagged as ill-conditioned.
pub const RESIDUAL_FLAG: f64 = 1e-6;

/// Iteration cap for shift-invert location.
pub const LOCATE_MAX_ITER: usize = 500;

/// Iteration cap for the smallest singular value.
pub const SIGMA_MAX_ITER: usize = 2000;

/// Closed rectangle `[re_min, re_max] x [im_min, im_max]` of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Window {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min <= re_max && im_min <= im_max) {
            return Err(Error::InvalidArgument("window bounds must be ordered".into()));
        }
        Ok(Self {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }
}

/// All eigenvalues of the discretized `spec` inside `window`, from dense QR,
/// each with the residual of one inverse-iteration step.
///
/// Eigenvalues whose residual exceeds [`RESIDUAL_FLAG`] are kept; use
/// [`flagged`] to list them.
pub fn survey_spectrum(spec: &OperatorSpec, window: &Window) -> Result<EigenResult> {
    survey_spectrum_capped(spec, window, DEFAULT_DENSE_CAP)
}

pub fn survey_spectrum_capped(spec: &OperatorSpec, window: &Window, cap: usize) -> Result<EigenResult> {
    let n = spec.dimension();
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    let m = build(spec)?;
    let all = dense_eigenvalues_capped(&m.to_dense(), 1e-15, cap)?;
    let mut inside: Vec<Complex64> = all.eigenvalues.into_iter().filter(|z| window.contains(*z)).collect();
    inside.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let residuals = inside.par_iter().map(|&z| one_step_residual(&m, z)).collect();
    Ok(EigenResult {
        eigenvalues: inside,
        residuals: Some(residuals),
        method: all.method,
        tol: RESIDUAL_FLAG,
    })
}

/// Indices of eigenvalues whose residual exceeds the result's tolerance.
pub fn flagged(result: &EigenResult) -> Vec<usize> {
    match &result.residuals {
        Some(r) => r
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > result.tol)
            .map(|(i, _)| i)
            .collect(),
        None => Vec::new(),
    }
}

/// Eigenvalue nearest `target` by shift-invert with Rayleigh refinement.
///
/// A target that is itself numerically an eigenvalue is returned with
/// residual 0.
pub fn locate_eigenvalue(spec: &OperatorSpec, target: Complex64, tol: f64) -> Result<(Complex64, f64)> {
    let m = build(spec)?;
    locate_in_matrix(&m, target, tol)
}

pub fn locate_in_matrix(m: &ComplexBandedMatrix, target: Complex64, tol: f64) -> Result<(Complex64, f64)> {
    match shift_invert_eigenpair(m, target, tol, LOCATE_MAX_ITER) {
        Ok(o) => Ok((o.eigenvalue, o.residual)),
        Err(Error::ShiftIsEigenvalue { shift }) => Ok((shift, 0.0)),
        Err(e) => Err(e),
    }
}

/// Eigenpair nearest `target`, for callers that need the vector.
pub fn locate_eigenpair(spec: &OperatorSpec, target: Complex64, tol: f64) -> Result<ShiftInvertOutcome> {
    let m = build(spec)?;
    shift_invert_eigenpair(&m, target, tol, LOCATE_MAX_ITER)
}

/// `||(A - lambda)^{-1}||` in the `sqrt(h)`-weighted norm, which equals the
/// Euclidean operator norm since the same weight sits on both sides.
///
/// Returns `f64::INFINITY` when `lambda` is numerically an eigenvalue.
pub fn resolvent_norm(spec: &OperatorSpec, lambda: Complex64, tol: f64) -> Result<f64> {
    let m = build(spec)?;
    Ok(resolvent_norm_of(&m, lambda, tol))
}

pub fn resolvent_norm_of(m: &ComplexBandedMatrix, lambda: Complex64, tol: f64) -> f64 {
    match m.shifted(lambda).lu() {
        Ok(lu) => {
            let s = smallest_singular_value_lu(&lu, tol, SIGMA_MAX_ITER);
            if s > 0.0 {
                1.0 / s
            } else {
                f64::INFINITY
            }
        }
        Err(_) => f64::INFINITY,
    }
}

/// Resolvent norms on a rectangular grid of spectral parameters.
///
/// `norms[j][i]` belongs to `re_axis[i] + i im_axis[j]`. A point where the
/// LU was singular stores 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventGrid {
    pub re_axis: Vec<f64>,
    pub im_axis: Vec<f64>,
    pub norms: Vec<Vec<f64>>,
    pub spec: OperatorSpec,
}

impl ResolventGrid {
    pub fn get(&self, i_re: usize, j_im: usize) -> f64 {
        self.norms[j_im][i_re]
    }

    /// Grid point with the largest norm, a singular point counting as largest.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut val = f64::NEG_INFINITY;
        for (j, row) in self.norms.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                let v = if v == 0.0 { f64::INFINITY } else { v };
                if v > val {
                    val = v;
                    best = (i, j);
                }
            }
        }
        best
    }

    /// CSV with header `re,im,norm`, imaginary axis outermost.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "re,im,norm")?;
        for (j, &im) in self.im_axis.iter().enumerate() {
            for (i, &re) in self.re_axis.iter().enumerate() {
                writeln!(w, "{},{},{}", fmt17(re), fmt17(im), fmt17(self.norms[j][i]))?;
            }
        }
        Ok(())
    }

    pub fn save(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(csv_path, buf)?;
        std::fs::write(json_path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Resolvent norms over `re_axis x im_axis`, parallel over points.
pub fn pseudospectrum_grid(spec: &OperatorSpec, re_axis: &[f64], im_axis: &[f64], tol: f64) -> Result<ResolventGrid> {
    for axis in [re_axis, im_axis] {
        if axis.is_empty() {
            return Err(Error::InvalidArgument("axes must be non-empty".into()));
        }
        if axis.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("axes must be sorted ascending".into()));
        }
    }
    let m = build(spec)?;
    let nre = re_axis.len();
    let flat: Vec<f64> = (0..nre * im_axis.len())
        .into_par_iter()
        .map(|k| {
            let z = Complex64::new(re_axis[k % nre], im_axis[k / nre]);
            let v = resolvent_norm_of(&m, z, tol);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        })
        .collect();
    Ok(ResolventGrid {
        re_axis: re_axis.to_vec(),
        im_axis: im_axis.to_vec(),
        norms: flat.chunks(nre).map(|c| c.to_vec()).collect(),
        spec: spec.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    /// `(L, eigenvalue)` per supplied radius.
    pub values: Vec<(f64, Complex64)>,
    /// Successive differences `|value_{k+1} - value_k|`.
    pub differences: Vec<f64>,
    pub converged: Complex64,
    /// Smallest radius from which every later difference is below `tol`.
    pub adequate_l: f64,
}

/// Recomputes the eigenvalue nearest `target` on `[-L, L]` for each `L`,
/// holding the spacing of `spec.grid` fixed.
pub fn validate_truncation(
    spec: &OperatorSpec,
    target: Complex64,
    l_values: &[f64],
    tol: f64,
) -> Result<TruncationReport> {
    if l_values.len() < 2 {
        return Err(Error::InvalidArgument(
            "truncation check needs at least two radii".into(),
        ));
    }
    if !spec.kind.is_line_posed() {
        return Err(Error::InvalidArgument(format!(
            "{:?} is not posed on the real line",
            spec.kind
        )));
    }
    let h = spec.grid.h();
    let values = l_values
        .par_iter()
        .map(|&l| {
            let n = ((2.0 * l / h).round() as usize).saturating_sub(1).max(3);
            let s = spec.clone().with_grid(Grid1D::truncation(l, n)?);
            locate_eigenvalue(&s, target, tol * 1e-2).map(|(z, _)| (l, z))
        })
        .collect::<Result<Vec<_>>>()?;
    let differences: Vec<f64> = values.windows(2).map(|w| (w[1].1 - w[0].1).norm()).collect();
    let mut first_ok = differences.len();
    while first_ok > 0 && differences[first_ok - 1] < tol {
        first_ok -= 1;
    }
    if first_ok == differences.len() {
        return Err(Error::NoConvergence {
            what: "truncation radius sweep",
            iterations: l_values.len(),
            best: values.last().expect("non-empty").1,
            residual: *differences.last().expect("non-empty"),
        });
    }
    Ok(TruncationReport {
        converged: values.last().expect("non-empty").1,
        adequate_l: values[first_ok].0,
        values,
        differences,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoGridReport {
    pub coarse: Complex64,
    pub fine: Complex64,
    pub extrapolated: Complex64,
    /// `|fine - coarse|`.
    pub difference: f64,
    /// Whether the refinement shrank the error as the stencil order predicts.
    pub consistent: bool,
}

/// Locates the eigenvalue nearest `target` on the grid of `spec` and on its
/// refinement, and extrapolates.
pub fn two_grid_eigenvalue(spec: &OperatorSpec, target: Complex64, tol: f64) -> Result<TwoGridReport> {
    let fine_spec = spec.clone().with_grid(spec.grid.refined());
    let (coarse, fine) = rayon::join(
        || locate_eigenvalue(spec, target, tol),
        || locate_eigenvalue(&fine_spec, target, tol),
    );
    let (coarse, fine) = (coarse?.0, fine?.0);
    let order = spec.order.as_u32();
    let extrapolated = richardson_extrapolate(&[(spec.grid.h(), coarse), (fine_spec.grid.h(), fine)], order)?;
    let difference = (fine - coarse).norm();
    // The fine-grid error should be about 2^-order of the coarse one; an
    // eigenvalue that moves by more than its own scale is an artifact.
    let scale = fine.norm().max(1.0);
    let consistent = difference < 1e-2 * scale && (fine - extrapolated).norm() <= 0.75 * difference.max(tol);
    Ok(TwoGridReport {
        coarse,
        fine,
        extrapolated,
        difference,
        consistent,
    })
}

/// Largest distance from a conjugated eigenvalue to the nearest eigenvalue.
pub fn conjugation_defect(eigs: &[Complex64]) -> f64 {
    eigs.iter()
        .map(|z| eigs.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}
