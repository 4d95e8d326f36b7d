//! Declarative operator descriptions and the builders that discretize them.
//!
//! Three-component systems use interleaved (node-major) ordering: unknown
//! `3 i + c` is component `c` at interior node `i`. This keeps every system
//! banded with half bandwidth `max(3 * reach, 2)`.
//!
//! Conventions for the system kinds:
//!
//! * `BlochTorreyLine` / `BlochTorreyInterval`: `-eps^2 D2 (x) I3 + M(x)` with
//!   `M(x) = [[0, x, 0], [-x, 0, b0], [0, -b0, 0]]`, the action of
//!   `-b(x) x` for `b(x) = (b0, 0, x)`. The default `b0 = 1` is the
//!   normalization of the constant field used throughout.
//! * `RotatedBlochTorrey`: the same operator in the basis
//!   `((-i e1 + e2)/sqrt2, (i e1 + e2)/sqrt2, e3)`; diagonal blocks
//!   `-eps^2 D2 + i x`, `-eps^2 D2 - i x`, `-eps^2 D2`, coupling `+b0/sqrt2` in
//!   the third column of rows one and two and `-b0/sqrt2` back.
//! * `GeneralField`: sampled field `b(x_i)` acting as `b x`, plus the
//!   transverse term `eps^2 (xi2^2 + xi3^2)` on the diagonal.
//!
//! For the quartic kinds (`QuarticM0`, `QuarticM`, `DilatedM`) the `eps`
//! field carries the rescaled parameter that enters the potential as
//! `1 / eps`. For `HatL` it is the original small parameter.
//!
//! `HatL` at `eps = 0`, `mu = 0` is `-d^2/ds^2 + 2 s^2` whose eigenvalues are
//! `sqrt(2) (2k - 1)`. One intermediate statement of the source derivation
//! writes `(2k - 1)/sqrt(2)` instead; the analytic value is used here.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airy::airy_threshold;
use crate::error::{Error, Result};
use crate::grid::{second_derivative_matrix, Grid1D, StencilOrder};
use crate::linalg::{ComplexBandedMatrix, DenseComplexMatrix};

pub const DEFAULT_B0: f64 = 1.0;

/// Tolerance below which `omega^2 - lambda` counts as vanishing at a node.
const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorKind {
    BlochTorreyLine,
    BlochTorreyInterval,
    RotatedBlochTorrey,
    GeneralField,
    ComplexAiryPlus,
    ComplexAiryMinus,
    ComplexHarmonic,
    QuarticM0,
    QuarticM,
    DilatedM,
    HatL,
    IntervalPLambda,
    LimitAtilde,
}

impl OperatorKind {
    /// Kinds posed on the whole line, discretized on a truncation.
    pub fn is_line_posed(self) -> bool {
        matches!(
            self,
            Self::BlochTorreyLine
                | Self::RotatedBlochTorrey
                | Self::ComplexHarmonic
                | Self::QuarticM0
                | Self::QuarticM
                | Self::DilatedM
                | Self::HatL
        )
    }

    pub fn is_system(self) -> bool {
        matches!(
            self,
            Self::BlochTorreyLine | Self::BlochTorreyInterval | Self::RotatedBlochTorrey | Self::GeneralField
        )
    }

    /// Kinds whose discretization is a single band matrix.
    pub fn is_banded(self) -> bool {
        !matches!(self, Self::IntervalPLambda | Self::LimitAtilde)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Param {
    Eps,
    B0,
    Bfield,
    Xi2,
    Xi3,
    Lambda,
    Mu,
    Theta,
}

impl Param {
    fn name(self) -> &'static str {
        match self {
            Self::Eps => "eps",
            Self::B0 => "b0",
            Self::Bfield => "bfield",
            Self::Xi2 => "xi2",
            Self::Xi3 => "xi3",
            Self::Lambda => "lambda",
            Self::Mu => "mu",
            Self::Theta => "theta",
        }
    }
}

/// Which operator to build and with which parameters.
///
/// Serialized as JSON with `kind` as a string tag and the parameters as named
/// fields; complex values are `[re, im]` pairs. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bfield: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Complex64>,
    pub grid: Grid1D,
    #[serde(default)]
    pub order: StencilOrder,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, grid: Grid1D) -> Self {
        Self {
            kind,
            eps: None,
            b0: None,
            bfield: None,
            xi2: None,
            xi3: None,
            lambda: None,
            mu: None,
            theta: None,
            grid,
            order: StencilOrder::Second,
        }
    }

    pub fn bloch_torrey_line(eps: f64, grid: Grid1D) -> Self {
        Self::new(OperatorKind::BlochTorreyLine, grid).with_eps(eps)
    }

    pub fn bloch_torrey_interval(eps: f64, grid: Grid1D) -> Self {
        Self::new(OperatorKind::BlochTorreyInterval, grid).with_eps(eps)
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }

    pub fn with_b0(mut self, b0: f64) -> Self {
        self.b0 = Some(b0);
        self
    }

    pub fn with_bfield(mut self, b: Vec<[f64; 3]>) -> Self {
        self.bfield = Some(b);
        self
    }

    pub fn with_xi(mut self, xi2: f64, xi3: f64) -> Self {
        self.xi2 = Some(xi2);
        self.xi3 = Some(xi3);
        self
    }

    pub fn with_lambda(mut self, lambda: Complex64) -> Self {
        self.lambda = Some(lambda);
        self
    }

    pub fn with_mu(mut self, mu: Complex64) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn with_theta(mut self, theta: Complex64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_order(mut self, order: StencilOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_grid(mut self, grid: Grid1D) -> Self {
        if let Some(b) = &self.bfield {
            if b.len() != grid.n() {
                // A sampled field cannot follow a grid change.
                self.bfield = None;
            }
        }
        self.grid = grid;
        self
    }

    /// Rows of the discretized operator.
    pub fn dimension(&self) -> usize {
        if self.kind.is_system() {
            3 * self.grid.n()
        } else {
            self.grid.n()
        }
    }

    fn present(&self, p: Param) -> bool {
        match p {
            Param::Eps => self.eps.is_some(),
            Param::B0 => self.b0.is_some(),
            Param::Bfield => self.bfield.is_some(),
            Param::Xi2 => self.xi2.is_some(),
            Param::Xi3 => self.xi3.is_some(),
            Param::Lambda => self.lambda.is_some(),
            Param::Mu => self.mu.is_some(),
            Param::Theta => self.theta.is_some(),
        }
    }

    /// (required, optional) parameters per kind.
    fn schema(&self) -> (&'static [Param], &'static [Param]) {
        use OperatorKind::*;
        use Param::*;
        match self.kind {
            BlochTorreyLine | BlochTorreyInterval | RotatedBlochTorrey => (&[Eps], &[B0]),
            GeneralField => (&[Eps, Bfield], &[Xi2, Xi3]),
            ComplexAiryPlus | ComplexAiryMinus => (&[Eps], &[]),
            ComplexHarmonic => (&[], &[]),
            QuarticM0 | QuarticM => (&[Eps, Lambda], &[]),
            DilatedM => (&[Eps, Lambda, Theta], &[]),
            HatL => (&[Eps, Mu], &[]),
            IntervalPLambda => (&[Eps, Lambda], &[]),
            LimitAtilde => (&[], &[]),
        }
    }

    /// Checks required, forbidden, and kind-specific constraints.
    pub fn validate(&self) -> Result<()> {
        let all = [
            Param::Eps,
            Param::B0,
            Param::Bfield,
            Param::Xi2,
            Param::Xi3,
            Param::Lambda,
            Param::Mu,
            Param::Theta,
        ];
        let (required, optional) = self.schema();
        for p in all {
            let allowed = required.contains(&p) || optional.contains(&p);
            if required.contains(&p) && !self.present(p) {
                return Err(Error::InvalidSpec(format!("{:?} requires `{}`", self.kind, p.name())));
            }
            if !allowed && self.present(p) {
                return Err(Error::InvalidSpec(format!(
                    "`{}` is not a parameter of {:?}",
                    p.name(),
                    self.kind
                )));
            }
        }
        if let Some(eps) = self.eps {
            let ok = if self.kind == OperatorKind::HatL {
                eps >= 0.0
            } else {
                eps > 0.0
            };
            if !(ok && eps.is_finite()) {
                return Err(Error::InvalidSpec(format!("eps must be positive, got {eps}")));
            }
        }
        if let Some(b) = &self.bfield {
            if b.len() != self.grid.n() {
                return Err(Error::InvalidSpec(format!(
                    "bfield has {} samples for {} nodes",
                    b.len(),
                    self.grid.n()
                )));
            }
        }
        if self.order == StencilOrder::Fourth {
            if self.kind == OperatorKind::LimitAtilde {
                return Err(Error::InvalidSpec(
                    "LimitAtilde is built from first differences; order must be 2".into(),
                ));
            }
            if self.grid.n() < 5 {
                return Err(Error::InvalidSpec("fourth-order stencil needs n >= 5".into()));
            }
        }
        match self.kind {
            OperatorKind::QuarticM | OperatorKind::DilatedM => {
                let l = self.lambda.expect("validated");
                if l.im == 0.0 && l.re >= 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "lambda must avoid the positive real axis, got {l}"
                    )));
                }
            }
            OperatorKind::IntervalPLambda => {
                let l = self.lambda.expect("validated");
                if l.im != 0.0 {
                    return Err(Error::InvalidSpec("IntervalPLambda needs a real Lambda".into()));
                }
                let thr = airy_threshold(self.eps.expect("validated"));
                if !(l.re < thr) {
                    return Err(Error::InvalidSpec(format!(
                        "Lambda = {} must lie below the Airy threshold {thr}",
                        l.re
                    )));
                }
            }
            _ => {}
        }
        if self.kind == OperatorKind::DilatedM {
            let t = self.theta.expect("validated");
            if !(t.im.abs() < 3.0 * PI / 16.0) {
                return Err(Error::InvalidSpec(format!(
                    "|Im theta| must be below 3 pi / 16, got {}",
                    t.im
                )));
            }
        }
        Ok(())
    }
}

/// Truncation radius for problems posed on the line.
pub fn default_truncation_radius(eps: f64, target: Complex64) -> f64 {
    (6.0 * eps.powf(2.0 / 3.0) * target.norm().sqrt() + 8.0).max(8.0)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds any band-matrix kind.
pub fn build(spec: &OperatorSpec) -> Result<ComplexBandedMatrix> {
    use OperatorKind::*;
    match spec.kind {
        BlochTorreyLine | BlochTorreyInterval | GeneralField => build_bloch_torrey(spec),
        RotatedBlochTorrey => build_rotated(spec),
        IntervalPLambda | LimitAtilde => Err(Error::InvalidSpec(format!(
            "{:?} does not discretize to a single band matrix",
            spec.kind
        ))),
        _ => build_scalar(spec),
    }
}

/// Assembles `kinetic * D2 (x) I3 + coupling(x_i)` in interleaved ordering.
fn assemble_system<F>(spec: &OperatorSpec, kinetic: f64, coupling: F) -> Result<ComplexBandedMatrix>
where
    F: Fn(usize, f64) -> [[Complex64; 3]; 3],
{
    let grid = &spec.grid;
    let n = grid.n();
    let d2 = second_derivative_matrix(grid, spec.order)?;
    let bw = (3 * spec.order.reach()).max(2).min(3 * n - 1);
    let mut m = ComplexBandedMatrix::zeros(3 * n, bw, bw)?;
    for i in 0..n {
        for j in d2.row_range(i) {
            let v = d2.get(i, j) * kinetic;
            if v != c(0.0, 0.0) {
                for comp in 0..3 {
                    m.add(3 * i + comp, 3 * j + comp, v);
                }
            }
        }
        let block = coupling(i, grid.x(i));
        for (r, row) in block.iter().enumerate() {
            for (col, &v) in row.iter().enumerate() {
                if v != c(0.0, 0.0) {
                    m.add(3 * i + r, 3 * i + col, v);
                }
            }
        }
    }
    Ok(m)
}

/// `BlochTorreyLine`, `BlochTorreyInterval`, and `GeneralField`.
pub fn build_bloch_torrey(spec: &OperatorSpec) -> Result<ComplexBandedMatrix> {
    spec.validate()?;
    let eps = spec.eps.expect("validated");
    match spec.kind {
        OperatorKind::BlochTorreyLine | OperatorKind::BlochTorreyInterval => {
            let b0 = spec.b0.unwrap_or(DEFAULT_B0);
            assemble_system(spec, eps * eps, |_, x| {
                [
                    [c(0.0, 0.0), c(x, 0.0), c(0.0, 0.0)],
                    [c(-x, 0.0), c(0.0, 0.0), c(b0, 0.0)],
                    [c(0.0, 0.0), c(-b0, 0.0), c(0.0, 0.0)],
                ]
            })
        }
        OperatorKind::GeneralField => {
            let b = spec.bfield.as_ref().expect("validated");
            let xi2 = spec.xi2.unwrap_or(0.0);
            let xi3 = spec.xi3.unwrap_or(0.0);
            let t = eps * eps * (xi2 * xi2 + xi3 * xi3);
            assemble_system(spec, eps * eps, |i, _| {
                let [b1, b2, b3] = b[i];
                [
                    [c(t, 0.0), c(-b3, 0.0), c(b2, 0.0)],
                    [c(b3, 0.0), c(t, 0.0), c(-b1, 0.0)],
                    [c(-b2, 0.0), c(b1, 0.0), c(t, 0.0)],
                ]
            })
        }
        k => Err(Error::InvalidSpec(format!("build_bloch_torrey cannot build {k:?}"))),
    }
}

/// `RotatedBlochTorrey`.
pub fn build_rotated(spec: &OperatorSpec) -> Result<ComplexBandedMatrix> {
    spec.validate()?;
    if spec.kind != OperatorKind::RotatedBlochTorrey {
        return Err(Error::InvalidSpec(format!(
            "build_rotated cannot build {:?}",
            spec.kind
        )));
    }
    let eps = spec.eps.expect("validated");
    let g = spec.b0.unwrap_or(DEFAULT_B0) * FRAC_1_SQRT_2;
    assemble_system(spec, eps * eps, |_, x| {
        [
            [c(0.0, x), c(0.0, 0.0), c(g, 0.0)],
            [c(0.0, 0.0), c(0.0, -x), c(g, 0.0)],
            [c(-g, 0.0), c(-g, 0.0), c(0.0, 0.0)],
        ]
    })
}

/// `Phi(eps, omega, mu) = (i + 2 eps omega^2 + eps mu) / (-i + eps omega^2 - eps mu)^2`.
pub fn hat_phi(eps: f64, omega: Complex64, mu: Complex64) -> Complex64 {
    let w2 = omega * omega;
    let num = c(0.0, 1.0) + w2 * (2.0 * eps) + mu * eps;
    let den = c(0.0, -1.0) + w2 * eps - mu * eps;
    num / (den * den)
}

/// Kinetic coefficient and potential for each scalar kind.
fn scalar_parts(spec: &OperatorSpec) -> Result<(Complex64, Vec<Complex64>)> {
    use OperatorKind::*;
    let grid = &spec.grid;
    let nodes = grid.nodes();
    let pole = |i: usize, d: Complex64| -> Result<()> {
        if d.norm() < POLE_TOL {
            Err(Error::SingularPotential { node: i, x: nodes[i] })
        } else {
            Ok(())
        }
    };
    let iu = c(0.0, 1.0);
    match spec.kind {
        ComplexAiryPlus | ComplexAiryMinus => {
            let eps = spec.eps.expect("validated");
            let s = if spec.kind == ComplexAiryPlus { 1.0 } else { -1.0 };
            Ok((c(eps * eps, 0.0), nodes.iter().map(|&x| c(0.0, s * x)).collect()))
        }
        ComplexHarmonic => Ok((c(1.0, 0.0), nodes.iter().map(|&x| c(0.0, -2.0 * x * x)).collect())),
        QuarticM0 => {
            let eps = spec.eps.expect("validated");
            let l = spec.lambda.expect("validated");
            Ok((
                c(1.0, 0.0),
                nodes.iter().map(|&w| (c(w * w, 0.0) - l).powu(2) + 1.0 / eps).collect(),
            ))
        }
        QuarticM | DilatedM => {
            let eps = spec.eps.expect("validated");
            let l = spec.lambda.expect("validated");
            let theta = spec.theta.unwrap_or(c(0.0, 0.0));
            let dil = (theta * 2.0).exp();
            let mut v = Vec::with_capacity(nodes.len());
            for (i, &w) in nodes.iter().enumerate() {
                let w2 = dil * (w * w);
                let d = w2 - l;
                pole(i, d)?;
                v.push(d * d + 1.0 / eps + (w2 * 2.0 + l) / (d * d));
            }
            Ok(((-theta * 2.0).exp(), v))
        }
        HatL => {
            let eps = spec.eps.expect("validated");
            let mu = spec.mu.expect("validated");
            let e1 = c(0.0, FRAC_PI_4).exp();
            let e3 = c(0.0, 3.0 * FRAC_PI_4).exp();
            let e8 = c(0.0, PI / 8.0).exp();
            let mut v = Vec::with_capacity(nodes.len());
            for (i, &s) in nodes.iter().enumerate() {
                let s2 = s * s;
                let mut p = c(2.0 * s2, 0.0) + e3 * mu * 2.0 + e1 * mu * mu * eps - iu * mu * (2.0 * eps * s2)
                    + e3 * (eps * s2 * s2);
                if eps != 0.0 {
                    let omega = e8 * s;
                    let den = c(0.0, -1.0) + omega * omega * eps - mu * eps;
                    pole(i, den)?;
                    p += e1 * hat_phi(eps, omega, mu) * eps;
                }
                v.push(p);
            }
            Ok((c(1.0, 0.0), v))
        }
        k => Err(Error::InvalidSpec(format!("{k:?} is not a scalar kind"))),
    }
}

/// Scalar kinds: `kinetic * D2 + diag(potential)`.
pub fn build_scalar(spec: &OperatorSpec) -> Result<ComplexBandedMatrix> {
    spec.validate()?;
    let (kinetic, potential) = scalar_parts(spec)?;
    let mut m = second_derivative_matrix(&spec.grid, spec.order)?.scaled(kinetic);
    for (i, v) in potential.into_iter().enumerate() {
        m.add(i, i, v);
    }
    Ok(m)
}

/// `L_+ - Lambda` or `L_- - Lambda` on the spec's grid, `L_+- = -eps^2 D2 +- i x`.
pub fn airy_resolvent_matrix(
    grid: &Grid1D,
    order: StencilOrder,
    eps: f64,
    sign: f64,
    lambda: Complex64,
) -> Result<ComplexBandedMatrix> {
    let mut m = second_derivative_matrix(grid, order)?.scaled(c(eps * eps, 0.0));
    for i in 0..grid.n() {
        m.add(i, i, c(0.0, sign * grid.x(i)) - lambda);
    }
    Ok(m)
}

/// `P_Lambda` before symmetrization: `-eps^2 D2 + (R_+ + R_-)/2` with
/// `R_+- = (L_+- - Lambda)^{-1}` assembled column by column.
pub fn build_interval_plambda_raw(spec: &OperatorSpec) -> Result<DenseComplexMatrix> {
    spec.validate()?;
    if spec.kind != OperatorKind::IntervalPLambda {
        return Err(Error::InvalidSpec(format!(
            "expected IntervalPLambda, got {:?}",
            spec.kind
        )));
    }
    let eps = spec.eps.expect("validated");
    let lambda = spec.lambda.expect("validated");
    let grid = &spec.grid;
    let n = grid.n();
    let lu_p = airy_resolvent_matrix(grid, spec.order, eps, 1.0, lambda)?.lu()?;
    let lu_m = airy_resolvent_matrix(grid, spec.order, eps, -1.0, lambda)?.lu()?;
    let cols: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![c(0.0, 0.0); n];
            e[j] = c(1.0, 0.0);
            let rp = lu_p.solve(&e);
            let rm = lu_m.solve(&e);
            rp.iter().zip(&rm).map(|(a, b)| (a + b) * 0.5).collect()
        })
        .collect();
    let d2 = second_derivative_matrix(grid, spec.order)?;
    let mut p = DenseComplexMatrix::zeros(n);
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            p.set(i, j, *v);
        }
    }
    for i in 0..n {
        for j in d2.row_range(i) {
            p.set(i, j, p.get(i, j) + d2.get(i, j) * (eps * eps));
        }
    }
    Ok(p)
}

/// `P_Lambda` averaged with its transpose (real symmetric for real Lambda).
pub fn build_interval_plambda(spec: &OperatorSpec) -> Result<DenseComplexMatrix> {
    let raw = build_interval_plambda_raw(spec)?;
    Ok(symmetrize(&raw))
}

pub fn symmetrize(m: &DenseComplexMatrix) -> DenseComplexMatrix {
    let n = m.n();
    let mut s = DenseComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            s.set(i, j, (m.get(i, j) + m.get(j, i)) * 0.5);
        }
    }
    s
}

/// Generalized pair `(A, Bw)` for the limiting problem: `A = G^T G + H^T H`
/// with `H w = w'` and `G w = (x w)'` as forward differences with Dirichlet
/// closure, `Bw = diag(1 + x_i^2)`.
pub fn build_limit_atilde(spec: &OperatorSpec) -> Result<(ComplexBandedMatrix, ComplexBandedMatrix)> {
    spec.validate()?;
    if spec.kind != OperatorKind::LimitAtilde {
        return Err(Error::InvalidSpec(format!("expected LimitAtilde, got {:?}", spec.kind)));
    }
    let grid = &spec.grid;
    let x = grid.nodes();
    let d2 = second_derivative_matrix(grid, StencilOrder::Second)?;
    let mut a = d2.clone();
    for i in 0..grid.n() {
        for j in d2.row_range(i) {
            a.add(i, j, d2.get(i, j) * (x[i] * x[j]));
        }
    }
    let bw = ComplexBandedMatrix::from_diagonal(&x.iter().map(|&xi| c(1.0 + xi * xi, 0.0)).collect::<Vec<_>>())?;
    Ok((a, bw))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(a: f64, b: f64, n: usize) -> Grid1D {
        Grid1D::new(a, b, n).unwrap()
    }

    #[test]
    fn rejects_missing_and_extra_parameters() {
        let g = grid(-8.0, 8.0, 50);
        assert!(OperatorSpec::new(OperatorKind::BlochTorreyLine, g).validate().is_err());
        let extra = OperatorSpec::bloch_torrey_line(0.1, g).with_mu(c(1.0, 0.0));
        assert!(matches!(extra.validate(), Err(Error::InvalidSpec(_))));
        assert!(OperatorSpec::new(OperatorKind::ComplexHarmonic, g).validate().is_ok());
        let bad_eps = OperatorSpec::bloch_torrey_line(-1.0, g);
        assert!(bad_eps.validate().is_err());
    }

    #[test]
    fn dilation_angle_and_lambda_restrictions() {
        let g = grid(-6.0, 6.0, 50);
        let base = OperatorSpec::new(OperatorKind::DilatedM, g)
            .with_eps(1.0)
            .with_lambda(c(-1.0, 1.0));
        assert!(base.clone().with_theta(c(0.0, 0.5)).validate().is_ok());
        assert!(base.clone().with_theta(c(0.0, 0.6)).validate().is_err());
        let q = OperatorSpec::new(OperatorKind::QuarticM, g)
            .with_eps(1.0)
            .with_lambda(c(2.0, 0.0));
        assert!(q.validate().is_err());
    }

    #[test]
    fn positive_real_lambda_is_rejected_and_poles_name_the_node() {
        let g = grid(-2.0, 2.0, 3); // nodes -1, 0, 1
        let spec = OperatorSpec::new(OperatorKind::QuarticM0, g)
            .with_eps(1.0)
            .with_lambda(c(1.0, 0.0));
        assert!(build_scalar(&spec).is_ok());
        let spec = OperatorSpec::new(OperatorKind::QuarticM, g)
            .with_eps(1.0)
            .with_lambda(c(1.0, -0.0));
        assert!(matches!(build_scalar(&spec), Err(Error::InvalidSpec(_))));
        // -i + eps (e^{i pi/8} s)^2 - eps mu vanishes at s = +-1 for this mu.
        let mu = c(0.0, FRAC_PI_4).exp() - c(0.0, 1.0);
        let hat = OperatorSpec::new(OperatorKind::HatL, g).with_eps(1.0).with_mu(mu);
        match build_scalar(&hat) {
            Err(Error::SingularPotential { node, x }) => {
                assert_eq!(node, 0);
                assert_eq!(x, -1.0);
            }
            other => panic!("expected a singular potential, got {other:?}"),
        }
    }

    #[test]
    fn coupling_block_at_origin() {
        // Nodes -1, 0, 1: the middle node carries x = 0.
        let g = grid(-2.0, 2.0, 3);
        let m = build_bloch_torrey(&OperatorSpec::bloch_torrey_line(0.5, g)).unwrap();
        let d = 0.25 * 2.0; // eps^2 * 2 / h^2 with h = 1
        let base = 3;
        let expect = [[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]];
        for r in 0..3 {
            for col in 0..3 {
                let diag = if r == col { d } else { 0.0 };
                assert_eq!(m.get(base + r, base + col), c(expect[r][col] + diag, 0.0));
            }
        }
        assert_eq!(m.kl(), 3);
    }

    #[test]
    fn rotated_coupling_entries() {
        let g = grid(-2.0, 2.0, 3);
        let m = build_rotated(&OperatorSpec::new(OperatorKind::RotatedBlochTorrey, g).with_eps(0.1)).unwrap();
        assert_eq!(m.get(0, 2), c(FRAC_1_SQRT_2, 0.0));
        assert_eq!(m.get(1, 2), c(FRAC_1_SQRT_2, 0.0));
        assert_eq!(m.get(2, 0), c(-FRAC_1_SQRT_2, 0.0));
        assert_eq!(m.get(2, 1), c(-FRAC_1_SQRT_2, 0.0));
        assert!((m.get(0, 0) - c(0.02, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn builders_are_deterministic() {
        let g = grid(-8.0, 8.0, 200);
        let spec = OperatorSpec::bloch_torrey_line(0.05, g);
        assert_eq!(build(&spec).unwrap(), build(&spec).unwrap());
    }

    #[test]
    fn limit_pair_weight_is_one_plus_x_squared() {
        let g = grid(0.0, 1.0, 9);
        let (a, bw) = build_limit_atilde(&OperatorSpec::new(OperatorKind::LimitAtilde, g)).unwrap();
        for (i, x) in g.nodes().iter().enumerate() {
            assert_eq!(bw.get(i, i), c(1.0 + x * x, 0.0));
        }
        assert_eq!(a.transpose(), a);
    }

    #[test]
    fn hat_phi_at_zero_eps() {
        assert!((hat_phi(0.0, c(3.0, 0.0), c(1.0, 1.0)) - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn spec_json_round_trip_and_unknown_fields() {
        let spec = OperatorSpec::new(OperatorKind::DilatedM, grid(-6.0, 6.0, 10))
            .with_eps(0.5)
            .with_lambda(c(-1.0, 2.0))
            .with_theta(c(0.0, 0.1))
            .with_order(StencilOrder::Fourth);
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"kind\":\"DilatedM\""));
        let back: OperatorSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let bad = s.replacen('{', "{\"bogus\":1,", 1);
        assert!(serde_json::from_str::<OperatorSpec>(&bad).is_err());
        let bad_order = s.replace("\"order\":4", "\"order\":3");
        assert!(serde_json::from_str::<OperatorSpec>(&bad_order).is_err());
    }
}
