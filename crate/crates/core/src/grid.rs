//! Uniform grids with Dirichlet endpoints, finite-difference stencils, and
//! Richardson extrapolation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexBandedMatrix;

/// Interior nodes `x_i = a + i h`, `i = 1..=n`, of `(a, b)` with
/// `h = (b - a) / (n + 1)`. Boundary values are implicitly zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridDef", into = "GridDef")]
pub struct Grid1D {
    a: f64,
    b: f64,
    n: usize,
    h: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDef {
    a: f64,
    b: f64,
    n: usize,
}

impl TryFrom<GridDef> for Grid1D {
    type Error = Error;
    fn try_from(d: GridDef) -> Result<Self> {
        Grid1D::new(d.a, d.b, d.n)
    }
}

impl From<Grid1D> for GridDef {
    fn from(g: Grid1D) -> Self {
        GridDef { a: g.a, b: g.b, n: g.n }
    }
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidArgument(format!("grid needs a < b, got ({a}, {b})")));
        }
        if n < 3 {
            return Err(Error::InvalidArgument(format!("grid needs n >= 3, got {n}")));
        }
        Ok(Self {
            a,
            b,
            n,
            h: (b - a) / (n as f64 + 1.0),
        })
    }

    /// Symmetric truncation `[-radius, radius]` of the real line.
    pub fn truncation(radius: f64, n: usize) -> Result<Self> {
        Self::new(-radius, radius, n)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x(&self, i: usize) -> f64 {
        self.a + (i as f64 + 1.0) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// The grid with half the spacing on the same interval (`2n + 1` nodes).
    pub fn refined(&self) -> Self {
        Self::new(self.a, self.b, 2 * self.n + 1).expect("refinement of a valid grid")
    }

    /// Same interval and spacing policy with a different truncation radius,
    /// keeping `h` as close as possible.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        let n = ((2.0 * radius / self.h).round() as usize).saturating_sub(1).max(3);
        Self::truncation(radius, n)
    }
}

/// Finite-difference accuracy of the second-derivative stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum StencilOrder {
    #[default]
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn as_u32(self) -> u32 {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
        }
    }

    /// Node reach of the stencil (half bandwidth of the scalar matrix).
    pub fn reach(self) -> usize {
        match self {
            Self::Second => 1,
            Self::Fourth => 3,
        }
    }
}

impl TryFrom<u8> for StencilOrder {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            _ => Err(Error::InvalidArgument(format!("stencil order must be 2 or 4, got {v}"))),
        }
    }
}

impl From<StencilOrder> for u8 {
    fn from(o: StencilOrder) -> u8 {
        o.as_u32() as u8
    }
}

/// Rows of `-d^2/dx^2` as `(column offset, coefficient * h^2)` lists.
///
/// The fourth-order variant uses the 5-point interior stencil and, at the two
/// nodes next to each boundary, the third-order one-sided closure
/// `(11 u0 - 20 u1 + 6 u2 + 4 u3 - u4) / 12` with `u0 = 0`.
pub(crate) fn stencil_row(n: usize, i: usize, order: StencilOrder) -> Vec<(isize, f64)> {
    match order {
        StencilOrder::Second => vec![(-1, -1.0), (0, 2.0), (1, -1.0)],
        StencilOrder::Fourth => {
            let closure = [
                (-1isize, -11.0 / 12.0),
                (0, 20.0 / 12.0),
                (1, -6.0 / 12.0),
                (2, -4.0 / 12.0),
                (3, 1.0 / 12.0),
            ];
            if i == 0 {
                closure.to_vec()
            } else if i == n - 1 {
                closure.iter().map(|&(o, c)| (-o, c)).collect()
            } else {
                vec![
                    (-2, 1.0 / 12.0),
                    (-1, -16.0 / 12.0),
                    (0, 30.0 / 12.0),
                    (1, -16.0 / 12.0),
                    (2, 1.0 / 12.0),
                ]
            }
        }
    }
}

/// Matrix of `-d^2/dx^2` on the interior nodes (a positive operator).
pub fn second_derivative_matrix(grid: &Grid1D, order: StencilOrder) -> Result<ComplexBandedMatrix> {
    let n = grid.n();
    if order == StencilOrder::Fourth && n < 5 {
        return Err(Error::InvalidArgument("fourth-order stencil needs n >= 5".into()));
    }
    let r = order.reach();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut m = ComplexBandedMatrix::zeros(n, r.min(n - 1), r.min(n - 1))?;
    for i in 0..n {
        for (off, c) in stencil_row(n, i, order) {
            let j = i as isize + off;
            if j >= 0 && (j as usize) < n {
                m.add(i, j as usize, Complex64::new(c * inv_h2, 0.0));
            }
        }
    }
    Ok(m)
}

/// Forward differences `(u_{i+1} - u_i) / h` over all `n + 1` edges,
/// including the two boundary edges where `u = 0`.
pub fn forward_differences(u: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = u.len();
    let zero = Complex64::new(0.0, 0.0);
    (0..=n)
        .map(|e| {
            let right = if e < n { u[e] } else { zero };
            let left = if e > 0 { u[e - 1] } else { zero };
            (right - left) / h
        })
        .collect()
}

/// Discrete `||u'||^2 = h * sum |forward differences|^2`.
pub fn derivative_norm_sqr(u: &[Complex64], h: f64) -> f64 {
    forward_differences(u, h).iter().map(|d| d.norm_sqr()).sum::<f64>() * h
}

/// Pairwise Richardson elimination of the leading `O(h^order)` error term;
/// returns the extrapolant of the last two entries.
pub fn richardson_extrapolate(values: &[(f64, Complex64)], order: u32) -> Result<Complex64> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("Richardson needs at least two entries".into()));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("Richardson order must be positive".into()));
    }
    let mut last = None;
    for w in values.windows(2) {
        let (h0, v0) = w[0];
        let (h1, v1) = w[1];
        if !(h0 > 0.0 && h1 > 0.0) || h0 == h1 {
            return Err(Error::InvalidArgument(format!(
                "Richardson needs distinct positive spacings, got {h0} and {h1}"
            )));
        }
        let ratio = (h0 / h1).powi(order as i32);
        last = Some(v1 + (v1 - v0) / (ratio - 1.0));
    }
    Ok(last.expect("at least one pair"))
}
