//! Real symmetric eigenvalue path: Householder tridiagonalization, Sturm
//! bisection, and a Cholesky positive-definiteness test.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`.
    pub off: Vec<f64>,
}

impl SymmetricTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::InvalidArgument(
                "tridiagonal needs n diagonal and n-1 off-diagonal entries".into(),
            ));
        }
        Ok(Self { diag, off })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.n() {
            let denom = if q == 0.0 {
                f64::EPSILON * (self.off[i - 1].abs() + 1e-300)
            } else {
                q
            };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / denom;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 } + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection to `abs_tol`.
    pub fn kth_smallest(&self, k: usize, abs_tol: f64) -> f64 {
        assert!(k < self.n());
        let (mut lo, mut hi) = self.bounds();
        let pad = 1e-12 * (lo.abs() + hi.abs() + 1.0);
        lo -= pad;
        hi += pad;
        while hi - lo > abs_tol.max(4.0 * f64::EPSILON * (lo.abs() + hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Householder reduction of a dense real symmetric matrix (row-major, only
/// read as symmetric) to tridiagonal form.
pub fn tridiagonalize(a: &[f64], n: usize) -> Result<SymmetricTridiagonal> {
    if a.len() != n * n || n == 0 {
        return Err(Error::InvalidArgument("expected a square n*n buffer".into()));
    }
    let mut a = a.to_vec();
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let alpha: f64 = (k + 1..n).map(|i| a[i * n + k] * a[i * n + k]).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let s = if x0 >= 0.0 { 1.0 } else { -1.0 };
        for i in k + 1..n {
            v[i] = a[i * n + k];
        }
        v[k + 1] += s * alpha;
        let vnorm2: f64 = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // A <- H A H with H = I - beta v v^T, on the trailing block.
        for i in k + 1..n {
            let row = &a[i * n..(i + 1) * n];
            p[i] = beta * (k + 1..n).map(|j| row[j] * v[j]).sum::<f64>();
        }
        let vp: f64 = (k + 1..n).map(|i| v[i] * p[i]).sum();
        let kcoef = 0.5 * beta * vp;
        for i in k + 1..n {
            p[i] -= kcoef * v[i];
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i * n + j] -= v[i] * p[j] + p[i] * v[j];
            }
        }
        a[(k + 1) * n + k] = -s * alpha;
        a[k * n + k + 1] = -s * alpha;
        for i in k + 2..n {
            a[i * n + k] = 0.0;
            a[k * n + i] = 0.0;
        }
    }
    let diag = (0..n).map(|i| a[i * n + i]).collect();
    let off = (0..n.saturating_sub(1)).map(|i| a[(i + 1) * n + i]).collect();
    SymmetricTridiagonal::new(diag, off)
}

/// Smallest eigenvalue of a dense real symmetric matrix.
pub fn smallest_eigenvalue(a: &[f64], n: usize, abs_tol: f64) -> Result<f64> {
    Ok(tridiagonalize(a, n)?.kth_smallest(0, abs_tol))
}

/// Whether a dense real symmetric matrix admits a Cholesky factorization.
pub fn is_positive_definite(a: &[f64], n: usize) -> bool {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
            s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
            l[i * n + j] = s / d;
        }
    }
    true
}
