//! Dense complex matrices and the all-eigenvalues QR path.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eigen::{EigenMethod, EigenResult};
use crate::error::{Error, Result};

/// Largest dimension accepted by [`dense_eigenvalues`] unless overridden.
pub const DEFAULT_DENSE_CAP: usize = 2000;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseComplexMatrix {
    n: usize,
    /// Row-major.
    data: Vec<Complex64>,
}

impl DenseComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn conj(&self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.data.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> Complex64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = Complex64::new(1.0, 0.0);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[x * n + k].norm().total_cmp(&a[y * n + k].norm()))
                .unwrap();
            if a[p * n + k] == ZERO {
                return ZERO;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            let piv = a[k * n + k];
            det *= piv;
            for i in k + 1..n {
                let l = a[i * n + k] / piv;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let akj = a[k * n + j];
                    a[i * n + j] -= l * akj;
                }
            }
        }
        det
    }
}

/// Householder reduction to upper Hessenberg form, in place.
fn hessenberg(a: &mut [Complex64], n: usize) {
    let mut v = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let alpha: f64 = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        // v = x + phase * alpha * e1, H = I - 2 v v^H / (v^H v)
        for i in k + 1..n {
            v[i] = a[i * n + k];
        }
        v[k + 1] += phase * alpha;
        let vnorm2: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let beta = 2.0 / vnorm2;
        // Left: A <- H A on rows k+1.., columns k..
        for j in k..n {
            let s: Complex64 = (k + 1..n).map(|i| v[i].conj() * a[i * n + j]).sum();
            let s = s * beta;
            for i in k + 1..n {
                a[i * n + j] -= v[i] * s;
            }
        }
        // Right: A <- A H on all rows, columns k+1..
        for i in 0..n {
            let s: Complex64 = (k + 1..n).map(|j| a[i * n + j] * v[j]).sum();
            let s = s * beta;
            for j in k + 1..n {
                a[i * n + j] -= s * v[j].conj();
            }
        }
        for i in k + 2..n {
            a[i * n + k] = ZERO;
        }
    }
}

/// Eigenvalues of the trailing 2x2 block closest to its last diagonal entry.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let tr_half = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powu(2) + b * c;
    let s = disc.sqrt();
    let l1 = tr_half + s;
    let l2 = tr_half - s;
    if (l1 - d).norm() < (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Givens rotation `G = [c s; -conj(s) c]` with real `c`, chosen so
/// that `G [x; y] = [r; 0]`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ny = y.norm();
    if ny == 0.0 {
        return (1.0, ZERO);
    }
    let nx = x.norm();
    if nx == 0.0 {
        return (0.0, y.conj() / ny);
    }
    let r = nx.hypot(ny);
    let c = nx / r;
    let s = (x / nx) * y.conj() / r;
    (c, s)
}

/// All eigenvalues of a dense complex matrix: Householder Hessenberg
/// reduction followed by Wilkinson-shifted QR sweeps with deflation.
///
/// `tol` bounds the relative size of a sub-diagonal entry at deflation.
pub fn dense_eigenvalues(m: &DenseComplexMatrix, tol: f64) -> Result<EigenResult> {
    dense_eigenvalues_capped(m, tol, DEFAULT_DENSE_CAP)
}

pub fn dense_eigenvalues_capped(m: &DenseComplexMatrix, tol: f64, cap: usize) -> Result<EigenResult> {
    let n = m.n();
    if n > cap {
        return Err(Error::DenseCapExceeded { n, cap });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let mut a = m.data.clone();
    hessenberg(&mut a, n);
    let defl = tol.max(f64::EPSILON);

    let mut eig = vec![ZERO; n];
    let max_iter = 30 * n.max(1);
    let mut total = 0usize;
    let mut hi = n;
    let mut since_deflation = 0usize;
    while hi > 0 {
        let h = |a: &[Complex64], i: usize, j: usize| a[i * n + j];
        // Find the start of the unreduced block ending at hi - 1.
        let mut lo = hi - 1;
        while lo > 0 {
            let sub = h(&a, lo, lo - 1).norm();
            let scale = h(&a, lo, lo).norm() + h(&a, lo - 1, lo - 1).norm();
            let scale = if scale == 0.0 { 1.0 } else { scale };
            if sub <= defl * scale {
                a[lo * n + lo - 1] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            eig[hi - 1] = a[(hi - 1) * n + hi - 1];
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_iter {
            return Err(Error::NoConvergence {
                what: "dense QR",
                iterations: total,
                best: a[(hi - 1) * n + hi - 1],
                residual: h(&a, hi - 1, hi - 2).norm(),
            });
        }
        let shift = if since_deflation % 11 == 10 {
            // Exceptional shift to break cycles.
            a[(hi - 1) * n + hi - 1] + Complex64::new(0.75, 0.4) * h(&a, hi - 1, hi - 2).norm()
        } else {
            wilkinson_shift(
                h(&a, hi - 2, hi - 2),
                h(&a, hi - 2, hi - 1),
                h(&a, hi - 1, hi - 2),
                h(&a, hi - 1, hi - 1),
            )
        };
        qr_sweep(&mut a, n, lo, hi, shift);
    }
    Ok(EigenResult {
        eigenvalues: eig,
        residuals: None,
        method: EigenMethod::DenseQr,
        tol,
    })
}

/// One explicitly shifted QR step on the active block `lo..hi`. Only the
/// block itself is updated since eigenvectors are not accumulated.
fn qr_sweep(a: &mut [Complex64], n: usize, lo: usize, hi: usize, shift: Complex64) {
    for i in lo..hi {
        a[i * n + i] -= shift;
    }
    let mut rots = Vec::with_capacity(hi - lo - 1);
    for k in lo..hi - 1 {
        let (c, s) = givens(a[k * n + k], a[(k + 1) * n + k]);
        for j in k..hi {
            let x = a[k * n + j];
            let y = a[(k + 1) * n + j];
            a[k * n + j] = x * c + s * y;
            a[(k + 1) * n + j] = -s.conj() * x + y * c;
        }
        rots.push((c, s));
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = lo + idx;
        for i in lo..(k + 2).min(hi) {
            let x = a[i * n + k];
            let y = a[i * n + k + 1];
            a[i * n + k] = x * c + y * s.conj();
            a[i * n + k + 1] = -x * s + y * c;
        }
    }
    for i in lo..hi {
        a[i * n + i] += shift;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigen::match_to_targets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_dense(n: usize, seed: u64) -> DenseComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DenseComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            }
        }
        m
    }

    #[test]
    fn diagonal_matrix() {
        let m = DenseComplexMatrix::from_diagonal(&[c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0)]);
        let r = dense_eigenvalues(&m, 1e-14).unwrap();
        let targets = [c(1.0, 2.0), c(3.0, 0.0), c(0.0, -1.0)];
        for (t, e) in match_to_targets(&r.eigenvalues, &targets) {
            assert!((t - e.unwrap()).norm() < 1e-14);
        }
    }

    #[test]
    fn companion_of_z2_plus_1() {
        let m =
            DenseComplexMatrix::from_rows(&[vec![c(0.0, 0.0), c(-1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let r = dense_eigenvalues(&m, 1e-14).unwrap();
        for (t, e) in match_to_targets(&r.eigenvalues, &[c(0.0, 1.0), c(0.0, -1.0)]) {
            assert!((t - e.unwrap()).norm() < 1e-13);
        }
    }

    #[test]
    fn eigenvalue_product_matches_lu_determinant() {
        let m = random_dense(50, 42);
        let r = dense_eigenvalues(&m, 1e-14).unwrap();
        let prod: Complex64 = r.eigenvalues.iter().product();
        let det = m.determinant();
        assert!((prod - det).norm() / det.norm() < 1e-8, "{prod} vs {det}");
    }

    #[test]
    fn trace_is_preserved() {
        let m = random_dense(80, 3);
        let r = dense_eigenvalues(&m, 1e-14).unwrap();
        let tr: Complex64 = (0..80).map(|i| m.get(i, i)).sum();
        let s: Complex64 = r.eigenvalues.iter().sum();
        assert!((tr - s).norm() < 1e-10);
    }

    #[test]
    fn conjugate_matrix_has_conjugate_spectrum() {
        let m = random_dense(30, 9);
        let a = dense_eigenvalues(&m, 1e-14).unwrap().eigenvalues;
        let b: Vec<_> = dense_eigenvalues(&m.conj(), 1e-14)
            .unwrap()
            .eigenvalues
            .iter()
            .map(|z| z.conj())
            .collect();
        for (t, e) in match_to_targets(&a, &b) {
            assert!((t - e.unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let m = DenseComplexMatrix::identity(5);
        assert!(matches!(
            dense_eigenvalues_capped(&m, 1e-12, 4),
            Err(Error::DenseCapExceeded { n: 5, cap: 4 })
        ));
    }

    #[test]
    fn hessenberg_preserves_spectrum_of_jordan_like_block() {
        // Non-normal upper triangular matrix: eigenvalues are the diagonal.
        let mut m = DenseComplexMatrix::zeros(6);
        for i in 0..6 {
            m.set(i, i, c(i as f64, 0.5));
            if i + 1 < 6 {
                m.set(i, i + 1, c(10.0, 0.0));
            }
        }
        let r = dense_eigenvalues(&m, 1e-15).unwrap();
        let targets: Vec<_> = (0..6).map(|i| c(i as f64, 0.5)).collect();
        for (t, e) in match_to_targets(&r.eigenvalues, &targets) {
            assert!((t - e.unwrap()).norm() < 1e-8);
        }
    }
}
