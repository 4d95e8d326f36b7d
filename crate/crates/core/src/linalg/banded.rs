//! Complex band matrices and their LU factorization with partial pivoting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dense::DenseComplexMatrix;
use crate::error::{Error, Result};

/// Pivots smaller than this are treated as exact zeros.
pub const SINGULAR_PIVOT: f64 = 1e-300;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square complex matrix with `kl` sub-diagonals and `ku` super-diagonals.
///
/// Row `i` stores columns `i - kl ..= i + ku` contiguously, so entry `(i, j)`
/// lives at `data[i * (kl + ku + 1) + (j + kl - i)]`. Slots that fall outside
/// the matrix (first and last rows) are kept at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexBandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<Complex64>,
}

impl ComplexBandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("band matrix needs n >= 1".into()));
        }
        if n > 1 && (kl >= n || ku >= n) {
            return Err(Error::InvalidArgument(format!(
                "bandwidths ({kl}, {ku}) must be below the dimension {n}"
            )));
        }
        Ok(Self {
            n,
            kl,
            ku,
            data: vec![ZERO; n * (kl + ku + 1)],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_diagonal(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len(), 0, 0)?;
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        Ok(m)
    }

    /// Copies the band of a dense matrix, dropping anything outside it.
    pub fn from_dense(dense: &DenseComplexMatrix, kl: usize, ku: usize) -> Result<Self> {
        let n = dense.n();
        let mut m = Self::zeros(n, kl.min(n.saturating_sub(1)), ku.min(n.saturating_sub(1)))?;
        for i in 0..n {
            for j in m.row_range(i) {
                m.set(i, j, dense.get(i, j));
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    /// Columns structurally present in row `i`.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            ZERO
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] += v;
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        let w = self.width();
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * w..(i + 1) * w];
                self.row_range(i).map(|j| row[j + self.kl - i] * x[j]).sum()
            })
            .collect()
    }

    /// `A^H x`.
    pub fn matvec_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![ZERO; self.n];
        let w = self.width();
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            for j in self.row_range(i) {
                y[j] += row[j + self.kl - i].conj() * x[i];
            }
        }
        y
    }

    /// `A - shift * I`.
    pub fn shifted(&self, shift: Complex64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.add(i, i, -shift);
        }
        m
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= c);
        m
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v = v.conj());
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.ku, self.kl).expect("valid dims");
        for i in 0..self.n {
            for j in self.row_range(i) {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Sum of two band matrices; the result carries the wider band.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::InvalidArgument("dimension mismatch in band sum".into()));
        }
        let mut m = Self::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku))?;
        for src in [self, other] {
            for i in 0..src.n {
                for j in src.row_range(i) {
                    m.add(i, j, src.get(i, j));
                }
            }
        }
        Ok(m)
    }

    pub fn to_dense(&self) -> DenseComplexMatrix {
        let mut d = DenseComplexMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in self.row_range(i) {
                d.set(i, j, self.get(i, j));
            }
        }
        d
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|v| v.im == 0.0)
    }

    pub fn lu(&self) -> Result<BandedLu> {
        BandedLu::factor(self)
    }
}

/// LU factorization `P A = L U` of a band matrix, stored LAPACK-`gbtrf` style:
/// the row interchanges and the unit-lower multipliers are kept per column,
/// and `U` occupies `kl + ku` super-diagonals.
///
/// The handle holds no scratch space, so solves may run concurrently.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    /// Upper bandwidth of `U` (`kl + ku`).
    ku_u: usize,
    /// Row `i` of `U`, columns `i ..= i + ku_u`.
    upper: Vec<Complex64>,
    /// Multipliers eliminated below the diagonal in column `k`.
    lower: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(m: &ComplexBandedMatrix) -> Result<Self> {
        let n = m.n;
        let kl = m.kl;
        let ku_u = m.kl + m.ku;
        // Working rows span columns i - kl ..= i + kl + ku.
        let w = 2 * kl + m.ku + 1;
        let mut work = vec![ZERO; n * w];
        for i in 0..n {
            for j in m.row_range(i) {
                work[i * w + j + kl - i] = m.get(i, j);
            }
        }
        let idx = |i: usize, j: usize| i * w + j + kl - i;

        let mut lower = vec![ZERO; n * kl.max(1)];
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku_u).min(n - 1);
            let mut p = k;
            let mut best = work[idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = work[idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            if !(best >= SINGULAR_PIVOT) {
                return Err(Error::Singular { index: k });
            }
            if p != k {
                for j in k..=last_col {
                    work.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = work[idx(k, k)];
            for i in k + 1..=last_row {
                let l = work[idx(i, k)] / pivot;
                lower[k * kl.max(1) + (i - k - 1)] = l;
                work[idx(i, k)] = ZERO;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..=last_col {
                    let ukj = work[idx(k, j)];
                    work[idx(i, j)] -= l * ukj;
                }
            }
        }

        let wu = ku_u + 1;
        let mut upper = vec![ZERO; n * wu];
        for i in 0..n {
            for j in i..=(i + ku_u).min(n - 1) {
                upper[i * wu + j - i] = work[idx(i, j)];
            }
        }
        Ok(Self {
            n,
            kl,
            ku_u,
            upper,
            lower,
            pivots,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn u(&self, i: usize, j: usize) -> Complex64 {
        self.upper[i * (self.ku_u + 1) + j - i]
    }

    fn l(&self, k: usize, i: usize) -> Complex64 {
        self.lower[k * self.kl.max(1) + (i - k - 1)]
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != ZERO {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    x[i] -= self.l(k, i) * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + self.ku_u).min(n - 1) {
                s -= self.u(i, j) * x[j];
            }
            x[i] = s / self.u(i, i);
        }
    }

    /// Solves `A^H x = b`.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // U^H y = b, forward.
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(self.ku_u)..i {
                s -= self.u(j, i).conj() * x[j];
            }
            x[i] = s / self.u(i, i).conj();
        }
        // Undo the elimination steps in reverse order.
        for k in (0..n).rev() {
            let mut s = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                s -= self.l(k, i).conj() * x[i];
            }
            x[k] = s;
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
        }
        x
    }

    /// Determinant from the pivots and interchange parity.
    pub fn determinant(&self) -> Complex64 {
        let swaps = self.pivots.iter().enumerate().filter(|(k, &p)| p != *k).count();
        let prod: Complex64 = (0..self.n).map(|i| self.u(i, i)).product();
        if swaps % 2 == 1 {
            -prod
        } else {
            prod
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> ComplexBandedMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = ComplexBandedMatrix::zeros(n, kl, ku).unwrap();
        for i in 0..n {
            for j in m.row_range(i) {
                m.set(i, j, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            }
        }
        m
    }

    fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_solve_is_noop() {
        let lu = ComplexBandedMatrix::identity(5).unwrap().lu().unwrap();
        let b: Vec<_> = (0..5).map(|i| c(i as f64, -1.0)).collect();
        assert_eq!(lu.solve(&b), b);
        assert_eq!(lu.solve_adjoint(&b), b);
    }

    #[test]
    fn solve_and_adjoint_solve_random_band() {
        for (kl, ku) in [(1, 1), (3, 2), (0, 4), (6, 6)] {
            let mut m = random_band(40, kl, ku, 7 + kl as u64);
            // Random triangular factors are exponentially ill-conditioned.
            for i in 0..40 {
                m.add(i, i, c(2.0, 0.0));
            }
            let lu = m.lu().unwrap();
            let x: Vec<_> = (0..40).map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
            let b = m.matvec(&x);
            let e1 = max_diff(&lu.solve(&b), &x);
            let bh = m.matvec_adjoint(&x);
            let e2 = max_diff(&lu.solve_adjoint(&bh), &x);
            assert!(e1 < 1e-10 && e2 < 1e-10, "kl {kl} ku {ku}: {e1:e} {e2:e}");
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut m = ComplexBandedMatrix::zeros(2, 1, 1).unwrap();
        m.set(0, 1, c(1.0, 0.0));
        m.set(1, 0, c(2.0, 0.0));
        let lu = m.lu().unwrap();
        let x = lu.solve(&[c(3.0, 0.0), c(4.0, 0.0)]);
        assert!(max_diff(&x, &[c(2.0, 0.0), c(3.0, 0.0)]) < 1e-15);
        assert!((lu.determinant() - c(-2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn duplicate_rows_are_singular() {
        let mut m = ComplexBandedMatrix::zeros(3, 1, 1).unwrap();
        for (i, j, v) in [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 1, 2.0), (2, 2, 1.0)] {
            m.set(i, j, c(v, 0.0));
        }
        match m.lu() {
            Err(Error::Singular { index }) => assert_eq!(index, 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_bandwidth() {
        assert!(ComplexBandedMatrix::zeros(3, 3, 0).is_err());
    }
}
