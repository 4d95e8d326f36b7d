//! Complex dense and banded linear algebra.

pub mod banded;
pub mod dense;
pub mod eigen;
pub mod symmetric;

pub use banded::{BandedLu, ComplexBandedMatrix};
pub use dense::{dense_eigenvalues, DenseComplexMatrix, DEFAULT_DENSE_CAP};
pub use eigen::{
    match_to_targets, shift_invert_eigenpair, shift_invert_eigenvalue, smallest_singular_value, EigenMethod,
    EigenResult, ShiftInvertOutcome,
};

use num_complex::Complex64;

/// Plain Euclidean norm of a coefficient vector.
pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Discrete L2 norm on a uniform grid: Euclidean norm scaled by `sqrt(h)`.
pub fn l2_norm(v: &[Complex64], h: f64) -> f64 {
    vec_norm(v) * h.sqrt()
}

/// Discrete L2 inner product `h * sum conj(u_i) v_i`.
pub fn l2_inner(u: &[Complex64], v: &[Complex64], h: f64) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<Complex64>() * h
}
