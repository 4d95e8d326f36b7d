//! Airy function on the negative axis via its Maclaurin series, and the
//! first zero used as the threshold for invertibility of the complex Airy
//! operators on bounded intervals.

use std::sync::OnceLock;

/// `Ai(0)`.
const AI0: f64 = 0.355_028_053_887_817_2;
/// `-Ai'(0)`.
const MINUS_AIP0: f64 = 0.258_819_403_792_806_8;

/// `Ai(x)` from the two Maclaurin series, adequate for `|x| <= 4`.
pub fn airy_ai(x: f64) -> f64 {
    let x3 = x * x * x;
    let mut f = 1.0;
    let mut g = x;
    let mut tf = 1.0;
    let mut tg = x;
    for k in 0..60 {
        let k = k as f64;
        tf *= x3 / ((3.0 * k + 2.0) * (3.0 * k + 3.0));
        tg *= x3 / ((3.0 * k + 3.0) * (3.0 * k + 4.0));
        f += tf;
        g += tg;
        if tf.abs() + tg.abs() < 1e-18 * (f.abs() + g.abs()) {
            break;
        }
    }
    AI0 * f - MINUS_AIP0 * g
}

/// `|nu_1|`, the magnitude of the first zero of `Ai`, by bisection on (-3, -2).
pub fn first_airy_zero_abs() -> f64 {
    static ZERO: OnceLock<f64> = OnceLock::new();
    *ZERO.get_or_init(|| {
        let (mut lo, mut hi) = (-3.0f64, -2.0f64);
        let flo = airy_ai(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if airy_ai(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        -0.5 * (lo + hi)
    })
}

/// Real spectral parameters below `eps^{2/3} |nu_1| / 2` keep both complex
/// Airy operators `-eps^2 d^2/dx^2 +- i x - Lambda` invertible.
pub fn airy_threshold(eps: f64) -> f64 {
    eps.powf(2.0 / 3.0) * first_airy_zero_abs() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_reference_points() {
        assert!((airy_ai(0.0) - AI0).abs() < 1e-16);
        // Ai(-1) and Ai(1) from standard tables.
        assert!((airy_ai(-1.0) - 0.535_560_883_292_352_1).abs() < 1e-14);
        assert!((airy_ai(1.0) - 0.135_292_416_312_881_4).abs() < 1e-14);
    }

    #[test]
    fn first_zero() {
        assert!((first_airy_zero_abs() - 2.338_107_410_459_767).abs() < 1e-12);
    }
}
