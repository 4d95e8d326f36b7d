use std::f64::consts::PI;

use btspec::grid::{derivative_norm_sqr, second_derivative_matrix, StencilOrder};
use btspec::linalg::symmetric::tridiagonalize;
use btspec::operators::{airy_resolvent_matrix, build, build_interval_plambda_raw, build_limit_atilde};
use btspec::spectra::{conjugation_defect, survey_spectrum, Window};
use btspec::{Grid1D, OperatorKind, OperatorSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn everywhere() -> Window {
    Window::new(f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY).unwrap()
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c(a, b)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bloch_torrey_is_accretive(eps in 0.01f64..1.0, u in complex_vec(3 * 60)) {
        let spec = OperatorSpec::bloch_torrey_line(eps, Grid1D::truncation(5.0, 60).unwrap());
        let m = build(&spec).unwrap();
        let h = spec.grid.h();
        let bu = m.matvec(&u);
        let form: Complex64 = u.iter().zip(&bu).map(|(a, b)| a.conj() * b).sum::<Complex64>() * h;
        let kinetic: f64 = (0..3)
            .map(|k| derivative_norm_sqr(&u.iter().skip(k).step_by(3).copied().collect::<Vec<_>>(), h))
            .sum();
        prop_assert!(form.re >= 0.0);
        prop_assert!((form.re - eps * eps * kinetic).abs() <= 1e-10 * kinetic.max(1.0));
    }

    #[test]
    fn general_field_is_accretive(
        eps in 0.01f64..1.0,
        xi2 in -2.0f64..2.0,
        xi3 in -2.0f64..2.0,
        field in prop::collection::vec(prop::array::uniform3(-3.0f64..3.0), 40),
        u in complex_vec(3 * 40),
    ) {
        let spec = OperatorSpec::new(OperatorKind::GeneralField, Grid1D::new(0.0, 1.0, 40).unwrap())
            .with_eps(eps)
            .with_bfield(field)
            .with_xi(xi2, xi3);
        let bu = build(&spec).unwrap().matvec(&u);
        let form: Complex64 = u.iter().zip(&bu).map(|(a, b)| a.conj() * b).sum();
        prop_assert!(form.re >= -1e-12);
    }

    #[test]
    fn plambda_form_matches_resolvent_identity(
        u in prop::collection::vec(-1.0f64..1.0, 50),
        t in 0.1f64..0.9,
    ) {
        let eps = 0.1;
        let grid = Grid1D::new(0.0, 1.0, 50).unwrap();
        let h = grid.h();
        let lambda = t * btspec::airy::airy_threshold(eps);
        let spec = OperatorSpec::new(OperatorKind::IntervalPLambda, grid)
            .with_eps(eps)
            .with_lambda(c(lambda, 0.0));
        let p = build_interval_plambda_raw(&spec).unwrap();
        let uc: Vec<Complex64> = u.iter().map(|&x| c(x, 0.0)).collect();
        let pu = p.matvec(&uc);
        let lhs: f64 = uc.iter().zip(&pu).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * h;
        let mut rhs = eps * eps * derivative_norm_sqr(&uc, h);
        for sign in [1.0, -1.0] {
            let w = airy_resolvent_matrix(&grid, StencilOrder::Second, eps, sign, c(lambda, 0.0))
                .unwrap()
                .lu()
                .unwrap()
                .solve(&uc);
            let wn: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>() * h;
            rhs += 0.5 * (eps * eps * derivative_norm_sqr(&w, h) - lambda * wn);
        }
        prop_assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0));
    }
}

#[test]
fn scalar_models_with_nonnegative_real_part() {
    let grid = Grid1D::truncation(5.0, 80).unwrap();
    let kinds = [
        OperatorSpec::new(OperatorKind::ComplexAiryPlus, grid).with_eps(0.2),
        OperatorSpec::new(OperatorKind::ComplexAiryMinus, grid).with_eps(0.2),
        OperatorSpec::new(OperatorKind::ComplexHarmonic, grid),
        OperatorSpec::new(OperatorKind::RotatedBlochTorrey, grid).with_eps(0.2),
    ];
    let mut rng = btspec::rng::stream(7, "operators/accretive");
    use rand::Rng;
    for spec in &kinds {
        let m = build(spec).unwrap();
        for _ in 0..100 {
            let u: Vec<Complex64> = (0..m.n())
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let form: Complex64 = u.iter().zip(m.matvec(&u)).map(|(a, b)| a.conj() * b).sum();
            assert!(form.re >= -1e-12, "{:?}: {}", spec.kind, form.re);
        }
    }
}

#[test]
fn rotated_and_original_systems_share_their_spectrum() {
    let grid = Grid1D::truncation(4.0, 200).unwrap();
    let eps = 0.2;
    let a = survey_spectrum(&OperatorSpec::bloch_torrey_line(eps, grid), &everywhere()).unwrap();
    let b = survey_spectrum(
        &OperatorSpec::new(OperatorKind::RotatedBlochTorrey, grid).with_eps(eps),
        &everywhere(),
    )
    .unwrap();
    assert_eq!(a.eigenvalues.len(), b.eigenvalues.len());
    for z in &b.eigenvalues {
        let d = a
            .eigenvalues
            .iter()
            .map(|w| (w - z).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(d < 1e-8 * z.norm().max(1.0), "{z}: {d:e}");
    }
}

#[test]
fn interval_spectrum_is_conjugation_symmetric() {
    let spec = OperatorSpec::bloch_torrey_interval(0.1, Grid1D::new(0.0, 1.0, 120).unwrap());
    let r = survey_spectrum(&spec, &everywhere()).unwrap();
    let tol = r.residuals.as_ref().unwrap().iter().fold(1e-12f64, |a, &b| a.max(b));
    assert!(conjugation_defect(&r.eigenvalues) <= 10.0 * tol);
}

#[test]
fn constant_field_spectrum_splits_into_three_laplacians() {
    let eps = 0.1;
    let n = 150;
    let g = 0.7;
    let grid = Grid1D::new(0.0, 1.0, n).unwrap();
    let spec = OperatorSpec::new(OperatorKind::GeneralField, grid)
        .with_eps(eps)
        .with_bfield(vec![[0.0, 0.0, g]; n]);
    let r = survey_spectrum(&spec, &Window::new(-1.0, 3.0, -2.0, 2.0).unwrap()).unwrap();
    // Exact eigenvalues of the discrete Dirichlet Laplacian.
    let h = grid.h();
    for k in 1..=4 {
        let lap = eps * eps * 4.0 / (h * h) * (k as f64 * PI * h / 2.0).sin().powi(2);
        for shift in [0.0, g, -g] {
            let target = c(lap, shift);
            let d = r
                .eigenvalues
                .iter()
                .map(|w| (w - target).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-10, "k={k} shift={shift}: {d:e}");
        }
    }
}

#[test]
fn plambda_is_symmetric_before_averaging() {
    let eps = 0.1;
    let spec = OperatorSpec::new(OperatorKind::IntervalPLambda, Grid1D::new(0.0, 1.0, 80).unwrap())
        .with_eps(eps)
        .with_lambda(c(0.1, 0.0));
    let p = build_interval_plambda_raw(&spec).unwrap();
    let n = p.n();
    let (mut defect, mut norm) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            defect = defect.max((p.get(i, j) - p.get(j, i)).norm());
            norm = norm.max(p.get(i, j).norm());
        }
    }
    assert!(defect / norm < 1e-10);
}

#[test]
fn limit_pair_bounds_the_dirichlet_constant() {
    for (a, b) in [(0.0, 1.0), (-1.0, 1.0)] {
        let grid = Grid1D::new(a, b, 200).unwrap();
        let (am, bw) = build_limit_atilde(&OperatorSpec::new(OperatorKind::LimitAtilde, grid)).unwrap();
        let n = grid.n();
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            for j in am.row_range(i) {
                let s = (bw.get(i, i).re * bw.get(j, j).re).sqrt();
                dense[i * n + j] = am.get(i, j).re / s;
            }
        }
        let rho = tridiagonalize(&dense, n).unwrap().kth_smallest(0, 1e-12);
        assert!(rho > (PI / (b - a)).powi(2), "({a}, {b}): {rho}");
    }
}

#[test]
fn limit_operator_is_a_sum_of_squares() {
    let grid = Grid1D::new(0.0, 1.0, 30).unwrap();
    let (am, _) = build_limit_atilde(&OperatorSpec::new(OperatorKind::LimitAtilde, grid)).unwrap();
    let h = grid.h();
    let w: Vec<Complex64> = grid.nodes().iter().map(|&x| c((3.0 * x).sin() * x, 0.0)).collect();
    let xw: Vec<Complex64> = grid.nodes().iter().zip(&w).map(|(x, v)| v * x).collect();
    let form: f64 = w.iter().zip(am.matvec(&w)).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * h;
    let squares = derivative_norm_sqr(&xw, h) + derivative_norm_sqr(&w, h);
    // (x w)' differs from the edge-wise difference of x w only by the
    // placement of x; the two agree to O(h^2) on smooth data.
    assert!((form - squares).abs() < 1e-2 * squares);
    let d2 = second_derivative_matrix(&grid, StencilOrder::Second).unwrap();
    let lap: f64 = w.iter().zip(d2.matvec(&w)).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * h;
    assert!((lap - derivative_norm_sqr(&w, h)).abs() < 1e-12 * lap);
}
