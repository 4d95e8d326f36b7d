use btspec::asymptotics::{verify_resolvent_bound, verify_strip_estimate};
use btspec::reduction::{find_lambda_root, probe_mlambda, reconstruct_components, system_residuals};
use btspec::variational::{compute_rho0, default_lambda_samples, nu_curve_on, nu_value};
use btspec::Grid1D;
use num_complex::Complex64;

#[test]
fn sampled_experiments_repeat_under_a_fixed_seed() {
    let a = verify_resolvent_bound(0.1, 1.0, 5.0, 12, 5).unwrap();
    let b = verify_resolvent_bound(0.1, 1.0, 5.0, 12, 5).unwrap();
    assert_eq!(a, b);
    let c = verify_resolvent_bound(0.1, 1.0, 5.0, 12, 6).unwrap();
    assert_ne!(a.samples[0].lambda, c.samples[0].lambda);
    let s = verify_strip_estimate(0.2, 0.3, 8, 5).unwrap();
    assert_eq!(s, verify_strip_estimate(0.2, 0.3, 8, 5).unwrap());
    assert_eq!(s.accretive_violations, 0);
}

#[test]
fn rho0_history_converges_and_reflects() {
    let r = compute_rho0(0.0, 1.0, &[255, 511, 1023]).unwrap();
    assert!(r.extrapolant_spread() < 1e-6);
    assert!((r.rho0 - 10.51214).abs() < 1e-4);
    let m = compute_rho0(-1.0, 0.0, &[255, 511, 1023]).unwrap();
    assert!((m.rho0 - r.rho0).abs() < 1e-9);
    assert!(r.higher.windows(2).all(|w| w[0] < w[1]) && r.higher[0] > r.rho0);
}

#[test]
fn nu_decreases_through_its_crossing() {
    let eps = 0.1;
    let grid = Grid1D::new(0.0, 1.0, 150).unwrap();
    let samples = default_lambda_samples(eps, 0.0, 1.0, 21.0, 12);
    let curve = nu_curve_on(eps, &grid, &samples).unwrap();
    let l1 = curve.crossing.expect("crossing");
    assert!(l1 > (std::f64::consts::PI * eps).powi(2));
    let before = nu_value(eps, &grid, l1 - 1e-4).unwrap();
    let after = nu_value(eps, &grid, l1 + 1e-4).unwrap();
    assert!(before > 0.0 && after < 0.0);
}

#[test]
fn conjugate_roots_give_conjugate_components() {
    let eps_check = 0.1f64.powf(4.0 / 3.0);
    let grid = Grid1D::truncation(8.0, 1500).unwrap();
    let start = btspec::reduction::heuristic_start(1, eps_check).unwrap();
    let root = find_lambda_root(start, eps_check, 1e-9).unwrap();
    let p = probe_mlambda(root, eps_check, grid).unwrap();
    let q = probe_mlambda(root.conj(), eps_check, grid).unwrap();
    assert!((p.smallest_eig.conj() - q.smallest_eig).norm() < 1e-8);
    let a = reconstruct_components(root, &p.vector, &grid, eps_check).unwrap();
    let conj_v: Vec<Complex64> = p.vector.iter().map(|z| z.conj()).collect();
    let b = reconstruct_components(root.conj(), &conj_v, &grid, eps_check).unwrap();
    for (x, y) in a.u_s.iter().zip(&b.u_s) {
        assert!((x.conj() - y).norm() < 1e-10 * (1.0 + x.norm()));
    }
    let res = system_residuals(root, &a, &grid, eps_check);
    assert!(res.iter().all(|&r| r < 1e-3), "{res:?}");
}
