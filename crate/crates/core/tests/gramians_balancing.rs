mod common;

use common::{projected, random_stable, random_transform, rel_diff, rng, uniform};
use tlbt::balancing::full_balancing_transform;
use tlbt::gramians::{
    gramian_quadrature_oracle, mixed_gramian, quadrature_integral, reduced_gramian,
};
use tlbt::linalg::eigenvalues;
use tlbt::system::apply_state_transform;
use tlbt::{
    balance, balance_all, generate_heat_model, time_limited_gramians, truncate, LinearModel,
    Matrix, StateSpaceSystem,
};

#[test]
fn quadrature_matches_lyapunov_route() {
    let mut rng = rng(11);
    let sys = random_stable(&mut rng, 6, 2, 2);
    for tbar in [0.5, 2.0] {
        let p = time_limited_gramians(&sys, tbar).unwrap().p;
        let oracle = gramian_quadrature_oracle(&sys, tbar, 256).unwrap();
        assert!(rel_diff(&p, &oracle) < 1e-8, "T = {tbar}");
    }
}

#[test]
fn quadrature_zero_input() {
    let a = Matrix::from_element(1, 1, -1.0);
    let b = Matrix::zeros(1, 1);
    let x = quadrature_integral(&a, &b, &a, &b, 3.0, 8).unwrap();
    assert_eq!(x[(0, 0)], 0.0);
}

#[test]
fn mixed_gramian_matches_quadrature() {
    let mut rng = rng(12);
    let sys = random_stable(&mut rng, 6, 2, 2);
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    let rom = truncate(&sys, &balance(&g, &sys, 2).unwrap()).unwrap();
    let pm = mixed_gramian(&sys, &rom, 1.0).unwrap();
    let oracle = quadrature_integral(sys.a(), sys.b(), &rom.a11, &rom.b1, 1.0, 256).unwrap();
    assert!(rel_diff(&pm, &oracle) < 1e-8);
}

#[test]
fn balanced_full_order_rom_has_sigma_as_gramian() {
    let mut rng = rng(13);
    let sys = random_stable(&mut rng, 6, 2, 2);
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    let bal = balance_all(&g, &sys).unwrap();
    assert_eq!(bal.available_order(), 6);
    let rom = projected(&sys, &bal);
    let pr = reduced_gramian(&rom, 1.0).unwrap();
    let sigma = Matrix::from_diagonal(&nalgebra::DVector::from_vec(bal.singular_values.clone()));
    assert!(rel_diff(&pr, &sigma) < 1e-8);
}

#[test]
fn symmetric_system_has_equal_gramians() {
    let mut rng = rng(14);
    let k = uniform(&mut rng, 6, 6);
    let a = -(&k * k.transpose()) - Matrix::identity(6, 6);
    let b = uniform(&mut rng, 6, 2);
    let sys = StateSpaceSystem::new("sym", a, b.clone(), b.transpose(), None).unwrap();
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    assert!(rel_diff(&g.p, &g.q) < 1e-12);
    let mut eig: Vec<f64> = nalgebra::SymmetricEigen::new(g.p.clone()).eigenvalues.iter().copied().collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    let sigma = balance_all(&g, &sys).unwrap().singular_values;
    for (s, e) in sigma.iter().zip(&eig) {
        assert!((s - e).abs() <= 1e-8 * eig[0]);
    }
}

#[test]
fn projections_are_biorthogonal() {
    let sys = generate_heat_model(20, 7, 6).unwrap();
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    for r in [2, 5, 10] {
        let bal = balance(&g, &sys, r).unwrap();
        let wtv = bal.w.transpose() * &bal.v;
        assert!((wtv - Matrix::identity(r, r)).norm() < 1e-8, "r = {r}");
        assert!(bal.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn full_transform_agrees_with_projections() {
    let mut rng = rng(15);
    let sys = random_stable(&mut rng, 5, 2, 2);
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    let (s, s_inv, sigma) = full_balancing_transform(&g.p, &g.q).unwrap();
    let bal = balance_all(&g, &sys).unwrap();
    for (a, b) in sigma.iter().zip(&bal.singular_values) {
        assert!((a - b).abs() <= 1e-10 * sigma[0]);
    }
    let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(sigma.clone()));
    assert!(rel_diff(&(&s * &g.p * s.transpose()), &d) < 1e-8);
    assert!(rel_diff(&(s_inv.transpose() * &g.q * &s_inv), &d) < 1e-8);
    // Both routes give the same balanced realization up to column signs.
    let rom = projected(&sys, &bal);
    let ab = &s * sys.a() * &s_inv;
    for i in 0..5 {
        for j in 0..5 {
            assert!((ab[(i, j)].abs() - rom.a11[(i, j)].abs()).abs() < 1e-8 * ab.norm());
        }
    }
}

#[test]
fn random_spd_congruences_are_diagonal() {
    let mut rng = rng(16);
    let x = uniform(&mut rng, 5, 5);
    let y = uniform(&mut rng, 5, 5);
    let p = &x * x.transpose() + Matrix::identity(5, 5) * 0.1;
    let q = &y * y.transpose() + Matrix::identity(5, 5) * 0.1;
    let (s, s_inv, sigma) = full_balancing_transform(&p, &q).unwrap();
    let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(sigma));
    assert!(rel_diff(&(&s * &p * s.transpose()), &d) < 1e-8);
    assert!(rel_diff(&(s_inv.transpose() * &q * &s_inv), &d) < 1e-8);
}

#[test]
fn similarity_leaves_singular_values_unchanged() {
    let mut rng = rng(17);
    let sys = random_stable(&mut rng, 6, 2, 3);
    let base = balance_all(&time_limited_gramians(&sys, 1.0).unwrap(), &sys)
        .unwrap()
        .singular_values;
    for _ in 0..3 {
        let t = random_transform(&mut rng, 6);
        let moved = apply_state_transform(&sys, &t).unwrap();
        let sigma = balance_all(&time_limited_gramians(&moved, 1.0).unwrap(), &moved)
            .unwrap()
            .singular_values;
        for (a, b) in sigma.iter().zip(&base) {
            assert!((a - b).abs() <= 1e-8 * b, "{a} vs {b}");
        }
    }
}

#[test]
fn full_order_balanced_rom_matches_transfer_function() {
    let mut rng = rng(18);
    let sys = random_stable(&mut rng, 6, 2, 2);
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    let rom = projected(&sys, &balance_all(&g, &sys).unwrap());
    let freqs: Vec<f64> = (0..10).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect();
    let err = tlbt::bounds::hinf_error_sampled(&sys, &rom, &freqs).unwrap();
    assert!(err < 1e-8, "{err}");
}

#[test]
fn heat_rom_is_stable() {
    let sys = generate_heat_model(20, 7, 6).unwrap();
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    let rom = truncate(&sys, &balance(&g, &sys, 4).unwrap()).unwrap();
    assert!(eigenvalues(&rom.a11).unwrap().iter().all(|l| l.re < 0.0));
}

#[test]
fn full_order_request_returns_system() {
    let sys = generate_heat_model(30, 7, 6).unwrap();
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    let bal = balance(&g, &sys, 30).unwrap();
    let nhat = bal.available_order();
    assert!(nhat < 30);
    assert_eq!(bal.tail_sum(), 0.0);
    let rom = truncate(&sys, &bal).unwrap();
    assert_eq!(&rom.a11, sys.a());
    assert!(balance(&g, &sys, nhat + 1).is_err());
}
