mod common;

use common::{random_stable, rng};
use tlbt::bounds::{
    bt_h2_bound_infinite, bt_hinf_bound, hinf_error_sampled, remainder_diagnostics,
    truncation_error_sampled,
};
use tlbt::linalg::spectral_abscissa;
use tlbt::simulation::output_error;
use tlbt::{
    balance, balance_all, generate_heat_model, infinite_gramians, simulate, time_limited_gramians,
    tlbt_h2_bound, tlbt_h2_bound_alt, truncate, InputSignal, LinearModel, Matrix,
    StateSpaceSystem,
};

#[test]
fn bound_dominates_simulated_errors() {
    let sys = generate_heat_model(20, 7, 6).unwrap();
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    let rom = truncate(&sys, &balance(&g, &sys, 2).unwrap()).unwrap();
    let eps = tlbt_h2_bound(&sys, &rom, &g.p, 1.0).unwrap().epsilon;
    let mut rng = rng(21);
    for _ in 0..20 {
        let u = InputSignal::random_piecewise_constant(7, 1.0, 10, &mut rng).unwrap();
        let y = simulate(&sys, &u, 1.0, 1e-3).unwrap();
        let yr = simulate(&rom, &u, 1.0, 1e-3).unwrap();
        let err = output_error(&y, &yr, 1.0).unwrap().max_on_horizon;
        assert!(err <= eps, "{err} > {eps}");
    }
}

#[test]
fn full_order_rom_has_zero_bound() {
    let sys = generate_heat_model(10, 2, 2).unwrap();
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    let rom = truncate(&sys, &balance(&g, &sys, 10).unwrap()).unwrap();
    let rep = tlbt_h2_bound(&sys, &rom, &g.p, 1.0).unwrap();
    assert!(rep.epsilon <= 1e-10 * rep.term_cpc.sqrt());
}

#[test]
fn both_representations_agree() {
    let mut rng = rng(22);
    for _ in 0..5 {
        let sys = random_stable(&mut rng, 8, 2, 2);
        let g = time_limited_gramians(&sys, 1.0).unwrap();
        let alt = tlbt_h2_bound_alt(&sys, &g, 3, 1.0).unwrap();
        let rom = truncate(&sys, &balance(&g, &sys, 3).unwrap()).unwrap();
        let direct = tlbt_h2_bound(&sys, &rom, &g.p, 1.0).unwrap();
        let gap = (alt.alt_epsilon_squared().unwrap() - direct.radicand).abs();
        assert!(gap <= 1e-7 * direct.radicand.max(direct.term_cpc), "{gap}");
    }
}

#[test]
fn remainder_within_product_bounds() {
    let sys = generate_heat_model(20, 7, 6).unwrap();
    let g = time_limited_gramians(&sys, 50.0).unwrap();
    let rep = tlbt_h2_bound_alt(&sys, &g, 5, 50.0).unwrap();
    let diag = remainder_diagnostics(&sys, &g, 5, 50.0).unwrap();
    assert!(rep.alt_remainder.unwrap().abs() <= diag.remainder_bound);
}

#[test]
fn remainder_bounds_at_short_horizon() {
    let mut rng = rng(23);
    let sys = random_stable(&mut rng, 6, 2, 2);
    let g = time_limited_gramians(&sys, 0.5).unwrap();
    let rep = tlbt_h2_bound_alt(&sys, &g, 2, 0.5).unwrap();
    let diag = remainder_diagnostics(&sys, &g, 2, 0.5).unwrap();
    let ub = diag.upper_bounds;
    assert!(rep.alt_remainder.unwrap().abs() <= 2.0 * ub[0] + ub[1] + ub[2]);
    assert!(diag.remainder_bound > 0.0);
}

#[test]
fn end_term_decays_with_horizon() {
    let sys = generate_heat_model(20, 7, 6).unwrap();
    let mut prev = f64::INFINITY;
    for tbar in [0.05, 0.1, 0.2, 0.4] {
        let g = time_limited_gramians(&sys, tbar).unwrap();
        let f1 = remainder_diagnostics(&sys, &g, 4, tbar).unwrap().norm_f1;
        assert!(f1 <= prev, "T = {tbar}");
        prev = f1;
    }
}

#[test]
fn zero_input_diagnostics_vanish() {
    let sys = StateSpaceSystem::new(
        "b0",
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0])),
        Matrix::zeros(2, 1),
        Matrix::from_element(1, 2, 1.0),
        None,
    )
    .unwrap();
    let g = time_limited_gramians(&sys, 1.0).unwrap();
    let diag = remainder_diagnostics(&sys, &g, 1, 1.0).unwrap();
    assert_eq!(diag.norm_f1, 0.0);
    assert_eq!(diag.trace_sigma1, 0.0);
    assert_eq!(diag.upper_bounds, [0.0; 3]);
}

#[test]
fn long_horizon_reproduces_infinite_bound() {
    let sys = generate_heat_model(20, 7, 6).unwrap();
    let tbar = 40.0 / spectral_abscissa(sys.a()).unwrap().abs();
    let g = time_limited_gramians(&sys, tbar).unwrap();
    let g_inf = infinite_gramians(&sys).unwrap();
    for r in [2, 4] {
        let alt = tlbt_h2_bound_alt(&sys, &g, r, tbar).unwrap();
        let inf = bt_h2_bound_infinite(&sys, &g_inf, r).unwrap();
        let lead = alt.alt_leading.unwrap();
        assert!((lead - inf).abs() <= 1e-5 * inf, "r = {r}: {lead} vs {inf}");
        let eps2 = alt.epsilon_squared();
        assert!(alt.alt_remainder.unwrap().abs() <= 1e-8 * eps2);
    }
}

#[test]
fn sampled_hinf_error_respects_classical_bound() {
    let sys = generate_heat_model(20, 7, 6).unwrap();
    let g = infinite_gramians(&sys).unwrap();
    let bal = balance(&g, &sys, 4).unwrap();
    let rom = truncate(&sys, &bal).unwrap();
    let freqs: Vec<f64> = (0..200).map(|k| 10f64.powf(-3.0 + 8.0 * k as f64 / 199.0)).collect();
    let err = hinf_error_sampled(&sys, &rom, &freqs).unwrap();
    let bound = bt_hinf_bound(&bal.singular_values, 4).unwrap();
    assert!(err <= bound, "{err} > {bound}");
    let same = truncate(&sys, &balance(&g, &sys, 20).unwrap()).unwrap();
    assert!(hinf_error_sampled(&sys, &same, &freqs).unwrap() <= 1e-10);
}

#[test]
fn infinite_bound_vanishes_without_truncation() {
    let mut rng = rng(24);
    let sys = random_stable(&mut rng, 5, 2, 2);
    let g = infinite_gramians(&sys).unwrap();
    assert_eq!(bt_h2_bound_infinite(&sys, &g, 5).unwrap(), 0.0);
    let heat = generate_heat_model(20, 7, 6).unwrap();
    let g = infinite_gramians(&heat).unwrap();
    assert_eq!(bt_h2_bound_infinite(&heat, &g, 20).unwrap(), 0.0);
}

#[test]
fn schur_complement_error_matches_difference() {
    let mut rng = rng(23);
    let sys = random_stable(&mut rng, 7, 2, 2);
    let g = infinite_gramians(&sys).unwrap();
    let all = balance_all(&g, &sys).unwrap();
    let a = all.w.transpose() * sys.a() * &all.v;
    let b = all.w.transpose() * sys.b();
    let c = sys.c() * &all.v;
    let freqs = [0.0, 0.3, 1.0, 4.0, 30.0];
    for r in 1..all.available_order() {
        let rom = truncate(&sys, &balance(&g, &sys, r).unwrap()).unwrap();
        let direct = hinf_error_sampled(&sys, &rom, &freqs).unwrap();
        let schur = truncation_error_sampled(&a, &b, &c, r, &freqs).unwrap();
        assert!((direct - schur).abs() <= 1e-8 * direct, "r = {r}: {direct} vs {schur}");
    }
    assert_eq!(truncation_error_sampled(&a, &b, &c, 7, &freqs).unwrap(), 0.0);
    assert!(truncation_error_sampled(&a, &b, &c, 0, &freqs).is_err());
}
