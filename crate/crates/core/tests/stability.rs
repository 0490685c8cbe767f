use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transhape_core::compensator::StepSignal;
use transhape_core::integrator::SolverConfig;
use transhape_core::metrics::SettleCriteria;
use transhape_core::plants::{cubic_first_order, linear_first_order, mass_spring_damper, SaturatedStiffness};
use transhape_core::stability::{
    affine_constants, empirical_lambda_boundary, lambda_bound_exponential, lambda_bound_higher_order, log_grid, msd_constants,
    msd_linearized_coefficients, msd_linearized_lambda_max, routh_hurwitz_cubic, sigma_bound, sigma_quadratic, BoundaryProbe, ClassKPair,
    LyapunovConstants, Stability,
};
use transhape_core::Error;

/// Oracle: all roots of `s³ + a2 s² + a1 s + a0` strictly in the left half plane,
/// from the companion matrix eigenvalues.
fn roots_stable(a2: f64, a1: f64, a0: f64) -> Option<bool> {
    let companion = Matrix3::new(0.0, 0.0, -a0, 1.0, 0.0, -a1, 0.0, 1.0, -a2);
    let eig = companion.complex_eigenvalues();
    let max_re = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    // Skip near-marginal triples where the eigen-solver cannot decide.
    (max_re.abs() > 1e-7).then_some(max_re < 0.0)
}

#[test]
fn routh_hurwitz_agrees_with_roots() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0;
    for _ in 0..1000 {
        let (a2, a1, a0) = (rng.random_range(-3.0..5.0), rng.random_range(-3.0..5.0), rng.random_range(-3.0..5.0));
        if let Some(expected) = roots_stable(a2, a1, a0) {
            assert_eq!(routh_hurwitz_cubic(a2, a1, a0), expected, "({a2}, {a1}, {a0})");
            compared += 1;
        }
    }
    assert!(compared > 990);
}

#[test]
fn routh_flips_at_linearized_max() {
    let max = msd_linearized_lambda_max(1.0, 0.7).unwrap();
    let grid: Vec<f64> = (-10..=10).map(|i| max + i as f64 * 1e-7).collect();
    for l in grid {
        let (a2, a1, a0) = msd_linearized_coefficients(1.0, 0.7, l);
        assert_eq!(routh_hurwitz_cubic(a2, a1, a0), l < max, "λ = {l}");
    }
}

#[test]
fn c1_never_exceeds_c2_on_parameter_grid() {
    for i in 0..10 {
        for j in 0..10 {
            for k in 0..10 {
                let omega = 0.1 + 0.5 * i as f64;
                let zeta = 0.05 + 0.09 * j as f64;
                let beta_sq = 0.1 + 5.0 * k as f64;
                let c = msd_constants(omega, zeta, beta_sq).unwrap();
                assert!(c.c1 <= c.c2);
            }
        }
    }
}

#[test]
fn higher_order_with_zero_norm_is_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let c1 = rng.random_range(0.01..5.0);
        let c = LyapunovConstants::new(c1, c1 + rng.random_range(0.0..5.0), rng.random_range(0.01..5.0), rng.random_range(0.01..50.0)).unwrap();
        assert_eq!(lambda_bound_higher_order(&c, 0.0).unwrap(), lambda_bound_exponential(&c));
    }
}

#[test]
fn affine_bound_composes_to_b() {
    for b in [0.5, 1.0, 2.5, 20.0] {
        assert_eq!(lambda_bound_exponential(&affine_constants(b).unwrap()), b);
    }
}

proptest! {
    #[test]
    fn bounds_are_monotone(c3 in 0.01f64..5.0, c4 in 0.01f64..50.0, norm in 0.0f64..3.0, bump in 1.01f64..2.0) {
        let base = LyapunovConstants::new(0.1, 1.0, c3, c4).unwrap();
        let more_c3 = LyapunovConstants { c3: c3 * bump, ..base };
        let more_c4 = LyapunovConstants { c4: c4 * bump, ..base };
        prop_assert!(lambda_bound_exponential(&more_c3) > lambda_bound_exponential(&base));
        prop_assert!(lambda_bound_exponential(&more_c4) < lambda_bound_exponential(&base));
        let b = lambda_bound_higher_order(&base, norm).unwrap();
        prop_assert!(lambda_bound_higher_order(&more_c3, norm).unwrap() > b);
        prop_assert!(lambda_bound_higher_order(&more_c4, norm).unwrap() < b);
        prop_assert!(lambda_bound_higher_order(&base, norm * bump + 0.01).unwrap() < b);
    }

    #[test]
    fn sigma_matches_closed_form_on_any_grid(c3 in 0.01f64..5.0, c4 in 0.01f64..50.0, lo in -6.0f64..0.0, span in 1.0f64..10.0, n in 2usize..300) {
        let grid = log_grid(10f64.powf(lo), 10f64.powf(lo + span), n);
        let pair = ClassKPair::new(move |s| c3 * s * s, move |s| c4 * s, grid).unwrap();
        let cert = sigma_bound(&pair);
        let closed = sigma_quadratic(c3, c4);
        prop_assert!((cert.sigma - closed).abs() <= 1e-12 * closed.max(1.0));
        prop_assert!(cert.lambda_range().is_some());
    }
}

#[test]
fn sigma_for_unit_constants() {
    let pair = ClassKPair::with_default_grid(|s| s * s, |s| s).unwrap();
    assert!((sigma_bound(&pair).sigma - 0.5).abs() < 1e-14);
    assert_eq!(sigma_quadratic(1.0, 1.0), 0.5);
}

fn msd_probe_solver() -> SolverConfig {
    SolverConfig::adaptive(1e-9, 200.0, 0.05)
}

#[test]
fn msd_boundary_brackets_linearized_value() {
    let plant = mass_spring_damper(1.0, 0.7, SaturatedStiffness::from_beta_sq(20.0).unwrap()).unwrap();
    let solver = msd_probe_solver();
    let probe = BoundaryProbe {
        plant: &plant,
        alpha: 1.0,
        step: StepSignal::new(5.0, 0.0).unwrap(),
        solver: &solver,
        settle: SettleCriteria::default(),
    };
    let b = empirical_lambda_boundary(&probe, (0.2, 2.0), 0.05).unwrap();
    assert!(b.width() <= 0.05 || !b.inconclusive.is_empty());
    assert!((1.26..=1.54).contains(&b.stable_max) && b.unstable_min <= 1.54, "{b:?}");
    let sufficient = lambda_bound_higher_order(&msd_constants(1.0, 0.7, 20.0).unwrap(), 0.0).unwrap();
    assert!(sufficient < b.stable_max);
}

#[test]
fn linear_loop_never_destabilises() {
    let plant = linear_first_order(1.0).unwrap();
    let solver = SolverConfig::adaptive(1e-8, 200.0, 0.01);
    let probe = BoundaryProbe { plant: &plant, alpha: 1.0, step: StepSignal::new(1.0, 0.0).unwrap(), solver: &solver, settle: SettleCriteria::default() };
    match empirical_lambda_boundary(&probe, (0.1, 1e3), 0.05) {
        Err(Error::InvalidInput(msg)) => assert!(msg.contains("upper endpoint"), "{msg}"),
        other => panic!("expected an endpoint error, got {other:?}"),
    }
}

#[test]
fn cubic_at_eight_is_stable() {
    let plant = cubic_first_order(20.0).unwrap();
    let solver = SolverConfig::adaptive(1e-10, 500.0, 0.05);
    let probe = BoundaryProbe { plant: &plant, alpha: 1.0, step: StepSignal::new(1.0, 0.0).unwrap(), solver: &solver, settle: SettleCriteria::default() };
    assert_eq!(probe.classify(8.0, 500.0).unwrap(), Stability::Stable);
}

#[test]
fn bad_ranges_are_rejected() {
    let plant = linear_first_order(1.0).unwrap();
    let solver = SolverConfig::adaptive(1e-8, 50.0, 0.01);
    let probe = BoundaryProbe { plant: &plant, alpha: 1.0, step: StepSignal::new(1.0, 0.0).unwrap(), solver: &solver, settle: SettleCriteria::default() };
    assert!(empirical_lambda_boundary(&probe, (2.0, 1.0), 0.05).is_err());
    assert!(empirical_lambda_boundary(&probe, (0.0, 1.0), 0.05).is_err());
    assert!(empirical_lambda_boundary(&probe, (0.5, 1.0), 0.0).is_err());
}
