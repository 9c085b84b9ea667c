use bingham_core::anderson::solve_picard;
use bingham_core::assembly::{d_norm, grad_norm};
use bingham_core::fixed_point::{FixedPointProblem, ResidualNorm};
use bingham_core::problems::{make_cavity_problem, make_channel_problem, CornerPolicy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn channel(n: usize, eps: f64, tau: f64) -> FixedPointProblem {
    make_channel_problem(n, eps, tau, 1.0)
        .unwrap()
        .build(5)
        .unwrap()
}

/// A field with the problem's boundary values and random interior values.
fn random_admissible(p: &FixedPointProblem, rng: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
    let mut u: Vec<f64> = (0..p.space().velocity_dof_count())
        .map(|_| scale * rng.gen_range(-1.0..1.0))
        .collect();
    p.space().apply_dirichlet(&mut u);
    u
}

fn random_direction(p: &FixedPointProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut h: Vec<f64> = (0..p.space().velocity_dof_count())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    p.space().zero_dirichlet(&mut h);
    h
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| a * x + y).collect()
}

#[test]
fn g_without_yield_stress_ignores_its_argument() {
    let p = channel(6, 1e-2, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = p.apply_g(&random_admissible(&p, &mut rng, 1.0)).unwrap();
    let b = p.apply_g(&random_admissible(&p, &mut rng, 0.1)).unwrap();
    let scale = a.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.u.iter().zip(&b.u) {
        assert!((x - y).abs() <= 1e-12 * scale);
    }
}

#[test]
fn g_is_bitwise_deterministic() {
    let p = make_cavity_problem(6, 1e-4, 5.0, 1.0, CornerPolicy::LidWins)
        .unwrap()
        .build(5)
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = random_admissible(&p, &mut rng, 0.5);
    let a = p.apply_g(&u).unwrap();
    let b = p.apply_g(&u).unwrap();
    let fresh = make_cavity_problem(6, 1e-4, 5.0, 1.0, CornerPolicy::LidWins)
        .unwrap()
        .build(5)
        .unwrap()
        .apply_g(&u)
        .unwrap();
    assert_eq!(a, b);
    assert_eq!(a, fresh);
}

#[test]
fn one_picard_step_solves_the_stokes_problem() {
    let p = channel(6, 1e-2, 0.0);
    let g0 = p.apply_g(&p.initial_state().u).unwrap();
    let (w, n) = p.residual(&g0.u, ResidualNorm::L2).unwrap();
    let (_, n0) = p.residual(&p.initial_state().u, ResidualNorm::L2).unwrap();
    assert!(n <= 1e-13 * n0, "{n} vs {n0}");
    assert!(w.iter().all(|v| v.abs() < 1e-13));
}

#[test]
fn picard_residuals_decrease_early_on() {
    let p = channel(8, 1e-2, 0.3);
    let out = solve_picard(&p, ResidualNorm::L2, 1e-8, 10).unwrap();
    assert_eq!(out.trace.len(), 10);
    for w in out.trace.windows(2) {
        assert!(w[1].residual_norm < w[0].residual_norm, "{:?}", w);
    }
}

#[test]
fn converged_state_is_a_fixed_point() {
    let p = channel(6, 1e-2, 0.3);
    let out = solve_picard(&p, ResidualNorm::L2, 1e-8, 500).unwrap();
    assert!(out.converged);
    let first = out.trace[0].residual_norm;
    let (_, n) = p.residual(&out.state.u, ResidualNorm::L2).unwrap();
    assert!(n <= 1e-8 * first, "{n} vs {first}");
}

#[test]
fn picard_iterates_stay_bounded_by_the_first() {
    for eps in [1e-1, 1e-3] {
        let p = channel(8, eps, 0.3);
        let out = solve_picard(&p, ResidualNorm::L2, 1e-8, 60).unwrap();
        let first = grad_norm(p.space(), &out.iterates[1]);
        for u in &out.iterates[1..] {
            assert!(grad_norm(p.space(), u) <= 2.0 * first);
        }
    }
}

#[test]
fn empirical_lipschitz_ratios_are_finite() {
    for eps in [1e-1, 1e-2, 1e-3] {
        let p = channel(4, eps, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let u = random_admissible(&p, &mut rng, 0.1);
            let w = random_admissible(&p, &mut rng, 0.1);
            let gu = p.apply_g(&u).unwrap().u;
            let gw = p.apply_g(&w).unwrap().u;
            let ratio = d_norm(p.space(), &sub(&gu, &gw)) / d_norm(p.space(), &sub(&u, &w));
            assert!(ratio.is_finite());
            worst = worst.max(ratio);
        }
        assert!(worst.is_finite() && worst > 0.0);
    }
}

#[test]
fn g_prime_of_zero_direction_is_zero() {
    let p = channel(4, 1e-1, 0.3);
    let u = p.apply_g(&p.initial_state().u).unwrap().u;
    let zero = vec![0.0; u.len()];
    assert!(p
        .apply_g_prime(&u, &zero)
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));
}

#[test]
fn g_prime_remainder_is_second_order() {
    let p = channel(4, 1e-1, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = p.apply_g(&p.initial_state().u).unwrap().u;
    let h = random_direction(&p, &mut rng);
    let scale = d_norm(p.space(), &u) / d_norm(p.space(), &h);
    let h: Vec<f64> = h.iter().map(|v| v * scale).collect();
    let gu = p.apply_g(&u).unwrap().u;
    let dg = p.apply_g_prime_with(&u, &gu, &h).unwrap();
    let r = |t: f64| {
        let gt = p.apply_g(&axpy(t, &h, &u)).unwrap().u;
        let rem: Vec<f64> = gt
            .iter()
            .zip(&gu)
            .zip(&dg)
            .map(|((a, b), d)| a - b - t * d)
            .collect();
        d_norm(p.space(), &rem)
    };
    let ts = [1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3];
    let rs: Vec<f64> = ts.iter().map(|&t| r(t)).collect();
    for w in rs.windows(2) {
        let q = w[1] / w[0];
        assert!((0.2..=0.32).contains(&q), "{rs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn g_prime_is_linear_in_the_direction(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let p = channel(3, 1e-2, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_admissible(&p, &mut rng, 0.2);
        let h1 = random_direction(&p, &mut rng);
        let h2 = random_direction(&p, &mut rng);
        let gu = p.apply_g(&u).unwrap().u;
        let d1 = p.apply_g_prime_with(&u, &gu, &h1).unwrap();
        let d2 = p.apply_g_prime_with(&u, &gu, &h2).unwrap();
        let combo: Vec<f64> = h1.iter().zip(&h2).map(|(x, y)| a * x + b * y).collect();
        let d = p.apply_g_prime_with(&u, &gu, &combo).unwrap();
        let scale = d1.iter().chain(&d2).fold(0.0f64, |m, v| m.max(v.abs())) * (a.abs() + b.abs()) + 1e-300;
        for i in 0..d.len() {
            prop_assert!((d[i] - a * d1[i] - b * d2[i]).abs() <= 1e-10 * scale);
        }
    }
}
