use bingham_core::anderson::{
    least_squares, solve_accelerated, solve_picard, AAConfig, AAHistory, Damping,
};
use bingham_core::assembly::max_divergence_moment;
use bingham_core::fixed_point::{FixedPointProblem, ResidualNorm};
use bingham_core::problems::{make_cavity_problem, make_channel_problem, CornerPolicy};

fn channel(n: usize, eps: f64, tau: f64) -> FixedPointProblem {
    make_channel_problem(n, eps, tau, 1.0)
        .unwrap()
        .build(5)
        .unwrap()
}

#[test]
fn depth_zero_reproduces_picard_bitwise() {
    let p = channel(8, 1e-2, 0.3);
    let mut cfg = AAConfig::with_depth(0);
    cfg.record_iterates = true;
    let aa = solve_accelerated(&p, &cfg).unwrap();
    let picard = solve_picard(&p, cfg.stop_norm, cfg.tol, cfg.max_iter).unwrap();
    assert_eq!(aa.iterations, picard.iterations);
    assert_eq!(aa.iterates, picard.iterates);
    assert_eq!(aa.state, picard.state);
    for (a, b) in aa.trace.iter().zip(&picard.trace) {
        assert_eq!(a.residual_norm, b.residual_norm);
        assert_eq!(a.relative_residual, b.relative_residual);
    }
}

#[test]
fn stokes_converges_in_two_iterations_for_any_depth() {
    for m in [0, 1, 5, 10] {
        let p = channel(6, 1e-3, 0.0);
        let out = solve_accelerated(&p, &AAConfig::with_depth(m)).unwrap();
        assert!(
            out.converged && out.iterations <= 2,
            "m={m}: {}",
            out.iterations
        );
        let cav = make_cavity_problem(6, 1e-3, 0.0, 1.0, CornerPolicy::LidWins)
            .unwrap()
            .build(5)
            .unwrap();
        let out = solve_accelerated(&cav, &AAConfig::with_depth(m)).unwrap();
        assert!(out.converged && out.iterations <= 2);
    }
}

#[test]
fn trace_is_consistent_and_gains_are_bounded() {
    let p = channel(8, 1e-3, 0.3);
    let out = solve_accelerated(&p, &AAConfig::with_depth(5)).unwrap();
    assert!(out.converged);
    assert_eq!(out.trace.len(), out.iterations);
    let first = out.trace[0].residual_norm;
    for (i, rec) in out.trace.iter().enumerate() {
        assert_eq!(rec.k, i + 1);
        assert!((rec.relative_residual - rec.residual_norm / first).abs() <= 1e-15);
        if let Some(step) = &rec.step {
            assert!(step.theta <= 1.0 + 1e-14, "{}", step.theta);
            assert!(step.columns_used <= 5);
            assert_eq!(step.gamma.len(), step.columns_used);
        }
    }
    assert!(out.trace.last().unwrap().step.is_none());
    assert!(out.relative_residual <= 1e-8);
}

#[test]
fn least_squares_residual_is_orthogonal_on_a_real_history() {
    let p = channel(6, 1e-2, 0.3);
    for norm in [ResidualNorm::Dof, ResidualNorm::L2, ResidualNorm::H1] {
        let metric = p.metric(norm);
        let mut history = AAHistory::new(4, 0.0, metric.clone());
        let mut x = p.initial_state().u;
        for k in 1..=6 {
            let g = p.apply_g(&x).unwrap().u;
            let w: Vec<f64> = g.iter().zip(&x).map(|(a, b)| a - b).collect();
            if !history.is_empty() {
                let all: Vec<Vec<f64>> = history.residual_diffs().cloned().collect();
                let (gamma, theta) = least_squares(&all, &w, &metric);
                assert!(theta <= 1.0);
                let mut r = w.clone();
                for (c, gm) in all.iter().zip(&gamma) {
                    for (ri, ci) in r.iter_mut().zip(c) {
                        *ri -= gm * ci;
                    }
                }
                let rn = metric.norm(&r);
                for c in &all {
                    let cos = metric.dot(&r, c) / (metric.norm(c) * metric.norm(&w));
                    assert!(cos.abs() <= 1e-10, "k={k} {norm:?} {cos} {rn}");
                }
            }
            let (next, _) = history.step(&x, &g, 1.0);
            x = next;
        }
    }
}

#[test]
fn damping_and_safeguard_still_converge() {
    let p = channel(8, 1e-2, 0.3);
    let mut cfg = AAConfig::with_depth(5);
    cfg.damping = Damping::Constant(0.7);
    let damped = solve_accelerated(&p, &cfg).unwrap();
    assert!(damped.converged);
    cfg.damping = Damping::Constant(1.0);
    cfg.c_s = 0.5;
    let guarded = solve_accelerated(&p, &cfg).unwrap();
    assert!(guarded.converged);
    let dropped: usize = guarded
        .trace
        .iter()
        .filter_map(|r| r.step.as_ref())
        .map(|s| s.columns_dropped)
        .sum();
    assert!(dropped > 0);
}

#[test]
fn optimization_norms_all_converge() {
    let p = channel(8, 1e-2, 0.3);
    for norm in [ResidualNorm::Dof, ResidualNorm::L2, ResidualNorm::H1] {
        let mut cfg = AAConfig::with_depth(3);
        cfg.opt_norm = norm;
        let out = solve_accelerated(&p, &cfg).unwrap();
        assert!(out.converged, "{norm:?}");
        assert!(out.iterations < 34, "{norm:?}: {}", out.iterations);
    }
}

#[test]
fn converged_solutions_are_discretely_divergence_free() {
    let cases = [
        channel(8, 1e-3, 0.3),
        make_cavity_problem(8, 1e-4, 5.0, 1.0, CornerPolicy::LidWins)
            .unwrap()
            .build(5)
            .unwrap(),
        make_cavity_problem(8, 1e-4, 2.0, 1.0, CornerPolicy::Watertight)
            .unwrap()
            .build(5)
            .unwrap(),
    ];
    for p in &cases {
        let out = solve_accelerated(p, &AAConfig::with_depth(5)).unwrap();
        assert!(out.converged);
        assert!(max_divergence_moment(p.space(), &out.state.u) <= 1e-10);
        assert!(p.space().pressure_mean(&out.state.p).abs() <= 1e-12);
    }
}

#[test]
fn hitting_the_iteration_cap_is_reported() {
    let p = channel(8, 1e-3, 0.3);
    let mut cfg = AAConfig::with_depth(0);
    cfg.max_iter = 5;
    let out = solve_accelerated(&p, &cfg).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations, 5);
    assert!(out.relative_residual > cfg.tol);
}
