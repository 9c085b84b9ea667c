//! Post-processing of computed fields: errors against closed-form solutions,
//! observed convergence rates, rigid-zone extraction and line profiles.

use crate::error::{check, Error, Result};
use crate::problems::ExactSolution;
use crate::spaces::quadrature::Quadrature;
use crate::spaces::{State, SymTensor, TaylorHoodSpace};

/// Degree of the rule used for error integrals unless a higher one is asked for.
pub const ERROR_QUAD_DEGREE: usize = 10;

fn error_rule(space: &TaylorHoodSpace, degree: Option<usize>) -> Result<Quadrature> {
    let d = degree
        .unwrap_or(ERROR_QUAD_DEGREE)
        .max(space.quadrature().degree);
    Quadrature::with_degree(d)
}

/// `||D(u - u_h)||` with the default error rule.
pub fn h1_seminorm_error(
    space: &TaylorHoodSpace,
    state: &State,
    exact: Option<&dyn ExactSolution>,
) -> Result<f64> {
    h1_seminorm_error_with(space, &state.u, exact, None)
}

pub fn h1_seminorm_error_with(
    space: &TaylorHoodSpace,
    u: &[f64],
    exact: Option<&dyn ExactSolution>,
    degree: Option<usize>,
) -> Result<f64> {
    let exact = exact.ok_or_else(|| Error::MissingExactSolution("h1 error".into()))?;
    let rule = error_rule(space, degree)?;
    let mut acc = 0.0;
    for t in 0..space.num_triangles() {
        let g = space.geometry(t);
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            let x = g.map_point([b[1], b[2]]);
            let de = SymTensor::sym_part(exact.gradient(x));
            let dh = space.symmetric_gradient_at(u, t, *b);
            let d = de.sub(&dh);
            acc += w * g.det * d.ddot(&d);
        }
    }
    Ok(acc.sqrt())
}

/// `L2` velocity error and mean-free `L2` pressure error.
pub fn l2_errors(
    space: &TaylorHoodSpace,
    state: &State,
    exact: Option<&dyn ExactSolution>,
) -> Result<(f64, f64)> {
    let exact = exact.ok_or_else(|| Error::MissingExactSolution("l2 error".into()))?;
    let rule = error_rule(space, None)?;
    // mean of the exact pressure, so both sides are compared in L2_0
    let mut pe_mean = 0.0;
    let mut area = 0.0;
    for t in 0..space.num_triangles() {
        let g = space.geometry(t);
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            pe_mean += w * g.det * exact.pressure(g.map_point([b[1], b[2]]));
            area += w * g.det;
        }
    }
    pe_mean /= area;
    let ph_mean = space.pressure_mean(&state.p);
    let (mut eu, mut ep) = (0.0, 0.0);
    for t in 0..space.num_triangles() {
        let g = space.geometry(t);
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            let x = g.map_point([b[1], b[2]]);
            let ue = exact.velocity(x);
            let uh = space.velocity_at(&state.u, t, *b);
            eu += w * g.det * ((ue[0] - uh[0]).powi(2) + (ue[1] - uh[1]).powi(2));
            let dp = (exact.pressure(x) - pe_mean) - (space.pressure_at(&state.p, t, *b) - ph_mean);
            ep += w * g.det * dp * dp;
        }
    }
    Ok((eu.sqrt(), ep.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: f64,
    /// `log(e_prev / e) / log(h_prev / h)`; absent on the first row.
    pub rate: Option<f64>,
}

pub fn rate_table(rows: &[(f64, f64)]) -> Result<Vec<ConvergenceRow>> {
    check(rows.len() >= 2, "rows", || {
        format!("need at least 2 rows, got {}", rows.len())
    })?;
    for w in rows.windows(2) {
        check(w[1].0 < w[0].0, "h", || {
            format!("must be strictly decreasing: {} then {}", w[0].0, w[1].0)
        })?;
    }
    check(rows.iter().all(|r| r.0 > 0.0 && r.1 > 0.0), "error", || {
        "mesh sizes and errors must be positive".into()
    })?;
    Ok(rows
        .iter()
        .enumerate()
        .map(|(i, &(h, error))| ConvergenceRow {
            h,
            error,
            rate: (i > 0).then(|| {
                let (hp, ep) = rows[i - 1];
                (ep / error).ln() / (hp / h).ln()
            }),
        })
        .collect())
}

/// Mean of the defined rates.
pub fn average_rate(rows: &[ConvergenceRow]) -> Option<f64> {
    let r: Vec<f64> = rows.iter().filter_map(|r| r.rate).collect();
    (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RigidRegionMap {
    pub threshold: f64,
    /// Per triangle: `|Du|` at the centroid is below the threshold.
    pub rigid: Vec<bool>,
    /// Rigid area over total area.
    pub fraction: f64,
}

pub fn rigid_region(
    space: &TaylorHoodSpace,
    state: &State,
    threshold: f64,
) -> Result<RigidRegionMap> {
    check(
        threshold > 0.0 && threshold.is_finite(),
        "rigid_threshold",
        || format!("must be > 0, got {threshold}"),
    )?;
    let centre = [1.0 / 3.0; 3];
    let mut rigid = Vec::with_capacity(space.num_triangles());
    let (mut area, mut total) = (0.0, 0.0);
    for t in 0..space.num_triangles() {
        let a = space.geometry(t).area();
        let r = space.symmetric_gradient_at(&state.u, t, centre).frobenius() < threshold;
        if r {
            area += a;
        }
        total += a;
        rigid.push(r);
    }
    Ok(RigidRegionMap {
        threshold,
        rigid,
        fraction: area / total,
    })
}

/// `|Du|` at each triangle centroid.
pub fn centroid_strain_rates(space: &TaylorHoodSpace, u: &[f64]) -> Vec<f64> {
    (0..space.num_triangles())
        .map(|t| {
            space
                .symmetric_gradient_at(u, t, [1.0 / 3.0; 3])
                .frobenius()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// `u1` along the vertical line `x = 1/2`, parametrized by `y`.
    Vertical,
    /// `u2` along the horizontal line `y = 1/2`, parametrized by `x`.
    Horizontal,
}

/// `samples + 1` equispaced point values along a centerline, endpoints included.
pub fn centerline_profile(
    space: &TaylorHoodSpace,
    state: &State,
    axis: Axis,
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    check(samples >= 1, "samples", || {
        "need at least one interval".into()
    })?;
    (0..=samples)
        .map(|i| {
            let s = i as f64 / samples as f64;
            let (x, c) = match axis {
                Axis::Vertical => ([0.5, s], 0),
                Axis::Horizontal => ([s, 0.5], 1),
            };
            let v = space
                .eval_velocity(&state.u, x)
                .ok_or_else(|| Error::Input(format!("sample point {x:?} is outside the mesh")))?;
            Ok((s, v[c]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;
    use crate::problems::ChannelFlow;
    use crate::spaces::State;
    use std::sync::Arc;

    struct Quadratic;

    impl ExactSolution for Quadratic {
        fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
            [x[1] * x[1] - x[0] * x[1], 0.5 * x[0] * x[0] + x[1]]
        }

        fn gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
            [[-x[1], 2.0 * x[1] - x[0]], [x[0], 1.0]]
        }
    }

    fn space(n: usize) -> TaylorHoodSpace {
        TaylorHoodSpace::new(
            Arc::new(Mesh::build_uniform_unit_square(n).unwrap()),
            5,
            &|_| [0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn interpolated_quadratic_has_no_error() {
        let s = space(3);
        let u = s.interpolate(|x| Quadratic.velocity(x));
        let st = State {
            u,
            p: vec![0.0; s.pressure_dof_count()],
        };
        assert!(h1_seminorm_error(&s, &st, Some(&Quadratic)).unwrap() <= 1e-12);
        let (eu, ep) = l2_errors(&s, &st, Some(&Quadratic)).unwrap();
        assert!(eu <= 1e-13 && ep <= 1e-13);
    }

    #[test]
    fn missing_exact_solution() {
        let s = space(2);
        let st = s.initial_state();
        assert!(matches!(
            h1_seminorm_error(&s, &st, None),
            Err(Error::MissingExactSolution(_))
        ));
    }

    #[test]
    fn zero_field_against_channel() {
        // ||D u|| of the channel profile: int (u')^2 / 2 over the fluid bands.
        let s = space(5);
        let st = s.initial_state();
        let c = ChannelFlow::new(0.3).unwrap();
        let e = h1_seminorm_error_with(&s, &st.u, Some(&c), Some(20)).unwrap();
        // 2 * int_0^0.2 (0.2 - y)^2 dy / 2 = 0.2^3 / 3
        assert!((e * e - 0.008 / 3.0).abs() < 1e-12, "{e}");
    }

    #[test]
    fn rate_examples() {
        let t = rate_table(&[(1.0 / 8.0, 1e-2), (1.0 / 16.0, 2.5e-3)]).unwrap();
        assert_eq!(t[0].rate, None);
        assert!((t[1].rate.unwrap() - 2.0).abs() < 1e-12);
        let t = rate_table(&[(1.0 / 32.0, 6.6056e-4), (1.0 / 64.0, 1.4539e-4)]).unwrap();
        assert!((t[1].rate.unwrap() - 2.18).abs() < 5e-3);
        let t = rate_table(&[(0.5, 3.0), (0.25, 3.0), (0.125, 3.0)]).unwrap();
        assert!(t[1..].iter().all(|r| r.rate.unwrap().abs() < 1e-15));
        assert_eq!(average_rate(&t), Some(0.0));
    }

    #[test]
    fn rate_table_preconditions() {
        assert!(rate_table(&[(0.5, 1.0)]).is_err());
        assert!(rate_table(&[(0.25, 1.0), (0.5, 0.5)]).is_err());
        assert!(rate_table(&[(0.5, 1.0), (0.25, 0.0)]).is_err());
    }

    #[test]
    fn synthetic_power_laws() {
        for p in [0.5, 1.0, 1.4, 2.0] {
            let rows: Vec<(f64, f64)> = (2..8)
                .map(|k| {
                    let h = 0.5f64.powi(k);
                    (h, 3.7 * h.powf(p))
                })
                .collect();
            for r in rate_table(&rows).unwrap().iter().skip(1) {
                assert!((r.rate.unwrap() - p).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rigid_region_examples() {
        let s = space(4);
        let st = s.initial_state();
        let r = rigid_region(&s, &st, 1e-2).unwrap();
        assert_eq!(r.fraction, 1.0);
        assert!(r.rigid.iter().all(|&b| b));
        assert!(rigid_region(&s, &st, 0.0).is_err());

        let u = s.interpolate(|x| [x[1] * x[1], 0.0]);
        let st = State { u, p: st.p };
        let small = rigid_region(&s, &st, 0.1).unwrap();
        let big = rigid_region(&s, &st, 0.5).unwrap();
        assert!(small.fraction <= big.fraction);
        for (a, b) in small.rigid.iter().zip(&big.rigid) {
            assert!(!a || *b);
        }
    }

    #[test]
    fn profile_hits_endpoints() {
        let s = space(4);
        let u = s.interpolate(|x| [x[1], x[0] * (1.0 - x[0])]);
        let st = State {
            u,
            p: vec![0.0; s.pressure_dof_count()],
        };
        let v = centerline_profile(&s, &st, Axis::Vertical, 8).unwrap();
        assert_eq!(v.len(), 9);
        assert!(v[0].1.abs() < 1e-14 && (v[8].1 - 1.0).abs() < 1e-14);
        assert!((v[3].1 - 3.0 / 8.0).abs() < 1e-14);
        let h = centerline_profile(&s, &st, Axis::Horizontal, 4).unwrap();
        assert!((h[2].1 - 0.25).abs() < 1e-14);
    }
}
