//! Benchmark problems on the unit square: the plane channel (Poiseuille flow
//! with a plug) and the lid-driven cavity.

use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{BinghamParams, VectorFn};
use crate::error::{check, Error, Result};
use crate::fixed_point::FixedPointProblem;
use crate::mesh::{Mesh, Point};
use crate::spaces::TaylorHoodSpace;

/// A closed-form velocity/pressure pair.
pub trait ExactSolution: Send + Sync {
    fn velocity(&self, x: Point) -> [f64; 2];
    /// `grad[i][j] = d u_i / d x_j`.
    fn gradient(&self, x: Point) -> [[f64; 2]; 2];
    fn pressure(&self, _x: Point) -> f64 {
        0.0
    }
}

/// Channel flow between plates at `y = 0` and `y = 1` with a plug of
/// half-width `tau_s` around the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFlow {
    pub tau_s: f64,
}

impl ChannelFlow {
    pub fn new(tau_s: f64) -> Result<Self> {
        check(tau_s.is_finite() && tau_s >= 0.0, "tau_s", || {
            format!("must be >= 0, got {tau_s}")
        })?;
        check(tau_s < 0.5, "tau_s", || {
            format!("the plug fills the channel for tau_s >= 1/2, got {tau_s}")
        })?;
        Ok(Self { tau_s })
    }

    pub fn u1(&self, y: f64) -> f64 {
        let a = 1.0 - 2.0 * self.tau_s;
        if y < 0.5 - self.tau_s {
            (a * a - (a - 2.0 * y).powi(2)) / 8.0
        } else if y <= 0.5 + self.tau_s {
            a * a / 8.0
        } else {
            (a * a - (2.0 * y - 2.0 * self.tau_s - 1.0).powi(2)) / 8.0
        }
    }

    /// `d u1 / dy`.
    pub fn du1_dy(&self, y: f64) -> f64 {
        let a = 1.0 - 2.0 * self.tau_s;
        if y < 0.5 - self.tau_s {
            (a - 2.0 * y) / 2.0
        } else if y <= 0.5 + self.tau_s {
            0.0
        } else {
            -(2.0 * y - 2.0 * self.tau_s - 1.0) / 2.0
        }
    }
}

impl ExactSolution for ChannelFlow {
    fn velocity(&self, x: Point) -> [f64; 2] {
        [self.u1(x[1]), 0.0]
    }

    fn gradient(&self, x: Point) -> [[f64; 2]; 2] {
        [[0.0, self.du1_dy(x[1])], [0.0, 0.0]]
    }
}

/// `(u1, u2, p)` of the channel solution at height `y`.
pub fn channel_exact(y: f64, tau_s: f64) -> Result<(f64, f64, f64)> {
    let c = ChannelFlow::new(tau_s)?;
    check((0.0..=1.0).contains(&y), "y", || {
        format!("must lie in [0, 1], got {y}")
    })?;
    Ok((c.u1(y), 0.0, 0.0))
}

/// Value taken by the cavity corners where the lid meets the side walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CornerPolicy {
    /// Corners move with the lid.
    #[default]
    LidWins,
    /// Corners are held at rest with the side walls.
    Watertight,
}

impl FromStr for CornerPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "lid-wins" | "lid" => Ok(Self::LidWins),
            "watertight" => Ok(Self::Watertight),
            other => Err(Error::InvalidParameter {
                name: "corner_policy",
                reason: format!("expected lid-wins or watertight, got `{other}`"),
            }),
        }
    }
}

impl CornerPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LidWins => "lid-wins",
            Self::Watertight => "watertight",
        }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    /// Subdivisions per side of the unit square.
    pub n: usize,
    pub params: BinghamParams,
    pub dirichlet: VectorFn,
    pub forcing: Option<VectorFn>,
    pub exact: Option<Arc<dyn ExactSolution>>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("params", &self.params)
            .field("forcing", &self.forcing.is_some())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn build_space(&self, quad_degree: usize) -> Result<Arc<TaylorHoodSpace>> {
        let mesh = Arc::new(Mesh::build_uniform_unit_square(self.n)?);
        let bc = self.dirichlet.clone();
        Ok(Arc::new(TaylorHoodSpace::new(
            mesh,
            quad_degree,
            &move |x| bc(x),
        )?))
    }

    pub fn build(&self, quad_degree: usize) -> Result<FixedPointProblem> {
        FixedPointProblem::new(
            self.build_space(quad_degree)?,
            self.params,
            self.forcing.clone(),
        )
    }
}

/// Channel flow with the exact solution imposed on the whole boundary and `f = 0`.
pub fn make_channel_problem(n: usize, eps: f64, tau_s: f64, mu: f64) -> Result<ProblemSpec> {
    check(n >= 2, "n", || {
        format!("need at least 2 subdivisions, got {n}")
    })?;
    let params = BinghamParams::new(mu, tau_s, eps)?;
    let exact = Arc::new(ChannelFlow::new(tau_s)?);
    let bc = exact.clone();
    Ok(ProblemSpec {
        name: "channel".into(),
        n,
        params,
        dirichlet: Arc::new(move |x| bc.velocity(x)),
        forcing: None,
        exact: Some(exact),
    })
}

/// Lid-driven cavity: `u = (1, 0)` on `y = 1`, no slip elsewhere.
pub fn make_cavity_problem(
    n: usize,
    eps: f64,
    tau_s: f64,
    mu: f64,
    corners: CornerPolicy,
) -> Result<ProblemSpec> {
    check(n >= 2, "n", || {
        format!("need at least 2 subdivisions, got {n}")
    })?;
    let params = BinghamParams::new(mu, tau_s, eps)?;
    let dirichlet: VectorFn = Arc::new(move |x: Point| {
        let on_side = x[0] == 0.0 || x[0] == 1.0;
        if x[1] == 1.0 && !(corners == CornerPolicy::Watertight && on_side) {
            [1.0, 0.0]
        } else {
            [0.0, 0.0]
        }
    });
    Ok(ProblemSpec {
        name: "cavity".into(),
        n,
        params,
        dirichlet,
        forcing: None,
        exact: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_values() {
        let c = ChannelFlow::new(0.3).unwrap();
        assert!((c.u1(0.5) - 0.02).abs() < 1e-15);
        assert_eq!(c.u1(0.0), 0.0);
        assert!((c.u1(0.1) - 0.015).abs() < 1e-15);
        assert!(c.u1(1.0).abs() < 1e-15);
        assert_eq!(channel_exact(0.5, 0.3).unwrap(), (c.u1(0.5), 0.0, 0.0));
    }

    #[test]
    fn channel_rejects_full_plug() {
        for t in [0.5, 0.7, -0.1, f64::NAN] {
            assert!(matches!(
                ChannelFlow::new(t),
                Err(Error::InvalidParameter { name: "tau_s", .. })
            ));
        }
        assert!(channel_exact(1.5, 0.3).is_err());
    }

    #[test]
    fn zero_yield_stress_is_the_parabola() {
        let c = ChannelFlow::new(0.0).unwrap();
        for i in 0..=20 {
            let y = i as f64 / 20.0;
            assert!((c.u1(y) - y * (1.0 - y) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn channel_is_symmetric_and_c1() {
        let c = ChannelFlow::new(0.3).unwrap();
        for i in 0..=50 {
            let y = i as f64 / 50.0;
            assert!((c.u1(y) - c.u1(1.0 - y)).abs() < 1e-15);
        }
        for y0 in [0.2, 0.8] {
            let d = 1e-7;
            assert!((c.u1(y0 + d) - c.u1(y0 - d)).abs() < 1e-12);
            assert!(c.du1_dy(y0 - d).abs() < 1e-6 && c.du1_dy(y0 + d).abs() < 1e-6);
            let fd = (c.u1(y0 - d) - c.u1(y0 - 3.0 * d)) / (2.0 * d);
            assert!((fd - c.du1_dy(y0 - 2.0 * d)).abs() < 1e-7);
        }
    }

    #[test]
    fn channel_boundary_data() {
        let p = make_channel_problem(4, 1e-2, 0.3, 1.0).unwrap();
        assert_eq!((p.dirichlet)([0.3, 0.0]), [0.0, 0.0]);
        assert_eq!((p.dirichlet)([0.7, 1.0])[1], 0.0);
        assert!(((p.dirichlet)([0.0, 0.5])[0] - 0.02).abs() < 1e-15);
        let space = p.build_space(5).unwrap();
        let exact = p.exact.as_ref().unwrap();
        for (&d, &g) in space.dirichlet_dofs().iter().zip(space.dirichlet_values()) {
            let v = exact.velocity(space.node_coords(d / 2))[d % 2];
            assert!((g - v).abs() <= 1e-14);
        }
    }

    #[test]
    fn channel_rejects_coarse_mesh() {
        assert!(make_channel_problem(1, 1e-2, 0.3, 1.0).is_err());
        assert!(make_channel_problem(4, 0.0, 0.3, 1.0).is_err());
    }

    #[test]
    fn cavity_boundary_data() {
        let lid = make_cavity_problem(4, 1e-4, 2.0, 1.0, CornerPolicy::default()).unwrap();
        assert_eq!((lid.dirichlet)([0.5, 1.0]), [1.0, 0.0]);
        assert_eq!((lid.dirichlet)([0.5, 0.0]), [0.0, 0.0]);
        assert_eq!((lid.dirichlet)([0.0, 1.0]), [1.0, 0.0]);
        assert_eq!((lid.dirichlet)([1.0, 0.5]), [0.0, 0.0]);
        assert!(lid.exact.is_none());
        let tight = make_cavity_problem(4, 1e-4, 2.0, 1.0, CornerPolicy::Watertight).unwrap();
        assert_eq!((tight.dirichlet)([0.0, 1.0]), [0.0, 0.0]);
        assert_eq!((tight.dirichlet)([1.0, 1.0]), [0.0, 0.0]);
        assert_eq!((tight.dirichlet)([0.5, 1.0]), [1.0, 0.0]);
    }

    #[test]
    fn corner_policy_parsing() {
        assert_eq!(
            "lid-wins".parse::<CornerPolicy>().unwrap(),
            CornerPolicy::LidWins
        );
        assert_eq!(
            "Watertight".parse::<CornerPolicy>().unwrap(),
            CornerPolicy::Watertight
        );
        assert!("leaky".parse::<CornerPolicy>().is_err());
    }
}
