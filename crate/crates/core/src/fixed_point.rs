//! The Picard solution operator `G`, its residual and its directional
//! derivative `G'`.
//!
//! `G(u)` solves the Stokes-type problem whose viscosity is frozen at `u`:
//!
//! ```text
//! 2 mu (D G(u), Dv) + tau_s (D G(u) / |Du|_eps, Dv) - (p, div v) = (f, v)
//!                                                    (q, div G(u)) = 0
//! ```
//!
//! and `G'(u; h)` solves the same left-hand side with right-hand side
//! `tau_s ((Du : Dh) / |Du|_eps^3 D G(u), Dv)` and homogeneous boundary data.

use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use crate::assembly::{self, BinghamParams, SaddlePattern, VectorFn};
use crate::error::{Error, Result};
use crate::linsolve::{SaddleSolution, SaddleSolver};
use crate::spaces::{basis_sym_grad, sym_grad_from, State, TaylorHoodSpace};
use crate::sparse::CsrMatrix;

/// Which norm measures velocity-space vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ResidualNorm {
    /// Euclidean norm of the coefficient vector.
    #[default]
    Dof,
    /// `L2` norm of the finite-element field (mass-weighted).
    L2,
    /// `||Dv||`, weighted by the symmetric-gradient Gram matrix.
    H1,
}

impl ResidualNorm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Dof => "dof",
            Self::L2 => "l2",
            Self::H1 => "h1",
        }
    }
}

impl FromStr for ResidualNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dof" | "euclidean" => Ok(Self::Dof),
            "l2" => Ok(Self::L2),
            "h1" => Ok(Self::H1),
            other => Err(Error::InvalidParameter {
                name: "norm",
                reason: format!("expected one of dof, l2, h1; got `{other}`"),
            }),
        }
    }
}

/// A realized inner product on velocity coefficient vectors.
#[derive(Debug, Clone)]
pub enum Metric {
    Euclidean,
    Gram(Arc<CsrMatrix>),
}

impl Metric {
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Self::Euclidean => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Self::Gram(m) => m.bilinear(a, b),
        }
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).max(0.0).sqrt()
    }
}

pub struct FixedPointProblem {
    space: Arc<TaylorHoodSpace>,
    params: BinghamParams,
    forcing: Option<VectorFn>,
    pattern: SaddlePattern,
    solver: SaddleSolver,
    mass: OnceLock<Arc<CsrMatrix>>,
    gram: OnceLock<Arc<CsrMatrix>>,
}

impl std::fmt::Debug for FixedPointProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FixedPointProblem")
            .field("params", &self.params)
            .field("velocity_dofs", &self.space.velocity_dof_count())
            .field("pressure_dofs", &self.space.pressure_dof_count())
            .finish()
    }
}

impl FixedPointProblem {
    pub fn new(
        space: Arc<TaylorHoodSpace>,
        params: BinghamParams,
        forcing: Option<VectorFn>,
    ) -> Result<Self> {
        params.validate()?;
        let pattern = SaddlePattern::new(&space);
        let solver = SaddleSolver::new(&space, &pattern)?;
        Ok(Self {
            space,
            params,
            forcing,
            pattern,
            solver,
            mass: OnceLock::new(),
            gram: OnceLock::new(),
        })
    }

    pub fn space(&self) -> &Arc<TaylorHoodSpace> {
        &self.space
    }

    pub fn params(&self) -> &BinghamParams {
        &self.params
    }

    /// Zero velocity with the boundary lift applied.
    pub fn initial_state(&self) -> State {
        self.space.initial_state()
    }

    pub fn mass_matrix(&self) -> &Arc<CsrMatrix> {
        self.mass
            .get_or_init(|| Arc::new(assembly::mass_matrix(&self.space)))
    }

    pub fn d_gram_matrix(&self) -> &Arc<CsrMatrix> {
        self.gram
            .get_or_init(|| Arc::new(assembly::d_gram_matrix(&self.space)))
    }

    pub fn metric(&self, norm: ResidualNorm) -> Metric {
        match norm {
            ResidualNorm::Dof => Metric::Euclidean,
            ResidualNorm::L2 => Metric::Gram(self.mass_matrix().clone()),
            ResidualNorm::H1 => Metric::Gram(self.d_gram_matrix().clone()),
        }
    }

    pub fn norm(&self, norm: ResidualNorm, v: &[f64]) -> f64 {
        self.metric(norm).norm(v)
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        let n = self.space.velocity_dof_count();
        if v.len() != n {
            return Err(Error::Input(format!(
                "velocity vector has length {}, expected {n}",
                v.len()
            )));
        }
        Ok(())
    }

    /// `G(u)` together with the linear-solve diagnostics.
    pub fn apply_g_full(&self, u: &[f64]) -> Result<SaddleSolution> {
        self.check_len(u)?;
        let sys = assembly::assemble_linearized_with(
            &self.space,
            self.pattern.clone(),
            u,
            &self.params,
            self.forcing.as_ref(),
            Some(self.space.dirichlet_values()),
        )?;
        self.solver.solve(&sys)
    }

    pub fn apply_g(&self, u: &[f64]) -> Result<State> {
        self.apply_g_full(u).map(|s| s.state)
    }

    /// `w = G(u) - u` (velocity part) and its norm.
    pub fn residual(&self, u: &[f64], norm: ResidualNorm) -> Result<(Vec<f64>, f64)> {
        let g = self.apply_g(u)?;
        let w: Vec<f64> = g.u.iter().zip(u).map(|(g, u)| g - u).collect();
        let n = self.norm(norm, &w);
        Ok((w, n))
    }

    /// `G'(u; h)`; `h` must vanish on the boundary.
    pub fn apply_g_prime(&self, u: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        let g = self.apply_g(u)?;
        self.apply_g_prime_with(u, &g.u, h)
    }

    /// `G'(u; h)` reusing a precomputed `G(u)`.
    pub fn apply_g_prime_with(&self, u: &[f64], g_of_u: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        self.check_len(g_of_u)?;
        self.check_len(h)?;
        let space = &self.space;
        let mut sys = assembly::assemble_linearized_with(
            space,
            self.pattern.clone(),
            u,
            &self.params,
            None,
            None,
        )?;
        let free = space.free_index_raw();
        let (tau, eps) = (self.params.tau_s, self.params.eps);
        if tau > 0.0 {
            for t in 0..space.num_triangles() {
                let (lu, lg, lh) = (
                    space.local_velocity(u, t),
                    space.local_velocity(g_of_u, t),
                    space.local_velocity(h, t),
                );
                let dofs = space.element_velocity_dofs(t).map(|d| free[d]);
                for q in 0..space.quadrature().len() {
                    let grads = space.physical_gradients(t, q);
                    let du = sym_grad_from(&lu, &grads);
                    let dg = sym_grad_from(&lg, &grads);
                    let dh = sym_grad_from(&lh, &grads);
                    let m = (du.ddot(&du) + eps * eps).sqrt();
                    let coef = space.quadrature_weight(t, q) * tau * du.ddot(&dh) / (m * m * m);
                    for (k, &i) in dofs.iter().enumerate() {
                        if i != usize::MAX {
                            sys.rhs_u[i] += coef * dg.ddot(&basis_sym_grad(grads[k / 2], k % 2));
                        }
                    }
                }
            }
        }
        Ok(self.solver.solve(&sys)?.state.u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn problem(tau: f64) -> FixedPointProblem {
        let mesh = Arc::new(Mesh::build_uniform_unit_square(3).unwrap());
        let space =
            Arc::new(TaylorHoodSpace::new(mesh, 5, &|x| [x[1] * (1.0 - x[1]), 0.0]).unwrap());
        FixedPointProblem::new(space, BinghamParams::new(1.0, tau, 1e-2).unwrap(), None).unwrap()
    }

    #[test]
    fn norm_parsing() {
        assert_eq!("L2".parse::<ResidualNorm>().unwrap(), ResidualNorm::L2);
        assert_eq!("dof".parse::<ResidualNorm>().unwrap(), ResidualNorm::Dof);
        assert_eq!("h1".parse::<ResidualNorm>().unwrap(), ResidualNorm::H1);
        assert!("max".parse::<ResidualNorm>().is_err());
    }

    #[test]
    fn norms_vanish_on_zero() {
        let p = problem(0.3);
        let z = vec![0.0; p.space().velocity_dof_count()];
        for k in [ResidualNorm::Dof, ResidualNorm::L2, ResidualNorm::H1] {
            assert_eq!(p.norm(k, &z), 0.0);
        }
    }

    #[test]
    fn residual_has_zero_boundary_entries() {
        let p = problem(0.3);
        let u0 = p.initial_state().u;
        let (w, n) = p.residual(&u0, ResidualNorm::L2).unwrap();
        assert!(n > 0.0);
        for &d in p.space().dirichlet_dofs() {
            assert_eq!(w[d], 0.0);
        }
    }

    #[test]
    fn wrong_length_is_an_input_error() {
        let p = problem(0.3);
        assert!(matches!(p.apply_g(&[0.0; 3]), Err(Error::Input(_))));
    }

    #[test]
    fn g_prime_vanishes_without_yield_stress() {
        let p = problem(0.0);
        let u = p.initial_state().u;
        let mut h: Vec<f64> = (0..u.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        p.space().zero_dirichlet(&mut h);
        let d = p.apply_g_prime(&u, &h).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-14));
    }
}
