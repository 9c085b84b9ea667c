//! Assembly of the frozen-viscosity saddle-point system and evaluation of
//! the nonlinear form
//!
//! ```text
//! a_eps(u, v) = 2 mu (Du, Dv) + tau_s (Du / |Du|_eps, Dv)
//! ```
//!
//! Constrained (boundary) velocity DOFs are eliminated symmetrically: their
//! rows and columns are dropped and their contribution moves to the
//! right-hand side.

use std::sync::Arc;

use crate::error::{check, Error, Result};
use crate::mesh::Point;
use crate::spaces::{
    basis_sym_grad, regularized_modulus, sym_grad_from, SymTensor, TaylorHoodSpace,
};
use crate::sparse::CsrMatrix;

pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Physical parameters of the regularized model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinghamParams {
    /// Plastic viscosity.
    pub mu: f64,
    /// Yield stress.
    pub tau_s: f64,
    /// Regularization.
    pub eps: f64,
}

impl BinghamParams {
    pub fn new(mu: f64, tau_s: f64, eps: f64) -> Result<Self> {
        let p = Self { mu, tau_s, eps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.mu > 0.0 && self.mu.is_finite(), "mu", || {
            format!("must be positive, got {}", self.mu)
        })?;
        check(self.tau_s >= 0.0 && self.tau_s.is_finite(), "tau_s", || {
            format!("must be nonnegative, got {}", self.tau_s)
        })?;
        check(self.eps > 0.0 && self.eps.is_finite(), "epsilon", || {
            format!("must be positive, got {}", self.eps)
        })
    }

    /// Effective viscosity `2 mu + tau_s / |D|_eps`.
    #[inline]
    pub fn viscosity(&self, du: &SymTensor) -> f64 {
        2.0 * self.mu + self.tau_s / (du.ddot(du) + self.eps * self.eps).sqrt()
    }
}

/// `[A B^T; B 0] [u; p] = [rhs_u; rhs_p]` on the free velocity DOFs.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    /// Rows are pressure DOFs; `B_qj = -(psi_q, div phi_j)`.
    pub b: CsrMatrix,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    /// Full velocity vector holding the boundary values, zero elsewhere.
    pub lift: Vec<f64>,
}

/// Zero-valued sparsity pattern of the reduced blocks.
#[derive(Debug, Clone)]
pub struct SaddlePattern {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
}

impl SaddlePattern {
    pub fn new(space: &TaylorHoodSpace) -> Self {
        let nf = space.free_dofs().len();
        let np = space.pressure_dof_count();
        let free = space.free_index_raw();
        let mut ta = Vec::with_capacity(space.num_triangles() * 100);
        let mut tb = Vec::with_capacity(space.num_triangles() * 36);
        for t in 0..space.num_triangles() {
            let vd = space.element_velocity_dofs(t).map(|d| free[d]);
            let pd = space.element_pressure_dofs(t);
            for &j in vd.iter().filter(|&&j| j != usize::MAX) {
                for &i in vd.iter().filter(|&&i| i != usize::MAX) {
                    ta.push((i, j, 0.0));
                }
                for &q in &pd {
                    tb.push((q, j, 0.0));
                }
            }
        }
        Self {
            a: CsrMatrix::from_triplets(nf, nf, ta),
            b: CsrMatrix::from_triplets(np, nf, tb),
        }
    }
}

/// Dense element blocks: 12×12 velocity, 3×12 divergence, 12 load.
struct ElementBlocks {
    a: [[f64; 12]; 12],
    b: [[f64; 12]; 3],
    f: [f64; 12],
}

fn element_blocks(
    space: &TaylorHoodSpace,
    t: usize,
    viscosity: &[f64],
    forcing: Option<&VectorFn>,
) -> ElementBlocks {
    let mut blk = ElementBlocks {
        a: [[0.0; 12]; 12],
        b: [[0.0; 12]; 3],
        f: [0.0; 12],
    };
    for (q, &nu) in viscosity.iter().enumerate() {
        let w = space.quadrature_weight(t, q);
        let grads = space.physical_gradients(t, q);
        let tab = space.basis_at_quadrature(q);
        let sg: [SymTensor; 12] = std::array::from_fn(|k| basis_sym_grad(grads[k / 2], k % 2));
        let nw = nu * w;
        for i in 0..12 {
            for j in i..12 {
                let v = nw * sg[i].ddot(&sg[j]);
                blk.a[i][j] += v;
                if i != j {
                    blk.a[j][i] += v;
                }
            }
        }
        for (r, psi) in tab.p1.iter().enumerate() {
            for k in 0..12 {
                blk.b[r][k] -= w * psi * grads[k / 2][k % 2];
            }
        }
        if let Some(f) = forcing {
            let fx = f(space.quadrature_point(t, q));
            for k in 0..12 {
                blk.f[k] += w * fx[k % 2] * tab.p2[k / 2];
            }
        }
    }
    blk
}

/// Assemble with a per-quadrature-point viscosity `viscosity(t, q)`.
///
/// `dirichlet` gives the values of the constrained DOFs in the order of
/// [`TaylorHoodSpace::dirichlet_dofs`]; pass `None` for homogeneous data.
pub fn assemble_with_viscosity(
    space: &TaylorHoodSpace,
    mut viscosity: impl FnMut(usize, usize) -> Result<f64>,
    forcing: Option<&VectorFn>,
    dirichlet: Option<&[f64]>,
) -> Result<SaddleSystem> {
    let pattern = SaddlePattern::new(space);
    assemble_into(space, pattern, &mut viscosity, forcing, dirichlet)
}

pub(crate) fn assemble_into(
    space: &TaylorHoodSpace,
    pattern: SaddlePattern,
    viscosity: &mut dyn FnMut(usize, usize) -> Result<f64>,
    forcing: Option<&VectorFn>,
    dirichlet: Option<&[f64]>,
) -> Result<SaddleSystem> {
    let SaddlePattern { mut a, mut b } = pattern;
    let nf = a.nrows();
    let np = b.nrows();
    let free = space.free_index_raw();

    let mut g = vec![0.0; space.velocity_dof_count()];
    if let Some(vals) = dirichlet {
        for (&d, &v) in space.dirichlet_dofs().iter().zip(vals) {
            g[d] = v;
        }
    }

    let mut rhs_u = vec![0.0; nf];
    let mut rhs_p = vec![0.0; np];
    let nq = space.quadrature().len();
    let mut nu = vec![0.0; nq];
    for t in 0..space.num_triangles() {
        for (q, slot) in nu.iter_mut().enumerate() {
            *slot = viscosity(t, q)?;
        }
        let blk = element_blocks(space, t, &nu, forcing);
        let gd = space.element_velocity_dofs(t);
        let vd = gd.map(|d| free[d]);
        let pd = space.element_pressure_dofs(t);
        for i in 0..12 {
            if vd[i] == usize::MAX {
                continue;
            }
            rhs_u[vd[i]] += blk.f[i];
            for j in 0..12 {
                if vd[j] == usize::MAX {
                    rhs_u[vd[i]] -= blk.a[i][j] * g[gd[j]];
                } else {
                    a.add_at(vd[i], vd[j], blk.a[i][j]);
                }
            }
        }
        for r in 0..3 {
            for j in 0..12 {
                if vd[j] == usize::MAX {
                    rhs_p[pd[r]] -= blk.b[r][j] * g[gd[j]];
                } else {
                    b.add_at(pd[r], vd[j], blk.b[r][j]);
                }
            }
        }
    }
    Ok(SaddleSystem {
        a,
        b,
        rhs_u,
        rhs_p,
        lift: g,
    })
}

/// Frozen-coefficient system with viscosity `2 mu + tau_s / |Du_prev|_eps`
/// and the space's boundary values.
pub fn assemble_linearized(
    space: &TaylorHoodSpace,
    u_prev: &[f64],
    params: &BinghamParams,
    forcing: Option<&VectorFn>,
) -> Result<SaddleSystem> {
    params.validate()?;
    assemble_linearized_with(
        space,
        SaddlePattern::new(space),
        u_prev,
        params,
        forcing,
        Some(space.dirichlet_values()),
    )
}

pub(crate) fn assemble_linearized_with(
    space: &TaylorHoodSpace,
    pattern: SaddlePattern,
    u_prev: &[f64],
    params: &BinghamParams,
    forcing: Option<&VectorFn>,
    dirichlet: Option<&[f64]>,
) -> Result<SaddleSystem> {
    let mut visc = frozen_viscosity(space, u_prev, params);
    assemble_into(space, pattern, &mut visc, forcing, dirichlet)
}

/// Per-point viscosity closure frozen at `u_prev`.
pub(crate) fn frozen_viscosity<'a>(
    space: &'a TaylorHoodSpace,
    u_prev: &'a [f64],
    params: &'a BinghamParams,
) -> impl FnMut(usize, usize) -> Result<f64> + 'a {
    let mut cached: Option<(usize, [[f64; 2]; 6])> = None;
    move |t, q| {
        if params.tau_s == 0.0 {
            return Ok(2.0 * params.mu);
        }
        let loc = match cached {
            Some((ct, loc)) if ct == t => loc,
            _ => {
                let loc = space.local_velocity(u_prev, t);
                cached = Some((t, loc));
                loc
            }
        };
        let du = sym_grad_from(&loc, &space.physical_gradients(t, q));
        let m = regularized_modulus(&du, params.eps)?;
        let nu = 2.0 * params.mu + params.tau_s / m;
        if !nu.is_finite() || !m.is_finite() {
            return Err(Error::NonFiniteModulus { triangle: t });
        }
        Ok(nu)
    }
}

/// The nonlinear form `a_eps(u, w)` with the modulus evaluated at `u`.
pub fn apply_a_eps(space: &TaylorHoodSpace, u: &[f64], w: &[f64], params: &BinghamParams) -> f64 {
    let mut total = 0.0;
    for t in 0..space.num_triangles() {
        let lu = space.local_velocity(u, t);
        let lw = space.local_velocity(w, t);
        for q in 0..space.quadrature().len() {
            let grads = space.physical_gradients(t, q);
            let du = sym_grad_from(&lu, &grads);
            let dw = sym_grad_from(&lw, &grads);
            total += space.quadrature_weight(t, q) * params.viscosity(&du) * du.ddot(&dw);
        }
    }
    total
}

/// `(Du, Dw)` by quadrature.
pub fn d_inner(space: &TaylorHoodSpace, u: &[f64], w: &[f64]) -> f64 {
    let mut total = 0.0;
    for t in 0..space.num_triangles() {
        let lu = space.local_velocity(u, t);
        let lw = space.local_velocity(w, t);
        for q in 0..space.quadrature().len() {
            let grads = space.physical_gradients(t, q);
            total += space.quadrature_weight(t, q)
                * sym_grad_from(&lu, &grads).ddot(&sym_grad_from(&lw, &grads));
        }
    }
    total
}

/// `||Du||`.
pub fn d_norm(space: &TaylorHoodSpace, u: &[f64]) -> f64 {
    d_inner(space, u, u).max(0.0).sqrt()
}

/// `||grad u||` (full gradient, not its symmetric part).
pub fn grad_norm(space: &TaylorHoodSpace, u: &[f64]) -> f64 {
    let mut total = 0.0;
    for t in 0..space.num_triangles() {
        let lu = space.local_velocity(u, t);
        for q in 0..space.quadrature().len() {
            let grads = space.physical_gradients(t, q);
            let mut s = 0.0;
            for c in 0..2 {
                for d in 0..2 {
                    let v: f64 = lu.iter().zip(&grads).map(|(u, g)| u[c] * g[d]).sum();
                    s += v * v;
                }
            }
            total += space.quadrature_weight(t, q) * s;
        }
    }
    total.sqrt()
}

/// Gram matrix of `(D phi_i, D phi_j)` over all velocity DOFs.
pub fn d_gram_matrix(space: &TaylorHoodSpace) -> CsrMatrix {
    let n = space.velocity_dof_count();
    let nq = space.quadrature().len();
    let ones = vec![1.0; nq];
    let mut trip = Vec::with_capacity(space.num_triangles() * 144);
    for t in 0..space.num_triangles() {
        let blk = element_blocks(space, t, &ones, None);
        let dofs = space.element_velocity_dofs(t);
        for i in 0..12 {
            for j in 0..12 {
                trip.push((dofs[i], dofs[j], blk.a[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, trip)
}

/// Vector P2 mass matrix over all velocity DOFs.
pub fn mass_matrix(space: &TaylorHoodSpace) -> CsrMatrix {
    let n = space.velocity_dof_count();
    let mut trip = Vec::with_capacity(space.num_triangles() * 72);
    for t in 0..space.num_triangles() {
        let mut m = [[0.0; 6]; 6];
        for q in 0..space.quadrature().len() {
            let w = space.quadrature_weight(t, q);
            let phi = space.basis_at_quadrature(q).p2;
            for a in 0..6 {
                for b in 0..6 {
                    m[a][b] += w * phi[a] * phi[b];
                }
            }
        }
        let nodes = space.element_nodes(t);
        for a in 0..6 {
            for b in 0..6 {
                for c in 0..2 {
                    trip.push((2 * nodes[a] + c, 2 * nodes[b] + c, m[a][b]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, trip)
}

/// `(div u, psi_q)` for every pressure basis function, by direct quadrature.
pub fn divergence_moments(space: &TaylorHoodSpace, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; space.pressure_dof_count()];
    for t in 0..space.num_triangles() {
        let lu = space.local_velocity(u, t);
        let pd = space.element_pressure_dofs(t);
        for q in 0..space.quadrature().len() {
            let grads = space.physical_gradients(t, q);
            let div: f64 = lu
                .iter()
                .zip(&grads)
                .map(|(u, g)| u[0] * g[0] + u[1] * g[1])
                .sum();
            let w = space.quadrature_weight(t, q);
            for (r, psi) in space.basis_at_quadrature(q).p1.iter().enumerate() {
                out[pd[r]] += w * div * psi;
            }
        }
    }
    out
}

/// `max_q |(div u, psi_q)|`.
pub fn max_divergence_moment(space: &TaylorHoodSpace, u: &[f64]) -> f64 {
    divergence_moments(space, u)
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// Scatter free-DOF values into a full velocity vector whose constrained
/// entries come from `base`.
pub fn expand_free(free_dofs: &[usize], free: &[f64], base: &[f64]) -> Vec<f64> {
    let mut u = base.to_vec();
    for (&d, &v) in free_dofs.iter().zip(free) {
        u[d] = v;
    }
    u
}

pub fn restrict_free(space: &TaylorHoodSpace, u: &[f64]) -> Vec<f64> {
    space.free_dofs().iter().map(|&d| u[d]).collect()
}
