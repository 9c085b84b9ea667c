//! Taylor–Hood P2/P1 spaces on a triangulation.
//!
//! Velocity nodes are the mesh vertices followed by the edge midpoints; the
//! scalar velocity DOF of node `a` and component `c` is `2 * a + c`. Pressure
//! DOFs coincide with the vertices. Every velocity DOF on the boundary is
//! constrained to a prescribed value.

pub mod basis;
pub mod quadrature;

use std::sync::Arc;

use crate::error::{check, Result};
use crate::mesh::{AffineMap, Mesh, Point};

pub use basis::{eval_basis, BasisEval};
pub use quadrature::Quadrature;

/// Symmetric 2×2 tensor stored by its independent entries.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor {
    pub const ZERO: Self = Self {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    /// Symmetric part of a full gradient `g[i][j] = d u_i / d x_j`.
    pub fn sym_part(g: [[f64; 2]; 2]) -> Self {
        Self {
            xx: g[0][0],
            xy: 0.5 * (g[0][1] + g[1][0]),
            yy: g[1][1],
        }
    }

    /// Frobenius inner product `A : B`.
    #[inline]
    pub fn ddot(&self, o: &Self) -> f64 {
        self.xx * o.xx + 2.0 * self.xy * o.xy + self.yy * o.yy
    }

    pub fn frobenius(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn to_matrix(&self) -> [[f64; 2]; 2] {
        [[self.xx, self.xy], [self.xy, self.yy]]
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self {
            xx: self.xx - o.xx,
            xy: self.xy - o.xy,
            yy: self.yy - o.yy,
        }
    }
}

/// `|D|_eps = sqrt(D : D + eps^2)`.
pub fn regularized_modulus(du: &SymTensor, eps: f64) -> Result<f64> {
    check(eps > 0.0, "epsilon", || {
        format!("must be positive, got {eps}")
    })?;
    Ok((du.ddot(du) + eps * eps).sqrt())
}

/// Velocity and pressure coefficients of one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug)]
pub struct TaylorHoodSpace {
    mesh: Arc<Mesh>,
    quadrature: Quadrature,
    tables: Vec<BasisEval>,
    geometry: Vec<AffineMap>,
    element_nodes: Vec<[usize; 6]>,
    node_coords: Vec<Point>,
    dirichlet_dofs: Vec<usize>,
    dirichlet_values: Vec<f64>,
    free_dofs: Vec<usize>,
    /// Position in `free_dofs`, or `usize::MAX` for constrained DOFs.
    free_index: Vec<usize>,
    pressure_weights: Vec<f64>,
}

pub const CONSTRAINED: usize = usize::MAX;

impl TaylorHoodSpace {
    /// Build the space with boundary velocity values taken from `boundary`
    /// evaluated at each boundary node.
    pub fn new(
        mesh: Arc<Mesh>,
        quad_degree: usize,
        boundary: &dyn Fn(Point) -> [f64; 2],
    ) -> Result<Self> {
        check(quad_degree >= 2, "quad_degree", || {
            format!("the divergence coupling needs degree >= 2, got {quad_degree}")
        })?;
        let quadrature = Quadrature::with_degree(quad_degree)?;
        let tables = quadrature.points.iter().map(|&b| eval_basis(b)).collect();
        let nv = mesh.num_vertices();

        let geometry: Vec<AffineMap> = (0..mesh.num_triangles())
            .map(|t| AffineMap::from_vertices(mesh.triangle_points(t)))
            .collect();
        let element_nodes = mesh
            .triangles
            .iter()
            .zip(&mesh.triangle_edges)
            .map(|(v, e)| [v[0], v[1], v[2], nv + e[0], nv + e[1], nv + e[2]])
            .collect();

        let mut node_coords = mesh.vertices.clone();
        node_coords.extend((0..mesh.num_edges()).map(|e| mesh.edge_midpoint(e)));

        let boundary_nodes = mesh
            .boundary_vertex_flags
            .iter()
            .chain(&mesh.boundary_edge_flags)
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(a, _)| a);
        let mut dirichlet_dofs = Vec::new();
        let mut dirichlet_values = Vec::new();
        for a in boundary_nodes {
            let g = boundary(node_coords[a]);
            for c in 0..2 {
                dirichlet_dofs.push(2 * a + c);
                dirichlet_values.push(g[c]);
            }
        }

        let ndof = 2 * node_coords.len();
        let mut free_index = vec![0; ndof];
        for &d in &dirichlet_dofs {
            free_index[d] = CONSTRAINED;
        }
        let mut free_dofs = Vec::with_capacity(ndof - dirichlet_dofs.len());
        for (d, slot) in free_index.iter_mut().enumerate() {
            if *slot != CONSTRAINED {
                *slot = free_dofs.len();
                free_dofs.push(d);
            }
        }

        let mut pressure_weights = vec![0.0; nv];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let a = geometry[t].area() / 3.0;
            for &v in tri {
                pressure_weights[v] += a;
            }
        }

        Ok(Self {
            mesh,
            quadrature,
            tables,
            geometry,
            element_nodes,
            node_coords,
            dirichlet_dofs,
            dirichlet_values,
            free_dofs,
            free_index,
            pressure_weights,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    pub fn num_triangles(&self) -> usize {
        self.geometry.len()
    }

    pub fn velocity_dof_count(&self) -> usize {
        2 * self.node_coords.len()
    }

    pub fn pressure_dof_count(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn num_velocity_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn node_coords(&self, node: usize) -> Point {
        self.node_coords[node]
    }

    pub fn geometry(&self, t: usize) -> &AffineMap {
        &self.geometry[t]
    }

    pub fn element_nodes(&self, t: usize) -> [usize; 6] {
        self.element_nodes[t]
    }

    /// Local DOF `2 * a + c` is node `a`, component `c`.
    pub fn element_velocity_dofs(&self, t: usize) -> [usize; 12] {
        let n = self.element_nodes[t];
        std::array::from_fn(|k| 2 * n[k / 2] + k % 2)
    }

    pub fn element_pressure_dofs(&self, t: usize) -> [usize; 3] {
        self.mesh.triangles[t]
    }

    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet_dofs
    }

    pub fn dirichlet_values(&self) -> &[f64] {
        &self.dirichlet_values
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Index among the free DOFs, `None` if constrained.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        let k = self.free_index[dof];
        (k != CONSTRAINED).then_some(k)
    }

    pub(crate) fn free_index_raw(&self) -> &[usize] {
        &self.free_index
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.free_index[dof] == CONSTRAINED
    }

    /// `∫ ψ_q` for each pressure basis function.
    pub fn pressure_weights(&self) -> &[f64] {
        &self.pressure_weights
    }

    /// Zero velocity with the boundary values applied.
    pub fn lift(&self) -> Vec<f64> {
        let mut u = vec![0.0; self.velocity_dof_count()];
        self.apply_dirichlet(&mut u);
        u
    }

    pub fn apply_dirichlet(&self, u: &mut [f64]) {
        for (&d, &g) in self.dirichlet_dofs.iter().zip(&self.dirichlet_values) {
            u[d] = g;
        }
    }

    pub fn zero_dirichlet(&self, u: &mut [f64]) {
        for &d in &self.dirichlet_dofs {
            u[d] = 0.0;
        }
    }

    pub fn initial_state(&self) -> State {
        State {
            u: self.lift(),
            p: vec![0.0; self.pressure_dof_count()],
        }
    }

    /// Nodal P2 interpolant of a vector field.
    pub fn interpolate(&self, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let mut u = vec![0.0; self.velocity_dof_count()];
        for (a, &x) in self.node_coords.iter().enumerate() {
            let v = f(x);
            u[2 * a] = v[0];
            u[2 * a + 1] = v[1];
        }
        u
    }

    /// Nodal P1 interpolant of a scalar field.
    pub fn interpolate_pressure(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.mesh.vertices.iter().map(|&x| f(x)).collect()
    }

    pub fn pressure_mean(&self, p: &[f64]) -> f64 {
        let total: f64 = self.pressure_weights.iter().sum();
        p.iter()
            .zip(&self.pressure_weights)
            .map(|(p, w)| p * w)
            .sum::<f64>()
            / total
    }

    pub fn basis_at_quadrature(&self, q: usize) -> &BasisEval {
        &self.tables[q]
    }

    /// Physical coordinates of quadrature point `q` on triangle `t`.
    pub fn quadrature_point(&self, t: usize, q: usize) -> Point {
        let b = self.quadrature.points[q];
        self.geometry[t].map_point([b[1], b[2]])
    }

    /// Weight times |J| for quadrature point `q` on triangle `t`.
    #[inline]
    pub fn quadrature_weight(&self, t: usize, q: usize) -> f64 {
        self.quadrature.weights[q] * self.geometry[t].det
    }

    /// Physical gradients of the six P2 basis functions at quadrature point `q`.
    #[inline]
    pub fn physical_gradients(&self, t: usize, q: usize) -> [[f64; 2]; 6] {
        let g = &self.geometry[t];
        self.tables[q].p2_grad.map(|r| g.push_gradient(r))
    }

    fn physical_gradients_at(&self, t: usize, bary: [f64; 3]) -> ([f64; 6], [[f64; 2]; 6]) {
        let b = eval_basis(bary);
        let g = &self.geometry[t];
        (b.p2, b.p2_grad.map(|r| g.push_gradient(r)))
    }

    /// Element coefficients `[node][component]` of a velocity vector.
    #[inline]
    pub fn local_velocity(&self, u: &[f64], t: usize) -> [[f64; 2]; 6] {
        self.element_nodes[t].map(|a| [u[2 * a], u[2 * a + 1]])
    }

    pub fn symmetric_gradient_at_point(&self, u: &[f64], t: usize, q: usize) -> SymTensor {
        let grads = self.physical_gradients(t, q);
        sym_grad_from(&self.local_velocity(u, t), &grads)
    }

    pub fn symmetric_gradient_at(&self, u: &[f64], t: usize, bary: [f64; 3]) -> SymTensor {
        let (_, grads) = self.physical_gradients_at(t, bary);
        sym_grad_from(&self.local_velocity(u, t), &grads)
    }

    pub fn velocity_at(&self, u: &[f64], t: usize, bary: [f64; 3]) -> [f64; 2] {
        let b = eval_basis(bary);
        let loc = self.local_velocity(u, t);
        let mut v = [0.0; 2];
        for (phi, c) in b.p2.iter().zip(&loc) {
            v[0] += phi * c[0];
            v[1] += phi * c[1];
        }
        v
    }

    pub fn pressure_at(&self, p: &[f64], t: usize, bary: [f64; 3]) -> f64 {
        let v = self.mesh.triangles[t];
        (0..3).map(|k| bary[k] * p[v[k]]).sum()
    }

    /// Point evaluation of the velocity anywhere in the mesh.
    pub fn eval_velocity(&self, u: &[f64], x: Point) -> Option<[f64; 2]> {
        self.mesh.locate(x).map(|(t, b)| self.velocity_at(u, t, b))
    }
}

/// `Du` from element coefficients and physical basis gradients.
#[inline]
pub fn sym_grad_from(loc: &[[f64; 2]; 6], grads: &[[f64; 2]; 6]) -> SymTensor {
    let mut g = [[0.0; 2]; 2];
    for (c, d) in loc.iter().zip(grads) {
        g[0][0] += c[0] * d[0];
        g[0][1] += c[0] * d[1];
        g[1][0] += c[1] * d[0];
        g[1][1] += c[1] * d[1];
    }
    SymTensor::sym_part(g)
}

/// Symmetric gradient of basis function `a` in direction `c`.
#[inline]
pub fn basis_sym_grad(grad: [f64; 2], c: usize) -> SymTensor {
    if c == 0 {
        SymTensor {
            xx: grad[0],
            xy: 0.5 * grad[1],
            yy: 0.0,
        }
    } else {
        SymTensor {
            xx: 0.0,
            xy: 0.5 * grad[0],
            yy: grad[1],
        }
    }
}
