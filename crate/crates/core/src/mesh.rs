//! Uniform triangulations of axis-aligned rectangles.
//!
//! Vertices are numbered lexicographically with the x index running fastest,
//! `i + j * (nx + 1)`. Every cell is split along its bottom-left to top-right
//! diagonal, and edges are derived from the triangles in first-seen order so
//! that the numbering is fully deterministic.

use std::collections::HashMap;

use crate::error::{check, Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Adjacent triangles; the second slot is empty on the boundary.
    pub triangles: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles[1].is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Global edge index of local edges (0-1, 1-2, 2-0) of each triangle.
    pub triangle_edges: Vec<[usize; 3]>,
    pub boundary_vertex_flags: Vec<bool>,
    pub boundary_edge_flags: Vec<bool>,
    /// Maximum element diameter.
    pub h: f64,
}

/// Affine map from the reference triangle (0,0), (1,0), (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub origin: Point,
    /// Columns are the images of the reference edge vectors.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    pub inv_transpose: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn from_vertices(p: [Point; 3]) -> Self {
        let jacobian = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1]],
        ];
        let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
        // (J^{-1})^T = 1/det [[d, -c], [-b, a]] for J = [[a, b], [c, d]]
        let inv_transpose = [
            [jacobian[1][1] / det, -jacobian[1][0] / det],
            [-jacobian[0][1] / det, jacobian[0][0] / det],
        ];
        Self {
            origin: p[0],
            jacobian,
            det,
            inv_transpose,
        }
    }

    /// Map a reference gradient to a physical one.
    #[inline]
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_transpose[0][0] * g[0] + self.inv_transpose[0][1] * g[1],
            self.inv_transpose[1][0] * g[0] + self.inv_transpose[1][1] * g[1],
        ]
    }

    #[inline]
    pub fn map_point(&self, xi: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jacobian[0][0] * xi[0] + self.jacobian[0][1] * xi[1],
            self.origin[1] + self.jacobian[1][0] * xi[0] + self.jacobian[1][1] * xi[1],
        ]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }
}

impl Mesh {
    pub fn build_uniform_unit_square(n: usize) -> Result<Self> {
        Self::build_uniform_rectangle([0.0, 0.0], [1.0, 1.0], n, n)
    }

    pub fn build_uniform_rectangle(
        lower: Point,
        upper: Point,
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        check(nx >= 1, "n", || {
            format!("need at least one subdivision, got {nx}")
        })?;
        check(ny >= 1, "n", || {
            format!("need at least one subdivision, got {ny}")
        })?;
        check(upper[0] > lower[0] && upper[1] > lower[1], "extent", || {
            format!("degenerate rectangle {lower:?}..{upper:?}")
        })?;

        let stride = nx + 1;
        let mut vertices = Vec::with_capacity(stride * (ny + 1));
        for j in 0..=ny {
            // Exact endpoints so boundary classification is not subject to rounding.
            let y = if j == ny {
                upper[1]
            } else {
                lower[1] + (upper[1] - lower[1]) * j as f64 / ny as f64
            };
            for i in 0..=nx {
                let x = if i == nx {
                    upper[0]
                } else {
                    lower[0] + (upper[0] - lower[0]) * i as f64 / nx as f64
                };
                vertices.push([x, y]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let v00 = i + j * stride;
                let v10 = v00 + 1;
                let v01 = v00 + stride;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        Ok(Self::from_triangles(vertices, triangles))
    }

    /// Build connectivity from raw vertices and counterclockwise triangles.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Self {
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());

        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        triangles: [None, None],
                    });
                    edges.len() - 1
                });
                let adj = &mut edges[e].triangles;
                if adj[0].is_none() {
                    adj[0] = Some(t);
                } else {
                    debug_assert!(adj[1].is_none(), "edge shared by more than two triangles");
                    adj[1] = Some(t);
                }
                *slot = e;
            }
            triangle_edges.push(local);
        }

        let boundary_edge_flags: Vec<bool> = edges.iter().map(Edge::is_boundary).collect();
        let mut boundary_vertex_flags = vec![false; vertices.len()];
        for e in edges.iter().filter(|e| e.is_boundary()) {
            boundary_vertex_flags[e.vertices[0]] = true;
            boundary_vertex_flags[e.vertices[1]] = true;
        }

        let dist = |a: Point, b: Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let h = triangles
            .iter()
            .map(|t| {
                let p = t.map(|v| vertices[v]);
                dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
            })
            .fold(0.0, f64::max);

        Self {
            vertices,
            triangles,
            edges,
            triangle_edges,
            boundary_vertex_flags,
            boundary_edge_flags,
            h,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn element_geometry(&self, t: usize) -> Result<AffineMap> {
        if t >= self.triangles.len() {
            return Err(Error::OutOfRange {
                index: t,
                len: self.triangles.len(),
            });
        }
        Ok(AffineMap::from_vertices(self.triangle_points(t)))
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangle_points(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Locate the triangle containing `p` and its barycentric coordinates.
    ///
    /// Linear scan; only used for sparse sampling in post-processing.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        const TOL: f64 = 1e-12;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for t in 0..self.triangles.len() {
            let map = AffineMap::from_vertices(self.triangle_points(t));
            let d = [p[0] - map.origin[0], p[1] - map.origin[1]];
            // J^{-1} d using the stored inverse transpose.
            let it = map.inv_transpose;
            let xi = it[0][0] * d[0] + it[1][0] * d[1];
            let eta = it[0][1] * d[0] + it[1][1] * d[1];
            let bary = [1.0 - xi - eta, xi, eta];
            let worst = bary.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -TOL {
                return Some((t, bary.map(|b| b.max(0.0))));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, bary, worst));
            }
        }
        best.filter(|b| b.2 > -1e-9)
            .map(|(t, bary, _)| (t, bary.map(|b| b.max(0.0))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let m = Mesh::build_uniform_unit_square(1).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.num_edges(), 5);
    }

    #[test]
    fn counts_for_n2_follow_euler() {
        let m = Mesh::build_uniform_unit_square(2).unwrap();
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_triangles(), 8);
        // V - E + T = 1
        assert_eq!(m.num_edges(), 9 + 8 - 1);
        assert_eq!(m.num_edges(), 16);
    }

    #[test]
    fn boundary_vertices_n4() {
        let m = Mesh::build_uniform_unit_square(4).unwrap();
        // oracle: lattice points with a 0 or 1 coordinate
        let expected = (0..=4)
            .flat_map(|j| (0..=4).map(move |i| (i, j)))
            .filter(|&(i, j)| i == 0 || j == 0 || i == 4 || j == 4)
            .count();
        assert_eq!(expected, 16);
        assert_eq!(
            m.boundary_vertex_flags.iter().filter(|&&b| b).count(),
            expected
        );
        for (v, p) in m.vertices.iter().enumerate() {
            let on = p.iter().any(|&c| c == 0.0 || c == 1.0);
            assert_eq!(on, m.boundary_vertex_flags[v]);
        }
    }

    #[test]
    fn rejects_zero_subdivisions() {
        assert!(matches!(
            Mesh::build_uniform_unit_square(0),
            Err(Error::InvalidParameter { name: "n", .. })
        ));
    }

    #[test]
    fn structural_invariants() {
        for n in [1, 2, 3, 7, 16] {
            let m = Mesh::build_uniform_unit_square(n).unwrap();
            assert_eq!(m.num_vertices(), (n + 1) * (n + 1));
            assert_eq!(m.num_triangles(), 2 * n * n);
            assert_eq!(m.num_vertices() + m.num_triangles(), m.num_edges() + 1);
            assert!((m.h - 2f64.sqrt() / n as f64).abs() < 1e-14);
            let mut area = 0.0;
            for t in 0..m.num_triangles() {
                let a = m.signed_area(t);
                assert!(a > 0.0);
                area += a;
            }
            assert!((area - 1.0).abs() < 1e-14);
            for e in &m.edges {
                let on_boundary = {
                    let (p, q) = (m.vertices[e.vertices[0]], m.vertices[e.vertices[1]]);
                    (p[0] == q[0] && (p[0] == 0.0 || p[0] == 1.0))
                        || (p[1] == q[1] && (p[1] == 0.0 || p[1] == 1.0))
                };
                assert_eq!(e.is_boundary(), on_boundary);
                assert!(e.triangles[0].is_some());
            }
        }
    }

    #[test]
    fn deterministic_connectivity() {
        let a = Mesh::build_uniform_unit_square(5).unwrap();
        let b = Mesh::build_uniform_unit_square(5).unwrap();
        assert_eq!(a.triangles, b.triangles);
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.triangle_edges, b.triangle_edges);
    }

    #[test]
    fn element_geometry_examples() {
        let id = AffineMap::from_vertices([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(id.jacobian, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(id.det, 1.0);
        assert_eq!(id.inv_transpose, [[1.0, 0.0], [0.0, 1.0]]);

        let half = AffineMap::from_vertices([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(half.det, 0.25);

        for n in [1, 3, 8] {
            let m = Mesh::build_uniform_unit_square(n).unwrap();
            for t in 0..m.num_triangles() {
                let g = m.element_geometry(t).unwrap();
                assert!((g.det - 1.0 / (n * n) as f64).abs() < 1e-15);
                assert!((g.det - 2.0 * m.signed_area(t)).abs() < 1e-15);
            }
        }
        let m = Mesh::build_uniform_unit_square(2).unwrap();
        assert!(matches!(
            m.element_geometry(8),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn inverse_transpose_maps_gradients() {
        // f(x, y) = 3x - 2y has physical gradient (3, -2) on any triangle.
        let p = [[0.1, 0.2], [0.7, 0.3], [0.2, 0.9]];
        let map = AffineMap::from_vertices(p);
        let f = |q: Point| 3.0 * q[0] - 2.0 * q[1];
        let ref_grad = [f(p[1]) - f(p[0]), f(p[2]) - f(p[0])];
        let g = map.push_gradient(ref_grad);
        assert!((g[0] - 3.0).abs() < 1e-14 && (g[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn locate_points() {
        let m = Mesh::build_uniform_unit_square(4).unwrap();
        for p in [[0.3, 0.6], [0.0, 0.0], [1.0, 1.0], [0.5, 1.0], [0.125, 0.9]] {
            let (t, b) = m.locate(p).unwrap();
            let q = m.triangle_points(t);
            let x = b[0] * q[0][0] + b[1] * q[1][0] + b[2] * q[2][0];
            let y = b[0] * q[0][1] + b[1] * q[1][1] + b[2] * q[2][1];
            assert!((x - p[0]).abs() < 1e-12 && (y - p[1]).abs() < 1e-12);
        }
        assert!(m.locate([1.5, 0.5]).is_none());
    }
}
