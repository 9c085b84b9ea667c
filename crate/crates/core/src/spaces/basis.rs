//! Lagrange bases on the reference triangle.
//!
//! Local P2 ordering: vertices 0, 1, 2 followed by the midpoints of edges
//! (0,1), (1,2), (2,0). Gradients are taken with respect to the reference
//! coordinates `(xi, eta)` where `lambda = [1 - xi - eta, xi, eta]`.

/// Reference gradients of the barycentric coordinates.
const GRAD_LAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

pub const EDGE_VERTICES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisEval {
    pub p2: [f64; 6],
    pub p2_grad: [[f64; 2]; 6],
    pub p1: [f64; 3],
}

pub fn eval_basis(bary: [f64; 3]) -> BasisEval {
    let l = bary;
    let mut p2 = [0.0; 6];
    let mut p2_grad = [[0.0; 2]; 6];
    for i in 0..3 {
        p2[i] = l[i] * (2.0 * l[i] - 1.0);
        let s = 4.0 * l[i] - 1.0;
        p2_grad[i] = [s * GRAD_LAMBDA[i][0], s * GRAD_LAMBDA[i][1]];
    }
    for (k, [i, j]) in EDGE_VERTICES.into_iter().enumerate() {
        p2[3 + k] = 4.0 * l[i] * l[j];
        p2_grad[3 + k] = [
            4.0 * (l[j] * GRAD_LAMBDA[i][0] + l[i] * GRAD_LAMBDA[j][0]),
            4.0 * (l[j] * GRAD_LAMBDA[i][1] + l[i] * GRAD_LAMBDA[j][1]),
        ];
    }
    BasisEval { p2, p2_grad, p1: l }
}
