//! Direct solution of the saddle-point system
//!
//! ```text
//! [ A   B^T  0 ] [u]   [rhs_u]
//! [ B   0    c ] [p] = [rhs_p]
//! [ 0   c^T  0 ] [l]   [  0  ]
//! ```
//!
//! where `c_q = ∫ psi_q` pins the pressure constant that is otherwise free
//! when every boundary velocity is prescribed.
//!
//! The matrix is factorized as `L D L^T` after shifting the constraint
//! diagonal by a small negative amount scaled to the local Schur complement.
//! The shifted matrix is quasi-definite, so the factorization exists for any
//! symmetric fill-reducing ordering, and a few steps of iterative refinement
//! against the unshifted matrix recover the exact solution. A pivoting sparse
//! LU takes over when a pivot vanishes in floating point or refinement
//! stalls.

use std::sync::OnceLock;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky,
    SymmetricOrdering,
};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat, MatMut, Par, Side};

use crate::assembly::{expand_free, SaddlePattern, SaddleSystem};
use crate::error::{Error, Result};
use crate::spaces::{State, TaylorHoodSpace};

/// Shift of each constraint diagonal relative to a Jacobi estimate of the
/// Schur complement diagonal `sum_j B_qj^2 / A_jj`.
const RELATIVE_SHIFT: f64 = 1e-8;
const MAX_REFINEMENTS: usize = 6;
/// Backward error above which the solve falls back to the pivoting LU, and
/// above which the LU result is rejected.
pub const LINEAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub state: State,
    /// Normwise backward error `||K x - b|| / (||K||_F ||x|| + ||b||)` of the
    /// bordered system.
    pub linear_residual: f64,
    /// Whether the mean-pressure border row was part of the system.
    pub nullspace_constrained: bool,
    /// Multiplier of the border row; nonzero when the boundary data carry net flux.
    pub multiplier: f64,
}

/// Bordered-matrix layout and the reusable symbolic factorizations.
pub struct SaddleSolver {
    n_free: usize,
    n_pressure: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Storage index in K for each stored entry of A.
    a_pos: Vec<usize>,
    /// K index of `(n_free + q, j)` for each stored B entry.
    b_lower_pos: Vec<usize>,
    /// K index of `(j, n_free + q)` for each stored B entry.
    b_upper_pos: Vec<usize>,
    border_lower_pos: Vec<usize>,
    border_upper_pos: Vec<usize>,
    border: Vec<f64>,
    /// Upper triangle of K plus the constraint diagonal.
    upper_col_ptr: Vec<usize>,
    upper_row_idx: Vec<usize>,
    /// For each upper entry, its index in K (or `usize::MAX` for a constraint diagonal).
    upper_src: Vec<usize>,
    pressure_weights: Vec<f64>,
    free_dofs: Vec<usize>,
    cholesky: SymbolicCholesky<usize>,
    lu: OnceLock<std::result::Result<SymbolicLu<usize>, String>>,
}

impl std::fmt::Debug for SaddleSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleSolver")
            .field("n_free", &self.n_free)
            .field("n_pressure", &self.n_pressure)
            .field("nnz", &self.row_idx.len())
            .finish()
    }
}

impl SaddleSolver {
    pub fn new(space: &TaylorHoodSpace, pattern: &SaddlePattern) -> Result<Self> {
        let a = &pattern.a;
        let b = &pattern.b;
        let nf = a.nrows();
        let np = b.nrows();
        let n = nf + np + 1;

        // B^T by columns: for each velocity column j, the (q, storage index) pairs.
        let mut bt: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nf];
        for q in 0..np {
            let (cols, _) = b.row(q);
            let start = b.row_ptr()[q];
            for (k, &j) in cols.iter().enumerate() {
                bt[j].push((q, start + k));
            }
        }

        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(a.nnz() + 2 * b.nnz() + 2 * np);
        let mut a_pos = vec![0; a.nnz()];
        let mut b_lower_pos = vec![0; b.nnz()];
        let mut b_upper_pos = vec![0; b.nnz()];
        col_ptr.push(0);
        // A is structurally symmetric, so row j of its CSR is column j.
        for j in 0..nf {
            let start = a.row_ptr()[j];
            for (k, &i) in a.row(j).0.iter().enumerate() {
                a_pos[start + k] = row_idx.len();
                row_idx.push(i);
            }
            for &(q, k) in &bt[j] {
                b_lower_pos[k] = row_idx.len();
                row_idx.push(nf + q);
            }
            col_ptr.push(row_idx.len());
        }
        let mut border_lower_pos = vec![0; np];
        for q in 0..np {
            let start = b.row_ptr()[q];
            for (k, &j) in b.row(q).0.iter().enumerate() {
                b_upper_pos[start + k] = row_idx.len();
                row_idx.push(j);
            }
            border_lower_pos[q] = row_idx.len();
            row_idx.push(nf + np);
            col_ptr.push(row_idx.len());
        }
        let mut border_upper_pos = vec![0; np];
        for (q, slot) in border_upper_pos.iter_mut().enumerate() {
            *slot = row_idx.len();
            row_idx.push(nf + q);
        }
        col_ptr.push(row_idx.len());

        let pressure_weights = space.pressure_weights().to_vec();
        let wmax = pressure_weights.iter().cloned().fold(0.0, f64::max);
        let border = pressure_weights.iter().map(|w| w / wmax).collect();

        let mut upper_col_ptr = Vec::with_capacity(n + 1);
        let mut upper_row_idx = Vec::new();
        let mut upper_src = Vec::new();
        upper_col_ptr.push(0);
        for j in 0..n {
            for k in col_ptr[j]..col_ptr[j + 1] {
                if row_idx[k] <= j {
                    upper_row_idx.push(row_idx[k]);
                    upper_src.push(k);
                }
            }
            if j >= nf {
                upper_row_idx.push(j);
                upper_src.push(usize::MAX);
            }
            upper_col_ptr.push(upper_row_idx.len());
        }

        let sym = SymbolicSparseColMatRef::new_checked(n, n, &upper_col_ptr, None, &upper_row_idx);
        let cholesky = factorize_symbolic_cholesky(
            sym,
            Side::Upper,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;

        Ok(Self {
            n_free: nf,
            n_pressure: np,
            col_ptr,
            row_idx,
            a_pos,
            b_lower_pos,
            b_upper_pos,
            border_lower_pos,
            border_upper_pos,
            border,
            upper_col_ptr,
            upper_row_idx,
            upper_src,
            pressure_weights,
            free_dofs: space.free_dofs().to_vec(),
            cholesky,
            lu: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n_free + self.n_pressure + 1
    }

    fn values(&self, sys: &SaddleSystem) -> Vec<f64> {
        let mut v = vec![0.0; self.row_idx.len()];
        for (k, &x) in sys.a.values().iter().enumerate() {
            v[self.a_pos[k]] = x;
        }
        for (k, &x) in sys.b.values().iter().enumerate() {
            v[self.b_lower_pos[k]] = x;
            v[self.b_upper_pos[k]] = x;
        }
        for (q, &c) in self.border.iter().enumerate() {
            v[self.border_lower_pos[q]] = c;
            v[self.border_upper_pos[q]] = c;
        }
        v
    }

    /// `b - K x` accumulated in double-double, so refinement can drive the
    /// forward error down to roundoff in `x` rather than `cond(K)` times it.
    fn residual(&self, values: &[f64], x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut hi = b.to_vec();
        let mut lo = vec![0.0; b.len()];
        for (j, &xj) in x.iter().enumerate() {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[k];
                let prod = values[k] * xj;
                let prod_err = values[k].mul_add(xj, -prod);
                let s = hi[i] - prod;
                let bb = s - hi[i];
                let sum_err = (hi[i] - (s - bb)) + (-prod - bb);
                hi[i] = s;
                lo[i] += sum_err - prod_err;
            }
        }
        hi.iter().zip(&lo).map(|(h, l)| h + l).collect()
    }

    /// Solve for the free velocity, pressure and border multiplier; also
    /// returns the backward error of the bordered system.
    pub fn solve_raw(&self, sys: &SaddleSystem) -> Result<(Vec<f64>, f64)> {
        let n = self.dim();
        if sys.a.nrows() != self.n_free || sys.b.nrows() != self.n_pressure {
            return Err(Error::Input(format!(
                "system blocks {}x{} do not match solver layout {}x{}",
                sys.a.nrows(),
                sys.b.nrows(),
                self.n_free,
                self.n_pressure
            )));
        }
        let values = self.values(sys);
        let mut rhs = Vec::with_capacity(n);
        rhs.extend_from_slice(&sys.rhs_u);
        rhs.extend_from_slice(&sys.rhs_p);
        rhs.push(0.0);
        if rhs.iter().all(|&b| b == 0.0) {
            return Ok((vec![0.0; n], 0.0));
        }

        let shifts = self.shifts(sys);
        let mut upper = vec![0.0; self.upper_src.len()];
        for j in 0..n {
            for k in self.upper_col_ptr[j]..self.upper_col_ptr[j + 1] {
                let src = self.upper_src[k];
                upper[k] = if src == usize::MAX {
                    -shifts[j - self.n_free]
                } else {
                    values[src]
                };
            }
        }
        let sym = SymbolicSparseColMatRef::new_checked(
            n,
            n,
            &self.upper_col_ptr,
            None,
            &self.upper_row_idx,
        );
        let mut l_values = vec![0.0; self.cholesky.len_val()];
        let mut mem = MemBuffer::new(
            self.cholesky
                .factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default())
                .or(self.cholesky.solve_in_place_scratch::<f64>(1, Par::Seq)),
        );
        let stack = MemStack::new(&mut mem);
        let ldlt = self.cholesky.factorize_numeric_ldlt(
            &mut l_values,
            SparseColMatRef::new(sym, &upper),
            Side::Upper,
            LdltRegularization::default(),
            Par::Seq,
            stack,
            Default::default(),
        );
        let Ok(ldlt) = ldlt else {
            // a vanishing pivot under the fill-reducing order; pivoting LU copes
            return self.solve_lu(&values, &rhs);
        };
        let (mut mem2, ldlt) = (
            MemBuffer::new(self.cholesky.solve_in_place_scratch::<f64>(1, Par::Seq)),
            ldlt,
        );
        let solve = |m: MatMut<'_, f64>, mem: &mut MemBuffer| {
            LdltRef::solve_in_place_with_conj(&ldlt, Conj::No, m, Par::Seq, MemStack::new(mem));
        };
        let (x, rel) = self.refine(&values, &rhs, |b| {
            let mut m = Mat::from_fn(n, 1, |i, _| b[i]);
            solve(m.as_mut(), &mut mem2);
            (0..n).map(|i| m[(i, 0)]).collect()
        });
        if rel <= LINEAR_TOLERANCE {
            return Ok((x, rel));
        }
        self.solve_lu(&values, &rhs)
    }

    /// Constraint-diagonal shifts for the pressure rows and the border row.
    fn shifts(&self, sys: &SaddleSystem) -> Vec<f64> {
        let diag: Vec<f64> = (0..self.n_free).map(|j| sys.a.get(j, j)).collect();
        let schur: Vec<f64> = (0..self.n_pressure)
            .map(|q| {
                let (cols, vals) = sys.b.row(q);
                cols.iter().zip(vals).map(|(&j, b)| b * b / diag[j]).sum()
            })
            .collect();
        // a vertex whose divergence row vanishes by symmetry still needs a shift
        let floor = 1e-3 * schur.iter().sum::<f64>() / schur.len() as f64;
        let mut s: Vec<f64> = schur
            .iter()
            .map(|&v| RELATIVE_SHIFT * v.max(floor))
            .collect();
        let border: f64 = self
            .border
            .iter()
            .zip(&s)
            .map(|(c, d)| c * c * RELATIVE_SHIFT / d)
            .sum();
        s.push(RELATIVE_SHIFT * border);
        s
    }

    /// Iterative refinement until the residual stops halving; returns the
    /// normwise backward error `||K x - b|| / (||K||_F ||x|| + ||b||)`.
    fn refine(
        &self,
        values: &[f64],
        rhs: &[f64],
        mut solve: impl FnMut(&[f64]) -> Vec<f64>,
    ) -> (Vec<f64>, f64) {
        let bn = norm2(rhs);
        let kn = norm2(values);
        let mut x = solve(rhs);
        let mut res = self.residual(values, &x, rhs);
        let mut rn = norm2(&res);
        for _ in 0..MAX_REFINEMENTS {
            if rn == 0.0 {
                break;
            }
            let dx = solve(&res);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let trial_res = self.residual(values, &trial, rhs);
            let trial_rn = norm2(&trial_res);
            if !(trial_rn < rn) {
                break;
            }
            let stalled = !(trial_rn < 0.5 * rn);
            x = trial;
            res = trial_res;
            rn = trial_rn;
            if stalled {
                break;
            }
        }
        let eta = rn / (kn * norm2(&x) + bn);
        (x, eta)
    }

    fn solve_lu(&self, values: &[f64], rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.dim();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, &self.col_ptr, None, &self.row_idx);
        let symbolic = self
            .lu
            .get_or_init(|| SymbolicLu::try_new(sym).map_err(|e| format!("{e:?}")))
            .as_ref()
            .map_err(|e| Error::SingularSystem(e.clone()))?;
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), SparseColMatRef::new(sym, values))
            .map_err(|e| Error::SingularSystem(format!("{e:?}")))?;
        let (x, rel) = self.refine(values, rhs, |b| {
            let mut m = Mat::from_fn(n, 1, |i, _| b[i]);
            lu.solve_in_place(m.as_mut());
            (0..n).map(|i| m[(i, 0)]).collect()
        });
        if !rel.is_finite() || rel > LINEAR_TOLERANCE {
            return Err(Error::SingularSystem(format!(
                "backward error {rel:e} after refinement"
            )));
        }
        Ok((x, rel))
    }
    pub fn solve(&self, sys: &SaddleSystem) -> Result<SaddleSolution> {
        let (x, rel) = self.solve_raw(sys)?;
        let nf = self.n_free;
        let np = self.n_pressure;
        let mut p = x[nf..nf + np].to_vec();
        let total: f64 = self.pressure_weights.iter().sum();
        let mean = p
            .iter()
            .zip(&self.pressure_weights)
            .map(|(p, w)| p * w)
            .sum::<f64>()
            / total;
        for v in &mut p {
            *v -= mean;
        }
        Ok(SaddleSolution {
            state: State {
                u: expand_free(&self.free_dofs, &x[..nf], &sys.lift),
                p,
            },
            linear_residual: rel,
            nullspace_constrained: true,
            multiplier: x[nf + np],
        })
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One-shot solve building the layout from `space`.
pub fn solve_saddle(space: &TaylorHoodSpace, sys: &SaddleSystem) -> Result<SaddleSolution> {
    SaddleSolver::new(space, &SaddlePattern::new(space))?.solve(sys)
}
