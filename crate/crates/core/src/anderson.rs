//! Anderson acceleration of a fixed-point map `x -> g(x)` with depth `m`,
//! damping `beta_k` and an optional direction-sine safeguard.
//!
//! With `w_k = g(x_{k-1}) - x_{k-1}`, the history blocks (newest column first)
//!
//! ```text
//! E_k = ( e_{k-1} ... e_{k-m_k} ),                e_j = x_j - x_{j-1}
//! F_k = ( w_k - w_{k-1}  ...  w_{k-m_k+1} - w_{k-m_k} )
//! ```
//!
//! give `gamma = argmin ||w_k - F_k gamma||` and the update
//!
//! ```text
//! x_k = x_{k-1} + beta_k w_k - (E_k + beta_k F_k) gamma
//! ```

use std::collections::VecDeque;
use std::time::Instant;

use crate::error::{check, Result};
use crate::fixed_point::{FixedPointProblem, Metric, ResidualNorm};
use crate::spaces::State;

/// Columns whose direction sine falls below this are dropped even when the
/// safeguard is off; they carry no usable direction.
pub const RANK_FLOOR: f64 = 1.4901161193847656e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Damping {
    Constant(f64),
    /// `beta_k` for `k = 2, 3, ...`; the last entry repeats.
    Schedule(Vec<f64>),
}

impl Default for Damping {
    fn default() -> Self {
        Self::Constant(1.0)
    }
}

impl Damping {
    /// Damping used at iteration `k` (the first update is always undamped).
    pub fn beta(&self, k: usize) -> f64 {
        if k <= 1 {
            return 1.0;
        }
        match self {
            Self::Constant(b) => *b,
            Self::Schedule(s) => *s.get(k - 2).or(s.last()).unwrap_or(&1.0),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |b: f64| b > 0.0 && b <= 1.0;
        match self {
            Self::Constant(b) => check(ok(*b), "beta", || format!("must lie in (0, 1], got {b}")),
            Self::Schedule(s) => check(!s.is_empty() && s.iter().all(|&b| ok(b)), "beta", || {
                format!("schedule entries must lie in (0, 1], got {s:?}")
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AAConfig {
    pub depth: usize,
    pub damping: Damping,
    /// Inner product of the least-squares problem.
    pub opt_norm: ResidualNorm,
    /// Norm of the relative-residual stopping test.
    pub stop_norm: ResidualNorm,
    pub tol: f64,
    pub max_iter: usize,
    /// Direction-sine threshold; 0 disables the safeguard.
    pub c_s: f64,
    /// Keep `x_0, x_1, ...` in the outcome.
    pub record_iterates: bool,
}

impl Default for AAConfig {
    fn default() -> Self {
        Self {
            depth: 0,
            damping: Damping::default(),
            opt_norm: ResidualNorm::Dof,
            stop_norm: ResidualNorm::L2,
            tol: 1e-8,
            max_iter: 500,
            c_s: 0.0,
            record_iterates: false,
        }
    }
}

impl AAConfig {
    pub fn with_depth(depth: usize) -> Self {
        Self {
            depth,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.damping.validate()?;
        check(self.tol > 0.0 && self.tol.is_finite(), "tol", || {
            format!("must be > 0, got {}", self.tol)
        })?;
        check(self.max_iter >= 1, "max_iter", || {
            "must be at least 1".into()
        })?;
        check((0.0..1.0).contains(&self.c_s), "cs", || {
            format!("must lie in [0, 1), got {}", self.c_s)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AAStepReport {
    pub k: usize,
    /// `||w_k||` in the optimization inner product.
    pub residual_norm: f64,
    /// `||w_k - F_k gamma|| / ||w_k||`.
    pub theta: f64,
    /// Coefficients for the retained columns, newest first.
    pub gamma: Vec<f64>,
    pub beta: f64,
    pub columns_used: usize,
    pub columns_dropped: usize,
}

/// Orthogonal factorization `F = Q R` of the retained columns in a weighted
/// inner product, with `M q_j` cached so later products are plain dots.
#[derive(Debug, Clone)]
struct Factorization {
    retained: Vec<usize>,
    q: Vec<Vec<f64>>,
    mq: Vec<Vec<f64>>,
    /// Column `j` of `R` has entries `r[j][0..=j]`.
    r: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weighted(metric: &Metric, v: &[f64]) -> Vec<f64> {
    match metric {
        Metric::Euclidean => v.to_vec(),
        Metric::Gram(m) => m.matvec(v),
    }
}

/// Modified Gram-Schmidt with one reorthogonalization pass; a column is kept
/// when the sine of its angle to the span of the columns kept before it is at
/// least `threshold`.
fn factorize(cols: &[&[f64]], threshold: f64, metric: &Metric) -> Factorization {
    let mut f = Factorization {
        retained: Vec::new(),
        q: Vec::new(),
        mq: Vec::new(),
        r: Vec::new(),
    };
    for (i, col) in cols.iter().enumerate() {
        let norm0 = dot(col, &weighted(metric, col)).max(0.0).sqrt();
        if !(norm0 > 0.0) {
            continue;
        }
        let mut v = col.to_vec();
        let mut rcol = vec![0.0; f.q.len() + 1];
        for _ in 0..2 {
            for (j, (q, mq)) in f.q.iter().zip(&f.mq).enumerate() {
                let c = dot(mq, &v);
                rcol[j] += c;
                for (a, b) in v.iter_mut().zip(q) {
                    *a -= c * b;
                }
            }
        }
        let mv = weighted(metric, &v);
        let norm = dot(&v, &mv).max(0.0).sqrt();
        if norm / norm0 < threshold {
            continue;
        }
        let last = rcol.len() - 1;
        rcol[last] = norm;
        f.q.push(v.iter().map(|x| x / norm).collect());
        f.mq.push(mv.iter().map(|x| x / norm).collect());
        f.r.push(rcol);
        f.retained.push(i);
    }
    f
}

/// Indices of the columns kept by the direction-sine test, scanning in the
/// given order (newest first), so older near-dependent columns are dropped.
pub fn safeguard_columns(cols: &[Vec<f64>], c_s: f64, metric: &Metric) -> Vec<usize> {
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    factorize(&refs, c_s.max(RANK_FLOOR), metric).retained
}

/// Least-squares coefficients `argmin ||w - F gamma||` over the given columns
/// (no columns are dropped except exact zeros) and the resulting gain.
pub fn least_squares(cols: &[Vec<f64>], w: &[f64], metric: &Metric) -> (Vec<f64>, f64) {
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    let fact = factorize(&refs, 0.0, metric);
    let gamma_r = solve_r(&fact, w);
    let mut gamma = vec![0.0; cols.len()];
    for (g, &i) in gamma_r.iter().zip(&fact.retained) {
        gamma[i] = *g;
    }
    let theta = gain(cols, &gamma, w, metric);
    (gamma, theta)
}

fn solve_r(f: &Factorization, w: &[f64]) -> Vec<f64> {
    let n = f.q.len();
    let z: Vec<f64> = f.mq.iter().map(|mq| dot(mq, w)).collect();
    let mut g = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for j in i + 1..n {
            s -= f.r[j][i] * g[j];
        }
        g[i] = s / f.r[i][i];
    }
    g
}

fn gain(cols: &[Vec<f64>], gamma: &[f64], w: &[f64], metric: &Metric) -> f64 {
    let wn = metric.norm(w);
    if wn == 0.0 {
        return 0.0;
    }
    let mut r = w.to_vec();
    for (c, g) in cols.iter().zip(gamma) {
        for (a, b) in r.iter_mut().zip(c) {
            *a -= g * b;
        }
    }
    metric.norm(&r) / wn
}

/// Sliding window of iterate and residual differences.
#[derive(Debug, Clone)]
pub struct AAHistory {
    depth: usize,
    c_s: f64,
    metric: Metric,
    /// Newest first.
    iterate_diffs: VecDeque<Vec<f64>>,
    residual_diffs: VecDeque<Vec<f64>>,
    /// `x_{k-2}` and `w_{k-1}` from the previous step.
    previous: Option<(Vec<f64>, Vec<f64>)>,
    k: usize,
}

impl AAHistory {
    pub fn new(depth: usize, c_s: f64, metric: Metric) -> Self {
        Self {
            depth,
            c_s,
            metric,
            iterate_diffs: VecDeque::with_capacity(depth + 1),
            residual_diffs: VecDeque::with_capacity(depth + 1),
            previous: None,
            k: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of stored columns (`m_k` of the next step before safeguarding).
    pub fn len(&self) -> usize {
        self.residual_diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual_diffs.is_empty()
    }

    pub fn iterate_diffs(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.iterate_diffs.iter()
    }

    pub fn residual_diffs(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.residual_diffs.iter()
    }

    /// Steps taken so far.
    pub fn steps(&self) -> usize {
        self.k
    }

    /// One accelerated update from `x_{k-1}` and `g(x_{k-1})`.
    pub fn step(
        &mut self,
        x_prev: &[f64],
        g_of_x_prev: &[f64],
        beta: f64,
    ) -> (Vec<f64>, AAStepReport) {
        assert_eq!(x_prev.len(), g_of_x_prev.len());
        self.k += 1;
        let w: Vec<f64> = g_of_x_prev.iter().zip(x_prev).map(|(g, x)| g - x).collect();

        if let Some((x_old, w_old)) = self.previous.take() {
            if self.depth > 0 {
                self.iterate_diffs
                    .push_front(x_prev.iter().zip(&x_old).map(|(a, b)| a - b).collect());
                self.residual_diffs
                    .push_front(w.iter().zip(&w_old).map(|(a, b)| a - b).collect());
                self.iterate_diffs.truncate(self.depth);
                self.residual_diffs.truncate(self.depth);
            }
        }

        let cols: Vec<&[f64]> = self.residual_diffs.iter().map(|c| c.as_slice()).collect();
        let fact = factorize(&cols, self.c_s.max(RANK_FLOOR), &self.metric);
        let dropped = cols.len() - fact.retained.len();
        if dropped > 0 {
            let keep = &fact.retained;
            let filter = |d: &mut VecDeque<Vec<f64>>| {
                *d = std::mem::take(d)
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| keep.contains(i))
                    .map(|(_, c)| c)
                    .collect();
            };
            filter(&mut self.iterate_diffs);
            filter(&mut self.residual_diffs);
        }
        let gamma = solve_r(&fact, &w);

        // (1 - beta) x + beta g equals x + beta w, and is exactly g when beta = 1.
        let mut x_next: Vec<f64> = x_prev
            .iter()
            .zip(g_of_x_prev)
            .map(|(x, g)| (1.0 - beta) * x + beta * g)
            .collect();
        for ((e, f), g) in self
            .iterate_diffs
            .iter()
            .zip(&self.residual_diffs)
            .zip(&gamma)
        {
            for ((x, e), f) in x_next.iter_mut().zip(e).zip(f) {
                *x -= g * (e + beta * f);
            }
        }

        let fcols: Vec<Vec<f64>> = self.residual_diffs.iter().cloned().collect();
        let theta = gain(&fcols, &gamma, &w, &self.metric);
        let report = AAStepReport {
            k: self.k,
            residual_norm: self.metric.norm(&w),
            theta,
            gamma,
            beta,
            columns_used: fcols.len(),
            columns_dropped: dropped,
        };
        self.previous = Some((x_prev.to_vec(), w));
        (x_next, report)
    }
}

/// Free-function form of [`AAHistory::step`].
pub fn aa_step(
    history: &mut AAHistory,
    x_prev: &[f64],
    g_of_x_prev: &[f64],
    beta: f64,
) -> (Vec<f64>, AAStepReport) {
    history.step(x_prev, g_of_x_prev, beta)
}

/// One evaluation of the map in the driver loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// `w_k = g(x_{k-1}) - x_{k-1}`.
    pub k: usize,
    /// `||w_k||` in the stopping norm.
    pub residual_norm: f64,
    /// `||w_k|| / ||w_1||`.
    pub relative_residual: f64,
    /// Absent on the iteration that met the tolerance.
    pub step: Option<AAStepReport>,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct AAOutcome {
    /// Last point at which the map was evaluated, `x_{k-1}`.
    pub x: Vec<f64>,
    /// `g(x_{k-1})`.
    pub g_of_x: Vec<f64>,
    pub converged: bool,
    /// Index `k` of the last residual computed.
    pub iterations: usize,
    pub relative_residual: f64,
    pub trace: Vec<IterationRecord>,
    /// `x_0, ..., x_{k-1}` when requested.
    pub iterates: Vec<Vec<f64>>,
}

/// Accelerated iteration of an arbitrary map until `||w_k|| <= tol ||w_1||`.
pub fn accelerate<G>(
    x0: Vec<f64>,
    mut g: G,
    opt: Metric,
    stop: &Metric,
    cfg: &AAConfig,
) -> Result<AAOutcome>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let mut history = AAHistory::new(cfg.depth, cfg.c_s, opt);
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut x = x0;
    let mut w1 = 0.0;
    let mut k = 0;
    loop {
        k += 1;
        let t0 = Instant::now();
        if cfg.record_iterates {
            iterates.push(x.clone());
        }
        let gx = g(&x)?;
        let w: Vec<f64> = gx.iter().zip(&x).map(|(g, x)| g - x).collect();
        let norm = stop.norm(&w);
        if k == 1 {
            w1 = norm;
        }
        let rel = if w1 > 0.0 { norm / w1 } else { 0.0 };
        let done = norm == 0.0 || (k > 1 && rel <= cfg.tol);
        if done || k >= cfg.max_iter {
            trace.push(IterationRecord {
                k,
                residual_norm: norm,
                relative_residual: rel,
                step: None,
                wall_time_ms: t0.elapsed().as_secs_f64() * 1e3,
            });
            return Ok(AAOutcome {
                x,
                g_of_x: gx,
                converged: done,
                iterations: k,
                relative_residual: rel,
                trace,
                iterates,
            });
        }
        let (next, report) = history.step(&x, &gx, cfg.damping.beta(k));
        trace.push(IterationRecord {
            k,
            residual_norm: norm,
            relative_residual: rel,
            step: Some(report),
            wall_time_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        x = next;
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// `G(x_{k-1})` with its pressure.
    pub state: State,
    pub converged: bool,
    pub iterations: usize,
    pub relative_residual: f64,
    pub trace: Vec<IterationRecord>,
    pub iterates: Vec<Vec<f64>>,
}

/// Anderson-accelerated Picard iteration from the lifted zero field.
pub fn solve_accelerated(problem: &FixedPointProblem, cfg: &AAConfig) -> Result<SolveOutcome> {
    let x0 = problem.initial_state().u;
    let mut last: Option<State> = None;
    let out = accelerate(
        x0,
        |x| {
            let s = problem.apply_g(x)?;
            let u = s.u.clone();
            last = Some(s);
            Ok(u)
        },
        problem.metric(cfg.opt_norm),
        &problem.metric(cfg.stop_norm),
        cfg,
    )?;
    Ok(SolveOutcome {
        state: last.expect("the map is evaluated at least once"),
        converged: out.converged,
        iterations: out.iterations,
        relative_residual: out.relative_residual,
        trace: out.trace,
        iterates: out.iterates,
    })
}

/// Plain Picard iteration `x_k = G(x_{k-1})`, written independently of the
/// accelerated driver.
pub fn solve_picard(
    problem: &FixedPointProblem,
    stop_norm: ResidualNorm,
    tol: f64,
    max_iter: usize,
) -> Result<SolveOutcome> {
    check(tol > 0.0, "tol", || format!("must be > 0, got {tol}"))?;
    check(max_iter >= 1, "max_iter", || "must be at least 1".into())?;
    let metric = problem.metric(stop_norm);
    let mut x = problem.initial_state().u;
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut w1 = 0.0;
    for k in 1..=max_iter {
        let t0 = Instant::now();
        iterates.push(x.clone());
        let s = problem.apply_g(&x)?;
        let w: Vec<f64> = s.u.iter().zip(&x).map(|(g, x)| g - x).collect();
        let norm = metric.norm(&w);
        if k == 1 {
            w1 = norm;
        }
        let rel = if w1 > 0.0 { norm / w1 } else { 0.0 };
        trace.push(IterationRecord {
            k,
            residual_norm: norm,
            relative_residual: rel,
            step: None,
            wall_time_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        let done = norm == 0.0 || (k > 1 && rel <= tol);
        if done || k == max_iter {
            return Ok(SolveOutcome {
                state: s,
                converged: done,
                iterations: k,
                relative_residual: rel,
                trace,
                iterates,
            });
        }
        x = s.u;
    }
    unreachable!("max_iter >= 1")
}
