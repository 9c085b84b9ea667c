//! Single runs and sweeps.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bingham_core::analysis::{h1_seminorm_error, rigid_region};
use bingham_core::anderson::{solve_accelerated, SolveOutcome};
use bingham_core::fixed_point::FixedPointProblem;
use bingham_core::problems::{make_cavity_problem, make_channel_problem, ProblemSpec};
use rayon::prelude::*;

use crate::config::{ProblemKind, SolverConfig, SweepLists};
use crate::output::{write_rows, write_trace, write_vtk, SweepRow};
use crate::CliError;

pub const THREADS_ENV: &str = "BINGHAM_AA_THREADS";

pub fn problem_spec(cfg: &SolverConfig) -> Result<ProblemSpec, CliError> {
    Ok(match cfg.problem {
        ProblemKind::Channel => make_channel_problem(cfg.n, cfg.epsilon, cfg.tau_s, cfg.mu)?,
        ProblemKind::Cavity => {
            make_cavity_problem(cfg.n, cfg.epsilon, cfg.tau_s, cfg.mu, cfg.corner_policy)?
        }
    })
}

pub struct Solved {
    pub spec: ProblemSpec,
    pub problem: FixedPointProblem,
    pub outcome: SolveOutcome,
    pub row: SweepRow,
}

pub fn solve(cfg: &SolverConfig) -> Result<Solved, CliError> {
    let spec = problem_spec(cfg)?;
    let problem = spec.build(cfg.quad_degree)?;
    let outcome = solve_accelerated(&problem, &cfg.aa_config())?;
    let h1_error = match &spec.exact {
        Some(e) => Some(h1_seminorm_error(
            problem.space(),
            &outcome.state,
            Some(e.as_ref()),
        )?),
        None => None,
    };
    let rigid = rigid_region(problem.space(), &outcome.state, cfg.rigid_threshold)?;
    let row = SweepRow {
        n: cfg.n,
        h: cfg.h(),
        epsilon: cfg.epsilon,
        tau_s: cfg.tau_s,
        m: cfg.m,
        iterations: Some(outcome.iterations),
        converged: outcome.converged,
        final_residual: Some(outcome.relative_residual),
        h1_error,
        rigid_fraction: Some(rigid.fraction),
        status: "ok".into(),
    };
    Ok(Solved {
        spec,
        problem,
        outcome,
        row,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(path: &Path, w: &mut impl Write, result: std::io::Result<()>) -> Result<(), CliError> {
    result
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Files written by [`run_single`].
#[derive(Debug, Clone)]
pub struct SingleOutputs {
    pub trace: PathBuf,
    pub summary: PathBuf,
    pub vtk: PathBuf,
}

pub fn single_outputs(dir: &Path) -> SingleOutputs {
    SingleOutputs {
        trace: dir.join("trace.csv"),
        summary: dir.join("summary.csv"),
        vtk: dir.join("solution.vtk"),
    }
}

/// Solve once and write the trace, the one-row summary and the VTK field.
/// Not converging is a result, not an error.
pub fn run_single(cfg: &SolverConfig) -> Result<SweepRow, CliError> {
    cfg.validate()?;
    let solved = solve(cfg)?;
    prepare_dir(&cfg.out)?;
    let files = single_outputs(&cfg.out);

    let mut w = create(&files.trace)?;
    let r = write_trace(&mut w, &solved.outcome.trace);
    finish(&files.trace, &mut w, r)?;

    let mut w = create(&files.summary)?;
    let r = write_rows(&mut w, "run summary", std::slice::from_ref(&solved.row));
    finish(&files.summary, &mut w, r)?;

    let title = format!(
        "{} n={} mu={} tau_s={} epsilon={} m={} iterations={} converged={}",
        solved.spec.name,
        cfg.n,
        cfg.mu,
        cfg.tau_s,
        cfg.epsilon,
        cfg.m,
        solved.outcome.iterations,
        solved.outcome.converged
    );
    let mut w = create(&files.vtk)?;
    let r = write_vtk(
        &mut w,
        solved.problem.space(),
        &solved.outcome.state,
        &title,
    );
    finish(&files.vtk, &mut w, r)?;
    Ok(solved.row)
}

/// One line for the terminal.
pub fn summary_line(row: &SweepRow) -> String {
    let opt = |v: Option<f64>| {
        v.map(|x| format!("{x:.6e}"))
            .unwrap_or_else(|| "n/a".into())
    };
    format!(
        "converged={} iterations={} final_residual={} h1_error={} rigid_fraction={}",
        row.converged,
        row.iterations
            .map(|i| i.to_string())
            .unwrap_or_else(|| "n/a".into()),
        opt(row.final_residual),
        opt(row.h1_error),
        opt(row.rigid_fraction),
    )
}

/// Worker count: the machine's parallelism, capped by the environment.
pub fn worker_count(jobs: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(available);
    available.min(cap).min(jobs).max(1)
}

/// Run every sweep combination; a failed combination becomes a row with its
/// error in `status` and the sweep carries on. Rows come back in the
/// expansion order whatever order the workers finish in.
pub fn sweep_rows(
    base: &SolverConfig,
    lists: &SweepLists,
    threads: usize,
) -> Result<Vec<SweepRow>, CliError> {
    let combos = lists.expand(base);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        combos
            .par_iter()
            .map(|cfg| match solve(cfg) {
                Ok(s) => s.row,
                Err(e) => SweepRow {
                    n: cfg.n,
                    h: cfg.h(),
                    epsilon: cfg.epsilon,
                    tau_s: cfg.tau_s,
                    m: cfg.m,
                    iterations: None,
                    converged: false,
                    final_residual: None,
                    h1_error: None,
                    rigid_fraction: None,
                    status: format!("error: {e}"),
                },
            })
            .collect()
    }))
}

pub fn sweep_path(dir: &Path) -> PathBuf {
    dir.join("sweep.csv")
}

pub fn run_sweep(base: &SolverConfig, lists: &SweepLists) -> Result<Vec<SweepRow>, CliError> {
    base.validate()?;
    if !lists.is_active() {
        return Err(CliError::Usage(
            "a sweep needs at least one sweep list".into(),
        ));
    }
    for (key, empty) in [
        ("sweep_n", lists.n.as_ref().is_some_and(|l| l.is_empty())),
        (
            "sweep_epsilon",
            lists.epsilon.as_ref().is_some_and(|l| l.is_empty()),
        ),
        ("sweep_m", lists.m.as_ref().is_some_and(|l| l.is_empty())),
        (
            "sweep_tau_s",
            lists.tau_s.as_ref().is_some_and(|l| l.is_empty()),
        ),
    ] {
        if empty {
            return Err(CliError::Usage(format!("`{key}` is empty")));
        }
    }
    let jobs = lists.expand(base).len();
    let rows = sweep_rows(base, lists, worker_count(jobs))?;
    prepare_dir(&base.out)?;
    let path = sweep_path(&base.out);
    let mut w = create(&path)?;
    let r = write_rows(&mut w, "sweep", &rows);
    finish(&path, &mut w, r)?;
    Ok(rows)
}
