use std::path::PathBuf;
use std::process::ExitCode;

use bingham_cli::config::{parse_config_text, resolve};
use bingham_cli::run::{run_single, run_sweep, single_outputs, summary_line, sweep_path};
use bingham_cli::CliError;
use clap::Parser;

/// Regularized Bingham flow with Anderson-accelerated Picard iteration.
///
/// Settings come from built-in defaults, then `--config`, then flags; later
/// sources win. Any `--sweep-*` list (or `sweep_*` key) turns the run into a
/// sweep over every combination.
#[derive(Debug, Parser)]
#[command(name = "bingham-aa", version)]
struct Args {
    /// `key = value` file; `#` starts a comment.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// channel or cavity.
    #[arg(long)]
    problem: Option<String>,
    /// Subdivisions per side of the unit square.
    #[arg(long)]
    n: Option<String>,
    /// Plastic viscosity.
    #[arg(long)]
    mu: Option<String>,
    /// Yield stress.
    #[arg(long = "tau-s")]
    tau_s: Option<String>,
    /// Regularization parameter.
    #[arg(long)]
    epsilon: Option<String>,
    /// Anderson depth (0 is plain Picard).
    #[arg(long)]
    m: Option<String>,
    /// Damping in (0, 1].
    #[arg(long)]
    beta: Option<String>,
    /// Relative residual at which the iteration stops.
    #[arg(long)]
    tol: Option<String>,
    /// Iteration cap; hitting it is reported, not an error.
    #[arg(long = "max-iter")]
    max_iter: Option<String>,
    /// Inner product of the Anderson least-squares problem: dof, l2 or h1.
    #[arg(long)]
    norm: Option<String>,
    /// Norm of the stopping test: dof, l2 or h1.
    #[arg(long = "stop-norm")]
    stop_norm: Option<String>,
    /// Direction-sine safeguard threshold; 0 turns it off.
    #[arg(long)]
    cs: Option<String>,
    /// lid-wins or watertight.
    #[arg(long = "corner-policy")]
    corner_policy: Option<String>,
    /// Exactness degree of the quadrature used in assembly.
    #[arg(long = "quad-degree")]
    quad_degree: Option<String>,
    /// Triangles with centroid |Du| below this count as rigid.
    #[arg(long = "rigid-threshold")]
    rigid_threshold: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Comma-separated values; the same for the other sweep lists.
    #[arg(long = "sweep-epsilon", value_name = "LIST")]
    sweep_epsilon: Option<String>,
    #[arg(long = "sweep-n", value_name = "LIST")]
    sweep_n: Option<String>,
    #[arg(long = "sweep-m", value_name = "LIST")]
    sweep_m: Option<String>,
    #[arg(long = "sweep-tau-s", value_name = "LIST")]
    sweep_tau_s: Option<String>,
}

impl Args {
    fn settings(&self) -> Vec<(String, String)> {
        let pairs = [
            ("problem", &self.problem),
            ("n", &self.n),
            ("mu", &self.mu),
            ("tau_s", &self.tau_s),
            ("epsilon", &self.epsilon),
            ("m", &self.m),
            ("beta", &self.beta),
            ("tol", &self.tol),
            ("max_iter", &self.max_iter),
            ("norm", &self.norm),
            ("stop_norm", &self.stop_norm),
            ("cs", &self.cs),
            ("corner_policy", &self.corner_policy),
            ("quad_degree", &self.quad_degree),
            ("rigid_threshold", &self.rigid_threshold),
            ("out", &self.out),
            ("sweep_epsilon", &self.sweep_epsilon),
            ("sweep_n", &self.sweep_n),
            ("sweep_m", &self.sweep_m),
            ("sweep_tau_s", &self.sweep_tau_s),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn run(args: &Args) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            parse_config_text(&text)?
        }
        None => Vec::new(),
    };
    let (cfg, sweep) = resolve(&file, &args.settings())?;
    if sweep.is_active() {
        let rows = run_sweep(&cfg, &sweep)?;
        let failed = rows.iter().filter(|r| r.status != "ok").count();
        let converged = rows.iter().filter(|r| r.converged).count();
        println!(
            "sweep: {} runs, {converged} converged, {failed} failed -> {}",
            rows.len(),
            sweep_path(&cfg.out).display()
        );
    } else {
        let row = run_single(&cfg)?;
        println!("{}", summary_line(&row));
        let files = single_outputs(&cfg.out);
        println!(
            "wrote {}, {}, {}",
            files.trace.display(),
            files.summary.display(),
            files.vtk.display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bingham-aa: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
