//! CSV tables, iteration traces and legacy VTK files.

use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use bingham_core::anderson::IterationRecord;
use bingham_core::spaces::{State, TaylorHoodSpace};

/// Scientific notation with 6 significant digits.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.5e}")
    }
}

fn opt_sci(x: Option<f64>) -> String {
    x.map(sci).unwrap_or_default()
}

/// The only line of a CSV file that may differ between identical runs.
pub fn header_comment(what: &str) -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!(
        "# bingham-aa {} {what}, generated at unix time {secs}",
        env!("CARGO_PKG_VERSION")
    )
}

pub const TRACE_COLUMNS: &str = "k,residual_norm,theta,beta,columns_dropped,wall_time_ms";

/// One trace row; the step fields stay empty on the final iteration, which
/// takes no step.
pub fn trace_row(r: &IterationRecord) -> String {
    let (theta, beta, dropped) = match &r.step {
        Some(s) => (sci(s.theta), sci(s.beta), s.columns_dropped.to_string()),
        None => (String::new(), String::new(), String::new()),
    };
    format!(
        "{},{},{theta},{beta},{dropped},{}",
        r.k,
        sci(r.residual_norm),
        sci(r.wall_time_ms)
    )
}

pub fn write_trace<W: Write>(w: &mut W, trace: &[IterationRecord]) -> io::Result<()> {
    writeln!(w, "{}", header_comment("iteration trace"))?;
    writeln!(w, "{TRACE_COLUMNS}")?;
    for r in trace {
        writeln!(w, "{}", trace_row(r))?;
    }
    Ok(())
}

/// Result of one solve as it appears in summaries and sweep tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub h: f64,
    pub epsilon: f64,
    pub tau_s: f64,
    pub m: usize,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub final_residual: Option<f64>,
    pub h1_error: Option<f64>,
    pub rigid_fraction: Option<f64>,
    /// `ok`, or the error that stopped this run.
    pub status: String,
}

pub const SWEEP_COLUMNS: &str =
    "n,h,epsilon,tau_s,m,iterations,converged,final_residual,h1_error,rigid_fraction,status";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let status = self.status.replace([',', '\n', '\r'], " ");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{status}",
            self.n,
            sci(self.h),
            sci(self.epsilon),
            sci(self.tau_s),
            self.m,
            self.iterations.map(|i| i.to_string()).unwrap_or_default(),
            self.converged,
            opt_sci(self.final_residual),
            opt_sci(self.h1_error),
            opt_sci(self.rigid_fraction),
        )
    }
}

pub fn write_rows<W: Write>(w: &mut W, what: &str, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{}", header_comment(what))?;
    writeln!(w, "{SWEEP_COLUMNS}")?;
    for r in rows {
        writeln!(w, "{}", r.to_csv())?;
    }
    Ok(())
}

/// Legacy ASCII VTK of the final field on quadratic triangles: velocity,
/// pressure and `|Du|` at every P2 node.
pub fn write_vtk<W: Write>(
    w: &mut W,
    space: &TaylorHoodSpace,
    state: &State,
    title: &str,
) -> io::Result<()> {
    let nodes = space.num_velocity_nodes();
    let nt = space.num_triangles();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nodes} double")?;
    for a in 0..nodes {
        let x = space.node_coords(a);
        writeln!(w, "{:.9e} {:.9e} 0", x[0], x[1])?;
    }
    writeln!(w, "CELLS {nt} {}", 7 * nt)?;
    for t in 0..nt {
        let e = space.element_nodes(t);
        writeln!(w, "6 {} {} {} {} {} {}", e[0], e[1], e[2], e[3], e[4], e[5])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        // quadratic triangle
        writeln!(w, "22")?;
    }

    let (pressure, strain) = nodal_fields(space, state);
    writeln!(w, "POINT_DATA {nodes}")?;
    writeln!(w, "VECTORS velocity double")?;
    for a in 0..nodes {
        writeln!(w, "{:.9e} {:.9e} 0", state.u[2 * a], state.u[2 * a + 1])?;
    }
    writeln!(w, "SCALARS pressure double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for p in &pressure {
        writeln!(w, "{p:.9e}")?;
    }
    writeln!(w, "SCALARS strain_rate double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for s in &strain {
        writeln!(w, "{s:.9e}")?;
    }
    Ok(())
}

/// Pressure (linear, so exact at midpoints) and `|Du|` averaged over the
/// triangles sharing each node.
fn nodal_fields(space: &TaylorHoodSpace, state: &State) -> (Vec<f64>, Vec<f64>) {
    const NODE_BARY: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ];
    let nodes = space.num_velocity_nodes();
    let mut pressure = vec![0.0; nodes];
    let mut strain = vec![0.0; nodes];
    let mut count = vec![0usize; nodes];
    for t in 0..space.num_triangles() {
        for (k, &a) in space.element_nodes(t).iter().enumerate() {
            let b = NODE_BARY[k];
            pressure[a] = space.pressure_at(&state.p, t, b);
            strain[a] += space.symmetric_gradient_at(&state.u, t, b).frobenius();
            count[a] += 1;
        }
    }
    for (s, c) in strain.iter_mut().zip(&count) {
        *s /= (*c).max(1) as f64;
    }
    (pressure, strain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bingham_core::anderson::AAStepReport;
    use bingham_core::mesh::Mesh;
    use std::sync::Arc;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sci(1e-8), "1.00000e-8");
        assert_eq!(sci(0.000145394), "1.45394e-4");
        assert_eq!(sci(123456789.0), "1.23457e8");
        assert_eq!(sci(0.0), "0.00000e0");
        assert_eq!(sci(f64::NAN), "nan");
    }

    #[test]
    fn trace_rows() {
        let last = IterationRecord {
            k: 3,
            residual_norm: 1e-9,
            relative_residual: 1e-9,
            step: None,
            wall_time_ms: 2.5,
        };
        assert_eq!(trace_row(&last), "3,1.00000e-9,,,,2.50000e0");
        let mid = IterationRecord {
            step: Some(AAStepReport {
                k: 2,
                residual_norm: 0.5,
                theta: 0.25,
                gamma: vec![0.1],
                beta: 1.0,
                columns_used: 1,
                columns_dropped: 0,
            }),
            k: 2,
            ..last
        };
        assert_eq!(
            trace_row(&mid),
            "2,1.00000e-9,2.50000e-1,1.00000e0,0,2.50000e0"
        );
        assert_eq!(TRACE_COLUMNS.split(',').count(), 6);
    }

    #[test]
    fn sweep_row_layout() {
        let row = SweepRow {
            n: 8,
            h: 0.125,
            epsilon: 0.1,
            tau_s: 0.3,
            m: 0,
            iterations: Some(10),
            converged: true,
            final_residual: Some(5e-9),
            h1_error: None,
            rigid_fraction: Some(0.625),
            status: "ok".into(),
        };
        assert_eq!(
            row.to_csv(),
            "8,1.25000e-1,1.00000e-1,3.00000e-1,0,10,true,5.00000e-9,,6.25000e-1,ok"
        );
        assert_eq!(
            row.to_csv().split(',').count(),
            SWEEP_COLUMNS.split(',').count()
        );
    }

    #[test]
    fn vtk_layout() {
        let mesh = Arc::new(Mesh::build_uniform_unit_square(2).unwrap());
        let space = TaylorHoodSpace::new(mesh, 5, &|x| [x[1], 0.0]).unwrap();
        let state = State {
            u: space.interpolate(|x| [x[1], 0.0]),
            p: space.interpolate_pressure(|x| x[0]),
        };
        let mut buf = Vec::new();
        write_vtk(&mut buf, &space, &state, "shear").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
        assert!(text.contains("POINTS 25 double"));
        assert!(text.contains("CELLS 8 56"));
        assert!(text.contains("POINT_DATA 25"));
        assert!(text.contains("VECTORS velocity double"));
        assert!(text.contains("SCALARS pressure double 1"));
        assert!(text.contains("SCALARS strain_rate double 1"));
        // simple shear u = (y, 0) has |Du| = 1/sqrt(2) everywhere; ten digits are written
        let at = lines
            .iter()
            .position(|l| l.starts_with("SCALARS strain_rate"))
            .unwrap();
        for l in &lines[at + 2..at + 27] {
            let v: f64 = l.parse().unwrap();
            assert!((v - 0.5f64.sqrt()).abs() < 1e-9, "{v}");
        }
    }
}
