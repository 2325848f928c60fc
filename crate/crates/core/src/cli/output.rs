//! Trajectory CSV and jump-log writers.

use std::io::{self, Write};

use crate::analysis::{self, lyapunov, theorem_bound, ConvergenceCertificate};
use crate::hybrid_core::Trajectory;
use crate::objective::Objective;
use crate::vecops;

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_header(n: usize) -> String {
    let mut cols = vec!["t".to_string(), "j".to_string(), "tau".to_string()];
    cols.extend((1..=n).map(|i| format!("z1_{i}")));
    cols.extend((1..=n).map(|i| format!("z2_{i}")));
    cols.extend(["dist_A", "dist_z1", "V", "bound_theorem"].map(String::from));
    cols.join(",")
}

/// One row per sample; jumps appear as a pre row and a post row at the same `t`.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    traj: &Trajectory,
    obj: &dyn Objective,
    cert: &ConvergenceCertificate,
) -> io::Result<()> {
    let x_star = obj.minimizer();
    let n = obj.dim();
    let d0 = analysis::distance_sq_to_a(&traj.initial().state, x_star).sqrt();
    writeln!(out, "{}", trajectory_header(n))?;
    let mut row = String::new();
    for s in &traj.samples {
        row.clear();
        row.push_str(&fmt_f64(s.time.t));
        row.push(',');
        row.push_str(&s.time.j.to_string());
        row.push(',');
        row.push_str(&fmt_f64(s.state.tau));
        for v in s.state.z1.iter().chain(&s.state.z2) {
            row.push(',');
            row.push_str(&fmt_f64(*v));
        }
        let dist_a = analysis::distance_sq_to_a(&s.state, x_star).sqrt();
        let dist_z1 = vecops::dist(&s.state.z1, x_star);
        let v = lyapunov(obj, &s.state).map_err(io::Error::other)?;
        let bound = theorem_bound(cert, s.time.t, d0).map_err(io::Error::other)?;
        for v in [dist_a, dist_z1, v, bound] {
            row.push(',');
            row.push_str(&fmt_f64(v));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn write_jumps_csv<W: Write>(out: &mut W, traj: &Trajectory) -> io::Result<()> {
    writeln!(out, "t,j_pre,j_post,flow_duration,reset,pre_row,post_row")?;
    for jr in &traj.jumps {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(jr.t),
            jr.j,
            jr.j + 1,
            fmt_f64(jr.flow_duration),
            fmt_f64(jr.reset),
            jr.pre,
            jr.post
        )?;
    }
    Ok(())
}
