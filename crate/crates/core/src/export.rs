//! CSV and JSON serialization of results.
//!
//! All floats are written with 17 significant digits so that re-running an
//! experiment with the same inputs reproduces byte-identical files.

use nalgebra::{DMatrix, DVector};

use crate::game::Equilibrium;
use crate::implied_price::ImpliedKernel;

/// `f64` with 17 significant digits, enough to round-trip exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Row-major matrix CSV with a header row of the grid times.
pub fn matrix_csv(m: &DMatrix<f64>, times: &[f64]) -> String {
    let mut out = String::new();
    out.push_str(
        &times
            .iter()
            .map(|t| fmt_float(*t))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_float(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Equilibrium CSV with columns `t, agent_1, ..., agent_J`.
pub fn equilibrium_csv(eq: &Equilibrium, times: &[f64]) -> String {
    let j = eq.n_agents();
    let mut out = String::from("t");
    for i in 1..=j {
        out.push_str(&format!(",agent_{i}"));
    }
    out.push('\n');
    for (k, t) in times.iter().enumerate() {
        out.push_str(&fmt_float(*t));
        for i in 0..j {
            out.push(',');
            out.push_str(&fmt_float(eq.strategies[(i, k)]));
        }
        out.push('\n');
    }
    out
}

/// Schedule CSV with columns `t, trade`.
pub fn schedule_csv(times: &[f64], schedule: &DVector<f64>) -> String {
    let mut out = String::from("t,trade\n");
    for (t, x) in times.iter().zip(schedule.iter()) {
        out.push_str(&format!("{},{}\n", fmt_float(*t), fmt_float(*x)));
    }
    out
}

/// Kernel CSV with columns `lag, g, g_scaled`.
pub fn kernel_csv(lags: &[f64], kernel: &ImpliedKernel) -> String {
    let g0 = kernel.g0();
    let mut out = String::from("lag,g,g_scaled\n");
    for (lag, g) in lags.iter().zip(&kernel.g) {
        let scaled = if g0 != 0.0 { g / g0 } else { f64::NAN };
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_float(*lag),
            fmt_float(*g),
            fmt_float(scaled)
        ));
    }
    out
}
