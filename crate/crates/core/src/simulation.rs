//! Implicit midpoint time stepping from `x(0) = 0`:
//! `(E - δt/2 A) x_{k+1} = (E + δt/2 A) x_k + δt B u(t_k + δt/2)`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{MorError, Result};
use crate::input::InputSignal;
use crate::io::write_atomic;
use crate::linalg::Matrix;
use crate::system::LinearModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `times[k] = k δt`.
    pub times: Vec<f64>,
    pub outputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn outputs_dim(&self) -> usize {
        self.outputs.first().map_or(0, DVector::len)
    }

    /// Largest `||y(t_k)||_2` on the grid.
    pub fn max_output_norm(&self) -> f64 {
        self.outputs.iter().map(|y| y.norm()).fold(0.0, f64::max)
    }

    /// Header `t,y_1,…,y_p`, one row per grid point, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 1..=self.outputs_dim() {
            let _ = write!(out, ",y_{i}");
        }
        out.push('\n');
        for (t, y) in self.times.iter().zip(&self.outputs) {
            let _ = write!(out, "{t:.16e}");
            for v in y.iter() {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Number of steps `K` with `K δt = t_end`, rejecting grids that do not fit.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() || !(t_end >= dt) || !t_end.is_finite() {
        return Err(MorError::InvalidArgument(format!(
            "need 0 < dt <= t_end, got dt = {dt}, t_end = {t_end}"
        )));
    }
    let k = (t_end / dt).round();
    if (k * dt - t_end).abs() > 1e-9 * t_end {
        return Err(MorError::InvalidArgument(format!(
            "t_end = {t_end} is not an integer multiple of dt = {dt}"
        )));
    }
    Ok(k as usize)
}

pub fn simulate<M: LinearModel + ?Sized>(
    model: &M,
    u: &InputSignal,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let steps = step_count(t_end, dt)?;
    let (a, b, c) = (model.a(), model.b(), model.c());
    let n = a.nrows();
    if u.dim() != b.ncols() {
        return Err(MorError::dim(
            "input",
            format!("signal has {} channels, model has {} inputs", u.dim(), b.ncols()),
        ));
    }
    let e = model.e().cloned().unwrap_or_else(|| Matrix::identity(n, n));
    let half = 0.5 * dt;
    let lhs = &e - a * half;
    let rhs = &e + a * half;
    let lu = lhs.lu();
    // One factorization; the propagators below are formed from it once.
    let phi = lu
        .solve(&rhs)
        .ok_or_else(|| MorError::Singular("E - dt/2 A".into()))?;
    let gamma = lu
        .solve(&(b * dt))
        .ok_or_else(|| MorError::Singular("E - dt/2 A".into()))?;
    if phi.iter().chain(gamma.iter()).any(|v| !v.is_finite()) {
        return Err(MorError::Singular("E - dt/2 A".into()));
    }

    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut x = DVector::zeros(n);
    times.push(0.0);
    outputs.push(c * &x);
    for k in 0..steps {
        let tk = k as f64 * dt;
        let uk = u.eval(tk + half)?;
        x = &phi * &x + &gamma * uk;
        let tn = (k + 1) as f64 * dt;
        let y = c * &x;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(MorError::NonFinite(format!("simulated output at t = {tn}")));
        }
        times.push(tn);
        outputs.push(y);
    }
    Ok(Trajectory { times, outputs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputError {
    /// `||y(t_k) - y_r(t_k)||_2`.
    pub series: Vec<f64>,
    /// Max over grid points with `t_k ≤ T`.
    pub max_on_horizon: f64,
    pub max_overall: f64,
}

pub fn output_error(full: &Trajectory, reduced: &Trajectory, tbar: f64) -> Result<OutputError> {
    if full.times != reduced.times {
        return Err(MorError::dim("trajectories", "time grids differ"));
    }
    if full.outputs_dim() != reduced.outputs_dim() {
        return Err(MorError::dim(
            "trajectories",
            format!("{} vs {} outputs", full.outputs_dim(), reduced.outputs_dim()),
        ));
    }
    let series: Vec<f64> = full
        .outputs
        .iter()
        .zip(&reduced.outputs)
        .map(|(y, yr)| (y - yr).norm())
        .collect();
    // Tolerate the rounding in k*dt when T falls on the grid.
    let limit = tbar * (1.0 + 1e-12);
    let max_on_horizon = series
        .iter()
        .zip(&full.times)
        .filter(|(_, &t)| t <= limit)
        .map(|(e, _)| *e)
        .fold(0.0, f64::max);
    let max_overall = series.iter().copied().fold(0.0, f64::max);
    Ok(OutputError {
        series,
        max_on_horizon,
        max_overall,
    })
}

/// Composite trapezoid approximation of `||u||_{L²(0,T)}` on the grid `k δt`.
pub fn input_l2_norm(u: &InputSignal, tbar: f64, dt: f64) -> Result<f64> {
    let steps = step_count(tbar, dt)?;
    let mut acc = 0.0;
    let mut prev = u.eval(0.0)?.norm_squared();
    for k in 1..=steps {
        let cur = u.eval(k as f64 * dt)?.norm_squared();
        acc += 0.5 * dt * (prev + cur);
        prev = cur;
    }
    Ok(acc.sqrt())
}
