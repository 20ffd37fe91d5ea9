//! Classical fixed-step Runge-Kutta solver for the limit ODE dx/dt = S(x).

use crate::error::{Error, Result};
use crate::model::{DeterministicPath, TimeGrid, TrendSpec};

/// States beyond this magnitude abort the integration.
pub const DIVERGENCE_GUARD: f64 = 1e12;

pub fn solve_limit_ode(trend: &TrendSpec, x0: f64, horizon: f64, dt: f64) -> Result<DeterministicPath> {
    let grid = TimeGrid::new(horizon, dt)?;
    solve_on_grid(trend, x0, &grid)
}

pub fn solve_on_grid(trend: &TrendSpec, x0: f64, grid: &TimeGrid) -> Result<DeterministicPath> {
    if !x0.is_finite() {
        return Err(Error::config(format!("x0 must be finite, got {x0}")));
    }
    let h = grid.step;
    let mut x = Vec::with_capacity(grid.n_steps + 1);
    x.push(x0);
    let mut state = x0;
    for i in 0..grid.n_steps {
        let k1 = trend.eval(state);
        let k2 = trend.eval(state + 0.5 * h * k1);
        let k3 = trend.eval(state + 0.5 * h * k2);
        let k4 = trend.eval(state + h * k3);
        state += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !state.is_finite() || state.abs() > DIVERGENCE_GUARD {
            return Err(Error::Divergence { step: i + 1, time: grid.time(i + 1), value: state });
        }
        x.push(state);
    }
    Ok(DeterministicPath { times: grid.times(), x })
}
