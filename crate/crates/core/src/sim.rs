//! Euler-Maruyama simulation of dX = S(X)dt + eps sigma1(t,X) sigma2(t,Y) dW
//! with an adapted volatility process Y driven by the same increments.

use crate::error::{Error, Result};
use crate::model::{Driver, SamplePath, Scenario, VolatilityKind, VolatilitySpec};
use crate::ode::DIVERGENCE_GUARD;
use crate::rng::{mix64, NormalStream};
use crate::stats::NeumaierSum;

/// Salt separating the independent-driver stream from the main one.
const INDEPENDENT_DRIVER_SALT: u64 = 0x5EED_0F1D_E9E4_D000;

/// i.i.d. N(0, dt) increments, deterministic in `seed`.
pub fn generate_wiener_increments(n_steps: usize, dt: f64, seed: u64) -> Vec<f64> {
    let scale = dt.sqrt();
    let mut normals = NormalStream::new(seed);
    (0..n_steps).map(|_| scale * normals.next_standard()).collect()
}

/// Y on the grid, one value per grid point. `y[i]` depends on `dw[..i]` only.
pub fn simulate_volatility(spec: &VolatilitySpec, dw: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = dw.len();
    let mut y = Vec::with_capacity(n + 1);
    match spec.kind {
        VolatilityKind::Constant(v) => y.resize(n + 1, v),
        VolatilityKind::Ou { theta, mu, eta, y0 } => {
            if theta < 0.0 || eta < 0.0 {
                return Err(Error::config(format!(
                    "OU volatility requires theta >= 0 and eta >= 0, got theta = {theta}, eta = {eta}"
                )));
            }
            let mut state = y0;
            y.push(state);
            for (i, &inc) in dw.iter().enumerate() {
                state += theta * (mu - state) * dt + eta * inc;
                if !state.is_finite() || state.abs() > DIVERGENCE_GUARD {
                    return Err(Error::Divergence { step: i + 1, time: (i + 1) as f64 * dt, value: state });
                }
                y.push(state);
            }
        }
        VolatilityKind::FunctionalOfW(map) => {
            let mut w = 0.0;
            y.push(map.apply(w));
            for &inc in dw {
                w += inc;
                y.push(map.apply(w));
            }
        }
    }
    Ok(y)
}

pub fn simulate_path(s: &Scenario, seed: u64) -> Result<SamplePath> {
    let grid = s.grid()?;
    let h = grid.step;
    let dw = generate_wiener_increments(grid.n_steps, h, seed);
    let y = match s.volatility.driver {
        Driver::Same => simulate_volatility(&s.volatility, &dw, h)?,
        Driver::Independent => {
            let other = generate_wiener_increments(grid.n_steps, h, mix64(seed ^ INDEPENDENT_DRIVER_SALT));
            simulate_volatility(&s.volatility, &other, h)?
        }
    };
    let mut x = Vec::with_capacity(grid.n_steps + 1);
    let mut state = s.x0;
    x.push(state);
    for i in 0..grid.n_steps {
        let t = grid.time(i);
        let drift = s.trend.eval(state) * h;
        let noise = if s.eps == 0.0 { 0.0 } else { s.eps * s.diffusion.eval(t, state, y[i]) * dw[i] };
        state += drift + noise;
        if !state.is_finite() || state.abs() > DIVERGENCE_GUARD {
            return Err(Error::Divergence { step: i + 1, time: grid.time(i + 1), value: state });
        }
        x.push(state);
    }
    Ok(SamplePath { times: grid.times(), x, dw, y })
}

/// Mean over replicates of max_t X_t^2.
pub fn sup_square_moment_diagnostic(paths: &[SamplePath]) -> Result<f64> {
    let first = paths.first().ok_or_else(|| Error::config("sup-square diagnostic needs at least one path"))?;
    if first.x.is_empty() {
        return Err(Error::config("sup-square diagnostic needs a nonempty grid"));
    }
    let mut acc = NeumaierSum::default();
    for p in paths {
        if p.times != first.times {
            return Err(Error::config("sup-square diagnostic requires a common time grid"));
        }
        acc.add(p.x.iter().fold(0.0f64, |m, v| m.max(v * v)));
    }
    Ok(acc.total() / paths.len() as f64)
}
