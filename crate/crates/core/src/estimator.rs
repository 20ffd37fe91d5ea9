//! Kernel-type trend estimator
//!
//! ```text
//! S_hat(t) = (1/phi) sum_i G((t_i - t)/phi) (X_{i+1} - X_i),
//! ```
//!
//! the left-point discretization of (1/phi) int_0^T G((tau - t)/phi) dX_tau,
//! with the bandwidth phi = eps^{2/(2k+3)} and the limiting bias mean.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::model::{DeterministicPath, SamplePath, TrendSpec};
use crate::validate::linspace;

/// phi must cover at least this many grid steps.
pub const MIN_STEPS_PER_BANDWIDTH: f64 = 10.0;

/// Slack on the window check so grid-aligned windows are not rejected by
/// rounding.
const WINDOW_SLACK: f64 = 1e-12;

/// phi_eps = eps^{2/(2k+3)}.
pub fn bandwidth_for(eps: f64, k: u32) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Domain(format!("bandwidth needs eps > 0, got {eps}")));
    }
    if eps >= 1.0 {
        log::warn!("eps = {eps} >= 1 is outside the small-noise regime; bandwidth computed anyway");
    }
    Ok(eps.powf(2.0 / (2.0 * k as f64 + 3.0)))
}

/// Rate exponent 4(k+1)/(2k+3) of the mean squared error.
pub fn theory_exponent(k: u32) -> f64 {
    4.0 * (k as f64 + 1.0) / (2.0 * k as f64 + 3.0)
}

/// Kernel weights G((t_i - t)/phi) for the increments inside the window.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelWindow {
    pub first: usize,
    pub weights: Vec<f64>,
    pub phi: f64,
}

impl KernelWindow {
    pub fn new(g: &Kernel, phi: f64, t: f64, step: f64, n_steps: usize) -> Result<Self> {
        let horizon = step * n_steps as f64;
        check_resolution(phi, step)?;
        let (a, b) = g.support();
        let slack = WINDOW_SLACK * horizon.max(1.0);
        if !(t.is_finite() && t + phi * a >= -slack && t + phi * b <= horizon + slack) {
            return Err(Error::Boundary { t, phi, a, b, horizon });
        }
        let lo = (((t + phi * a) / step).floor() as isize - 1).max(0) as usize;
        let hi = ((((t + phi * b) / step).ceil() as isize + 1).max(0) as usize).min(n_steps.saturating_sub(1));
        let weights = (lo..=hi).map(|i| g.eval((i as f64 * step - t) / phi)).collect();
        Ok(KernelWindow { first: lo, weights, phi })
    }

    pub fn for_path(path: &SamplePath, g: &Kernel, phi: f64, t: f64) -> Result<Self> {
        if path.dw.is_empty() {
            return Err(Error::config("estimation needs a path with at least one step"));
        }
        KernelWindow::new(g, phi, t, path.step(), path.n_steps())
    }

    /// (1/phi) sum_i w_i v_i over the window, for any per-increment series.
    #[inline]
    pub fn apply(&self, per_step: impl Fn(usize) -> f64) -> f64 {
        let mut acc = crate::stats::NeumaierSum::default();
        for (j, w) in self.weights.iter().enumerate() {
            if *w != 0.0 {
                acc.add(w * per_step(self.first + j));
            }
        }
        acc.total() / self.phi
    }

    /// sum_i G((t_i - t)/phi) dt / phi, which tends to one as dt/phi -> 0.
    pub fn discrete_mass(&self, step: f64) -> f64 {
        self.apply(|_| step)
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

fn check_resolution(phi: f64, step: f64) -> Result<()> {
    let floor = MIN_STEPS_PER_BANDWIDTH * step;
    if !(phi.is_finite() && phi >= floor * (1.0 - 1e-12)) {
        return Err(Error::Resolution { phi, floor });
    }
    Ok(())
}

pub fn estimate_at(path: &SamplePath, g: &Kernel, phi: f64, t: f64) -> Result<f64> {
    let window = KernelWindow::for_path(path, g, phi, t)?;
    Ok(window.apply(|i| path.x[i + 1] - path.x[i]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateSeries {
    pub t_grid: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub phi: f64,
    pub kernel_id: String,
}

impl EstimateSeries {
    /// CSV with header `t,s_hat,phi,kernel`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s_hat,phi,kernel\n");
        for (t, s) in self.t_grid.iter().zip(&self.s_hat) {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                crate::output::fmt_real(*t),
                crate::output::fmt_real(*s),
                crate::output::fmt_real(self.phi),
                self.kernel_id
            );
        }
        out
    }
}

/// `n_points` equally spaced times in [c, d].
pub fn interior_grid(c: f64, d: f64, n_points: usize) -> Result<Vec<f64>> {
    if n_points == 0 {
        return Err(Error::config("estimation grid needs at least one point"));
    }
    if c.is_nan() || d.is_nan() || c > d {
        return Err(Error::config(format!("estimation interval needs c <= d, got [{c}, {d}]")));
    }
    if n_points == 1 && c != d {
        return Err(Error::config("a single-point estimation grid needs c = d"));
    }
    Ok(linspace(c, d, n_points))
}

pub fn estimate_series(
    path: &SamplePath,
    g: &Kernel,
    phi: f64,
    c: f64,
    d: f64,
    n_points: usize,
) -> Result<EstimateSeries> {
    let horizon = path.horizon();
    if !(c > 0.0 && d < horizon) {
        return Err(Error::config(format!("estimation interval [{c}, {d}] must lie inside (0, {horizon})")));
    }
    let t_grid = interior_grid(c, d, n_points)?;
    let s_hat = t_grid.iter().map(|&t| estimate_at(path, g, phi, t)).collect::<Result<Vec<_>>>()?;
    Ok(EstimateSeries { t_grid, s_hat, phi, kernel_id: g.id().to_string() })
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// m = S^{(k+1)}(x_t) / (k+1)! * int G(u) u^{k+1} du.
pub fn bias_mean(trend: &TrendSpec, limit: &DeterministicPath, g: &Kernel, k: u32, t: f64) -> Result<f64> {
    let order = k as usize + 1;
    if order > trend.max_derivative_order() {
        return Err(Error::Capability(format!("trend '{}' cannot provide derivative order {order}", trend.name)));
    }
    let x_t = limit.value_at(t, trend)?;
    let deriv = trend.derivative(order, x_t)?;
    Ok(deriv / factorial(k + 1) * g.moment(k + 1))
}

/// Bias mean with the time derivative d^{k+1}/dtau^{k+1} S(x_tau) in place
/// of S^{(k+1)}(x_t). Along dx/dt = S(x) the chain rule gives
/// S'S, S''S^2 + S'^2 S and S'''S^3 + 4 S'S''S^2 + S'^3 S for k = 0, 1, 2.
pub fn time_bias_mean(trend: &TrendSpec, limit: &DeterministicPath, g: &Kernel, k: u32, t: f64) -> Result<f64> {
    let x = limit.value_at(t, trend)?;
    let s = trend.eval(x);
    let d = |j: usize| trend.derivative(j, x);
    let time_derivative = match k {
        0 => d(1)? * s,
        1 => d(2)? * s * s + d(1)?.powi(2) * s,
        2 => {
            let (d1, d2, d3) = (d(1)?, d(2)?, d(3)?);
            d3 * s.powi(3) + 4.0 * d1 * d2 * s * s + d1.powi(3) * s
        }
        _ => {
            return Err(Error::Capability(format!("time-derivative bias mean is implemented for k <= 2, got k = {k}")))
        }
    };
    Ok(time_derivative / factorial(k + 1) * g.moment(k + 1))
}
