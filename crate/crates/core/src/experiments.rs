//! Monte Carlo harnesses for the small-noise claims: the coupling bound
//! between X and the limit path, consistency and rate of the kernel
//! estimator, the three-term error decomposition, and the limiting
//! distribution of the normalized estimation error.
//!
//! Replicate `r` draws its randomness from `seeds.stream_for(r)` at every
//! noise level of a ladder, so ladders use common random numbers.
//! Replicates run in parallel in fixed-size chunks; each chunk accumulates
//! sequentially with compensated sums and chunks are merged in index order,
//! which makes every result independent of the worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{bandwidth_for, bias_mean, interior_grid, theory_exponent, time_bias_mean, KernelWindow};
use crate::kernels::{verify_kernel_conditions, Kernel, DEFAULT_MOMENT_TOL};
use crate::model::{DeterministicPath, SamplePath, Scenario};
use crate::ode::solve_on_grid;
use crate::rng::SeedPlan;
use crate::sim::simulate_path;
use crate::stats::{ci95_halfwidth, fit_loglog_rate, ks_distance, NeumaierSum};
use crate::validate::{validate_scenario, DEFAULT_PROBE_POINTS};

/// Replicates per work unit. Fixed so the reduction tree never depends on
/// how many workers run it.
const CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub reps: usize,
    pub seeds: SeedPlan,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub workers: usize,
    pub probe_points: usize,
}

impl RunSettings {
    pub fn new(reps: usize, master_seed: u64) -> Self {
        RunSettings { reps, seeds: SeedPlan::new(master_seed), workers: 0, probe_points: DEFAULT_PROBE_POINTS }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MseLadder {
    pub eps_list: Vec<f64>,
    /// Max over the time grid of the replicate mean squared error.
    pub mse: Vec<f64>,
    pub reps: usize,
    pub ci_halfwidth: Vec<f64>,
    /// Bandwidth per eps (empty for coupling ladders).
    pub phi: Vec<f64>,
    /// Time at which the maximum was attained.
    pub argmax_t: Vec<f64>,
}

impl MseLadder {
    /// Steps along the descending ladder where the error fails to decrease.
    /// The second element is true when every such step is within the sum of
    /// the two neighbouring CI half-widths.
    pub fn monotone_violations(&self) -> (usize, bool) {
        let mut count = 0;
        let mut within_ci = true;
        for i in 1..self.mse.len() {
            if self.mse[i] >= self.mse[i - 1] {
                count += 1;
                within_ci &= self.mse[i] - self.mse[i - 1] <= self.ci_halfwidth[i] + self.ci_halfwidth[i - 1];
            }
        }
        (count, within_ci)
    }

    /// Strictly decreasing, allowing at most one step that stays within the
    /// CI width.
    pub fn is_consistent(&self) -> bool {
        let (count, within_ci) = self.monotone_violations();
        count == 0 || (count == 1 && within_ci)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub ladder: MseLadder,
    pub slope: f64,
    pub intercept: f64,
    pub theory_exponent: f64,
    pub r_squared: f64,
}

impl RateReport {
    pub fn from_ladder(ladder: MseLadder, theory_exponent: f64) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = ladder.eps_list.iter().copied().zip(ladder.mse.iter().copied()).collect();
        let fit = fit_loglog_rate(&pairs)?;
        Ok(RateReport { ladder, slope: fit.slope, intercept: fit.intercept, theory_exponent, r_squared: fit.r_squared })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionRow {
    pub t: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub mse: f64,
}

/// How the normalized error is centred before comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Centering {
    /// m = S^{(k+1)}(x_t)/(k+1)! * int G u^{k+1}
    #[default]
    StateDerivative,
    /// The same with d^{k+1}/dtau^{k+1} S(x_tau) in place of S^{(k+1)}.
    TimeDerivative,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DistOptions {
    /// Right-hand samples reuse the left-hand Wiener increments.
    pub paired: bool,
    pub centering: Centering,
    /// Non-default bandwidth; `None` uses eps^{2/(2k+3)}.
    pub phi_override: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistComparison {
    /// eps^{-2(k+1)/(2k+3)} (S_hat_t - S(x_t)) - m
    pub sample_lhs: Vec<f64>,
    /// eps^{-1/(2k+3)} sum_i G((t_i - t)/phi) sigma1 sigma2 dW_i
    pub sample_rhs: Vec<f64>,
    /// S_hat_t - S(x_t)
    pub raw_lhs: Vec<f64>,
    /// (eps/phi) sum_i G((t_i - t)/phi) sigma1 sigma2 dW_i
    pub raw_rhs: Vec<f64>,
    pub ks_distance: f64,
    pub reps: usize,
    pub m: f64,
    pub phi: f64,
    pub eps: f64,
    pub paired: bool,
}

fn with_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Per-index sums of a replicate-valued vector and of its squares.
struct Accumulated {
    sum: Vec<NeumaierSum>,
    sum_sq: Vec<NeumaierSum>,
}

impl Accumulated {
    fn new(dim: usize) -> Self {
        Accumulated { sum: vec![NeumaierSum::default(); dim], sum_sq: vec![NeumaierSum::default(); dim] }
    }

    fn add(&mut self, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            self.sum[i].add(*v);
            self.sum_sq[i].add(v * v);
        }
    }

    fn merge(&mut self, other: &Accumulated) {
        for i in 0..self.sum.len() {
            self.sum[i].merge(&other.sum[i]);
            self.sum_sq[i].merge(&other.sum_sq[i]);
        }
    }

    fn mean(&self, i: usize, n: usize) -> f64 {
        self.sum[i].total() / n as f64
    }

    fn variance(&self, i: usize, n: usize) -> f64 {
        let nf = n as f64;
        let m = self.mean(i, n);
        ((self.sum_sq[i].total() - nf * m * m) / (nf - 1.0)).max(0.0)
    }
}

fn accumulate(
    settings: &RunSettings,
    dim: usize,
    per_rep: impl Fn(usize) -> Result<Vec<f64>> + Sync,
) -> Result<Accumulated> {
    let n_chunks = settings.reps.div_ceil(CHUNK);
    let reps = settings.reps;
    let chunks = with_pool(settings.workers, || {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = Accumulated::new(dim);
                for r in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                    acc.add(&per_rep(r)?);
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut total = Accumulated::new(dim);
    for c in &chunks {
        total.merge(c);
    }
    Ok(total)
}

fn collect_replicates<T: Send>(settings: &RunSettings, per_rep: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let reps = settings.reps;
    with_pool(settings.workers, || (0..reps).into_par_iter().map(&per_rep).collect::<Result<Vec<_>>>())?
}

fn validated(s: &Scenario, settings: &RunSettings) -> Result<()> {
    let report = validate_scenario(s, settings.probe_points);
    if !report.is_pass() {
        return Err(Error::Validation(report));
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(())
}

fn check_ladder(eps_list: &[f64]) -> Result<()> {
    if eps_list.len() < 3 {
        return Err(Error::config(format!("eps_list needs at least 3 values, got {}", eps_list.len())));
    }
    if let Some(e) = eps_list.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::config(format!("eps_list entries must be positive and finite, got {e}")));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("eps_list must be strictly descending"));
    }
    Ok(())
}

fn check_reps(settings: &RunSettings, min: usize, what: &str) -> Result<()> {
    if settings.reps < min {
        return Err(Error::config(format!("{what} needs reps >= {min}, got {}", settings.reps)));
    }
    Ok(())
}

fn limit_path(s: &Scenario) -> Result<DeterministicPath> {
    solve_on_grid(&s.trend, s.x0, &s.grid()?)
}

/// sup over the grid of mean (X_t - x_t)^2 for each eps, regressed on eps
/// in log-log coordinates; the theoretical exponent is 2.
pub fn coupling_experiment(s: &Scenario, eps_list: &[f64], settings: &RunSettings) -> Result<RateReport> {
    check_ladder(eps_list)?;
    check_reps(settings, 50, "coupling experiment")?;
    let span = eps_list[0] / eps_list[eps_list.len() - 1];
    if span < 8.0 * (1.0 - 1e-9) {
        return Err(Error::config(format!("coupling ladder must span at least 3 dyadic steps, spans a factor {span}")));
    }
    validated(s, settings)?;
    let limit = limit_path(s)?;
    let dim = limit.x.len();
    let mut ladder = MseLadder {
        eps_list: eps_list.to_vec(),
        mse: vec![],
        reps: settings.reps,
        ci_halfwidth: vec![],
        phi: vec![],
        argmax_t: vec![],
    };
    for &eps in eps_list {
        let scenario = s.clone().with_eps(eps);
        let acc = accumulate(settings, dim, |r| {
            let path = simulate_path(&scenario, settings.seeds.stream_for(r as u64))?;
            Ok(path.x.iter().zip(&limit.x).map(|(a, b)| (a - b) * (a - b)).collect())
        })?;
        let (best, value) = argmax((0..dim).map(|i| acc.mean(i, settings.reps)));
        ladder.mse.push(value);
        ladder.ci_halfwidth.push(ci95_halfwidth(acc.variance(best, settings.reps), settings.reps));
        ladder.argmax_t.push(limit.times[best]);
    }
    RateReport::from_ladder(ladder, 2.0)
}

fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values.enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) })
}

fn windows_for(g: &Kernel, phi: f64, times: &[f64], s: &Scenario) -> Result<Vec<KernelWindow>> {
    let grid = s.grid()?;
    times.iter().map(|&t| KernelWindow::new(g, phi, t, grid.step, grid.n_steps)).collect()
}

fn check_kernel(g: &Kernel, k: u32) -> Result<()> {
    let report = verify_kernel_conditions(g, k, DEFAULT_MOMENT_TOL);
    if !report.passed() {
        return Err(Error::config(format!(
            "kernel '{}' fails the order-{k} moment conditions:\n{}",
            g.id(),
            report.to_csv()
        )));
    }
    Ok(())
}

#[inline]
fn estimate_with(window: &KernelWindow, path: &SamplePath) -> f64 {
    window.apply(|i| path.x[i + 1] - path.x[i])
}

/// Sup-over-grid MSE of the estimator for each eps with phi = eps^{2/(2k+3)},
/// fitted against the exponent 4(k+1)/(2k+3).
#[allow(clippy::too_many_arguments)]
pub fn mse_experiment(
    s: &Scenario,
    g: &Kernel,
    k: u32,
    eps_list: &[f64],
    c: f64,
    d: f64,
    n_grid: usize,
    settings: &RunSettings,
) -> Result<RateReport> {
    check_ladder(eps_list)?;
    check_reps(settings, 2, "rate experiment")?;
    check_kernel(g, k)?;
    if !(c > 0.0 && d < s.horizon) {
        return Err(Error::config(format!("[c, d] = [{c}, {d}] must lie inside (0, T = {})", s.horizon)));
    }
    let times = interior_grid(c, d, n_grid)?;
    let phis = eps_list.iter().map(|&e| bandwidth_for(e, k)).collect::<Result<Vec<_>>>()?;
    // Bandwidth and window checks happen for the whole ladder before any simulation.
    let windows = phis.iter().map(|&phi| windows_for(g, phi, &times, s)).collect::<Result<Vec<_>>>()?;
    validated(s, settings)?;
    let limit = limit_path(s)?;
    let targets =
        times.iter().map(|&t| limit.value_at(t, &s.trend).map(|x| s.trend.eval(x))).collect::<Result<Vec<_>>>()?;

    let mut ladder = MseLadder {
        eps_list: eps_list.to_vec(),
        mse: vec![],
        reps: settings.reps,
        ci_halfwidth: vec![],
        phi: phis.clone(),
        argmax_t: vec![],
    };
    for (&eps, wins) in eps_list.iter().zip(&windows) {
        let scenario = s.clone().with_eps(eps);
        let acc = accumulate(settings, times.len(), |r| {
            let path = simulate_path(&scenario, settings.seeds.stream_for(r as u64))?;
            Ok(wins.iter().zip(&targets).map(|(w, target)| (estimate_with(w, &path) - target).powi(2)).collect())
        })?;
        let (best, value) = argmax((0..times.len()).map(|i| acc.mean(i, settings.reps)));
        ladder.mse.push(value);
        ladder.ci_halfwidth.push(ci95_halfwidth(acc.variance(best, settings.reps), settings.reps));
        ladder.argmax_t.push(times[best]);
    }
    RateReport::from_ladder(ladder, theory_exponent(k))
}

/// Empirical analogues of the three error terms at each time in `times`:
///
/// ```text
/// R1 = (1/phi) sum_i G_i (S(X_i) - S(x_i)) dt
/// R2 = (1/phi) sum_i G_i S(x_i) dt - S(x_t)
/// R3 = (eps/phi) sum_i G_i sigma1(t_i, X_i) sigma2(t_i, Y_i) dW_i
/// ```
///
/// with i1 = mean R1^2, i2 = R2^2, i3 = mean R3^2 and mse = mean
/// (S_hat_t - S(x_t))^2 over the same replicates. Here x is the
/// noise-free Euler skeleton on the simulation grid, so R1 + R2 + R3 equals
/// the estimation error exactly and mse <= 3 (i1 + i2 + i3) path by path.
#[allow(clippy::too_many_arguments)]
pub fn error_decomposition(
    s: &Scenario,
    g: &Kernel,
    k: u32,
    eps: f64,
    times: &[f64],
    settings: &RunSettings,
    phi_override: Option<f64>,
) -> Result<Vec<DecompositionRow>> {
    check_reps(settings, 2, "error decomposition")?;
    check_kernel(g, k)?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::config(format!("eps must be finite and nonnegative, got {eps}")));
    }
    let phi = match phi_override {
        Some(phi) => phi,
        None if eps == 0.0 => {
            return Err(Error::config("eps = 0 has no theorem bandwidth; supply an explicit phi"));
        }
        None => bandwidth_for(eps, k)?,
    };
    let wins = windows_for(g, phi, times, s)?;
    validated(s, settings)?;
    let grid = s.grid()?;
    let h = grid.step;
    let skeleton = simulate_path(&s.clone().with_eps(0.0), 0)?;
    let skeleton_drift: Vec<f64> = skeleton.x.iter().map(|&x| s.trend.eval(x)).collect();
    let targets: Vec<f64> = times.iter().map(|&t| s.trend.eval(interpolate(&skeleton.x, t / h))).collect();
    let i2: Vec<f64> =
        wins.iter().zip(&targets).map(|(w, target)| (w.apply(|i| skeleton_drift[i] * h) - target).powi(2)).collect();

    let scenario = s.clone().with_eps(eps);
    let n_t = times.len();
    let acc = accumulate(settings, 3 * n_t, |r| {
        let path = simulate_path(&scenario, settings.seeds.stream_for(r as u64))?;
        let mut out = vec![0.0; 3 * n_t];
        for (j, (w, target)) in wins.iter().zip(&targets).enumerate() {
            let r1 = w.apply(|i| (s.trend.eval(path.x[i]) - skeleton_drift[i]) * h);
            let r3 = eps * w.apply(|i| s.diffusion.eval(path.times[i], path.x[i], path.y[i]) * path.dw[i]);
            let err = estimate_with(w, &path) - target;
            out[j] = r1;
            out[n_t + j] = r3;
            out[2 * n_t + j] = err;
        }
        Ok(out)
    })?;
    let reps = settings.reps as f64;
    Ok((0..n_t)
        .map(|j| DecompositionRow {
            t: times[j],
            i1: acc.sum_sq[j].total() / reps,
            i2: i2[j],
            i3: acc.sum_sq[n_t + j].total() / reps,
            mse: acc.sum_sq[2 * n_t + j].total() / reps,
        })
        .collect())
}

fn interpolate(values: &[f64], pos: f64) -> f64 {
    let pos = pos.clamp(0.0, (values.len() - 1) as f64);
    let i = (pos.floor() as usize).min(values.len().saturating_sub(2));
    let frac = pos - i as f64;
    if frac.abs() < 1e-9 {
        return values[i];
    }
    if (1.0 - frac).abs() < 1e-9 {
        return values[i + 1];
    }
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// Compares the normalized, centred estimation error at time t with the
/// normalized stochastic integral
///
/// ```text
/// eps^{-1/(2k+3)} sum_i G((t_i - t)/phi) sigma1(t_i, X_i) sigma2(t_i, Y_i) dW_i.
/// ```
///
/// The stochastic part of the error is R3 = (eps/phi) * (integral), and
/// eps^{-2(k+1)/(2k+3)} * eps / phi = eps^{-1/(2k+3)} when phi =
/// eps^{2/(2k+3)}, so the right-hand sample is exactly the normalized R3.
/// Both raw and normalized samples are kept.
#[allow(clippy::too_many_arguments)]
pub fn limit_distribution_experiment(
    s: &Scenario,
    g: &Kernel,
    k: u32,
    eps: f64,
    t: f64,
    settings: &RunSettings,
    options: DistOptions,
) -> Result<DistComparison> {
    check_reps(settings, 1000, "limit-distribution experiment")?;
    check_kernel(g, k)?;
    let phi = match options.phi_override {
        Some(phi) => phi,
        None => bandwidth_for(eps, k)?,
    };
    let window = windows_for(g, phi, &[t], s)?.remove(0);
    validated(s, settings)?;
    let limit = limit_path(s)?;
    let target = s.trend.eval(limit.value_at(t, &s.trend)?);
    let m = match options.centering {
        Centering::StateDerivative => bias_mean(&s.trend, &limit, g, k, t)?,
        Centering::TimeDerivative => time_bias_mean(&s.trend, &limit, g, k, t)?,
    };
    let kf = k as f64;
    let error_scale = eps.powf(-2.0 * (kf + 1.0) / (2.0 * kf + 3.0));
    let integral_scale = eps.powf(-1.0 / (2.0 * kf + 3.0));

    let scenario = s.clone().with_eps(eps);
    let rhs_seeds = if options.paired { settings.seeds } else { settings.seeds.child(1) };
    let stochastic_integral = |path: &SamplePath| {
        phi * window.apply(|i| scenario.diffusion.eval(path.times[i], path.x[i], path.y[i]) * path.dw[i])
    };
    let pairs = collect_replicates(settings, |r| {
        let path = simulate_path(&scenario, settings.seeds.stream_for(r as u64))?;
        let raw_lhs = estimate_with(&window, &path) - target;
        let integral = if options.paired {
            stochastic_integral(&path)
        } else {
            stochastic_integral(&simulate_path(&scenario, rhs_seeds.stream_for(r as u64))?)
        };
        Ok((raw_lhs, integral))
    })?;
    let raw_lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let raw_rhs: Vec<f64> = pairs.iter().map(|p| eps / phi * p.1).collect();
    let sample_lhs: Vec<f64> = raw_lhs.iter().map(|v| error_scale * v - m).collect();
    let sample_rhs: Vec<f64> = pairs.iter().map(|p| integral_scale * p.1).collect();
    let ks = ks_distance(&sample_lhs, &sample_rhs)?;
    Ok(DistComparison {
        sample_lhs,
        sample_rhs,
        raw_lhs,
        raw_rhs,
        ks_distance: ks,
        reps: settings.reps,
        m,
        phi,
        eps,
        paired: options.paired,
    })
}

/// Variance of the right-hand sample when sigma1 = sigma2 = 1: the sample is
/// then exactly Gaussian with variance eps^{-2/(2k+3)} sum_i G_i^2 dt.
pub fn unit_diffusion_rhs_variance(s: &Scenario, g: &Kernel, k: u32, eps: f64, t: f64) -> Result<f64> {
    let phi = bandwidth_for(eps, k)?;
    let window = windows_for(g, phi, &[t], s)?.remove(0);
    let grid = s.grid()?;
    Ok(eps.powf(-2.0 / (2.0 * k as f64 + 3.0)) * window.sum_of_squares() * grid.step)
}
