//! Sampled checks of the structural conditions a scenario claims: Lipschitz
//! trend, linear growth of sigma1, bounded sigma2, a uniform grid, and the
//! consistency of supplied derivatives. Global inequalities cannot be
//! verified for black-box functions, so every check runs on a finite probe
//! grid and reports a witness point when it fails.

use std::fmt;

use crate::model::{central_difference, Scenario, TimeGrid, TrendShape, VolatilityKind};

pub const DEFAULT_PROBE_POINTS: usize = 101;

const REL_TOL: f64 = 1e-9;
const ABS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    /// (A1)(i): |S(x) - S(y)| <= L |x - y|
    Lipschitz,
    /// (A1)(ii): sigma1(t, x)^2 <= K (1 + x^2)
    LinearGrowth,
    /// (A1)(iii): |sigma2(t, y)| <= bound
    BoundedSigma2,
    /// |S(x)| <= C, membership of Theta_k(L)
    UniformBound,
    /// S^(j) agrees with a central difference of S^(j-1)
    DerivativeConsistency,
    /// T / dt integral, dt > 0, finite x0
    Grid,
    /// eps >= 0
    NoiseLevel,
    /// OU parameters theta >= 0, eta >= 0
    Volatility,
}

impl Condition {
    pub fn code(self) -> &'static str {
        match self {
            Condition::Lipschitz => "(A1)(i)",
            Condition::LinearGrowth => "(A1)(ii)",
            Condition::BoundedSigma2 => "(A1)(iii)",
            Condition::UniformBound => "uniform-bound",
            Condition::DerivativeConsistency => "derivative-consistency",
            Condition::Grid => "grid",
            Condition::NoiseLevel => "noise-level",
            Condition::Volatility => "volatility",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub condition: Condition,
    /// Named coordinates of the offending probe point.
    pub witness: Vec<(&'static str, f64)>,
    pub detail: String,
}

impl Violation {
    pub fn witness_value(&self, name: &str) -> Option<f64> {
        self.witness.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition.code(), self.detail)?;
        if !self.witness.is_empty() {
            let coords: Vec<String> = self.witness.iter().map(|(n, v)| format!("{n}={v}")).collect();
            write!(f, " [witness {}]", coords.join(", "))?;
        }
        Ok(())
    }
}

/// Violations fail a scenario; warnings flag conditions some experiments
/// tolerate (an unbounded trend in a coupling run, for instance).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn find(&self, condition: Condition) -> Option<&Violation> {
        self.violations.iter().find(|v| v.condition == condition)
    }

    pub fn find_warning(&self, condition: Condition) -> Option<&Violation> {
        self.warnings.iter().find(|v| v.condition == condition)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  violation {v}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning {w}")?;
        }
        Ok(())
    }
}

/// Points at which the sampled conditions are evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub ts: Vec<f64>,
}

impl ProbeGrid {
    /// `n` points spanning [-R, R] with R = 5 (1 + |x0|) for the state, the
    /// analogous range around Y's initial value, and `n` times in [0, T].
    pub fn default_for(s: &Scenario, n: usize) -> Self {
        let rx = 5.0 * (1.0 + s.x0.abs());
        let ry = 5.0 * (1.0 + s.volatility.initial_value().abs());
        let horizon = if s.horizon.is_finite() && s.horizon > 0.0 { s.horizon } else { 1.0 };
        ProbeGrid { xs: linspace(-rx, rx, n), ys: linspace(-ry, ry, n), ts: linspace(0.0, horizon, n) }
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[inline]
fn exceeds(lhs: f64, rhs: f64) -> bool {
    !lhs.is_finite() || lhs > rhs * (1.0 + REL_TOL) + ABS_TOL
}

pub fn validate_scenario(s: &Scenario, probe_grid_size: usize) -> ValidationReport {
    if probe_grid_size < 2 {
        return ValidationReport {
            violations: vec![Violation {
                condition: Condition::Grid,
                witness: vec![],
                detail: format!("probe grid size must be at least 2, got {probe_grid_size}"),
            }],
            warnings: vec![],
        };
    }
    validate_on_grid(s, &ProbeGrid::default_for(s, probe_grid_size))
}

pub fn validate_on_grid(s: &Scenario, grid: &ProbeGrid) -> ValidationReport {
    let mut report = ValidationReport::default();
    check_grid(s, &mut report);
    check_volatility(s, &mut report);
    check_lipschitz(s, grid, &mut report);
    check_uniform_bound(s, grid, &mut report);
    check_derivatives(s, grid, &mut report);
    check_growth(s, grid, &mut report);
    check_sigma2(s, grid, &mut report);
    report
}

fn check_grid(s: &Scenario, report: &mut ValidationReport) {
    if let Err(e) = TimeGrid::new(s.horizon, s.dt) {
        report.violations.push(Violation {
            condition: Condition::Grid,
            witness: vec![("T", s.horizon), ("dt", s.dt)],
            detail: e.to_string(),
        });
    }
    if !s.x0.is_finite() {
        report.violations.push(Violation {
            condition: Condition::Grid,
            witness: vec![("x0", s.x0)],
            detail: "initial value x0 is not finite".into(),
        });
    }
    if !(s.eps.is_finite() && s.eps >= 0.0) {
        report.violations.push(Violation {
            condition: Condition::NoiseLevel,
            witness: vec![("eps", s.eps)],
            detail: "noise level eps must be finite and nonnegative".into(),
        });
    }
}

fn check_volatility(s: &Scenario, report: &mut ValidationReport) {
    if let VolatilityKind::Ou { theta, mu, eta, y0 } = s.volatility.kind {
        if !(theta >= 0.0 && eta >= 0.0) || ![theta, mu, eta, y0].iter().all(|v| v.is_finite()) {
            report.violations.push(Violation {
                condition: Condition::Volatility,
                witness: vec![("theta", theta), ("eta", eta)],
                detail: "OU volatility requires finite parameters with theta >= 0 and eta >= 0".into(),
            });
        }
    }
}

fn check_lipschitz(s: &Scenario, grid: &ProbeGrid, report: &mut ValidationReport) {
    let l = s.trend.lipschitz;
    if !(l.is_finite() && l > 0.0) {
        report.violations.push(Violation {
            condition: Condition::Lipschitz,
            witness: vec![],
            detail: format!("Lipschitz constant L must be positive, got {l}"),
        });
        return;
    }
    let values: Vec<f64> = grid.xs.iter().map(|&x| s.trend.eval(x)).collect();
    let mut worst: Option<(f64, usize, usize)> = None;
    for i in 0..grid.xs.len() {
        for j in i + 1..grid.xs.len() {
            let dx = (grid.xs[i] - grid.xs[j]).abs();
            if dx == 0.0 {
                continue;
            }
            let ds = (values[i] - values[j]).abs();
            if exceeds(ds, l * dx) {
                let ratio = if ds.is_finite() { ds / dx } else { f64::INFINITY };
                if worst.is_none_or(|(r, _, _)| ratio > r) {
                    worst = Some((ratio, i, j));
                }
            }
        }
    }
    if let Some((ratio, i, j)) = worst {
        report.violations.push(Violation {
            condition: Condition::Lipschitz,
            witness: vec![("x", grid.xs[i]), ("y", grid.xs[j])],
            detail: format!("trend '{}' has difference quotient {ratio} > L = {l}", s.trend.name),
        });
    }
}

fn check_uniform_bound(s: &Scenario, grid: &ProbeGrid, report: &mut ValidationReport) {
    let c = s.trend.uniform_bound;
    let worst = grid.xs.iter().map(|&x| (x, s.trend.eval(x).abs())).filter(|&(_, v)| exceeds(v, c)).fold(
        None::<(f64, f64)>,
        |acc, (x, v)| match acc {
            Some((_, best)) if best >= v => acc,
            _ => Some((x, v)),
        },
    );
    if let Some((x, v)) = worst {
        report.warnings.push(Violation {
            condition: Condition::UniformBound,
            witness: vec![("x", x)],
            detail: format!(
                "trend '{}' reaches |S| = {v} > C = {c}; not a member of the uniformly bounded class",
                s.trend.name
            ),
        });
    }
}

fn check_derivatives(s: &Scenario, grid: &ProbeGrid, report: &mut ValidationReport) {
    let max_order = match &s.trend.shape {
        TrendShape::Custom { derivs, .. } => derivs.len(),
        _ => s.trend.smoothness_k as usize + 2,
    };
    for order in 1..=max_order {
        for &x in &grid.xs {
            let analytic = match s.trend.derivative(order, x) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let lower = |z: f64| s.trend.derivative(order - 1, z).unwrap_or(f64::NAN);
            let numeric = central_difference(&lower, 1, x);
            let scale = 1.0 + analytic.abs().max(numeric.abs());
            if !analytic.is_finite() || (analytic - numeric).abs() > 1e-4 * scale {
                report.violations.push(Violation {
                    condition: Condition::DerivativeConsistency,
                    witness: vec![("x", x), ("order", order as f64)],
                    detail: format!("S^({order}) = {analytic} but central difference of S^({}) = {numeric}", order - 1),
                });
                return;
            }
        }
    }
}

fn check_growth(s: &Scenario, grid: &ProbeGrid, report: &mut ValidationReport) {
    let k = s.diffusion.growth_k;
    let mut worst: Option<(f64, f64, f64)> = None;
    for &t in &grid.ts {
        for &x in &grid.xs {
            let v = s.diffusion.sigma1.eval(t, x);
            let lhs = v * v;
            let rhs = k * (1.0 + x * x);
            if exceeds(lhs, rhs) {
                let excess = if lhs.is_finite() { lhs / rhs } else { f64::INFINITY };
                if worst.is_none_or(|(e, _, _)| excess > e) {
                    worst = Some((excess, t, x));
                }
            }
        }
    }
    if let Some((excess, t, x)) = worst {
        report.violations.push(Violation {
            condition: Condition::LinearGrowth,
            witness: vec![("t", t), ("x", x)],
            detail: format!("sigma1^2 exceeds K (1 + x^2) by factor {excess} (K = {k})"),
        });
    }
}

fn check_sigma2(s: &Scenario, grid: &ProbeGrid, report: &mut ValidationReport) {
    let bound = s.diffusion.sigma2_bound;
    let mut worst: Option<(f64, f64, f64)> = None;
    for &t in &grid.ts {
        for &y in &grid.ys {
            let v = s.diffusion.sigma2.eval(t, y).abs();
            if exceeds(v, bound) && worst.is_none_or(|(w, _, _)| v > w || !v.is_finite()) {
                worst = Some((v, t, y));
            }
        }
    }
    if let Some((v, t, y)) = worst {
        report.violations.push(Violation {
            condition: Condition::BoundedSigma2,
            witness: vec![("t", t), ("y", y)],
            detail: format!("|sigma2| = {v} exceeds the claimed bound {bound}"),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiffusionSpec, Sigma1, Sigma2, TrendSpec, VolatilitySpec};

    fn cosine_scenario() -> Scenario {
        Scenario::new(TrendSpec::cosine(1.0, 1.0), 1.0, 1.0, 1e-3).with_diffusion(DiffusionSpec {
            sigma1: Sigma1::SqrtOnePlusSquare,
            sigma2: Sigma2::Constant(1.0),
            growth_k: 1.0,
            sigma2_bound: 1.0,
        })
    }

    #[test]
    fn well_posed_scenario_passes() {
        let report = validate_scenario(&cosine_scenario(), DEFAULT_PROBE_POINTS);
        assert!(report.is_pass(), "{report}");
        assert!(report.warnings.is_empty(), "{report}");
    }

    #[test]
    fn unbounded_sigma2_is_flagged_with_witness() {
        let mut s = cosine_scenario();
        s.diffusion.sigma2 = Sigma2::Identity;
        let grid = ProbeGrid { xs: vec![0.0, 1.0], ys: vec![2.0], ts: vec![0.0] };
        let report = validate_on_grid(&s, &grid);
        let v = report.find(Condition::BoundedSigma2).expect("violation");
        assert_eq!(v.witness_value("y"), Some(2.0));
    }

    #[test]
    fn quadratic_trend_is_not_lipschitz() {
        let s = cosine_scenario().with_trend(TrendSpec::custom("square", |x| x * x, vec![], 1.0, 1e9));
        let grid = ProbeGrid { xs: vec![0.0, 10.0], ys: vec![0.0], ts: vec![0.0] };
        let report = validate_on_grid(&s, &grid);
        let v = report.find(Condition::Lipschitz).expect("violation");
        assert_eq!(v.witness_value("x"), Some(0.0));
        assert_eq!(v.witness_value("y"), Some(10.0));
    }

    #[test]
    fn linear_trend_warns_on_uniform_bound_only() {
        let s = cosine_scenario().with_trend(TrendSpec::negexp_linear());
        let report = validate_scenario(&s, 51);
        assert!(report.is_pass(), "{report}");
        assert!(report.find_warning(Condition::UniformBound).is_some());
    }

    #[test]
    fn bad_grid_and_parameters() {
        let s = cosine_scenario().with_dt(0.3).with_eps(-1.0).with_volatility(VolatilitySpec::ou(-1.0, 0.0, 1.0, 0.0));
        let report = validate_scenario(&s, 11);
        assert!(report.find(Condition::Grid).is_some());
        assert!(report.find(Condition::NoiseLevel).is_some());
        assert!(report.find(Condition::Volatility).is_some());
    }

    #[test]
    fn inconsistent_analytic_derivative_is_caught() {
        let wrong: crate::model::ScalarFn = std::sync::Arc::new(|x: f64| x.cos() + 0.1);
        let s = cosine_scenario().with_trend(TrendSpec::custom("sin", f64::sin, vec![wrong], 1.0, 1.0));
        let report = validate_scenario(&s, 21);
        assert!(report.find(Condition::DerivativeConsistency).is_some());
    }

    #[test]
    fn growth_violation() {
        let mut s = cosine_scenario();
        s.diffusion.sigma1 = Sigma1::Constant(2.0);
        let report = validate_scenario(&s, 11);
        let v = report.find(Condition::LinearGrowth).unwrap();
        assert_eq!(v.witness_value("x"), Some(0.0));
    }
}
