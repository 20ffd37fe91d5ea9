//! Model specifications shared across the crate: the trend S, the
//! multiplicative diffusion pair (sigma1, sigma2), the volatility process Y,
//! and the simulated / deterministic paths living on a uniform time grid.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type CoefficientFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Number of nested finite-difference levels allowed on top of the highest
/// analytic derivative of a custom trend.
const MAX_FD_LEVELS: usize = 2;

/// Relative tolerance for rounding the horizon to a whole number of steps.
const GRID_TOL: f64 = 1e-9;

#[derive(Clone)]
pub enum TrendShape {
    /// S(x) = amplitude * cos(frequency * x)
    Cosine { amplitude: f64, frequency: f64 },
    /// S(x) = amplitude * tanh(frequency * x)
    Tanh { amplitude: f64, frequency: f64 },
    /// S(x) = value
    Constant { value: f64 },
    /// S(x) = -x. Globally Lipschitz but not uniformly bounded.
    NegexpLinear,
    /// User-supplied trend with optional analytic derivatives S', S'', ...
    Custom { eval: ScalarFn, derivs: Vec<ScalarFn> },
}

impl fmt::Debug for TrendShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrendShape::Cosine { amplitude, frequency } => {
                f.debug_struct("Cosine").field("amplitude", amplitude).field("frequency", frequency).finish()
            }
            TrendShape::Tanh { amplitude, frequency } => {
                f.debug_struct("Tanh").field("amplitude", amplitude).field("frequency", frequency).finish()
            }
            TrendShape::Constant { value } => f.debug_struct("Constant").field("value", value).finish(),
            TrendShape::NegexpLinear => f.write_str("NegexpLinear"),
            TrendShape::Custom { derivs, .. } => {
                f.debug_struct("Custom").field("analytic_derivs", &derivs.len()).finish_non_exhaustive()
            }
        }
    }
}

/// The unknown trend S together with the class constants it claims:
/// Lipschitz constant L, smoothness index k (S in Theta_{k+1}(L)) and the
/// uniform bound C.
#[derive(Clone, Debug)]
pub struct TrendSpec {
    pub name: String,
    pub shape: TrendShape,
    pub lipschitz: f64,
    pub smoothness_k: u32,
    pub uniform_bound: f64,
}

impl TrendSpec {
    pub fn cosine(amplitude: f64, frequency: f64) -> Self {
        let l = (amplitude * frequency).abs();
        TrendSpec {
            name: "cosine".into(),
            shape: TrendShape::Cosine { amplitude, frequency },
            lipschitz: l.max(f64::MIN_POSITIVE),
            smoothness_k: 0,
            uniform_bound: amplitude.abs().max(f64::MIN_POSITIVE),
        }
    }

    pub fn tanh(amplitude: f64, frequency: f64) -> Self {
        let l = (amplitude * frequency).abs();
        TrendSpec {
            name: "tanh".into(),
            shape: TrendShape::Tanh { amplitude, frequency },
            lipschitz: l.max(f64::MIN_POSITIVE),
            smoothness_k: 0,
            uniform_bound: amplitude.abs().max(f64::MIN_POSITIVE),
        }
    }

    pub fn constant(value: f64) -> Self {
        TrendSpec {
            name: "constant".into(),
            shape: TrendShape::Constant { value },
            lipschitz: 1.0,
            smoothness_k: 0,
            uniform_bound: value.abs().max(1.0),
        }
    }

    pub fn negexp_linear() -> Self {
        TrendSpec {
            name: "negexp_linear".into(),
            shape: TrendShape::NegexpLinear,
            lipschitz: 1.0,
            smoothness_k: 0,
            uniform_bound: 1.0,
        }
    }

    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivs: Vec<ScalarFn>,
        lipschitz: f64,
        uniform_bound: f64,
    ) -> Self {
        TrendSpec {
            name: name.into(),
            shape: TrendShape::Custom { eval: Arc::new(eval), derivs },
            lipschitz,
            smoothness_k: 0,
            uniform_bound,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn with_smoothness(mut self, k: u32) -> Self {
        self.smoothness_k = k;
        self
    }

    pub fn with_uniform_bound(mut self, c: f64) -> Self {
        self.uniform_bound = c;
        self
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.shape {
            TrendShape::Cosine { amplitude, frequency } => amplitude * (frequency * x).cos(),
            TrendShape::Tanh { amplitude, frequency } => amplitude * (frequency * x).tanh(),
            TrendShape::Constant { value } => *value,
            TrendShape::NegexpLinear => -x,
            TrendShape::Custom { eval, .. } => eval(x),
        }
    }

    /// Number of derivatives available in closed form (`usize::MAX` for the
    /// built-in shapes, which are differentiable to any order).
    pub fn analytic_orders(&self) -> usize {
        match &self.shape {
            TrendShape::Custom { derivs, .. } => derivs.len(),
            _ => usize::MAX,
        }
    }

    /// Highest derivative order this trend can provide, analytically or by
    /// central finite differences.
    pub fn max_derivative_order(&self) -> usize {
        self.analytic_orders().saturating_add(MAX_FD_LEVELS)
    }

    /// j-th derivative S^(j)(x).
    pub fn derivative(&self, order: usize, x: f64) -> Result<f64> {
        if order == 0 {
            return Ok(self.eval(x));
        }
        match &self.shape {
            TrendShape::Cosine { amplitude, frequency } => {
                let phase = frequency * x + order as f64 * FRAC_PI_2;
                Ok(amplitude * frequency.powi(order as i32) * phase.cos())
            }
            TrendShape::Tanh { amplitude, frequency } => {
                let poly = tanh_derivative_poly(order);
                let th = (frequency * x).tanh();
                Ok(amplitude * frequency.powi(order as i32) * horner(&poly, th))
            }
            TrendShape::Constant { .. } => Ok(0.0),
            TrendShape::NegexpLinear => Ok(if order == 1 { -1.0 } else { 0.0 }),
            TrendShape::Custom { eval, derivs } => {
                let analytic = derivs.len();
                if order <= analytic {
                    return Ok(derivs[order - 1](x));
                }
                let levels = order - analytic;
                if levels > MAX_FD_LEVELS {
                    return Err(Error::Capability(format!(
                        "trend '{}' supplies {} analytic derivative(s); order {} would need {} nested \
                         finite-difference levels (max {})",
                        self.name, analytic, order, levels, MAX_FD_LEVELS
                    )));
                }
                let base: &dyn Fn(f64) -> f64 =
                    if analytic == 0 { eval.as_ref() } else { derivs[analytic - 1].as_ref() };
                Ok(central_difference(base, levels, x))
            }
        }
    }
}

/// Central difference step used wherever a derivative is not analytic.
#[inline]
pub fn fd_step(x: f64) -> f64 {
    1e-5_f64.max(1e-5 * x.abs())
}

pub(crate) fn central_difference(f: &dyn Fn(f64) -> f64, levels: usize, x: f64) -> f64 {
    if levels == 0 {
        return f(x);
    }
    let h = fd_step(x);
    (central_difference(f, levels - 1, x + h) - central_difference(f, levels - 1, x - h)) / (2.0 * h)
}

/// Coefficients (ascending powers of T = tanh) of p_j with
/// d^j/dz^j tanh(z) = p_j(tanh z), built from p_{j+1} = p_j' * (1 - T^2).
fn tanh_derivative_poly(order: usize) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..order {
        let dp: Vec<f64> = p.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect();
        let mut next = vec![0.0; dp.len() + 2];
        for (i, c) in dp.iter().enumerate() {
            next[i] += c;
            next[i + 2] -= c;
        }
        p = next;
    }
    p
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

#[derive(Clone)]
pub enum Sigma1 {
    Constant(f64),
    /// sqrt(1 + x^2)
    SqrtOnePlusSquare,
    Custom(CoefficientFn),
}

#[derive(Clone)]
pub enum Sigma2 {
    Constant(f64),
    /// 1 / (1 + y^2)
    InverseOnePlusSquare,
    /// sigma2(t, y) = y; unbounded, useful only to exercise validation.
    Identity,
    Custom(CoefficientFn),
}

impl fmt::Debug for Sigma1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma1::Constant(c) => write!(f, "Constant({c})"),
            Sigma1::SqrtOnePlusSquare => f.write_str("SqrtOnePlusSquare"),
            Sigma1::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl fmt::Debug for Sigma2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sigma2::Constant(c) => write!(f, "Constant({c})"),
            Sigma2::InverseOnePlusSquare => f.write_str("InverseOnePlusSquare"),
            Sigma2::Identity => f.write_str("Identity"),
            Sigma2::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Sigma1 {
    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Sigma1::Constant(c) => *c,
            Sigma1::SqrtOnePlusSquare => (1.0 + x * x).sqrt(),
            Sigma1::Custom(f) => f(t, x),
        }
    }
}

impl Sigma2 {
    #[inline]
    pub fn eval(&self, t: f64, y: f64) -> f64 {
        match self {
            Sigma2::Constant(c) => *c,
            Sigma2::InverseOnePlusSquare => 1.0 / (1.0 + y * y),
            Sigma2::Identity => y,
            Sigma2::Custom(f) => f(t, y),
        }
    }
}

/// The diffusion pair sigma1(t, X) * sigma2(t, Y) and the constants it
/// claims: linear growth K for sigma1 and the bound on |sigma2|.
#[derive(Clone, Debug)]
pub struct DiffusionSpec {
    pub sigma1: Sigma1,
    pub sigma2: Sigma2,
    pub growth_k: f64,
    pub sigma2_bound: f64,
}

impl DiffusionSpec {
    pub fn unit() -> Self {
        DiffusionSpec { sigma1: Sigma1::Constant(1.0), sigma2: Sigma2::Constant(1.0), growth_k: 1.0, sigma2_bound: 1.0 }
    }

    /// sigma1 = sqrt(1 + x^2) (K = 1), sigma2 = 1 / (1 + y^2) (bound 1).
    pub fn multiplicative() -> Self {
        DiffusionSpec {
            sigma1: Sigma1::SqrtOnePlusSquare,
            sigma2: Sigma2::InverseOnePlusSquare,
            growth_k: 1.0,
            sigma2_bound: 1.0,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        self.sigma1.eval(t, x) * self.sigma2.eval(t, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WienerMap {
    Identity,
    Abs,
    Tanh,
    Sin,
}

impl WienerMap {
    #[inline]
    pub fn apply(self, w: f64) -> f64 {
        match self {
            WienerMap::Identity => w,
            WienerMap::Abs => w.abs(),
            WienerMap::Tanh => w.tanh(),
            WienerMap::Sin => w.sin(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WienerMap::Identity => "identity",
            WienerMap::Abs => "abs",
            WienerMap::Tanh => "tanh",
            WienerMap::Sin => "sin",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VolatilityKind {
    Constant(f64),
    /// dY = theta (mu - Y) dt + eta dW
    Ou {
        theta: f64,
        mu: f64,
        eta: f64,
        y0: f64,
    },
    /// Y_t = map(W_t)
    FunctionalOfW(WienerMap),
}

/// Which Brownian motion drives Y.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Driver {
    /// The same increments as X; Y is adapted to the filtration of W.
    #[default]
    Same,
    /// An independent Brownian motion. Y is then not adapted to the
    /// filtration generated by W alone, which is outside the model's
    /// stated assumption; offered for exploration only.
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolatilitySpec {
    pub kind: VolatilityKind,
    pub driver: Driver,
}

impl VolatilitySpec {
    pub fn constant(value: f64) -> Self {
        VolatilitySpec { kind: VolatilityKind::Constant(value), driver: Driver::Same }
    }

    pub fn ou(theta: f64, mu: f64, eta: f64, y0: f64) -> Self {
        VolatilitySpec { kind: VolatilityKind::Ou { theta, mu, eta, y0 }, driver: Driver::Same }
    }

    pub fn functional_of_w(map: WienerMap) -> Self {
        VolatilitySpec { kind: VolatilityKind::FunctionalOfW(map), driver: Driver::Same }
    }

    pub fn with_driver(mut self, driver: Driver) -> Self {
        self.driver = driver;
        self
    }

    pub fn initial_value(&self) -> f64 {
        match self.kind {
            VolatilityKind::Constant(v) => v,
            VolatilityKind::Ou { y0, .. } => y0,
            VolatilityKind::FunctionalOfW(map) => map.apply(0.0),
        }
    }
}

/// One model instance dX = S(X)dt + eps sigma1(t,X) sigma2(t,Y) dW on [0, T].
#[derive(Clone, Debug)]
pub struct Scenario {
    pub trend: TrendSpec,
    pub diffusion: DiffusionSpec,
    pub volatility: VolatilitySpec,
    pub x0: f64,
    pub horizon: f64,
    pub eps: f64,
    pub dt: f64,
}

impl Scenario {
    pub fn new(trend: TrendSpec, x0: f64, horizon: f64, dt: f64) -> Self {
        Scenario {
            trend,
            diffusion: DiffusionSpec::unit(),
            volatility: VolatilitySpec::constant(1.0),
            x0,
            horizon,
            eps: 0.0,
            dt,
        }
    }

    pub fn with_diffusion(mut self, diffusion: DiffusionSpec) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn with_volatility(mut self, volatility: VolatilitySpec) -> Self {
        self.volatility = volatility;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_trend(mut self, trend: TrendSpec) -> Self {
        self.trend = trend;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.dt)
    }
}

/// Uniform grid 0 = t_0 < ... < t_n = T.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub n_steps: usize,
    pub step: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::config(format!("horizon T must be positive and finite, got {horizon}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config(format!("dt must be positive and finite, got {dt}")));
        }
        let ratio = horizon / dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > GRID_TOL * ratio.max(1.0) {
            return Err(Error::config(format!("T / dt = {horizon} / {dt} = {ratio} is not a positive integer")));
        }
        let n_steps = n as usize;
        Ok(TimeGrid { horizon, n_steps, step: horizon / n_steps as f64 })
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.step
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }
}

/// A simulated trajectory with the exact randomness that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub dw: Vec<f64>,
    pub y: Vec<f64>,
}

impl SamplePath {
    pub fn n_steps(&self) -> usize {
        self.dw.len()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn step(&self) -> f64 {
        if self.dw.is_empty() {
            0.0
        } else {
            self.horizon() / self.dw.len() as f64
        }
    }
}

/// Solution of the limit ODE dx/dt = S(x) on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterministicPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
}

impl DeterministicPath {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn step(&self) -> f64 {
        let n = self.x.len().saturating_sub(1);
        if n == 0 {
            0.0
        } else {
            self.horizon() / n as f64
        }
    }

    /// x_t at an arbitrary t in [0, T] by cubic Hermite interpolation, using
    /// dx/dt = S(x) as the node slopes. Exact at grid points.
    pub fn value_at(&self, t: f64, trend: &TrendSpec) -> Result<f64> {
        let horizon = self.horizon();
        let tol = 1e-12 * horizon.max(1.0);
        if !(t >= -tol && t <= horizon + tol) || self.x.len() < 2 {
            return Err(Error::Domain(format!("t = {t} outside the limit path's grid [0, {horizon}]")));
        }
        let h = self.step();
        let pos = (t / h).clamp(0.0, (self.x.len() - 1) as f64);
        let near = pos.round();
        if (pos - near).abs() < 1e-9 {
            return Ok(self.x[near as usize]);
        }
        let i = (pos.floor() as usize).min(self.x.len() - 2);
        let s = pos - i as f64;
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let (m0, m1) = (trend.eval(x0) * h, trend.eval(x1) * h);
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * x0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * x1 + (s3 - s2) * m1)
    }
}
