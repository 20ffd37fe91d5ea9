//! JSON run configuration. Unknown keys are rejected at every level, all
//! defaults are resolved eagerly, and the resolved document can be written
//! back as `effective_config.json` and re-read to reproduce a run.
//!
//! ```json
//! {
//!   "experiment": "rates",
//!   "scenario": {
//!     "trend": { "name": "cosine", "params": { "amplitude": 1, "frequency": 1 } },
//!     "sigma1": { "name": "sqrt_one_plus_x2" },
//!     "sigma2": { "name": "inv_one_plus_y2" },
//!     "volatility": { "kind": "ou", "params": { "theta": 1, "mu": 0, "eta": 1, "y0": 0 } },
//!     "x0": 1, "T": 1, "dt": 1e-4
//!   },
//!   "kernel": { "builtin": "epanechnikov" },
//!   "k": 0,
//!   "eps_list": [0.1, 0.05, 0.025, 0.0125],
//!   "reps": 200, "c": 0.3, "d": 0.7
//! }
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{Centering, DistOptions, RunSettings};
use crate::kernels::{build_order_k_kernel, Kernel, DEFAULT_MOMENT_TOL, MAX_BUILT_ORDER};
use crate::model::{DiffusionSpec, Driver, Scenario, Sigma1, Sigma2, TrendSpec, VolatilitySpec, WienerMap};
use crate::rng::SeedPlan;
use crate::validate::DEFAULT_PROBE_POINTS;

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_N_GRID: usize = 21;
pub const DEFAULT_OUT_DIR: &str = "out";
pub const EFFECTIVE_CONFIG_NAME: &str = "effective_config.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Limit,
    Estimate,
    KernelCheck,
    Coupling,
    Rates,
    Decomp,
    LimitDist,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Simulate,
        Experiment::Limit,
        Experiment::Estimate,
        Experiment::KernelCheck,
        Experiment::Coupling,
        Experiment::Rates,
        Experiment::Decomp,
        Experiment::LimitDist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Limit => "limit",
            Experiment::Estimate => "estimate",
            Experiment::KernelCheck => "kernel-check",
            Experiment::Coupling => "coupling",
            Experiment::Rates => "rates",
            Experiment::Decomp => "decomp",
            Experiment::LimitDist => "limit-dist",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(rename = "k", default, skip_serializing_if = "Option::is_none")]
    pub smoothness_k: Option<u32>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub uniform_bound: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl CoefficientConfig {
    fn named(name: &str) -> Self {
        CoefficientConfig { name: name.into(), value: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolatilityConfig {
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    #[serde(default = "default_driver")]
    pub driver: String,
}

fn default_driver() -> String {
    "same".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub trend: TrendConfig,
    #[serde(default = "unit_coefficient")]
    pub sigma1: CoefficientConfig,
    #[serde(default = "unit_coefficient")]
    pub sigma2: CoefficientConfig,
    /// Linear-growth constant claimed for sigma1.
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub growth_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volatility: Option<VolatilityConfig>,
    pub x0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

fn unit_coefficient() -> CoefficientConfig {
    CoefficientConfig::named("one")
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// `epanechnikov`, `uniform` or `order_k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Power-basis coefficients sum_j c_j u^j of a user kernel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<[f64; 2]>,
}

/// The configuration document as written on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    /// Estimator order: kernel moments 1..=k vanish, bandwidth eps^{2/(2k+3)}.
    #[serde(default)]
    pub k: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default = "default_n_grid")]
    pub n_grid: usize,
    /// Single evaluation time for `limit-dist`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Explicit evaluation times for `estimate` and `decomp`; overrides c, d, n_grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_list: Option<Vec<f64>>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_probe_points")]
    pub probe_points: usize,
    #[serde(default = "default_moment_tol")]
    pub moment_tol: f64,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub paired: bool,
    /// `state_derivative` or `time_derivative`.
    #[serde(default = "default_centering")]
    pub centering: String,
    #[serde(default)]
    pub plot: bool,
    /// Non-default bandwidth for single-eps exploration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unsafe_phi: Option<f64>,
}

fn default_n_grid() -> usize {
    DEFAULT_N_GRID
}

fn default_out_dir() -> String {
    DEFAULT_OUT_DIR.into()
}

fn default_probe_points() -> usize {
    DEFAULT_PROBE_POINTS
}

fn default_moment_tol() -> f64 {
    DEFAULT_MOMENT_TOL
}

fn default_n_paths() -> usize {
    1
}

fn default_centering() -> String {
    "state_derivative".into()
}

/// A loaded configuration: the resolved document plus the model objects
/// built from it.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub experiment: Option<Experiment>,
    pub scenario: Option<Scenario>,
    pub kernel: Kernel,
    pub k: u32,
    pub out_dir: PathBuf,
}

fn describe_parse_error(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    let mut out = format!("config line {}, column {}: {msg}", e.line(), e.column());
    if let Some(key) = msg.strip_prefix("unknown field `").and_then(|rest| rest.split('`').next()) {
        let lower = key.to_ascii_lowercase();
        if lower.contains("band") || lower.contains("phi") || lower == "h" {
            out.push_str(
                "\nthere is no bandwidth field: phi = eps^(2/(2k+3)) is always derived from eps and k \
                 (`unsafe_phi` exists for exploration only)",
            );
        }
    }
    out
}

fn check_positive(key: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::config(format!("`{key}` must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_finite(key: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::config(format!("`{key}` must be finite, got {v}")));
    }
    Ok(())
}

fn take_params(key: &str, given: &BTreeMap<String, f64>, defaults: &[(&str, f64)]) -> Result<BTreeMap<String, f64>> {
    if let Some(bad) = given.keys().find(|k| !defaults.iter().any(|(d, _)| d == k)) {
        let allowed: Vec<&str> = defaults.iter().map(|(d, _)| *d).collect();
        return Err(Error::config(format!("unknown parameter `{key}.{bad}`; allowed: {allowed:?}")));
    }
    defaults
        .iter()
        .map(|(name, default)| {
            let v = given.get(*name).copied().unwrap_or(*default);
            check_finite(&format!("{key}.{name}"), v)?;
            Ok((name.to_string(), v))
        })
        .collect()
}

type TrendMaker = fn(&BTreeMap<String, f64>) -> TrendSpec;

fn build_trend(cfg: &mut TrendConfig) -> Result<TrendSpec> {
    let (defaults, make): (&[(&str, f64)], TrendMaker) = match cfg.name.as_str() {
        "cosine" => (&[("amplitude", 1.0), ("frequency", 1.0)], |p| TrendSpec::cosine(p["amplitude"], p["frequency"])),
        "tanh" => (&[("amplitude", 1.0), ("frequency", 1.0)], |p| TrendSpec::tanh(p["amplitude"], p["frequency"])),
        "constant" => (&[("value", 0.0)], |p| TrendSpec::constant(p["value"])),
        "negexp_linear" => (&[], |_| TrendSpec::negexp_linear()),
        other => {
            return Err(Error::config(format!(
                "unknown `scenario.trend.name` '{other}'; expected cosine, tanh, constant or negexp_linear"
            )))
        }
    };
    cfg.params = take_params("scenario.trend.params", &cfg.params, defaults)?;
    let mut trend = make(&cfg.params);
    if let Some(l) = cfg.lipschitz {
        check_positive("scenario.trend.L", l)?;
        trend = trend.with_lipschitz(l);
    }
    if let Some(c) = cfg.uniform_bound {
        check_positive("scenario.trend.C", c)?;
        trend = trend.with_uniform_bound(c);
    }
    if let Some(k) = cfg.smoothness_k {
        trend = trend.with_smoothness(k);
    }
    cfg.lipschitz = Some(trend.lipschitz);
    cfg.uniform_bound = Some(trend.uniform_bound);
    cfg.smoothness_k = Some(trend.smoothness_k);
    Ok(trend)
}

fn constant_value(key: &str, cfg: &mut CoefficientConfig) -> Result<f64> {
    let v = cfg.value.unwrap_or(1.0);
    check_finite(key, v)?;
    cfg.value = Some(v);
    Ok(v)
}

fn no_value(key: &str, cfg: &CoefficientConfig) -> Result<()> {
    match cfg.value {
        Some(_) => Err(Error::config(format!("`{key}.value` only applies to name \"constant\""))),
        None => Ok(()),
    }
}

fn build_diffusion(cfg: &mut ScenarioConfig) -> Result<DiffusionSpec> {
    let (sigma1, k_default) = match cfg.sigma1.name.as_str() {
        "one" => {
            no_value("scenario.sigma1", &cfg.sigma1)?;
            (Sigma1::Constant(1.0), 1.0)
        }
        "constant" => {
            let v = constant_value("scenario.sigma1.value", &mut cfg.sigma1)?;
            (Sigma1::Constant(v), (v * v).max(f64::MIN_POSITIVE))
        }
        "sqrt_one_plus_x2" => {
            no_value("scenario.sigma1", &cfg.sigma1)?;
            (Sigma1::SqrtOnePlusSquare, 1.0)
        }
        other => {
            return Err(Error::config(format!(
                "unknown `scenario.sigma1.name` '{other}'; expected one, constant or sqrt_one_plus_x2"
            )))
        }
    };
    let (sigma2, bound_default) = match cfg.sigma2.name.as_str() {
        "one" => {
            no_value("scenario.sigma2", &cfg.sigma2)?;
            (Sigma2::Constant(1.0), 1.0)
        }
        "constant" => {
            let v = constant_value("scenario.sigma2.value", &mut cfg.sigma2)?;
            (Sigma2::Constant(v), v.abs().max(f64::MIN_POSITIVE))
        }
        "inv_one_plus_y2" => {
            no_value("scenario.sigma2", &cfg.sigma2)?;
            (Sigma2::InverseOnePlusSquare, 1.0)
        }
        "identity" => {
            no_value("scenario.sigma2", &cfg.sigma2)?;
            (Sigma2::Identity, 1.0)
        }
        other => {
            return Err(Error::config(format!(
                "unknown `scenario.sigma2.name` '{other}'; expected one, constant, inv_one_plus_y2 or identity"
            )))
        }
    };
    let growth_k = cfg.growth_k.unwrap_or(k_default);
    check_positive("scenario.K", growth_k)?;
    let sigma2_bound = cfg.sigma2_bound.unwrap_or(bound_default);
    check_positive("scenario.sigma2_bound", sigma2_bound)?;
    cfg.growth_k = Some(growth_k);
    cfg.sigma2_bound = Some(sigma2_bound);
    Ok(DiffusionSpec { sigma1, sigma2, growth_k, sigma2_bound })
}

fn build_volatility(cfg: &mut VolatilityConfig) -> Result<VolatilitySpec> {
    let spec = match cfg.kind.as_str() {
        "constant" => {
            cfg.params = take_params("scenario.volatility.params", &cfg.params, &[("value", 1.0)])?;
            VolatilitySpec::constant(cfg.params["value"])
        }
        "ou" => {
            cfg.params = take_params(
                "scenario.volatility.params",
                &cfg.params,
                &[("theta", 1.0), ("mu", 0.0), ("eta", 1.0), ("y0", 0.0)],
            )?;
            let p = &cfg.params;
            VolatilitySpec::ou(p["theta"], p["mu"], p["eta"], p["y0"])
        }
        "functional_of_w" => {
            cfg.params = take_params("scenario.volatility.params", &cfg.params, &[])?;
            let name = cfg.map.get_or_insert_with(|| "tanh".into());
            let map = [WienerMap::Identity, WienerMap::Abs, WienerMap::Tanh, WienerMap::Sin]
                .into_iter()
                .find(|m| m.name() == name)
                .ok_or_else(|| {
                    Error::config(format!(
                        "unknown `scenario.volatility.map` '{name}'; expected identity, abs, tanh or sin"
                    ))
                })?;
            VolatilitySpec::functional_of_w(map)
        }
        other => {
            return Err(Error::config(format!(
                "unknown `scenario.volatility.kind` '{other}'; expected constant, ou or functional_of_w"
            )))
        }
    };
    if cfg.kind != "functional_of_w" && cfg.map.is_some() {
        return Err(Error::config("`scenario.volatility.map` only applies to kind \"functional_of_w\""));
    }
    let driver = match cfg.driver.as_str() {
        "same" => Driver::Same,
        "independent" => Driver::Independent,
        other => {
            return Err(Error::config(format!(
                "unknown `scenario.volatility.driver` '{other}'; expected same or independent"
            )))
        }
    };
    Ok(spec.with_driver(driver))
}

fn build_scenario(cfg: &mut ScenarioConfig) -> Result<Scenario> {
    let trend = build_trend(&mut cfg.trend)?;
    let diffusion = build_diffusion(cfg)?;
    let vol_cfg = cfg.volatility.get_or_insert_with(|| VolatilityConfig {
        kind: "constant".into(),
        params: BTreeMap::new(),
        map: None,
        driver: default_driver(),
    });
    let volatility = build_volatility(vol_cfg)?;
    check_finite("scenario.x0", cfg.x0)?;
    check_positive("scenario.T", cfg.horizon)?;
    check_positive("scenario.dt", cfg.dt)?;
    if let Some(eps) = cfg.eps {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::config(format!("`eps` must be finite and nonnegative, got {eps}")));
        }
    }
    let s = Scenario::new(trend, cfg.x0, cfg.horizon, cfg.dt)
        .with_diffusion(diffusion)
        .with_volatility(volatility)
        .with_eps(cfg.eps.unwrap_or(0.0));
    s.grid().map_err(|e| Error::config(format!("`scenario.T` / `scenario.dt`: {e}")))?;
    Ok(s)
}

fn build_kernel(cfg: Option<&KernelConfig>, k: u32) -> Result<(Kernel, KernelConfig)> {
    let default_name = if k <= 1 { "epanechnikov" } else { "order_k" };
    let mut cfg =
        cfg.cloned().unwrap_or(KernelConfig { builtin: Some(default_name.into()), coefficients: None, support: None });
    if let Some(coeffs) = &cfg.coefficients {
        if cfg.builtin.is_some() {
            return Err(Error::config("`kernel` takes either `builtin` or `coefficients`, not both"));
        }
        let [a, b] = cfg.support.ok_or_else(|| Error::config("`kernel.coefficients` needs `kernel.support`"))?;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::config(format!("`kernel.support` must satisfy A < B, got [{a}, {b}]")));
        }
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("`kernel.coefficients` must be a nonempty list of finite reals"));
        }
        return Ok((Kernel::polynomial("custom", a, b, coeffs.clone(), k), cfg));
    }
    let name = cfg.builtin.clone().unwrap_or_else(|| default_name.into());
    let kernel = match name.as_str() {
        "epanechnikov" => {
            if cfg.support.is_some() {
                return Err(Error::config("`kernel.support` is fixed to [-1, 1] for epanechnikov"));
            }
            Kernel::epanechnikov()
        }
        "uniform" => {
            let [a, b] = *cfg.support.get_or_insert([-1.0, 1.0]);
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::config(format!("`kernel.support` must satisfy A < B, got [{a}, {b}]")));
            }
            Kernel::uniform(a, b)
        }
        "order_k" => {
            if cfg.support.is_some() {
                return Err(Error::config("`kernel.support` is fixed to [-1, 1] for order_k"));
            }
            if k > MAX_BUILT_ORDER {
                return Err(Error::config(format!("`k` = {k} exceeds the largest built order {MAX_BUILT_ORDER}")));
            }
            build_order_k_kernel(k)
        }
        other => {
            return Err(Error::config(format!(
                "unknown `kernel.builtin` '{other}'; expected epanechnikov, uniform or order_k"
            )))
        }
    };
    cfg.builtin = Some(name);
    Ok((kernel, cfg))
}

/// Parses and resolves a configuration document. Experiment-specific
/// requirements are checked separately by [`RunConfig::require`].
pub fn load_config(text: &[u8]) -> Result<RunConfig> {
    let mut file: ConfigFile = serde_json::from_slice(text).map_err(|e| Error::Config(describe_parse_error(&e)))?;
    let experiment = file.experiment.as_deref().map(Experiment::from_str).transpose()?;
    let scenario = file.scenario.as_mut().map(build_scenario).transpose()?;
    let (kernel, kernel_cfg) = build_kernel(file.kernel.as_ref(), file.k)?;
    file.kernel = Some(kernel_cfg);
    if let Some(list) = &file.eps_list {
        for (i, e) in list.iter().enumerate() {
            if !(e.is_finite() && *e > 0.0) {
                return Err(Error::config(format!("`eps_list[{i}]` must be positive (eps > 0), got {e}")));
            }
        }
    }
    if let Some(reps) = file.reps {
        if reps < 2 {
            return Err(Error::config(format!("`reps` must be at least 2, got {reps}")));
        }
    }
    if file.probe_points < 2 {
        return Err(Error::config(format!("`probe_points` must be at least 2, got {}", file.probe_points)));
    }
    if file.n_grid == 0 {
        return Err(Error::config("`n_grid` must be at least 1"));
    }
    if file.n_paths == 0 {
        return Err(Error::config("`n_paths` must be at least 1"));
    }
    check_positive("moment_tol", file.moment_tol)?;
    for (key, v) in [("c", file.c), ("d", file.d), ("t", file.t)] {
        if let Some(v) = v {
            check_finite(key, v)?;
        }
    }
    if let Some(phi) = file.unsafe_phi {
        check_positive("unsafe_phi", phi)?;
    }
    if !matches!(file.centering.as_str(), "state_derivative" | "time_derivative") {
        return Err(Error::config(format!(
            "unknown `centering` '{}'; expected state_derivative or time_derivative",
            file.centering
        )));
    }
    let out_dir = PathBuf::from(&file.out_dir);
    let k = file.k;
    Ok(RunConfig { file, experiment, scenario, kernel, k, out_dir })
}

impl RunConfig {
    pub fn set_seed(&mut self, seed: u64) {
        self.file.master_seed = seed;
    }

    pub fn set_out_dir(&mut self, dir: PathBuf) {
        self.file.out_dir = dir.to_string_lossy().into_owned();
        self.out_dir = dir;
    }

    pub fn set_workers(&mut self, workers: usize) {
        self.file.workers = workers;
    }

    pub fn seeds(&self) -> SeedPlan {
        SeedPlan::new(self.file.master_seed)
    }

    /// The resolved document, pretty-printed with a trailing newline.
    pub fn effective_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.file).expect("configuration serializes");
        s.push('\n');
        s
    }

    /// Checks that the fields `experiment` needs are present and that the
    /// document does not name a different experiment.
    pub fn require(&self, experiment: Experiment) -> Result<()> {
        if let Some(named) = self.experiment {
            if named != experiment {
                return Err(Error::config(format!(
                    "config names experiment '{}' but the subcommand is '{}'",
                    named.name(),
                    experiment.name()
                )));
            }
        }
        let f = &self.file;
        let missing = |key: &str| Error::config(format!("`{key}` is required for {}", experiment.name()));
        if experiment != Experiment::KernelCheck && self.scenario.is_none() {
            return Err(missing("scenario"));
        }
        let eps = f.scenario.as_ref().and_then(|s| s.eps);
        match experiment {
            Experiment::Simulate | Experiment::Limit | Experiment::KernelCheck => {}
            Experiment::Estimate => {
                eps.ok_or_else(|| missing("scenario.eps"))?;
                if f.t_list.is_none() {
                    f.c.ok_or_else(|| missing("c"))?;
                    f.d.ok_or_else(|| missing("d"))?;
                }
            }
            Experiment::Coupling => {
                f.eps_list.as_ref().ok_or_else(|| missing("eps_list"))?;
                f.reps.ok_or_else(|| missing("reps"))?;
            }
            Experiment::Rates => {
                f.eps_list.as_ref().ok_or_else(|| missing("eps_list"))?;
                f.reps.ok_or_else(|| missing("reps"))?;
                f.c.ok_or_else(|| missing("c"))?;
                f.d.ok_or_else(|| missing("d"))?;
            }
            Experiment::Decomp => {
                eps.ok_or_else(|| missing("scenario.eps"))?;
                f.reps.ok_or_else(|| missing("reps"))?;
                if f.t_list.is_none() {
                    f.c.ok_or_else(|| missing("c"))?;
                    f.d.ok_or_else(|| missing("d"))?;
                }
            }
            Experiment::LimitDist => {
                eps.ok_or_else(|| missing("scenario.eps"))?;
                f.reps.ok_or_else(|| missing("reps"))?;
                f.t.ok_or_else(|| missing("t"))?;
            }
        }
        if f.unsafe_phi.is_some()
            && !matches!(experiment, Experiment::Estimate | Experiment::Decomp | Experiment::LimitDist)
        {
            return Err(Error::config(format!(
                "`unsafe_phi` applies only to single-eps commands (estimate, decomp, limit-dist), not {}",
                experiment.name()
            )));
        }
        Ok(())
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings {
            reps: self.file.reps.unwrap_or(2),
            seeds: self.seeds(),
            workers: self.file.workers,
            probe_points: self.file.probe_points,
        }
    }

    pub fn dist_options(&self) -> DistOptions {
        DistOptions {
            paired: self.file.paired,
            centering: if self.file.centering == "time_derivative" {
                Centering::TimeDerivative
            } else {
                Centering::StateDerivative
            },
            phi_override: self.file.unsafe_phi,
        }
    }

    /// Evaluation times: `t_list` when given, else n_grid points on [c, d].
    pub fn eval_times(&self) -> Result<Vec<f64>> {
        if let Some(list) = &self.file.t_list {
            if list.is_empty() {
                return Err(Error::config("`t_list` must not be empty"));
            }
            return Ok(list.clone());
        }
        let (c, d) = (self.file.c.unwrap_or(f64::NAN), self.file.d.unwrap_or(f64::NAN));
        crate::estimator::interior_grid(c, d, self.file.n_grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_RATES: &str = r#"{
        "scenario": { "trend": { "name": "cosine" }, "x0": 1, "T": 1 },
        "eps_list": [0.1, 0.05, 0.025],
        "reps": 10, "c": 0.3, "d": 0.7
    }"#;

    #[test]
    fn minimal_rates_config_resolves_defaults() {
        let cfg = load_config(MINIMAL_RATES.as_bytes()).unwrap();
        cfg.require(Experiment::Rates).unwrap();
        assert_eq!(cfg.file.scenario.as_ref().unwrap().dt, 1e-4);
        assert_eq!(cfg.file.n_grid, 21);
        assert_eq!(cfg.file.probe_points, 101);
        assert_eq!(cfg.kernel.id(), "epanechnikov");
        assert_eq!(cfg.file.scenario.as_ref().unwrap().trend.params["amplitude"], 1.0);
    }

    #[test]
    fn negative_eps_names_the_key() {
        let text = r#"{ "scenario": { "trend": { "name": "cosine" }, "x0": 1, "T": 1, "eps": -0.1 } }"#;
        let err = load_config(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("`eps`"), "{err}");
        let text = r#"{ "eps_list": [0.1, -0.1, 0.01] }"#;
        let err = load_config(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("eps_list[1]"), "{err}");
    }

    #[test]
    fn bandwidth_typo_is_rejected_with_hint() {
        let text = r#"{ "bandwith": 0.2 }"#;
        let err = load_config(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("unknown field `bandwith`"), "{err}");
        assert!(err.contains("no bandwidth field"), "{err}");
        assert!(err.contains("line 1"), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = load_config(b"{\n  \"reps\": ,\n}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn nested_unknown_keys_are_rejected() {
        let text = r#"{ "scenario": { "trend": { "name": "cosine" }, "x0": 1, "T": 1, "sigma": 1 } }"#;
        assert!(load_config(text.as_bytes()).is_err());
        let text = r#"{ "scenario": { "trend": { "name": "cosine", "params": { "amp": 1 } }, "x0": 1, "T": 1 } }"#;
        let err = load_config(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("trend.params.amp"), "{err}");
    }

    #[test]
    fn effective_config_round_trips() {
        let mut cfg = load_config(MINIMAL_RATES.as_bytes()).unwrap();
        cfg.set_seed(42);
        let echoed = cfg.effective_json();
        let again = load_config(echoed.as_bytes()).unwrap();
        assert_eq!(again.file, cfg.file);
        assert_eq!(again.effective_json(), echoed);
    }

    #[test]
    fn requirements_per_experiment() {
        let cfg = load_config(MINIMAL_RATES.as_bytes()).unwrap();
        assert!(cfg.require(Experiment::LimitDist).is_err());
        let text = r#"{ "experiment": "coupling", "kernel": { "builtin": "order_k" }, "k": 2 }"#;
        let cfg = load_config(text.as_bytes()).unwrap();
        cfg.require(Experiment::KernelCheck).unwrap_err();
        let text = r#"{ "kernel": { "builtin": "order_k" }, "k": 2 }"#;
        let cfg = load_config(text.as_bytes()).unwrap();
        cfg.require(Experiment::KernelCheck).unwrap();
        assert_eq!(cfg.kernel.order(), 2);
    }

    #[test]
    fn unsafe_phi_only_for_single_eps_commands() {
        let text = MINIMAL_RATES.replace("\"reps\"", "\"unsafe_phi\": 0.2, \"reps\"");
        let cfg = load_config(text.as_bytes()).unwrap();
        assert!(cfg.require(Experiment::Rates).unwrap_err().to_string().contains("unsafe_phi"));
    }
}
