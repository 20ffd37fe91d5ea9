//! Command-line front end. Diagnostics go to standard error; data go to
//! files under the output directory (and the kernel report also to
//! standard output).
//!
//! Exit codes: 0 success, 1 configuration error, 2 divergence, 3 failed
//! check.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, Experiment, RunConfig, EFFECTIVE_CONFIG_NAME};
use crate::error::{Error, Result};
use crate::estimator::{bandwidth_for, estimate_at, EstimateSeries};
use crate::experiments::{coupling_experiment, error_decomposition, limit_distribution_experiment, mse_experiment};
use crate::kernels::verify_kernel_conditions;
use crate::model::Scenario;
use crate::ode::solve_on_grid;
use crate::output::{self, fmt_real, write_text};
use crate::sim::simulate_path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGENCE: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "trendkit",
    version,
    about = "Kernel trend estimation for small-noise SDEs with multiplicative stochastic volatility",
    long_about = "Kernel trend estimation for dX = S(X)dt + eps sigma1(t,X) sigma2(t,Y) dW.\n\
        Every subcommand reads a JSON config (--config), writes effective_config.json next to its \
        outputs, and exits 0 on success, 1 on configuration errors, 2 on divergence, 3 on a failed check.\n\
        Reals in CSV files have 17 significant digits; lines end in LF."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Master seed; overrides `master_seed` in the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, value_name = "PATH")]
    out_dir: Option<PathBuf>,
    /// Worker threads for replicate loops (0 = all cores); results do not depend on it.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate `n_paths` sample paths at scenario.eps.
    ///
    /// Writes path_NNNNNN.csv with header `t,x,y,dw` (dw empty on the last row).
    Simulate(Common),
    /// Solve the limit ODE dx/dt = S(x) by RK4 on the simulation grid.
    ///
    /// Writes limit.csv with header `t,x`.
    Limit(Common),
    /// Estimate S along one simulated path at scenario.eps.
    ///
    /// Writes estimate.csv with header `t,s_hat,phi,kernel`.
    Estimate(Common),
    /// Check the kernel moment and integrability conditions for order k.
    ///
    /// Writes kernel_check.csv (also to stdout) with header `j,moment,required,pass`; exit 3 on failure.
    KernelCheck(Common),
    /// Coupling rate of sup_t E(X_t - x_t)^2 over eps_list; theory slope 2.
    ///
    /// Writes coupling.csv `eps,sup_mse,ci,reps` and rate_fit.csv `slope,intercept,r2,theory`.
    Coupling(Common),
    /// Sup-grid MSE of the estimator over eps_list on n_grid points of [c, d].
    ///
    /// Writes rates.csv `eps,phi,sup_mse,ci,reps` and rate_fit.csv `slope,intercept,r2,theory`.
    Rates(Common),
    /// Empirical three-term error decomposition at scenario.eps.
    ///
    /// Writes decomp.csv with header `t,i1,i2,i3,mse`.
    Decomp(Common),
    /// Normalized estimation error against the normalized stochastic integral at time t.
    ///
    /// Writes distcmp.csv `sample,value` (labels lhs, rhs, lhs_raw, rhs_raw) and
    /// distcmp_summary.csv `eps,phi,m,ks,reps,paired`.
    LimitDist(Common),
}

impl Command {
    fn split(&self) -> (Experiment, &Common) {
        match self {
            Command::Simulate(c) => (Experiment::Simulate, c),
            Command::Limit(c) => (Experiment::Limit, c),
            Command::Estimate(c) => (Experiment::Estimate, c),
            Command::KernelCheck(c) => (Experiment::KernelCheck, c),
            Command::Coupling(c) => (Experiment::Coupling, c),
            Command::Rates(c) => (Experiment::Rates, c),
            Command::Decomp(c) => (Experiment::Decomp, c),
            Command::LimitDist(c) => (Experiment::LimitDist, c),
        }
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run_cli(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (experiment, common) = cli.command.split();
    let level = if common.quiet { log::LevelFilter::Error } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    log::set_max_level(level);
    match run(experiment, common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Divergence { .. } => EXIT_DIVERGENCE,
                _ => EXIT_CONFIG,
            }
        }
    }
}

fn prepare(experiment: Experiment, common: &Common) -> Result<RunConfig> {
    let text = fs::read(&common.config)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", common.config.display())))?;
    let mut cfg = load_config(&text)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(dir) = &common.out_dir {
        cfg.set_out_dir(dir.clone());
    }
    if let Some(w) = common.workers {
        cfg.set_workers(w);
    }
    cfg.require(experiment)?;
    write_text(&cfg.out_dir, EFFECTIVE_CONFIG_NAME, &cfg.effective_json())?;
    Ok(cfg)
}

fn scenario(cfg: &RunConfig) -> &Scenario {
    cfg.scenario.as_ref().expect("checked by RunConfig::require")
}

fn single_phi(cfg: &RunConfig, eps: f64) -> Result<f64> {
    match cfg.file.unsafe_phi {
        Some(phi) => {
            log::warn!(
                "unsafe_phi = {phi}: non-default bandwidth, results are not covered by the rate or limit theory"
            );
            Ok(phi)
        }
        None => bandwidth_for(eps, cfg.k),
    }
}

fn run(experiment: Experiment, common: &Common) -> Result<i32> {
    let cfg = prepare(experiment, common)?;
    let dir = cfg.out_dir.clone();
    match experiment {
        Experiment::KernelCheck => {
            let report = verify_kernel_conditions(&cfg.kernel, cfg.k, cfg.file.moment_tol);
            let csv = report.to_csv();
            write_text(&dir, "kernel_check.csv", &csv)?;
            print!("{csv}");
            if !report.passed() {
                eprintln!("kernel '{}' fails the order-{} conditions", cfg.kernel.id(), cfg.k);
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Experiment::Simulate => {
            let s = scenario(&cfg);
            let seeds = cfg.seeds();
            for i in 0..cfg.file.n_paths {
                let path = simulate_path(s, seeds.stream_for(i as u64))?;
                write_text(&dir, &output::path_file_name(i), &output::path_csv(&path))?;
            }
        }
        Experiment::Limit => {
            let s = scenario(&cfg);
            let path = solve_on_grid(&s.trend, s.x0, &s.grid()?)?;
            write_text(&dir, "limit.csv", &output::limit_csv(&path))?;
        }
        Experiment::Estimate => {
            let s = scenario(&cfg);
            let phi = single_phi(&cfg, s.eps)?;
            let times = cfg.eval_times()?;
            let path = simulate_path(s, cfg.seeds().stream_for(0))?;
            let s_hat = times.iter().map(|&t| estimate_at(&path, &cfg.kernel, phi, t)).collect::<Result<Vec<_>>>()?;
            let series = EstimateSeries { t_grid: times, s_hat, phi, kernel_id: cfg.kernel.id().to_string() };
            write_text(&dir, "estimate.csv", &series.to_csv())?;
        }
        Experiment::Coupling => {
            let eps_list = cfg.file.eps_list.as_deref().unwrap_or_default();
            let report = coupling_experiment(scenario(&cfg), eps_list, &cfg.settings())?;
            write_text(&dir, "coupling.csv", &output::coupling_csv(&report))?;
            write_text(&dir, "rate_fit.csv", &output::rate_fit_csv(&report))?;
            if cfg.file.plot {
                write_text(&dir, "coupling.svg", &output::loglog_svg(&report, "coupling: sup_t E(X_t - x_t)^2"))?;
            }
            log::info!("coupling slope {:.4} (theory {})", report.slope, report.theory_exponent);
        }
        Experiment::Rates => {
            let f = &cfg.file;
            let eps_list = f.eps_list.as_deref().unwrap_or_default();
            let (c, d) = (f.c.unwrap_or(f64::NAN), f.d.unwrap_or(f64::NAN));
            let report = mse_experiment(scenario(&cfg), &cfg.kernel, cfg.k, eps_list, c, d, f.n_grid, &cfg.settings())?;
            write_text(&dir, "rates.csv", &output::rates_csv(&report))?;
            write_text(&dir, "rate_fit.csv", &output::rate_fit_csv(&report))?;
            if f.plot {
                write_text(&dir, "rates.svg", &output::loglog_svg(&report, "estimator: sup-grid MSE"))?;
            }
            log::info!("estimator slope {:.4} (theory {:.4})", report.slope, report.theory_exponent);
            if !report.ladder.is_consistent() {
                log::warn!("MSE does not decrease along the eps ladder beyond one CI-width violation");
            }
        }
        Experiment::Decomp => {
            let s = scenario(&cfg);
            let times = cfg.eval_times()?;
            let phi = cfg.file.unsafe_phi.map(|_| single_phi(&cfg, s.eps)).transpose()?;
            let rows = error_decomposition(s, &cfg.kernel, cfg.k, s.eps, &times, &cfg.settings(), phi)?;
            write_text(&dir, "decomp.csv", &output::decomp_csv(&rows))?;
        }
        Experiment::LimitDist => {
            let s = scenario(&cfg);
            if cfg.file.unsafe_phi.is_some() {
                single_phi(&cfg, s.eps)?;
            }
            let t = cfg.file.t.unwrap_or(f64::NAN);
            let cmp =
                limit_distribution_experiment(s, &cfg.kernel, cfg.k, s.eps, t, &cfg.settings(), cfg.dist_options())?;
            write_text(&dir, "distcmp.csv", &output::distcmp_csv(&cmp))?;
            let summary = format!(
                "eps,phi,m,ks,reps,paired\n{},{},{},{},{},{}\n",
                fmt_real(cmp.eps),
                fmt_real(cmp.phi),
                fmt_real(cmp.m),
                fmt_real(cmp.ks_distance),
                cmp.reps,
                cmp.paired
            );
            write_text(&dir, "distcmp_summary.csv", &summary)?;
            log::info!("ks distance {:.4} over {} replicates", cmp.ks_distance, cmp.reps);
        }
    }
    Ok(EXIT_OK)
}
