//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test --test acceptance`.

use std::fs;
use std::time::Instant;

use trendkit::cli::run_cli;
use trendkit::estimator::bias_mean;
use trendkit::experiments::{
    coupling_experiment, limit_distribution_experiment, mse_experiment, unit_diffusion_rhs_variance, Centering,
    DistOptions, RunSettings,
};
use trendkit::kernels::{build_order_k_kernel, verify_kernel_conditions, Kernel};
use trendkit::model::{DiffusionSpec, Scenario, TrendSpec, VolatilitySpec};
use trendkit::ode::solve_limit_ode;
use trendkit::sim::simulate_path;
use trendkit::stats::{mean, variance};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ou_scenario(trend: TrendSpec, dt: f64) -> Scenario {
    Scenario::new(trend, 1.0, 1.0, dt)
        .with_diffusion(DiffusionSpec::multiplicative())
        .with_volatility(VolatilitySpec::ou(1.0, 0.0, 1.0, 0.0))
}

fn kernel_conditions() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for k in 0..=3 {
        let g = build_order_k_kernel(k);
        let report = verify_kernel_conditions(&g, k, 1e-9);
        pass &= report.passed();
        notes.push(format!("k={k} {}", if report.passed() { "ok" } else { "FAIL" }));
    }
    let report = verify_kernel_conditions(&Kernel::epanechnikov(), 2, 1e-9);
    let m2 = report.check("2").map(|c| c.measured).unwrap_or(f64::NAN);
    pass &= !report.passed() && (m2 - 0.2).abs() <= 1e-10;
    notes.push(format!("epanechnikov k=2 rejected with m2 = {m2:.12}"));
    outcome(pass, notes.join(", "))
}

fn degeneracy() -> Outcome {
    let s = Scenario::new(TrendSpec::negexp_linear(), 1.0, 1.0, 1e-4);
    let path = simulate_path(&s, 7).expect("simulation");
    let euler = path.times.iter().zip(&path.x).map(|(t, x)| (x - (-t).exp()).abs()).fold(0.0, f64::max);
    let limit = solve_limit_ode(&s.trend, 1.0, 1.0, 1e-4).expect("ode");
    let rk4 = limit.times.iter().zip(&limit.x).map(|(t, x)| (x - (-t).exp()).abs()).fold(0.0, f64::max);
    outcome(euler <= 1e-3 && rk4 <= 1e-10, format!("max |X - e^-t| = {euler:.3e} (<= 1e-3), RK4 {rk4:.3e} (<= 1e-10)"))
}

fn coupling_rate() -> Outcome {
    let s = ou_scenario(TrendSpec::negexp_linear(), 1e-3);
    let start = Instant::now();
    let report =
        coupling_experiment(&s, &[0.2, 0.1, 0.05, 0.025], &RunSettings::new(500, 20_240_901)).expect("coupling");
    let secs = start.elapsed().as_secs_f64();
    outcome(
        (1.85..=2.15).contains(&report.slope) && secs < 60.0,
        format!("slope {:.4} in [1.85, 2.15], r2 {:.4}, {secs:.1}s (< 60s)", report.slope, report.r_squared),
    )
}

const LADDER: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

fn consistency_and_rates() -> (Outcome, Outcome) {
    let s = ou_scenario(TrendSpec::cosine(1.0, 1.0), 1e-4);
    let settings = RunSettings::new(200, 31_415);
    let start = Instant::now();
    let k0 = mse_experiment(&s, &Kernel::epanechnikov(), 0, &LADDER, 0.3, 0.7, 21, &settings).expect("k = 0 ladder");
    let k1 = mse_experiment(&s, &build_order_k_kernel(1), 1, &LADDER, 0.4, 0.6, 21, &settings).expect("k = 1 ladder");
    let secs = start.elapsed().as_secs_f64();

    let (violations, within_ci) = k0.ladder.monotone_violations();
    let mse: Vec<String> = k0.ladder.mse.iter().map(|m| format!("{m:.3e}")).collect();
    let consistency = outcome(
        k0.ladder.is_consistent(),
        format!("sup-grid MSE [{}], {violations} non-decreasing step(s), within CI: {within_ci}", mse.join(", ")),
    );
    let rates = outcome(
        (1.05..=1.65).contains(&k0.slope) && (1.25..=1.95).contains(&k1.slope) && k1.slope > k0.slope && secs < 300.0,
        format!(
            "k=0 slope {:.4} in [1.05, 1.65]; k=1 slope {:.4} in [1.25, 1.95] and above k=0; {secs:.1}s (< 300s)",
            k0.slope, k1.slope
        ),
    );
    (consistency, rates)
}

fn bias_mean_check() -> Outcome {
    let g = Kernel::uniform(0.0, 1.0);
    let trend = TrendSpec::negexp_linear();
    // x_{0.5} = -1, where S(x_t) = 1 and the x-derivative and time-derivative
    // centerings coincide.
    let x0 = -(0.5f64).exp();
    let s = Scenario::new(trend.clone(), x0, 1.0, 1e-5);
    let limit = solve_limit_ode(&trend, x0, 1.0, 1e-5).expect("ode");
    let m = bias_mean(&trend, &limit, &g, 0, 0.5).expect("bias mean");
    let cmp = limit_distribution_experiment(
        &s,
        &g,
        0,
        0.01,
        0.5,
        &RunSettings::new(2000, 2718),
        DistOptions { paired: true, centering: Centering::StateDerivative, phi_override: None },
    )
    .expect("limit distribution");
    // sample_lhs is already centred by m.
    let lhs_mean = mean(&cmp.sample_lhs) + m;
    let se = (variance(&cmp.sample_lhs) / cmp.reps as f64).sqrt();
    outcome(
        (m + 0.5).abs() <= 1e-12 && (lhs_mean - m).abs() <= 3.0 * se,
        format!(
            "m = {m:.15}; LHS mean {lhs_mean:.4}, |mean - m| = {:.4} <= 3 SE = {:.4}",
            (lhs_mean - m).abs(),
            3.0 * se
        ),
    )
}

fn limit_distribution() -> Outcome {
    let g = Kernel::epanechnikov();
    let flat = Scenario::new(TrendSpec::constant(0.0), 0.0, 1.0, 1e-4);
    let cmp = limit_distribution_experiment(
        &flat,
        &g,
        0,
        0.04,
        0.5,
        &RunSettings::new(10_000, 99),
        DistOptions { paired: true, ..DistOptions::default() },
    )
    .expect("gaussian case");
    let analytic = unit_diffusion_rhs_variance(&flat, &g, 0, 0.04, 0.5).expect("quadratic form");
    let rel = (variance(&cmp.sample_rhs) / analytic - 1.0).abs();

    let s = ou_scenario(TrendSpec::cosine(1.0, 1.0), 1e-4);
    let settings = RunSettings::new(2000, 1234);
    let ks = |eps: f64| {
        limit_distribution_experiment(&s, &g, 0, eps, 0.5, &settings, DistOptions::default())
            .expect("generic case")
            .ks_distance
    };
    let (ks_coarse, ks_fine) = (ks(0.04), ks(0.01));
    outcome(
        rel <= 0.05 && ks_fine <= ks_coarse + 0.05 && ks_fine < 0.1,
        format!(
            "RHS variance off by {:.2}% (<= 5%); ks(0.04) = {ks_coarse:.4}, ks(0.01) = {ks_fine:.4} (< 0.1, <= ks(0.04) + 0.05)",
            100.0 * rel
        ),
    )
}

const DETERMINISM_CONFIG: &str = r#"{
  "scenario": {
    "trend": { "name": "cosine" },
    "sigma1": { "name": "sqrt_one_plus_x2" },
    "sigma2": { "name": "inv_one_plus_y2" },
    "volatility": { "kind": "ou" },
    "x0": 1, "T": 1, "dt": 1e-3, "eps": 0.05
  },
  "eps_list": [0.1, 0.05, 0.025, 0.0125],
  "reps": REPS, "c": 0.3, "d": 0.7, "t": 0.5,
  "plot": true
}"#;

fn determinism() -> Outcome {
    let root = tempfile::tempdir().expect("temp dir");
    let mut notes = Vec::new();
    let mut pass = true;
    for (cmd, reps, files) in [
        ("rates", 60, &["rates.csv", "rate_fit.csv", "rates.svg"][..]),
        ("coupling", 60, &["coupling.csv", "rate_fit.csv"][..]),
        ("decomp", 60, &["decomp.csv"][..]),
        ("estimate", 60, &["estimate.csv"][..]),
        ("simulate", 60, &["path_000000.csv"][..]),
        ("limit-dist", 1000, &["distcmp.csv", "distcmp_summary.csv"][..]),
    ] {
        let config = root.path().join(format!("{cmd}.json"));
        fs::write(&config, DETERMINISM_CONFIG.replace("REPS", &reps.to_string())).expect("write config");
        let mut outputs = Vec::new();
        for (run, workers) in [(0, "1"), (1, "1"), (2, "4")] {
            let dir = root.path().join(format!("{cmd}_{run}"));
            let code = run_cli(&[
                "trendkit".into(),
                cmd.into(),
                "--config".into(),
                config.to_string_lossy().into_owned(),
                "--seed".into(),
                "42".into(),
                "--workers".into(),
                workers.into(),
                "--quiet".into(),
                "--out-dir".into(),
                dir.to_string_lossy().into_owned(),
            ]);
            pass &= code == 0;
            outputs.push(files.iter().map(|f| fs::read(dir.join(f)).unwrap_or_default()).collect::<Vec<_>>());
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]) && outputs[0].iter().all(|b| !b.is_empty());
        pass &= same;
        notes.push(format!("{cmd} {}", if same { "identical" } else { "DIFFERS" }));
    }
    outcome(pass, format!("reruns with workers 1, 1, 4: {}", notes.join(", ")))
}

fn main() {
    let start = Instant::now();
    let mut results = vec![
        ("1 kernel conditions", kernel_conditions()),
        ("2 ODE/SDE degeneracy", degeneracy()),
        ("3 coupling rate", coupling_rate()),
    ];
    let (consistency, rates) = consistency_and_rates();
    results.push(("4 consistency", consistency));
    results.push(("5 estimator rate", rates));
    results.push(("6 bias mean", bias_mean_check()));
    results.push(("7 limit distribution", limit_distribution()));
    results.push(("8 determinism", determinism()));

    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} of {} passed in {:.1}s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
