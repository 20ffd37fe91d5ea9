use proptest::prelude::*;

use trendkit::estimator::estimate_at;
use trendkit::kernels::{build_order_k_kernel, Kernel};
use trendkit::model::{SamplePath, Scenario, TrendSpec, VolatilitySpec, WienerMap};
use trendkit::ode::solve_limit_ode;
use trendkit::sim::{generate_wiener_increments, simulate_path, simulate_volatility};
use trendkit::validate::{validate_on_grid, validate_scenario, ProbeGrid};

const N: usize = 400;
const DT: f64 = 1.0 / N as f64;

fn path_from_increments(dx: &[f64], x0: f64) -> SamplePath {
    let mut x = vec![x0];
    for d in dx {
        x.push(x.last().unwrap() + d);
    }
    SamplePath {
        times: (0..=dx.len()).map(|i| i as f64 * DT).collect(),
        x,
        dw: vec![0.0; dx.len()],
        y: vec![0.0; dx.len() + 1],
    }
}

fn increments() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.1..0.1f64, N)
}

fn kernel() -> impl Strategy<Value = Kernel> {
    prop_oneof![Just(Kernel::epanechnikov()), Just(build_order_k_kernel(2)), Just(Kernel::uniform(-1.0, 1.0))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimator_is_linear_in_increments(a in increments(), b in increments(), g in kernel(), t in 0.3..0.7f64) {
        let phi = 0.2;
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let ea = estimate_at(&path_from_increments(&a, 0.0), &g, phi, t).unwrap();
        let eb = estimate_at(&path_from_increments(&b, 0.0), &g, phi, t).unwrap();
        let es = estimate_at(&path_from_increments(&sum, 0.0), &g, phi, t).unwrap();
        prop_assert!((es - ea - eb).abs() <= 1e-9 * (1.0 + ea.abs() + eb.abs()));
    }

    #[test]
    fn estimator_ignores_the_level(a in increments(), shift in -50.0..50.0f64, t in 0.3..0.7f64) {
        let g = Kernel::epanechnikov();
        let base = estimate_at(&path_from_increments(&a, 0.0), &g, 0.2, t).unwrap();
        let shifted = estimate_at(&path_from_increments(&a, shift), &g, 0.2, t).unwrap();
        prop_assert!((base - shifted).abs() <= 1e-9 * (1.0 + base.abs()));
    }

    #[test]
    fn estimator_scales_with_increments(a in increments(), lambda in -5.0..5.0f64, t in 0.3..0.7f64) {
        let g = build_order_k_kernel(1);
        let scaled: Vec<f64> = a.iter().map(|v| lambda * v).collect();
        let base = estimate_at(&path_from_increments(&a, 0.0), &g, 0.2, t).unwrap();
        let out = estimate_at(&path_from_increments(&scaled, 0.0), &g, 0.2, t).unwrap();
        prop_assert!((out - lambda * base).abs() <= 1e-9 * (1.0 + (lambda * base).abs()));
    }

    #[test]
    fn validation_passes_on_subgrids(
        amplitude in 0.1..3.0f64,
        frequency in 0.1..3.0f64,
        x0 in -2.0..2.0f64,
        keep in prop::collection::vec(any::<bool>(), 41),
    ) {
        let s = Scenario::new(TrendSpec::cosine(amplitude, frequency), x0, 1.0, 1e-2);
        let full = ProbeGrid::default_for(&s, 41);
        prop_assert!(validate_on_grid(&s, &full).is_pass());
        let pick = |v: &[f64]| -> Vec<f64> { v.iter().zip(&keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect() };
        let sub = ProbeGrid { xs: pick(&full.xs), ys: pick(&full.ys), ts: pick(&full.ts) };
        prop_assert!(validate_on_grid(&s, &sub).is_pass());
        prop_assert_eq!(validate_scenario(&s, 41), validate_scenario(&s, 41));
    }

    #[test]
    fn trend_is_time_lipschitz_along_the_limit_path(
        amplitude in 0.1..3.0f64,
        frequency in 0.1..3.0f64,
        x0 in -3.0..3.0f64,
    ) {
        let trend = TrendSpec::cosine(amplitude, frequency);
        let path = solve_limit_ode(&trend, x0, 1.0, 1e-2).unwrap();
        let drift: Vec<f64> = path.x.iter().map(|&x| trend.eval(x)).collect();
        let sup = drift.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in (0..drift.len()).step_by(7) {
            for j in (i..drift.len()).step_by(11) {
                let gap = (path.times[j] - path.times[i]).abs();
                prop_assert!((drift[j] - drift[i]).abs() <= trend.lipschitz * sup * gap + 1e-9);
            }
        }
    }

    #[test]
    fn volatility_is_adapted(seed in any::<u64>(), cut in 1usize..200, bump in -1.0..1.0f64) {
        let dw = generate_wiener_increments(200, 1e-2, seed);
        let mut changed = dw.clone();
        changed[cut - 1] += bump;
        for spec in [VolatilitySpec::ou(1.0, 0.5, 0.7, 0.1), VolatilitySpec::functional_of_w(WienerMap::Sin)] {
            let a = simulate_volatility(&spec, &dw, 1e-2).unwrap();
            let b = simulate_volatility(&spec, &changed, 1e-2).unwrap();
            prop_assert_eq!(&a[..cut], &b[..cut]);
        }
    }

    #[test]
    fn paths_are_reproducible(seed in any::<u64>(), eps in 0.0..0.5f64) {
        let s = Scenario::new(TrendSpec::tanh(1.0, 1.0), 0.3, 1.0, 1e-2)
            .with_volatility(VolatilitySpec::ou(1.0, 0.0, 1.0, 0.0))
            .with_eps(eps);
        prop_assert_eq!(simulate_path(&s, seed).unwrap(), simulate_path(&s, seed).unwrap());
    }
}
