use proptest::prelude::*;
use sopf::alsox::{solve_amgc_heuristic, HeuristicConfig};
use sopf::cases::{random_case, three_bus, three_bus_scenarios};
use sopf::formulations::{check_first_stage, model_point, Policy, RiskConfig};
use sopf::grid::compute_ptdf;
use sopf::pipeline::{solve_method, Method, SolveOptions};
use sopf::scenarios::{sample, DistributionSpec};
use sopf::solver::{BundledSolver, Tolerances};

fn bound(q: usize, delta: f64) -> usize {
    if q == 0 {
        0
    } else {
        (q as f64 / delta).log2().ceil().max(0.0) as usize + 1
    }
}

#[test]
fn zero_budget_skips_bisection_and_returns_the_robust_point() {
    let case = three_bus();
    let sc = three_bus_scenarios();
    let ptdf = compute_ptdf(&case).unwrap();
    let risk = RiskConfig::new(0.2, 3).unwrap();
    assert_eq!(risk.q, 0);
    let h = solve_amgc_heuristic(&case, &sc, &ptdf, &risk, &HeuristicConfig::default(), &BundledSolver, &Tolerances::default())
        .unwrap();
    assert!(h.iterations.is_empty());
    let robust = solve_method(Method::AgcRobust, &case, &sc, &ptdf, &SolveOptions::default()).unwrap();
    assert!((h.solution.objective - robust.solution.objective).abs() < 1e-9);
}

#[test]
fn three_bus_heuristic_is_bracketed_by_exact_and_robust() {
    let case = three_bus();
    let sc = three_bus_scenarios();
    let ptdf = compute_ptdf(&case).unwrap();
    let risk = RiskConfig::new(1.0 / 3.0, 3).unwrap();
    let h = solve_amgc_heuristic(&case, &sc, &ptdf, &risk, &HeuristicConfig::default(), &BundledSolver, &Tolerances::default())
        .unwrap();
    let opts = SolveOptions { epsilon: 1.0 / 3.0, ..Default::default() };
    let exact = solve_method(Method::Amgc, &case, &sc, &ptdf, &opts).unwrap().solution.objective;
    let robust = solve_method(Method::AgcRobust, &case, &sc, &ptdf, &opts).unwrap().solution.objective;
    assert!(h.solution.objective >= exact - 1e-6 && h.solution.objective <= robust + 1e-6);
    assert!(h.solution.activated() <= 1);
    assert!(h.log_csv().starts_with("iteration,q,passed,relaxed_objective\n"));
    assert_eq!(h.log_csv().lines().count(), h.iterations.len() + 1);
}

#[test]
fn invalid_configuration_is_rejected() {
    let case = three_bus();
    let ptdf = compute_ptdf(&case).unwrap();
    let risk = RiskConfig::new(1.0 / 3.0, 3).unwrap();
    for config in [HeuristicConfig { delta: 0.0, ..Default::default() }, HeuristicConfig { zero_tol: 0.5, ..Default::default() }] {
        let r = solve_amgc_heuristic(&case, &three_bus_scenarios(), &ptdf, &risk, &config, &BundledSolver, &Tolerances::default());
        assert!(r.is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn heuristic_is_feasible_and_close_to_exact(seed in 0u64..10_000, ns in 5usize..=10, delta in prop::sample::select(vec![0.25, 0.5, 1.0, 2.0])) {
        let case = random_case(seed, 3 + (seed % 8) as usize);
        let sc = sample(&case, &DistributionSpec::default(), ns, seed + 7).unwrap();
        let ptdf = compute_ptdf(&case).unwrap();
        let eps = 0.3;
        let risk = RiskConfig::new(eps, ns).unwrap();
        let config = HeuristicConfig { delta, ..Default::default() };
        let tol = Tolerances::default();
        let Ok(h) = solve_amgc_heuristic(&case, &sc, &ptdf, &risk, &config, &BundledSolver, &tol) else {
            prop_assume!(false);
            unreachable!()
        };
        prop_assert!(h.iterations.len() <= bound(risk.q, delta), "{} iterations for q={} delta={delta}", h.iterations.len(), risk.q);
        let mut prev = (0.0, risk.q as f64);
        for it in &h.iterations {
            prop_assert!(it.lower <= it.upper);
            prop_assert!(it.lower >= prev.0 && it.upper <= prev.1);
            prop_assert_eq!(it.passed, it.lower == it.q);
            prev = (it.lower, it.upper);
        }
        let point = model_point(&h.built, &h.solution);
        prop_assert!(h.built.model.max_violation(&point) <= 1e-6);
        let report = check_first_stage(&case, &ptdf, &sc, Policy::Amgc, risk.q, &h.solution.first_stage()).unwrap();
        prop_assert!(report.feasible(), "{:?}", report.violations);

        let exact = solve_method(Method::Amgc, &case, &sc, &ptdf, &SolveOptions { epsilon: eps, ..Default::default() }).unwrap();
        let e = exact.solution.objective;
        prop_assert!(h.solution.objective >= e - 1e-6);
        prop_assert!(h.solution.objective <= 1.05 * e, "{} vs {e}", h.solution.objective);
    }
}
