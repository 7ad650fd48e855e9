#[path = "common/oracle.rs"]
mod oracle;

use oracle::Mode;
use proptest::prelude::*;
use sopf::cases::{random_case, three_bus, three_bus_scenarios};
use sopf::formulations::{build, check_first_stage, extract_solution, FirstStage, Policy, RiskConfig};
use sopf::grid::{compute_ptdf, GridCase, Line, Node};
use sopf::pipeline::{solve_method, Method, SolveOptions};
use sopf::scenarios::{fixed_set, sample, DistributionSpec, ScenarioSet};
use sopf::solver::{relax_binaries, solve_lp, solve_milp, MilpLimits, SolveStatus, Tolerances};

fn objective(method: Method, case: &GridCase, sc: &ScenarioSet, epsilon: f64) -> Option<f64> {
    let ptdf = compute_ptdf(case).unwrap();
    let opts = SolveOptions { epsilon, ..Default::default() };
    solve_method(method, case, sc, &ptdf, &opts).ok().map(|o| o.solution.objective)
}

fn exact(policy: Policy, case: &GridCase, sc: &ScenarioSet, risk: &RiskConfig) -> Option<f64> {
    let ptdf = compute_ptdf(case).unwrap();
    let built = build(policy, case, sc, &ptdf, risk).unwrap();
    let r = solve_milp(&built.model, &Tolerances::default(), MilpLimits::default()).unwrap();
    (r.status == SolveStatus::Optimal).then_some(r.objective)
}

fn instance(seed: u64, scenarios: usize) -> (GridCase, ScenarioSet) {
    let case = random_case(seed, 3 + (seed % 8) as usize);
    let sc = sample(&case, &DistributionSpec::default(), scenarios, seed ^ 0xabc).unwrap();
    (case, sc)
}

#[test]
fn three_bus_optima_match_enumeration() {
    let case = three_bus();
    let sc = three_bus_scenarios();
    let robust = objective(Method::AgcRobust, &case, &sc, 0.0).unwrap();
    let jcc = objective(Method::AgcJcc, &case, &sc, 1.0 / 3.0).unwrap();
    let amgc = objective(Method::Amgc, &case, &sc, 1.0 / 3.0).unwrap();
    let o_robust = oracle::enumerate(&case, &sc, Mode::Robust, 0, None).unwrap();
    let o_jcc = oracle::enumerate(&case, &sc, Mode::Jcc, 1, None).unwrap();
    let o_amgc = oracle::enumerate(&case, &sc, Mode::Amgc, 1, None).unwrap();
    assert!((robust - o_robust).abs() < 1e-6, "{robust} vs {o_robust}");
    assert!((jcc - o_jcc).abs() < 1e-6, "{jcc} vs {o_jcc}");
    assert!((amgc - o_amgc).abs() < 1e-6, "{amgc} vs {o_amgc}");
    assert!(jcc <= amgc && amgc <= robust);
}

#[test]
fn three_bus_amgc_activates_the_negative_scenario() {
    let case = three_bus();
    let sc = three_bus_scenarios();
    let ptdf = compute_ptdf(&case).unwrap();
    let o = solve_method(Method::Amgc, &case, &sc, &ptdf, &SolveOptions { epsilon: 1.0 / 3.0, ..Default::default() }).unwrap();
    assert_eq!(o.solution.y, vec![false, false, true]);
    assert!((o.solution.beta.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    let robust = solve_method(Method::AgcRobust, &case, &sc, &ptdf, &SolveOptions::default()).unwrap();
    assert!(robust.solution.alpha.iter().flatten().all(|&a| a == 0.0));
    assert!(robust.solution.y.iter().all(|&y| !y));
}

fn table_row(p: [f64; 2], beta: [f64; 2], ru: [f64; 2], rd: [f64; 2]) -> FirstStage {
    FirstStage { p: p.to_vec(), beta: beta.to_vec(), r_cap_up: ru.to_vec(), r_cap_down: rd.to_vec() }
}

#[test]
fn published_three_bus_rows_fail_the_oracle() {
    let case = three_bus();
    let sc = three_bus_scenarios();
    let jcc = table_row([15.0, 45.0], [0.0, 1.0], [0.0, 0.0], [0.0, 20.0]);
    let robust = table_row([12.5, 47.5], [0.625, 0.375], [12.5, 7.5], [12.5, 7.5]);
    let amgc = table_row([15.0, 45.0], [0.0, 1.0], [20.0, 0.0], [0.0, 20.0]);

    // scenario 2 (+10 MW) pushes 20/3 MW over the 5 MW line
    let a = oracle::audit(&case, &sc, &jcc);
    assert!(a.iter().any(|(n, s, v)| n == "l1 limit" && *s == Some(1) && (v - 5.0 / 3.0).abs() < 1e-9));
    assert!(oracle::enumerate(&case, &sc, Mode::Jcc, 1, Some(&jcc)).is_none());

    let a = oracle::audit(&case, &sc, &robust);
    assert!(a.iter().any(|(n, s, v)| n == "g2 upper limit" && s.is_none() && (v - 5.0).abs() < 1e-9));
    assert!(oracle::enumerate(&case, &sc, Mode::Robust, 0, Some(&robust)).is_none());
    assert!((oracle::agc_cost(&case, &sc, &robust) - 132.5).abs() < 1e-9);

    assert!(oracle::enumerate(&case, &sc, Mode::Amgc, 1, Some(&amgc)).is_none());
    assert!(oracle::enumerate(&case, &sc, Mode::Amgc, 2, Some(&amgc)).is_some());
}

#[test]
fn quiet_scenarios_reduce_to_merit_order_dispatch() {
    let mut case = random_case(5, 6);
    for l in case.lines.iter_mut() {
        l.capacity = 1e4;
    }
    let sc = fixed_set(&vec![vec![0.0; 4]; case.num_nodes()]).unwrap();
    let robust = objective(Method::AgcRobust, &case, &sc, 0.0).unwrap();

    let mut need: f64 = case.nodes.iter().map(|n| n.load - n.wind_forecast).sum();
    let mut cost = 0.0;
    for g in &case.generators {
        cost += g.energy_cost * g.p_min;
        need -= g.p_min;
    }
    let mut order: Vec<_> = case.generators.iter().collect();
    order.sort_by(|a, b| a.energy_cost.total_cmp(&b.energy_cost));
    for g in order {
        let take = need.min(g.p_max - g.p_min).max(0.0);
        cost += g.energy_cost * take;
        need -= take;
    }
    assert!(need.abs() < 1e-9);
    assert!((robust - cost).abs() < 1e-6 * cost.max(1.0), "{robust} vs {cost}");
}

#[test]
fn single_generator_carries_all_participation() {
    let mut case = three_bus();
    case.generators.truncate(1);
    case.generators[0].p_max = 200.0;
    case.generators[0].res_limit_up = 100.0;
    case.generators[0].res_limit_down = 100.0;
    case.lines[0].capacity = 100.0;
    let ptdf = compute_ptdf(&case).unwrap();
    let o = solve_method(Method::AgcRobust, &case, &three_bus_scenarios(), &ptdf, &SolveOptions::default()).unwrap();
    assert_eq!(o.solution.beta, vec![1.0]);
}

#[test]
fn two_node_case_with_redundant_line() {
    let case = GridCase {
        nodes: vec![Node { id: 0, load: 0.0, wind_forecast: 0.0 }, Node { id: 1, load: 50.0, wind_forecast: 10.0 }],
        generators: three_bus().generators,
        lines: vec![Line { id: 0, from: 0, to: 1, susceptance: 1.0, capacity: 1e3 }],
        slack_node: 1,
        mva_base: None,
    };
    let mut case = case;
    case.generators[1].node = 1;
    let sc = fixed_set(&[vec![0.0; 3], vec![5.0, -5.0, 0.0]]).unwrap();
    for (mode, method, q) in [(Mode::Jcc, Method::AgcJcc, 1), (Mode::Amgc, Method::Amgc, 1)] {
        let ours = objective(method, &case, &sc, 1.0 / 3.0).unwrap();
        let brute = oracle::enumerate(&case, &sc, mode, q, None).unwrap();
        assert!((ours - brute).abs() < 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_optima_match_subset_enumeration(seed in 0u64..10_000, ns in 4usize..=8) {
        let (case, sc) = instance(seed, ns);
        let q = 2.min(ns - 1);
        let eps = q as f64 / ns as f64;
        for (mode, method) in [(Mode::Jcc, Method::AgcJcc), (Mode::Amgc, Method::Amgc)] {
            let ours = objective(method, &case, &sc, eps);
            let brute = oracle::enumerate(&case, &sc, mode, q, None);
            match (ours, brute) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{method}: {a} vs {b}"),
                (None, None) => {}
                (a, b) => prop_assert!(false, "{method}: solver {a:?}, oracle {b:?}"),
            }
        }
    }

    #[test]
    fn zero_budget_collapses_to_robust(seed in 0u64..10_000, ns in 1usize..=20) {
        let (case, sc) = instance(seed, ns);
        let robust = objective(Method::AgcRobust, &case, &sc, 0.0);
        prop_assume!(robust.is_some());
        let robust = robust.unwrap();
        for m in [Method::AgcJcc, Method::Amgc, Method::AmgcHeuristic] {
            let v = objective(m, &case, &sc, 0.0).unwrap();
            prop_assert!((v - robust).abs() <= 1e-6, "{m}: {v} vs {robust}");
        }
    }

    #[test]
    fn budget_relaxes_monotonically(seed in 0u64..10_000) {
        let (case, sc) = instance(seed, 10);
        let robust = objective(Method::AgcRobust, &case, &sc, 0.0);
        prop_assume!(robust.is_some());
        let robust = robust.unwrap();
        for policy in [Policy::AgcJcc, Policy::Amgc] {
            let mut last = f64::INFINITY;
            for q in 0..=4 {
                let risk = RiskConfig::new(q as f64 / 10.0, 10).unwrap();
                prop_assert_eq!(risk.q, q);
                let v = exact(policy, &case, &sc, &risk).unwrap();
                prop_assert!(v <= last + 1e-6, "{policy} q={q}: {v} > {last}");
                prop_assert!(v <= robust + 1e-6);
                last = v;
            }
        }
    }

    #[test]
    fn screening_and_cuts_preserve_the_optimum(seed in 0u64..10_000) {
        let (case, sc) = instance(seed, 8);
        let ptdf = compute_ptdf(&case).unwrap();
        for policy in [Policy::AgcJcc, Policy::Amgc] {
            let base = RiskConfig::new(0.25, 8).unwrap();
            let plain = exact(policy, &case, &sc, &base.clone().with_screening(false).with_cuts(false));
            for (screen, cuts) in [(true, false), (false, true), (true, true)] {
                let v = exact(policy, &case, &sc, &base.clone().with_screening(screen).with_cuts(cuts));
                match (plain, v) {
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0)),
                    (None, None) => {}
                    _ => prop_assert!(false, "feasibility changed"),
                }
            }
            let bound = |cuts: bool| {
                let built = build(policy, &case, &sc, &ptdf, &base.clone().with_cuts(cuts)).unwrap();
                let r = solve_lp(&relax_binaries(&built.model), &Tolerances::default()).unwrap();
                (r.status == SolveStatus::Optimal).then_some(r.objective)
            };
            if let (Some(without), Some(with)) = (bound(false), bound(true)) {
                prop_assert!(with >= without - 1e-9, "{with} < {without}");
            }
        }
    }

    #[test]
    fn solutions_pass_the_constraint_checker(seed in 0u64..10_000) {
        let (case, sc) = instance(seed, 8);
        let ptdf = compute_ptdf(&case).unwrap();
        let opts = SolveOptions { epsilon: 0.25, ..Default::default() };
        for method in Method::ALL {
            let Ok(o) = solve_method(method, &case, &sc, &ptdf, &opts) else { continue };
            let q = if method == Method::AgcRobust { 0 } else { 2 };
            let report = check_first_stage(&case, &ptdf, &sc, method.policy(), q, &o.solution.first_stage()).unwrap();
            prop_assert!(report.feasible(), "{method}: {:?}", report.violations);
            prop_assert!(o.solution.activated() <= q);
            prop_assert!((report.expected_cost - o.solution.objective).abs() <= 1e-6 * o.solution.objective.abs().max(1.0)
                || method.policy() == Policy::Amgc);
        }
    }
}

#[test]
fn extraction_rejects_a_point_with_unit_sum_violated() {
    let case = three_bus();
    let sc = three_bus_scenarios();
    let ptdf = compute_ptdf(&case).unwrap();
    let built = build(Policy::AgcRobust, &case, &sc, &ptdf, &RiskConfig::robust()).unwrap();
    let mut r = solve_lp(&built.model, &Tolerances::default()).unwrap();
    r.primal[built.layout.beta[0].0] += 0.1;
    assert!(extract_solution(&built, &r, &Tolerances::default()).is_err());
}
