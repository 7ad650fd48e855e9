//! Independent feasibility check of reported first-stage decisions.

use super::{FirstStage, Policy};
use crate::error::Result;
use crate::grid::{GridCase, PtdfMatrix};
use crate::scenarios::ScenarioSet;
use crate::solver::{solve_lp, LinearModel, Sense, SolveStatus, Tolerances, VarId};

const TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: String,
    pub scenario: Option<usize>,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// Violations that make the decisions infeasible for the policy.
    pub violations: Vec<Violation>,
    /// Every limit broken when only AGC acts, per scenario.
    pub agc_violations: Vec<Violation>,
    /// Scenarios that rely on the budget (violated or manually adjusted).
    pub relief_scenarios: Vec<usize>,
    /// First-stage cost plus the average cheapest deployment cost.
    pub expected_cost: f64,
}

impl CheckReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn push(out: &mut Vec<Violation>, constraint: String, scenario: Option<usize>, magnitude: f64) {
    if magnitude > TOL {
        out.push(Violation { constraint, scenario, magnitude });
    }
}

fn deploy_cost(case: &GridCase, g: usize, r: f64) -> f64 {
    let gen = &case.generators[g];
    if r >= 0.0 {
        gen.deploy_cost_up * r
    } else {
        gen.deploy_cost_down * r
    }
}

/// Limits broken in scenario `s` when generator `g` deploys `dep[g]`.
fn scenario_violations(case: &GridCase, ptdf: &PtdfMatrix, fs: &FirstStage, omega: &[f64], dep: &[f64], s: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    for g in 0..case.generators.len() {
        push(&mut out, format!("upward reserve of generator {g}"), Some(s), dep[g] - fs.r_cap_up[g]);
        push(&mut out, format!("downward reserve of generator {g}"), Some(s), -dep[g] - fs.r_cap_down[g]);
    }
    let mut inj: Vec<f64> = case.nodes.iter().zip(omega).map(|(n, w)| n.wind_forecast + w - n.load).collect();
    for (g, gen) in case.generators.iter().enumerate() {
        inj[gen.node] += fs.p[g] + dep[g];
    }
    for (l, (flow, line)) in ptdf.flows(&inj).into_iter().zip(&case.lines).enumerate() {
        push(&mut out, format!("flow limit of line {l}"), Some(s), flow.abs() - line.capacity);
    }
    out
}

/// Cheapest manual adjustment restoring scenario `s`, as its deployment cost.
fn manual_relief(case: &GridCase, ptdf: &PtdfMatrix, fs: &FirstStage, omega: &[f64], omega_total: f64) -> Result<Option<f64>> {
    let mut m = LinearModel::new();
    let ng = case.generators.len();
    let mut alpha = Vec::with_capacity(ng);
    let mut inj: Vec<f64> = case.nodes.iter().zip(omega).map(|(n, w)| n.wind_forecast + w - n.load).collect();
    for (g, gen) in case.generators.iter().enumerate() {
        let agc = -omega_total * fs.beta[g];
        inj[gen.node] += fs.p[g] + agc;
        let a = m.add_var(format!("a{g}"), -gen.res_limit_down, gen.res_limit_up, 0.0)?;
        let rp = m.add_var(format!("rp{g}"), 0.0, f64::INFINITY, gen.deploy_cost_up)?;
        let rm = m.add_var(format!("rm{g}"), 0.0, f64::INFINITY, -gen.deploy_cost_down)?;
        m.add_constraint(format!("dep{g}"), vec![(rp, 1.0), (rm, -1.0), (a, -1.0)], Sense::Eq, agc)?;
        m.add_constraint(format!("up{g}"), vec![(a, 1.0)], Sense::Le, fs.r_cap_up[g] - agc)?;
        m.add_constraint(format!("dn{g}"), vec![(a, 1.0)], Sense::Ge, -fs.r_cap_down[g] - agc)?;
        alpha.push(a);
    }
    m.add_constraint("sum", alpha.iter().map(|&a| (a, 1.0)).collect(), Sense::Eq, 0.0)?;
    let base = ptdf.flows(&inj);
    for (l, line) in case.lines.iter().enumerate() {
        let coeffs: Vec<(VarId, f64)> =
            case.generators.iter().enumerate().map(|(g, gen)| (alpha[g], ptdf.get(l, gen.node))).filter(|c| c.1 != 0.0).collect();
        if coeffs.is_empty() {
            continue;
        }
        m.add_constraint(format!("fu{l}"), coeffs.clone(), Sense::Le, line.capacity - base[l])?;
        m.add_constraint(format!("fd{l}"), coeffs, Sense::Ge, -line.capacity - base[l])?;
    }
    let r = solve_lp(&m, &Tolerances::default())?;
    Ok((r.status == SolveStatus::Optimal).then_some(r.objective))
}

/// Checks `fs` against the constraints of `policy` with budget `q`, computing
/// flows directly from nodal injections.
pub fn check_first_stage(
    case: &GridCase,
    ptdf: &PtdfMatrix,
    scenarios: &ScenarioSet,
    policy: Policy,
    q: usize,
    fs: &FirstStage,
) -> Result<CheckReport> {
    let mut violations = Vec::new();
    let ng = case.generators.len();
    let sum_beta: f64 = fs.beta.iter().sum();
    push(&mut violations, "participation factors sum to 1".into(), None, (sum_beta - 1.0).abs());
    let sum_p: f64 = fs.p.iter().sum();
    push(&mut violations, "power balance".into(), None, (sum_p - case.total_load() + case.total_forecast()).abs());
    let mut first_cost = 0.0;
    for (g, gen) in case.generators.iter().enumerate() {
        push(&mut violations, format!("beta of generator {g} non-negative"), None, -fs.beta[g]);
        push(&mut violations, format!("lower limit of generator {g}"), None, gen.p_min + fs.r_cap_down[g] - fs.p[g]);
        push(&mut violations, format!("upper limit of generator {g}"), None, fs.p[g] + fs.r_cap_up[g] - gen.p_max);
        push(&mut violations, format!("upward reserve cap of generator {g}"), None, fs.r_cap_up[g] - gen.res_limit_up);
        push(&mut violations, format!("downward reserve cap of generator {g}"), None, fs.r_cap_down[g] - gen.res_limit_down);
        push(&mut violations, format!("upward reserve of generator {g} non-negative"), None, -fs.r_cap_up[g]);
        push(&mut violations, format!("downward reserve of generator {g} non-negative"), None, -fs.r_cap_down[g]);
        first_cost += gen.energy_cost * fs.p[g] + gen.res_cap_cost_up * fs.r_cap_up[g] + gen.res_cap_cost_down * fs.r_cap_down[g];
    }

    let mut agc_violations = Vec::new();
    let mut relief = Vec::new();
    let mut deploy_total = 0.0;
    for s in 0..scenarios.len() {
        let omega = scenarios.scenario(s);
        let total = scenarios.totals()[s];
        let dep: Vec<f64> = (0..ng).map(|g| -total * fs.beta[g]).collect();
        let found = scenario_violations(case, ptdf, fs, omega, &dep, s);
        let agc_cost: f64 = (0..ng).map(|g| deploy_cost(case, g, dep[g])).sum();
        if found.is_empty() {
            deploy_total += agc_cost;
            continue;
        }
        agc_violations.extend(found.iter().cloned());
        match policy {
            Policy::AgcRobust => {
                violations.extend(found);
                deploy_total += agc_cost;
            }
            Policy::AgcJcc => {
                relief.push(s);
                deploy_total += agc_cost;
            }
            Policy::Amgc => match manual_relief(case, ptdf, fs, omega, total)? {
                Some(cost) => {
                    relief.push(s);
                    deploy_total += cost;
                }
                None => {
                    violations.push(Violation {
                        constraint: "no manual adjustment restores the scenario".into(),
                        scenario: Some(s),
                        magnitude: found.iter().map(|v| v.magnitude).fold(0.0, f64::max),
                    });
                    deploy_total += agc_cost;
                }
            },
        }
    }
    if policy != Policy::AgcRobust && relief.len() > q {
        violations.push(Violation {
            constraint: format!("at most {q} scenarios outside AGC"),
            scenario: None,
            magnitude: (relief.len() - q) as f64,
        });
        for s in &relief {
            violations.extend(agc_violations.iter().filter(|v| v.scenario == Some(*s)).cloned());
        }
    }
    Ok(CheckReport {
        violations,
        agc_violations,
        relief_scenarios: relief,
        expected_cost: first_cost + deploy_total / scenarios.len() as f64,
    })
}
