use serde::{Deserialize, Serialize};

use super::{BuiltModel, Layout, Policy};
use crate::error::{Error, Result};
use crate::solver::{SolveResult, SolveStatus, Tolerances};

/// Decisions fixed before the wind realizes, one entry per generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStage {
    pub p: Vec<f64>,
    pub beta: Vec<f64>,
    pub r_cap_up: Vec<f64>,
    pub r_cap_down: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub policy: Policy,
    pub status: SolveStatus,
    pub p: Vec<f64>,
    pub beta: Vec<f64>,
    pub r_cap_up: Vec<f64>,
    pub r_cap_down: Vec<f64>,
    /// `[g][s]`
    pub r_plus: Vec<Vec<f64>>,
    pub r_minus: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub y: Vec<bool>,
    pub objective: f64,
}

impl DispatchSolution {
    pub fn first_stage(&self) -> FirstStage {
        FirstStage {
            p: self.p.clone(),
            beta: self.beta.clone(),
            r_cap_up: self.r_cap_up.clone(),
            r_cap_down: self.r_cap_down.clone(),
        }
    }

    pub fn activated(&self) -> usize {
        self.y.iter().filter(|&&y| y).count()
    }
}

fn invariant(constraint: impl Into<String>, magnitude: f64) -> Error {
    Error::Invariant { constraint: constraint.into(), magnitude }
}

const CHECK_TOL: f64 = 1e-6;

/// Reads every decision back out of a solve and checks the solution
/// invariants; fails naming the worst violated constraint.
pub fn extract_solution(built: &BuiltModel, result: &SolveResult, tol: &Tolerances) -> Result<DispatchSolution> {
    if !result.has_point() || !(result.status == SolveStatus::Optimal || result.status.is_limit()) {
        return Err(Error::Solver(format!("no solution available ({})", result.status)));
    }
    let x = &result.primal;
    let lay: &Layout = &built.layout;
    if let Some((name, viol)) = built.model.worst_violation(x, CHECK_TOL) {
        return Err(invariant(name, viol));
    }
    let ng = lay.num_generators;
    let ns = lay.num_scenarios;
    let mut sol = DispatchSolution {
        policy: lay.policy,
        status: result.status,
        p: lay.p.iter().map(|v| x[v.0]).collect(),
        beta: vec![0.0; ng],
        r_cap_up: vec![0.0; ng],
        r_cap_down: vec![0.0; ng],
        r_plus: vec![vec![0.0; ns]; ng],
        r_minus: vec![vec![0.0; ns]; ng],
        alpha: vec![vec![0.0; ns]; ng],
        y: vec![false; ns],
        objective: result.objective,
    };
    for (k, &g) in lay.reserve.iter().enumerate() {
        sol.beta[g] = x[lay.beta[k].0];
        sol.r_cap_up[g] = x[lay.r_up[k].0];
        sol.r_cap_down[g] = x[lay.r_down[k].0];
        for s in 0..ns {
            sol.r_plus[g][s] = x[lay.r_plus[s][k].0];
            sol.r_minus[g][s] = x[lay.r_minus[s][k].0];
            if !lay.alpha.is_empty() {
                sol.alpha[g][s] = x[lay.alpha[s][k].0];
            }
        }
    }
    for (s, v) in lay.y.iter().enumerate() {
        let val = x[v.0];
        if (val - val.round()).abs() > tol.int {
            return Err(invariant(format!("integrality of y_s{s}"), (val - val.round()).abs()));
        }
        sol.y[s] = val.round() >= 1.0;
    }

    let sum_beta: f64 = sol.beta.iter().sum();
    if (sum_beta - 1.0).abs() > CHECK_TOL {
        return Err(invariant("participation", (sum_beta - 1.0).abs()));
    }
    if sol.activated() > lay.q {
        return Err(invariant("budget", (sol.activated() - lay.q) as f64));
    }
    for s in 0..ns {
        let total: f64 = (0..ng).map(|g| sol.alpha[g][s]).sum();
        if total.abs() > CHECK_TOL {
            return Err(invariant(format!("manual_s{s}"), total.abs()));
        }
        if !sol.y[s] {
            if let Some(a) = (0..ng).map(|g| sol.alpha[g][s].abs()).find(|a| *a > CHECK_TOL) {
                return Err(invariant(format!("gating of scenario {s}"), a));
            }
        }
    }
    for v in sol.p.iter_mut().chain(&mut sol.beta).chain(&mut sol.r_cap_up).chain(&mut sol.r_cap_down) {
        *v += 0.0;
    }
    Ok(sol)
}

/// Full model point of a solution, for plugging into the model's rows.
pub fn model_point(built: &BuiltModel, sol: &DispatchSolution) -> Vec<f64> {
    let lay = &built.layout;
    let mut x = vec![0.0; built.model.num_vars()];
    for (g, v) in lay.p.iter().enumerate() {
        x[v.0] = sol.p[g];
    }
    for (k, &g) in lay.reserve.iter().enumerate() {
        x[lay.beta[k].0] = sol.beta[g];
        x[lay.r_up[k].0] = sol.r_cap_up[g];
        x[lay.r_down[k].0] = sol.r_cap_down[g];
        for s in 0..lay.num_scenarios {
            x[lay.r_plus[s][k].0] = sol.r_plus[g][s];
            x[lay.r_minus[s][k].0] = sol.r_minus[g][s];
            if !lay.alpha.is_empty() {
                x[lay.alpha[s][k].0] = sol.alpha[g][s];
            }
        }
    }
    for (s, v) in lay.y.iter().enumerate() {
        x[v.0] = if sol.y[s] { 1.0 } else { 0.0 };
    }
    x
}
