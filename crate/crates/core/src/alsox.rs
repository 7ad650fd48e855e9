//! Bisection heuristic over the manual-activation budget.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::formulations::{build_amgc_saa, extract_solution, BuiltModel, DispatchSolution, RiskConfig};
use crate::grid::{GridCase, PtdfMatrix};
use crate::scenarios::ScenarioSet;
use crate::solver::{Backend, Basis, SolveStatus, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicConfig {
    /// Stop when the budget bracket is narrower than this.
    pub delta: f64,
    /// Relaxed indicators at or below this count as zero.
    pub zero_tol: f64,
    pub max_iterations: usize,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig { delta: 1.0, zero_tol: 1e-6, max_iterations: 64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub q: f64,
    pub passed: bool,
    pub objective: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct HeuristicOutcome {
    pub solution: DispatchSolution,
    pub iterations: Vec<IterationLog>,
    /// Budget of the incumbent the indicators were fixed from.
    pub incumbent_q: f64,
    pub built: BuiltModel,
}

impl HeuristicOutcome {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iteration,q,passed,relaxed_objective\n");
        for it in &self.iterations {
            let _ = writeln!(out, "{},{},{},{}", it.iteration, it.q, it.passed, it.objective);
        }
        out
    }
}

pub fn solve_amgc_heuristic(
    case: &GridCase,
    scenarios: &ScenarioSet,
    ptdf: &PtdfMatrix,
    risk: &RiskConfig,
    config: &HeuristicConfig,
    backend: &dyn Backend,
    tol: &Tolerances,
) -> Result<HeuristicOutcome> {
    let built = build_amgc_saa(case, scenarios, ptdf, risk)?;
    solve_budget_heuristic(built, risk.epsilon, config, backend, tol)
}

/// Bisection on the relaxed budget of any model with scenario indicators,
/// then a solve with the indicators of the last passing point fixed.
pub fn solve_budget_heuristic(
    built: BuiltModel,
    epsilon: f64,
    config: &HeuristicConfig,
    backend: &dyn Backend,
    tol: &Tolerances,
) -> Result<HeuristicOutcome> {
    if !(config.delta > 0.0) || !(config.zero_tol > 0.0 && config.zero_tol < 0.5) {
        return Err(Error::Model("heuristic needs delta > 0 and zero_tol in (0, 0.5)".into()));
    }
    let Some(budget) = built.layout.budget else {
        return Err(Error::Model("model has no budget row".into()));
    };
    let ys = built.layout.y.clone();
    let ns = ys.len() as f64;
    let mut relaxed = built.model.relax_binaries();
    let mut basis: Option<Basis> = None;

    let mut solve_at = |q: f64| -> Result<Option<(f64, Vec<f64>)>> {
        relaxed.set_rhs(budget, q);
        let r = backend.solve_lp_warm(&relaxed, tol, basis.as_ref())?;
        if r.basis.is_some() {
            basis.clone_from(&r.basis);
        }
        log::debug!("relaxed solve at q = {q}: {} after {} iterations", r.status, r.iterations);
        Ok((r.status == SolveStatus::Optimal).then(|| (r.objective, ys.iter().map(|v| r.primal[v.0]).collect())))
    };

    let Some((_, mut incumbent)) = solve_at(0.0)? else {
        log::warn!("relaxed model with zero budget has no optimum");
        return Err(Error::HeuristicFailed);
    };
    let mut incumbent_q = 0.0;
    let (mut lo, mut hi) = (0.0, built.layout.q as f64);
    let mut iterations = Vec::new();
    while hi - lo >= config.delta && iterations.len() < config.max_iterations {
        let q = 0.5 * (lo + hi);
        let (passed, objective) = match solve_at(q)? {
            Some((obj, y)) => {
                let zeros = y.iter().filter(|&&v| v <= config.zero_tol).count() as f64;
                let passed = zeros / ns >= 1.0 - epsilon - 1e-12;
                if passed {
                    incumbent = y;
                    incumbent_q = q;
                }
                (passed, obj)
            }
            None => (false, f64::NAN),
        };
        if passed {
            lo = q;
        } else {
            hi = q;
        }
        log::debug!("bisection step {}: q = {q}, passed = {passed}, objective = {objective}", iterations.len() + 1);
        iterations.push(IterationLog { iteration: iterations.len() + 1, q, passed, objective, lower: lo, upper: hi });
    }

    let mut fixed = built.model.relax_binaries();
    let mut active = 0;
    for (s, v) in ys.iter().enumerate() {
        let on = incumbent[s] > config.zero_tol;
        active += usize::from(on);
        let val = if on { 1.0 } else { 0.0 };
        fixed.set_bounds(*v, val, val);
    }
    if active > built.layout.q {
        return Err(Error::HeuristicFailed);
    }
    let r = backend.solve_lp_warm(&fixed, tol, basis.as_ref())?;
    if r.status != SolveStatus::Optimal {
        log::warn!("fixed-indicator solve returned {} with {active} active scenarios", r.status);
        return Err(Error::HeuristicFailed);
    }
    let solution = extract_solution(&built, &r, tol)?;
    Ok(HeuristicOutcome { solution, iterations, incumbent_q, built })
}
