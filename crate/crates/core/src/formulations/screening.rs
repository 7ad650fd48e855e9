//! Removal of line-flow rows that cannot bind in any scenario.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{GridCase, PtdfMatrix};
use crate::scenarios::ScenarioSet;
use crate::solver::{solve_lp, LinearModel, Sense, SolveStatus, Tolerances, VarId};

const MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Flow limit `<= capacity`.
    Up,
    /// Flow limit `>= -capacity`.
    Down,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenEntry {
    pub line: usize,
    pub direction: Direction,
    pub kept: bool,
    /// Largest (Up) or smallest (Down) flow over all scenarios; NaN when a
    /// subproblem failed.
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningReport {
    pub entries: Vec<ScreenEntry>,
    pub warnings: Vec<String>,
}

impl ScreeningReport {
    pub fn is_kept(&self, line: usize, direction: Direction) -> bool {
        self.entries.iter().find(|e| e.line == line && e.direction == direction).is_none_or(|e| e.kept)
    }

    pub fn removed(&self) -> usize {
        self.entries.iter().filter(|e| !e.kept).count()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("line,direction,status,worst_flow\n");
        for e in &self.entries {
            let dir = if e.direction == Direction::Up { "up" } else { "down" };
            let status = if e.kept { "kept" } else { "removed" };
            let _ = writeln!(out, "{},{dir},{status},{}", e.line, e.worst);
        }
        out
    }
}

struct Subproblem {
    model: LinearModel,
    p: Vec<VarId>,
    beta: Vec<VarId>,
    alpha: Vec<VarId>,
}

/// First-stage polytope plus the scenario's reserve rows, with manual
/// adjustment free within its limits.
fn subproblem(case: &GridCase, reserve: &[usize], omega_total: f64) -> Result<Subproblem> {
    let mut m = LinearModel::new();
    let gens = &case.generators;
    let p: Vec<VarId> =
        gens.iter().enumerate().map(|(g, gen)| m.add_var(format!("p{g}"), gen.p_min, gen.p_max, 0.0)).collect::<Result<_>>()?;
    let mut beta = Vec::new();
    let mut alpha = Vec::new();
    for &g in reserve {
        let gen = &gens[g];
        let b = m.add_var(format!("beta{g}"), 0.0, 1.0, 0.0)?;
        let ru = m.add_var(format!("ru{g}"), 0.0, gen.res_limit_up, 0.0)?;
        let rd = m.add_var(format!("rd{g}"), 0.0, gen.res_limit_down, 0.0)?;
        let a = m.add_var(format!("alpha{g}"), -gen.res_limit_down, gen.res_limit_up, 0.0)?;
        m.add_constraint(format!("lo{g}"), vec![(p[g], 1.0), (rd, -1.0)], Sense::Ge, gen.p_min)?;
        m.add_constraint(format!("hi{g}"), vec![(p[g], 1.0), (ru, 1.0)], Sense::Le, gen.p_max)?;
        m.add_constraint(format!("ru{g}"), vec![(b, -omega_total), (a, 1.0), (ru, -1.0)], Sense::Le, 0.0)?;
        m.add_constraint(format!("rd{g}"), vec![(b, -omega_total), (a, 1.0), (rd, 1.0)], Sense::Ge, 0.0)?;
        beta.push(b);
        alpha.push(a);
    }
    m.add_constraint("part", beta.iter().map(|&b| (b, 1.0)).collect(), Sense::Eq, 1.0)?;
    m.add_constraint("manual", alpha.iter().map(|&a| (a, 1.0)).collect(), Sense::Eq, 0.0)?;
    m.add_constraint("balance", p.iter().map(|&v| (v, 1.0)).collect(), Sense::Eq, case.total_load() - case.total_forecast())?;
    Ok(Subproblem { model: m, p, beta, alpha })
}

/// Per scenario: `(max, min)` flow of every line, or `None` on failure.
fn scenario_extremes(
    case: &GridCase,
    ptdf: &PtdfMatrix,
    reserve: &[usize],
    omega: &[f64],
    omega_total: f64,
) -> Result<Vec<(Option<f64>, Option<f64>)>> {
    let mut sub = subproblem(case, reserve, omega_total)?;
    let tol = Tolerances::default();
    let mut out = Vec::with_capacity(ptdf.num_lines());
    for l in 0..ptdf.num_lines() {
        let row = ptdf.row(l);
        let constant: f64 =
            case.nodes.iter().enumerate().map(|(n, node)| row[n] * (node.wind_forecast + omega[n] - node.load)).sum();
        let mut coef = vec![0.0; sub.model.num_vars()];
        for (g, gen) in case.generators.iter().enumerate() {
            coef[sub.p[g].0] = row[gen.node];
        }
        for (k, &g) in reserve.iter().enumerate() {
            let b = row[case.generators[g].node];
            coef[sub.beta[k].0] = -omega_total * b;
            coef[sub.alpha[k].0] = b;
        }
        let mut extremes = [None, None];
        for (i, sign) in [-1.0, 1.0].into_iter().enumerate() {
            for (v, &c) in sub.model.variables.iter_mut().zip(&coef) {
                v.cost = sign * c;
            }
            let r = solve_lp(&sub.model, &tol)?;
            if r.status == SolveStatus::Optimal {
                extremes[i] = Some(sign * r.objective + constant);
            }
        }
        out.push((extremes[0], extremes[1]));
    }
    Ok(out)
}

/// Worst-case flow of every line in both directions over all scenarios; a
/// direction is removed when it stays strictly inside the limit.
pub fn screen_line_limits(case: &GridCase, scenarios: &ScenarioSet, ptdf: &PtdfMatrix) -> Result<ScreeningReport> {
    let reserve = case.reserve_generators();
    let per_scenario: Vec<Vec<(Option<f64>, Option<f64>)>> = (0..scenarios.len())
        .into_par_iter()
        .map(|s| scenario_extremes(case, ptdf, &reserve, scenarios.scenario(s), scenarios.totals()[s]))
        .collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(2 * case.lines.len());
    let mut warnings = Vec::new();
    for (l, line) in case.lines.iter().enumerate() {
        for direction in [Direction::Up, Direction::Down] {
            let mut worst = if direction == Direction::Up { f64::NEG_INFINITY } else { f64::INFINITY };
            let mut failed = None;
            for (s, ext) in per_scenario.iter().enumerate() {
                let v = if direction == Direction::Up { ext[l].0 } else { ext[l].1 };
                match v {
                    Some(v) if direction == Direction::Up => worst = worst.max(v),
                    Some(v) => worst = worst.min(v),
                    None => {
                        failed.get_or_insert(s);
                    }
                }
            }
            let margin = MARGIN * line.capacity;
            let inside = match direction {
                Direction::Up => worst < line.capacity - margin,
                Direction::Down => worst > -line.capacity + margin,
            };
            if let Some(s) = failed {
                warnings.push(format!("line {l}: screening subproblem for scenario {s} was infeasible; row kept"));
                worst = f64::NAN;
            }
            entries.push(ScreenEntry { line: l, direction, kept: failed.is_some() || !inside, worst });
        }
    }
    Ok(ScreeningReport { entries, warnings })
}
