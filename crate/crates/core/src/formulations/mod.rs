//! Sample-average models of the three dispatch policies.
//!
//! All builders share one variable layout: energy `p` for every generator,
//! participation `beta` and reserve capacities for reserve-capable
//! generators, and per-scenario deployments `r_plus`/`r_minus`. The AMGC
//! model adds manual adjustments `alpha`; both chance-constrained models add
//! one binary `y` per scenario under the budget `sum y <= q`.

mod check;
mod cuts;
mod screening;
mod solution;

use std::fmt;

pub use check::{check_first_stage, CheckReport, Violation};
pub use cuts::{reserve_quantile_cuts, CutDirection, QuantileCut};
pub use screening::{screen_line_limits, Direction, ScreenEntry, ScreeningReport};
pub use solution::{extract_solution, model_point, DispatchSolution, FirstStage};

use crate::error::{Error, Result};
use crate::grid::{GridCase, PtdfMatrix};
use crate::scenarios::ScenarioSet;
use crate::solver::{LinearModel, MilpHeuristic, RowId, Sense, VarId};

const BIG_M_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// AGC only, every scenario must be covered.
    AgcRobust,
    /// AGC only, up to `q` scenarios may violate reserve or line limits.
    AgcJcc,
    /// AGC plus manual adjustment allowed in up to `q` scenarios.
    Amgc,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::AgcRobust => "agc-robust",
            Policy::AgcJcc => "agc-jcc",
            Policy::Amgc => "amgc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BigMPolicy {
    /// Per-row bound from variable bounds and scenario data.
    Analytic,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskConfig {
    pub epsilon: f64,
    pub q: usize,
    pub big_m_policy: BigMPolicy,
    pub enable_screening: bool,
    pub enable_cuts: bool,
}

impl RiskConfig {
    /// `q = floor(epsilon * |S|)`; screening and cuts enabled.
    pub fn new(epsilon: f64, num_scenarios: usize) -> Result<RiskConfig> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Model(format!("epsilon must lie in [0, 1), got {epsilon}")));
        }
        Ok(RiskConfig {
            epsilon,
            q: budget(epsilon, num_scenarios),
            big_m_policy: BigMPolicy::Analytic,
            enable_screening: true,
            enable_cuts: true,
        })
    }

    pub fn robust() -> RiskConfig {
        RiskConfig { epsilon: 0.0, q: 0, big_m_policy: BigMPolicy::Analytic, enable_screening: false, enable_cuts: false }
    }

    pub fn with_screening(mut self, on: bool) -> Self {
        self.enable_screening = on;
        self
    }

    pub fn with_cuts(mut self, on: bool) -> Self {
        self.enable_cuts = on;
        self
    }
}

/// `floor(epsilon * count)`, robust to products like `(1/3) * 3`.
pub fn budget(epsilon: f64, count: usize) -> usize {
    ((epsilon * count as f64) + 1e-9).floor() as usize
}

/// Where each decision lives in the emitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub policy: Policy,
    pub num_generators: usize,
    /// Generator index of each reserve slot `k`.
    pub reserve: Vec<usize>,
    pub num_scenarios: usize,
    pub q: usize,
    pub p: Vec<VarId>,
    pub beta: Vec<VarId>,
    pub r_up: Vec<VarId>,
    pub r_down: Vec<VarId>,
    /// `[s][k]`
    pub r_plus: Vec<Vec<VarId>>,
    pub r_minus: Vec<Vec<VarId>>,
    /// `[s][k]`, empty unless the policy is AMGC.
    pub alpha: Vec<Vec<VarId>>,
    pub y: Vec<VarId>,
    pub budget: Option<RowId>,
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: LinearModel,
    pub layout: Layout,
    pub screening: Option<ScreeningReport>,
    pub cuts: Vec<QuantileCut>,
}

impl BuiltModel {
    /// Rounds the `q` largest relaxed `y` values up and the rest down.
    pub fn budget_heuristic(&self) -> BudgetRounding {
        BudgetRounding { y: self.layout.y.clone(), q: self.layout.q }
    }
}

/// Top-q rounding of the scenario indicators.
#[derive(Debug, Clone)]
pub struct BudgetRounding {
    pub y: Vec<VarId>,
    pub q: usize,
}

impl MilpHeuristic for BudgetRounding {
    fn propose(&self, relaxed: &[f64]) -> Option<Vec<(VarId, f64)>> {
        if self.y.is_empty() {
            return None;
        }
        let mut order: Vec<usize> = (0..self.y.len()).collect();
        order.sort_by(|&a, &b| relaxed[self.y[b].0].total_cmp(&relaxed[self.y[a].0]).then(a.cmp(&b)));
        let mut out: Vec<(VarId, f64)> = self.y.iter().map(|&v| (v, 0.0)).collect();
        for &s in order.iter().take(self.q) {
            if relaxed[self.y[s].0] > 1e-9 {
                out[s].1 = 1.0;
            }
        }
        Some(out)
    }
}

pub fn build_agc_robust(case: &GridCase, scenarios: &ScenarioSet, ptdf: &PtdfMatrix) -> Result<BuiltModel> {
    build(Policy::AgcRobust, case, scenarios, ptdf, &RiskConfig::robust())
}

pub fn build_agc_jcc(case: &GridCase, scenarios: &ScenarioSet, ptdf: &PtdfMatrix, risk: &RiskConfig) -> Result<BuiltModel> {
    build(Policy::AgcJcc, case, scenarios, ptdf, risk)
}

pub fn build_amgc_saa(case: &GridCase, scenarios: &ScenarioSet, ptdf: &PtdfMatrix, risk: &RiskConfig) -> Result<BuiltModel> {
    build(Policy::Amgc, case, scenarios, ptdf, risk)
}

fn bound_activity(model: &LinearModel, coeffs: &[(VarId, f64)], upper: bool) -> f64 {
    coeffs
        .iter()
        .map(|&(v, a)| {
            let var = &model.variables[v.0];
            let (lo, hi) = (a * var.lower, a * var.upper);
            if upper {
                lo.max(hi)
            } else {
                lo.min(hi)
            }
        })
        .sum()
}

struct Rows<'a> {
    model: LinearModel,
    policy: Policy,
    risk: &'a RiskConfig,
}

impl Rows<'_> {
    fn add(&mut self, name: String, coeffs: Vec<(VarId, f64)>, sense: Sense, rhs: f64) -> Result<RowId> {
        self.model.add_constraint(name, coeffs, sense, rhs)
    }

    /// Adds a row relaxed by `y` in the chance-constrained AGC model.
    fn add_gated(&mut self, name: String, mut coeffs: Vec<(VarId, f64)>, sense: Sense, rhs: f64, y: Option<VarId>) -> Result<RowId> {
        if let (Policy::AgcJcc, Some(y)) = (self.policy, y) {
            let m = match self.risk.big_m_policy {
                BigMPolicy::Fixed(m) => m,
                BigMPolicy::Analytic => match sense {
                    Sense::Le => bound_activity(&self.model, &coeffs, true) - rhs,
                    Sense::Ge => rhs - bound_activity(&self.model, &coeffs, false),
                    Sense::Eq => unreachable!("equality rows are never gated"),
                }
                .max(0.0),
            };
            if !m.is_finite() || m > BIG_M_LIMIT {
                return Err(Error::BigMOverflow { row: name, value: m });
            }
            if m > 0.0 {
                coeffs.push((y, if sense == Sense::Le { -m } else { m }));
            }
        }
        self.add(name, coeffs, sense, rhs)
    }
}

/// Builds the model of `policy`. The robust policy ignores `risk.epsilon`.
pub fn build(
    policy: Policy,
    case: &GridCase,
    scenarios: &ScenarioSet,
    ptdf: &PtdfMatrix,
    risk: &RiskConfig,
) -> Result<BuiltModel> {
    case.ensure_valid()?;
    let ns = scenarios.len();
    if ns == 0 {
        return Err(Error::Scenarios("scenario set is empty".into()));
    }
    if scenarios.num_nodes() != case.num_nodes() {
        return Err(Error::Scenarios(format!(
            "scenario set has {} nodes, case has {}",
            scenarios.num_nodes(),
            case.num_nodes()
        )));
    }
    let reserve = case.reserve_generators();
    if reserve.is_empty() {
        return Err(Error::Case("no generator can provide reserve".into()));
    }
    let q = if policy == Policy::AgcRobust { 0 } else { risk.q };
    if q > ns {
        return Err(Error::Model(format!("budget q = {q} exceeds the {ns} scenarios")));
    }
    let screening = if risk.enable_screening { Some(screen_line_limits(case, scenarios, ptdf)?) } else { None };
    let inv = 1.0 / ns as f64;
    let gens = &case.generators;
    let mut model = LinearModel::new();

    let p: Vec<VarId> = gens
        .iter()
        .enumerate()
        .map(|(g, gen)| model.add_var(format!("p_g{g}"), gen.p_min, gen.p_max, gen.energy_cost))
        .collect::<Result<_>>()?;
    let mut beta = Vec::new();
    let mut r_up = Vec::new();
    let mut r_down = Vec::new();
    for &g in &reserve {
        let gen = &gens[g];
        beta.push(model.add_var(format!("beta_g{g}"), 0.0, 1.0, 0.0)?);
        r_up.push(model.add_var(format!("ru_g{g}"), 0.0, gen.res_limit_up, gen.res_cap_cost_up)?);
        r_down.push(model.add_var(format!("rd_g{g}"), 0.0, gen.res_limit_down, gen.res_cap_cost_down)?);
    }
    let mut r_plus = Vec::with_capacity(ns);
    let mut r_minus = Vec::with_capacity(ns);
    let mut alpha = Vec::new();
    let mut y = Vec::new();
    for s in 0..ns {
        let mut rp = Vec::with_capacity(reserve.len());
        let mut rm = Vec::with_capacity(reserve.len());
        let mut al = Vec::new();
        // |alpha - beta * omega| bounds either side of an optimal split
        let reach = scenarios.totals()[s].abs();
        for &g in &reserve {
            let gen = &gens[g];
            let cap = reach + gen.res_limit_up + gen.res_limit_down;
            rp.push(model.add_var(format!("rp_g{g}_s{s}"), 0.0, cap, inv * gen.deploy_cost_up)?);
            rm.push(model.add_var(format!("rm_g{g}_s{s}"), 0.0, cap, -inv * gen.deploy_cost_down)?);
            if policy == Policy::Amgc {
                al.push(model.add_var(format!("alpha_g{g}_s{s}"), -gen.res_limit_down, gen.res_limit_up, 0.0)?);
            }
        }
        r_plus.push(rp);
        r_minus.push(rm);
        if policy == Policy::Amgc {
            alpha.push(al);
        }
        if policy != Policy::AgcRobust {
            y.push(model.add_binary(format!("y_s{s}"), 0.0)?);
        }
    }

    let mut rows = Rows { model, policy, risk };
    rows.add("participation".into(), beta.iter().map(|&b| (b, 1.0)).collect(), Sense::Eq, 1.0)?;
    rows.add(
        "balance".into(),
        p.iter().map(|&v| (v, 1.0)).collect(),
        Sense::Eq,
        case.total_load() - case.total_forecast(),
    )?;
    for (k, &g) in reserve.iter().enumerate() {
        let gen = &gens[g];
        rows.add(format!("gen_lo_g{g}"), vec![(p[g], 1.0), (r_down[k], -1.0)], Sense::Ge, gen.p_min)?;
        rows.add(format!("gen_hi_g{g}"), vec![(p[g], 1.0), (r_up[k], 1.0)], Sense::Le, gen.p_max)?;
    }

    let cuts = if risk.enable_cuts && q < ns { reserve_quantile_cuts(scenarios, q) } else { Vec::new() };
    for cut in &cuts {
        for (k, &g) in reserve.iter().enumerate() {
            let (cap, tag) = match cut.direction {
                CutDirection::Up => (r_up[k], "up"),
                CutDirection::Down => (r_down[k], "dn"),
            };
            if cut.coefficient > 0.0 {
                rows.add(format!("cut_{tag}_g{g}"), vec![(beta[k], cut.coefficient), (cap, -1.0)], Sense::Le, 0.0)?;
            }
        }
    }

    let kept = |l: usize, d: Direction| screening.as_ref().is_none_or(|r| r.is_kept(l, d));
    let line_coef: Vec<Vec<f64>> =
        (0..ptdf.num_lines()).map(|l| gens.iter().map(|gen| ptdf.get(l, gen.node)).collect()).collect();
    for s in 0..ns {
        let omega_total = scenarios.totals()[s];
        let ys = y.get(s).copied();
        for (k, &g) in reserve.iter().enumerate() {
            let mut dep = vec![(r_plus[s][k], 1.0), (r_minus[s][k], -1.0), (beta[k], omega_total)];
            let mut base = vec![(beta[k], -omega_total)];
            if policy == Policy::Amgc {
                dep.push((alpha[s][k], -1.0));
                base.push((alpha[s][k], 1.0));
            }
            rows.add(format!("deploy_g{g}_s{s}"), dep, Sense::Eq, 0.0)?;
            let mut up = base.clone();
            up.push((r_up[k], -1.0));
            rows.add_gated(format!("res_up_g{g}_s{s}"), up, Sense::Le, 0.0, ys)?;
            let mut dn = base;
            dn.push((r_down[k], 1.0));
            rows.add_gated(format!("res_dn_g{g}_s{s}"), dn, Sense::Ge, 0.0, ys)?;
        }
        if policy == Policy::Amgc {
            let ys = ys.expect("amgc has indicators");
            rows.add(format!("manual_s{s}"), alpha[s].iter().map(|&a| (a, 1.0)).collect(), Sense::Eq, 0.0)?;
            for (k, &g) in reserve.iter().enumerate() {
                let gen = &gens[g];
                rows.add(format!("gate_up_g{g}_s{s}"), vec![(alpha[s][k], 1.0), (ys, -gen.res_limit_up)], Sense::Le, 0.0)?;
                rows.add(format!("gate_dn_g{g}_s{s}"), vec![(alpha[s][k], 1.0), (ys, gen.res_limit_down)], Sense::Ge, 0.0)?;
            }
        }
        let omega = scenarios.scenario(s);
        for (l, line) in case.lines.iter().enumerate() {
            let up_kept = kept(l, Direction::Up);
            let dn_kept = kept(l, Direction::Down);
            if !up_kept && !dn_kept {
                continue;
            }
            let row = ptdf.row(l);
            let constant: f64 =
                case.nodes.iter().enumerate().map(|(n, node)| row[n] * (node.wind_forecast + omega[n] - node.load)).sum();
            let mut coeffs: Vec<(VarId, f64)> = Vec::new();
            for (g, &b) in line_coef[l].iter().enumerate() {
                if b != 0.0 {
                    coeffs.push((p[g], b));
                }
            }
            for (k, &g) in reserve.iter().enumerate() {
                let b = line_coef[l][g];
                if b != 0.0 && omega_total != 0.0 {
                    coeffs.push((beta[k], -omega_total * b));
                }
                if b != 0.0 && policy == Policy::Amgc {
                    coeffs.push((alpha[s][k], b));
                }
            }
            if up_kept {
                rows.add_gated(format!("flow_up_l{l}_s{s}"), coeffs.clone(), Sense::Le, line.capacity - constant, ys)?;
            }
            if dn_kept {
                rows.add_gated(format!("flow_dn_l{l}_s{s}"), coeffs, Sense::Ge, -line.capacity - constant, ys)?;
            }
        }
    }
    let budget_row = if y.is_empty() {
        None
    } else {
        Some(rows.add("budget".into(), y.iter().map(|&v| (v, 1.0)).collect(), Sense::Le, q as f64)?)
    };

    Ok(BuiltModel {
        model: rows.model,
        layout: Layout {
            policy,
            num_generators: gens.len(),
            reserve,
            num_scenarios: ns,
            q,
            p,
            beta,
            r_up,
            r_down,
            r_plus,
            r_minus,
            alpha,
            y,
            budget: budget_row,
        },
        screening,
        cuts,
    })
}
