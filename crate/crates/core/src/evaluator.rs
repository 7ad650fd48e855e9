//! Out-of-sample real-time evaluation of first-stage decisions.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulations::FirstStage;
use crate::grid::{GridCase, PtdfMatrix};
use crate::scenarios::ScenarioSet;
use crate::solver::{solve_lp, LinearModel, Sense, SolveStatus, Tolerances, VarId};

pub const DEFAULT_DEV_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioClass {
    /// Handled by AGC alone.
    A,
    /// Needs manual adjustment, no deviation.
    M,
    /// Load or wind deviates from schedule.
    D,
}

impl std::fmt::Display for ScenarioClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScenarioClass::A => "A",
            ScenarioClass::M => "M",
            ScenarioClass::D => "D",
        })
    }
}

/// Result of one real-time solve. `alpha`, `r_plus` and `r_minus` are per
/// generator, the deviations per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Recourse {
    pub feasible: bool,
    pub cost: f64,
    pub alpha: Vec<f64>,
    pub r_plus: Vec<f64>,
    pub r_minus: Vec<f64>,
    pub delta_plus: Vec<f64>,
    pub delta_minus: Vec<f64>,
}

impl Recourse {
    pub fn total_deviation(&self) -> f64 {
        self.delta_plus.iter().chain(&self.delta_minus).sum()
    }

    pub fn max_deviation(&self) -> f64 {
        self.delta_plus.iter().chain(&self.delta_minus).fold(0.0, |m, &d| m.max(d))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub scenario: usize,
    pub class: ScenarioClass,
    pub cost: f64,
    pub delta_plus: Vec<f64>,
    pub delta_minus: Vec<f64>,
    pub total_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub records: Vec<EvaluationRecord>,
    pub frac_a: f64,
    pub frac_m: f64,
    pub frac_d: f64,
    pub expected_cost: f64,
    pub top5_deviation: f64,
    pub penalty: f64,
}

impl EvaluationReport {
    pub fn records_csv(&self) -> String {
        let mut out = String::from("scenario,class,cost,deviation\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{}", r.scenario, r.class, r.cost, r.total_deviation);
        }
        out
    }
}

pub fn default_penalty(case: &GridCase) -> f64 {
    2.0 * case.generators.iter().map(|g| g.energy_cost).fold(f64::NEG_INFINITY, f64::max)
}

/// Real-time problem for one realization `omega` (per node). With
/// `lock_manual` the manual adjustments and deviations are fixed to zero.
pub fn realtime_recourse(
    fs: &FirstStage,
    case: &GridCase,
    ptdf: &PtdfMatrix,
    omega: &[f64],
    penalty: f64,
    lock_manual: bool,
) -> Result<Recourse> {
    let ng = case.generators.len();
    let nn = case.num_nodes();
    if omega.len() != nn || fs.p.len() != ng || fs.beta.len() != ng {
        return Err(Error::Model("dimension mismatch between case, scenario and decisions".into()));
    }
    let total: f64 = omega.iter().sum();
    let free = if lock_manual { 0.0 } else { f64::INFINITY };
    let mut m = LinearModel::new();
    m.objective_offset = case
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| gen.energy_cost * fs.p[g] + gen.res_cap_cost_up * fs.r_cap_up[g] + gen.res_cap_cost_down * fs.r_cap_down[g])
        .sum();

    let mut inj: Vec<f64> = case.nodes.iter().zip(omega).map(|(n, w)| n.wind_forecast + w - n.load).collect();
    let mut gens = Vec::new();
    for (g, gen) in case.generators.iter().enumerate() {
        let agc = -total * fs.beta[g];
        inj[gen.node] += fs.p[g] + agc;
        if !gen.provides_reserve() {
            continue;
        }
        let a = m.add_var(format!("alpha_g{g}"), -free, free, 0.0)?;
        let rp = m.add_var(format!("rp_g{g}"), 0.0, f64::INFINITY, gen.deploy_cost_up)?;
        let rm = m.add_var(format!("rm_g{g}"), 0.0, f64::INFINITY, -gen.deploy_cost_down)?;
        m.add_constraint(format!("deploy_g{g}"), vec![(rp, 1.0), (rm, -1.0), (a, -1.0)], Sense::Eq, agc)?;
        m.add_constraint(format!("res_up_g{g}"), vec![(a, 1.0)], Sense::Le, fs.r_cap_up[g] - agc)?;
        m.add_constraint(format!("res_dn_g{g}"), vec![(a, 1.0)], Sense::Ge, -fs.r_cap_down[g] - agc)?;
        gens.push((g, a, rp, rm));
    }
    let mut devs = Vec::with_capacity(nn);
    for n in 0..nn {
        let dp = m.add_var(format!("dp_n{n}"), 0.0, free, penalty)?;
        let dm = m.add_var(format!("dm_n{n}"), 0.0, free, penalty)?;
        devs.push((dp, dm));
    }
    let mut bal: Vec<(VarId, f64)> = gens.iter().map(|&(_, a, _, _)| (a, 1.0)).collect();
    bal.extend(devs.iter().flat_map(|&(dp, dm)| [(dp, 1.0), (dm, -1.0)]));
    m.add_constraint("balance", bal, Sense::Eq, 0.0)?;

    let base = ptdf.flows(&inj);
    for (l, line) in case.lines.iter().enumerate() {
        let mut coeffs = Vec::new();
        for &(g, a, _, _) in &gens {
            coeffs.push((a, ptdf.get(l, case.generators[g].node)));
        }
        for (n, &(dp, dm)) in devs.iter().enumerate() {
            let k = ptdf.get(l, n);
            coeffs.push((dp, k));
            coeffs.push((dm, -k));
        }
        coeffs.retain(|c| c.1 != 0.0);
        m.add_constraint(format!("flow_up_l{l}"), coeffs.clone(), Sense::Le, line.capacity - base[l])?;
        m.add_constraint(format!("flow_dn_l{l}"), coeffs, Sense::Ge, -line.capacity - base[l])?;
    }

    let r = solve_lp(&m, &Tolerances::default())?;
    match r.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible if lock_manual => {
            return Ok(Recourse {
                feasible: false,
                cost: f64::NAN,
                alpha: vec![0.0; ng],
                r_plus: vec![0.0; ng],
                r_minus: vec![0.0; ng],
                delta_plus: vec![0.0; nn],
                delta_minus: vec![0.0; nn],
            })
        }
        other => return Err(Error::Internal(format!("real-time problem returned {other}"))),
    }
    let mut alpha = vec![0.0; ng];
    let mut r_plus = vec![0.0; ng];
    let mut r_minus = vec![0.0; ng];
    for &(g, a, rp, rm) in &gens {
        alpha[g] = r.value(a);
        r_plus[g] = r.value(rp);
        r_minus[g] = r.value(rm);
    }
    Ok(Recourse {
        feasible: true,
        cost: r.objective,
        alpha,
        r_plus,
        r_minus,
        delta_plus: devs.iter().map(|d| r.value(d.0)).collect(),
        delta_minus: devs.iter().map(|d| r.value(d.1)).collect(),
    })
}

pub fn classify(
    fs: &FirstStage,
    case: &GridCase,
    ptdf: &PtdfMatrix,
    omega: &[f64],
    penalty: f64,
    scenario: usize,
    dev_tol: f64,
) -> Result<EvaluationRecord> {
    let locked = realtime_recourse(fs, case, ptdf, omega, penalty, true)?;
    let (class, rec) = if locked.feasible {
        (ScenarioClass::A, locked)
    } else {
        let rec = realtime_recourse(fs, case, ptdf, omega, penalty, false)?;
        let class = if rec.max_deviation() <= dev_tol { ScenarioClass::M } else { ScenarioClass::D };
        (class, rec)
    };
    Ok(EvaluationRecord {
        scenario,
        class,
        cost: rec.cost,
        total_deviation: rec.total_deviation(),
        delta_plus: rec.delta_plus,
        delta_minus: rec.delta_minus,
    })
}

pub fn evaluate(fs: &FirstStage, case: &GridCase, ptdf: &PtdfMatrix, out: &ScenarioSet, penalty: f64) -> Result<EvaluationReport> {
    evaluate_with(fs, case, ptdf, out, penalty, DEFAULT_DEV_TOL)
}

pub fn evaluate_with(
    fs: &FirstStage,
    case: &GridCase,
    ptdf: &PtdfMatrix,
    out: &ScenarioSet,
    penalty: f64,
    dev_tol: f64,
) -> Result<EvaluationReport> {
    if out.is_empty() {
        return Err(Error::Scenarios("empty evaluation set".into()));
    }
    let records = (0..out.len())
        .into_par_iter()
        .map(|s| classify(fs, case, ptdf, out.scenario(s), penalty, s, dev_tol))
        .collect::<Result<Vec<_>>>()?;
    let n = records.len() as f64;
    let count = |c| records.iter().filter(|r| r.class == c).count() as f64 / n;
    let (frac_a, frac_m, frac_d) = (count(ScenarioClass::A), count(ScenarioClass::M), count(ScenarioClass::D));
    let expected_cost = records.iter().map(|r| r.cost).sum::<f64>() / n;
    let mut devs: Vec<f64> = records.iter().map(|r| r.total_deviation).collect();
    devs.sort_by(|a, b| b.total_cmp(a));
    let k = (records.len() * 5).div_ceil(100);
    let top5_deviation = devs[..k].iter().sum::<f64>() / k as f64;
    Ok(EvaluationReport {
        frac_a,
        frac_m,
        frac_d,
        expected_cost,
        top5_deviation,
        penalty,
        records,
    })
}
