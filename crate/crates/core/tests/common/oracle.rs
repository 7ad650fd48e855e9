//! Brute-force reference models built from phase angles instead of PTDFs.
//! Shared by the core property tests and the acceptance suite.
#![allow(dead_code)]

use sopf::formulations::FirstStage;
use sopf::grid::GridCase;
use sopf::scenarios::ScenarioSet;
use sopf::solver::{solve_lp, LinearModel, Sense, SolveStatus, Tolerances, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Robust,
    /// Chosen scenarios drop their reserve and line rows.
    Jcc,
    /// Chosen scenarios may redispatch manually.
    Amgc,
}

struct Vars {
    p: Vec<VarId>,
    beta: Vec<VarId>,
    ru: Vec<VarId>,
    rd: Vec<VarId>,
}

/// LP for a fixed choice of relaxed (jcc) or activated (amgc) scenarios.
/// With `fixed`, first-stage decisions are pinned to the given values.
pub fn subset_lp(case: &GridCase, sc: &ScenarioSet, mode: Mode, chosen: &[bool], fixed: Option<&FirstStage>) -> LinearModel {
    let ns = sc.len();
    let inv = 1.0 / ns as f64;
    let mut m = LinearModel::new();
    let pin = |lo: f64, hi: f64, v: Option<f64>| v.map_or((lo, hi), |v| (v, v));
    let mut vars = Vars { p: vec![], beta: vec![], ru: vec![], rd: vec![] };
    for (g, gen) in case.generators.iter().enumerate() {
        let fv = |f: fn(&FirstStage) -> &Vec<f64>| fixed.map(|fs| f(fs)[g]);
        let (lo, hi) = pin(gen.p_min, gen.p_max, fv(|f| &f.p));
        vars.p.push(m.add_var(format!("p{g}"), lo, hi, gen.energy_cost).unwrap());
        let bmax = if gen.res_limit_up > 0.0 || gen.res_limit_down > 0.0 { 1.0 } else { 0.0 };
        let (lo, hi) = pin(0.0, bmax, fv(|f| &f.beta));
        vars.beta.push(m.add_var(format!("b{g}"), lo, hi, 0.0).unwrap());
        let (lo, hi) = pin(0.0, gen.res_limit_up, fv(|f| &f.r_cap_up));
        vars.ru.push(m.add_var(format!("ru{g}"), lo, hi, gen.res_cap_cost_up).unwrap());
        let (lo, hi) = pin(0.0, gen.res_limit_down, fv(|f| &f.r_cap_down));
        vars.rd.push(m.add_var(format!("rd{g}"), lo, hi, gen.res_cap_cost_down).unwrap());
    }
    m.add_constraint("sum beta", vars.beta.iter().map(|&b| (b, 1.0)).collect(), Sense::Eq, 1.0).unwrap();
    let net: f64 = case.nodes.iter().map(|n| n.load - n.wind_forecast).sum();
    m.add_constraint("balance", vars.p.iter().map(|&v| (v, 1.0)).collect(), Sense::Eq, net).unwrap();
    for (g, gen) in case.generators.iter().enumerate() {
        m.add_constraint(format!("lo{g}"), vec![(vars.p[g], 1.0), (vars.rd[g], -1.0)], Sense::Ge, gen.p_min).unwrap();
        m.add_constraint(format!("hi{g}"), vec![(vars.p[g], 1.0), (vars.ru[g], 1.0)], Sense::Le, gen.p_max).unwrap();
    }

    for s in 0..ns {
        let omega = sc.scenario(s);
        let total: f64 = omega.iter().sum();
        let manual = mode == Mode::Amgc && chosen[s];
        let relaxed = mode == Mode::Jcc && chosen[s];
        // deviation of generator g: -total * beta_g (+ alpha_g)
        let mut dev: Vec<Vec<(VarId, f64)>> = vars.beta.iter().map(|&b| vec![(b, -total)]).collect();
        if manual {
            let alpha: Vec<VarId> = case
                .generators
                .iter()
                .enumerate()
                .map(|(g, gen)| m.add_var(format!("a{g}_{s}"), -gen.res_limit_down, gen.res_limit_up, 0.0).unwrap())
                .collect();
            m.add_constraint(format!("manual {s}"), alpha.iter().map(|&a| (a, 1.0)).collect(), Sense::Eq, 0.0).unwrap();
            for (g, gen) in case.generators.iter().enumerate() {
                dev[g].push((alpha[g], 1.0));
                let up = m.add_var(format!("up{g}_{s}"), 0.0, f64::INFINITY, inv * gen.deploy_cost_up).unwrap();
                let dn = m.add_var(format!("dn{g}_{s}"), 0.0, f64::INFINITY, -inv * gen.deploy_cost_down).unwrap();
                let mut row = dev[g].clone();
                row.push((up, -1.0));
                row.push((dn, 1.0));
                m.add_constraint(format!("deploy{g}_{s}"), row, Sense::Eq, 0.0).unwrap();
            }
        } else {
            // deployment sign is known in advance, so its cost is linear in beta
            for (g, gen) in case.generators.iter().enumerate() {
                let c = if total < 0.0 { gen.deploy_cost_up } else { gen.deploy_cost_down };
                m.variables[vars.beta[g].0].cost += -total * c * inv;
            }
        }
        if relaxed {
            continue;
        }
        for g in 0..case.generators.len() {
            let mut up = dev[g].clone();
            up.push((vars.ru[g], -1.0));
            m.add_constraint(format!("rup{g}_{s}"), up, Sense::Le, 0.0).unwrap();
            let mut dn = dev[g].clone();
            dn.push((vars.rd[g], 1.0));
            m.add_constraint(format!("rdn{g}_{s}"), dn, Sense::Ge, 0.0).unwrap();
        }
        let theta: Vec<VarId> = (0..case.num_nodes())
            .map(|n| {
                let b = if n == case.slack_node { 0.0 } else { f64::INFINITY };
                m.add_var(format!("t{n}_{s}"), -b, b, 0.0).unwrap()
            })
            .collect();
        let flow: Vec<VarId> = case
            .lines
            .iter()
            .map(|l| m.add_var(format!("f{}_{s}", l.id), -l.capacity, l.capacity, 0.0).unwrap())
            .collect();
        for (l, line) in case.lines.iter().enumerate() {
            m.add_constraint(
                format!("ohm{l}_{s}"),
                vec![(flow[l], 1.0), (theta[line.from], -line.susceptance), (theta[line.to], line.susceptance)],
                Sense::Eq,
                0.0,
            )
            .unwrap();
        }
        for (n, node) in case.nodes.iter().enumerate() {
            // generation - outflow = load - wind - error
            let mut row = Vec::new();
            for (g, gen) in case.generators.iter().enumerate() {
                if gen.node == n {
                    row.push((vars.p[g], 1.0));
                    row.extend(dev[g].iter().copied());
                }
            }
            for (l, line) in case.lines.iter().enumerate() {
                if line.from == n {
                    row.push((flow[l], -1.0));
                }
                if line.to == n {
                    row.push((flow[l], 1.0));
                }
            }
            let rhs = node.load - node.wind_forecast - omega[n];
            m.add_constraint(format!("node{n}_{s}"), row, Sense::Eq, rhs).unwrap();
        }
    }
    m
}

fn solve(model: &LinearModel) -> Option<f64> {
    let r = solve_lp(model, &Tolerances::default()).unwrap();
    (r.status == SolveStatus::Optimal).then_some(r.objective)
}

/// Minimum over every scenario subset of size at most `q`.
pub fn enumerate(case: &GridCase, sc: &ScenarioSet, mode: Mode, q: usize, fixed: Option<&FirstStage>) -> Option<f64> {
    let ns = sc.len();
    assert!(ns <= 16, "enumeration is exponential in the scenario count");
    let q = if mode == Mode::Robust { 0 } else { q };
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << ns) {
        if mask.count_ones() as usize > q {
            continue;
        }
        let chosen: Vec<bool> = (0..ns).map(|s| mask >> s & 1 == 1).collect();
        if let Some(v) = solve(&subset_lp(case, sc, mode, &chosen, fixed)) {
            if best.is_none_or(|b| v < b) {
                best = Some(v);
            }
        }
    }
    best
}

/// DC flows for a nodal injection vector by Gaussian elimination on the
/// reduced susceptance matrix.
pub fn dc_flows(case: &GridCase, injection: &[f64]) -> Vec<f64> {
    let n = case.num_nodes();
    let idx: Vec<usize> = (0..n).filter(|&i| i != case.slack_node).collect();
    let pos = |i: usize| idx.iter().position(|&k| k == i);
    let k = idx.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for l in &case.lines {
        for (i, j) in [(l.from, l.to), (l.to, l.from)] {
            if let Some(pi) = pos(i) {
                a[pi][pi] += l.susceptance;
                if let Some(pj) = pos(j) {
                    a[pi][pj] -= l.susceptance;
                }
            }
        }
    }
    for (r, &i) in idx.iter().enumerate() {
        a[r][k] = injection[i];
    }
    for c in 0..k {
        let piv = (c..k).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..k {
            if r != c {
                let f = a[r][c] / a[c][c];
                for j in c..=k {
                    a[r][j] -= f * a[c][j];
                }
            }
        }
    }
    let mut theta = vec![0.0; n];
    for (r, &i) in idx.iter().enumerate() {
        theta[i] = a[r][k] / a[r][r];
    }
    case.lines.iter().map(|l| l.susceptance * (theta[l.from] - theta[l.to])).collect()
}

/// Every constraint of the AGC-only dispatch that `fs` breaks, by name and
/// magnitude; scenario rows are listed for every scenario.
pub fn audit(case: &GridCase, sc: &ScenarioSet, fs: &FirstStage) -> Vec<(String, Option<usize>, f64)> {
    let tol = 1e-7;
    let mut out = Vec::new();
    let mut push = |name: String, s: Option<usize>, v: f64| {
        if v > tol {
            out.push((name, s, v));
        }
    };
    push("sum of participation factors".into(), None, (fs.beta.iter().sum::<f64>() - 1.0).abs());
    let net: f64 = case.nodes.iter().map(|n| n.load - n.wind_forecast).sum();
    push("power balance".into(), None, (fs.p.iter().sum::<f64>() - net).abs());
    for (g, gen) in case.generators.iter().enumerate() {
        push(format!("g{} upper limit", g + 1), None, fs.p[g] + fs.r_cap_up[g] - gen.p_max);
        push(format!("g{} lower limit", g + 1), None, gen.p_min - fs.p[g] + fs.r_cap_down[g]);
        push(format!("g{} upward reserve limit", g + 1), None, fs.r_cap_up[g] - gen.res_limit_up);
        push(format!("g{} downward reserve limit", g + 1), None, fs.r_cap_down[g] - gen.res_limit_down);
    }
    for s in 0..sc.len() {
        let omega = sc.scenario(s);
        let total: f64 = omega.iter().sum();
        let mut inj: Vec<f64> = case.nodes.iter().enumerate().map(|(n, x)| x.wind_forecast + omega[n] - x.load).collect();
        for (g, gen) in case.generators.iter().enumerate() {
            let d = -total * fs.beta[g];
            inj[gen.node] += fs.p[g] + d;
            push(format!("g{} upward reserve", g + 1), Some(s), d - fs.r_cap_up[g]);
            push(format!("g{} downward reserve", g + 1), Some(s), -d - fs.r_cap_down[g]);
        }
        for (l, f) in dc_flows(case, &inj).iter().enumerate() {
            push(format!("l{} limit", l + 1), Some(s), f.abs() - case.lines[l].capacity);
        }
    }
    out
}

/// Objective of `fs` with AGC deployment only (no manual action anywhere).
pub fn agc_cost(case: &GridCase, sc: &ScenarioSet, fs: &FirstStage) -> f64 {
    let mut cost = 0.0;
    for (g, gen) in case.generators.iter().enumerate() {
        cost += gen.energy_cost * fs.p[g] + gen.res_cap_cost_up * fs.r_cap_up[g] + gen.res_cap_cost_down * fs.r_cap_down[g];
        for s in 0..sc.len() {
            let d = -sc.totals()[s] * fs.beta[g];
            cost += (gen.deploy_cost_up * d.max(0.0) - gen.deploy_cost_down * (-d).max(0.0)) / sc.len() as f64;
        }
    }
    cost
}
