//! Best-bound branch-and-bound over binary variables with pseudocost branching.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use super::simplex::{self, Basis, LpOutcome, LpStatus, StandardForm};
use super::{LinearModel, MilpLimits, SolveResult, SolveStatus, Tolerances, VarId};
use crate::error::{Error, Result};

/// Proposes a complete binary assignment from a fractional LP point.
pub trait MilpHeuristic: Sync {
    fn propose(&self, relaxed: &[f64]) -> Option<Vec<(VarId, f64)>>;
}

#[derive(Default, Clone, Copy)]
pub struct MilpOptions<'a> {
    pub limits: MilpLimits,
    /// Starting incumbent; its binaries are rounded and the LP re-solved.
    pub incumbent: Option<&'a [f64]>,
    pub heuristic: Option<&'a dyn MilpHeuristic>,
    /// Run the heuristic every this many nodes (0: root only).
    pub heuristic_every: usize,
}

struct Node {
    bound: f64,
    id: usize,
    fixes: Rc<Vec<(usize, f64)>>,
    basis: Rc<Basis>,
    branch: usize,
    value: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: smallest bound first, newest node on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(self.id.cmp(&other.id))
    }
}

struct Search<'a> {
    model: &'a LinearModel,
    sf: StandardForm,
    lb0: Vec<f64>,
    ub0: Vec<f64>,
    binaries: Vec<usize>,
    tol: Tolerances,
    sopts: simplex::SimplexOptions,
    incumbent: Option<(f64, Vec<f64>)>,
    iterations: usize,
    lp_limit: Option<LpStatus>,
    /// Pseudocosts: summed objective gain per unit change, and sample counts, down then up.
    gain: Vec<[f64; 2]>,
    samples: Vec<[usize; 2]>,
}

impl Search<'_> {
    fn solve_with(&mut self, fixes: &[(usize, f64)], warm: Option<&Basis>) -> LpOutcome {
        let mut lb = self.lb0.clone();
        let mut ub = self.ub0.clone();
        for &(j, v) in fixes {
            lb[j] = v;
            ub[j] = v;
        }
        let out = simplex::solve(&self.sf, &lb, &ub, warm, &self.sopts);
        self.iterations += out.iterations;
        if matches!(out.status, LpStatus::IterationLimit | LpStatus::TimeLimit) {
            self.lp_limit = Some(out.status);
        }
        out
    }

    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            Some((v, _)) => v - self.tol.gap * v.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn record(&mut self, j: usize, up: bool, value: f64, parent: f64, child: f64) {
        let f = value - value.floor();
        let dist = if up { 1.0 - f } else { f };
        if dist > 0.0 {
            let k = up as usize;
            self.gain[j][k] += (child - parent).max(0.0) / dist;
            self.samples[j][k] += 1;
        }
    }

    /// Picks the fractional binary with the best pseudocost product score.
    fn choose_branch(&self, x: &[f64]) -> Option<usize> {
        let mut mean = [1.0; 2];
        for (k, m) in mean.iter_mut().enumerate() {
            let (sum, n) = self
                .binaries
                .iter()
                .filter(|&&j| self.samples[j][k] > 0)
                .fold((0.0, 0usize), |(a, c), &j| (a + self.gain[j][k] / self.samples[j][k] as f64, c + 1));
            if n > 0 && sum > 0.0 {
                *m = sum / n as f64;
            }
        }
        let unit = |j: usize, k: usize| {
            if self.samples[j][k] > 0 {
                self.gain[j][k] / self.samples[j][k] as f64
            } else {
                mean[k]
            }
        };
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let f = x[j] - x[j].floor();
            if f.min(1.0 - f) <= self.tol.int {
                continue;
            }
            let floor = 1e-6 * (mean[0] + mean[1]);
            let score = (f * unit(j, 0)).max(floor) * ((1.0 - f) * unit(j, 1)).max(floor);
            if best.is_none_or(|(_, b)| score > b * (1.0 + 1e-12)) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Fixes every binary to its rounded value, re-solves, and keeps the point if better.
    fn try_assignment(&mut self, x: &[f64], warm: Option<&Basis>) {
        let fixes: Vec<(usize, f64)> = self.binaries.iter().map(|&j| (j, x[j].round().clamp(0.0, 1.0))).collect();
        let out = self.solve_with(&fixes, warm);
        if out.status != LpStatus::Optimal {
            return;
        }
        if self.model.max_violation(&out.x) > self.tol.feas * 10.0 {
            return;
        }
        if self.incumbent.as_ref().is_none_or(|(v, _)| out.objective < *v) {
            self.incumbent = Some((out.objective, out.x));
        }
    }

    fn run_heuristic(&mut self, h: &dyn MilpHeuristic, x: &[f64], warm: Option<&Basis>) {
        if let Some(assign) = h.propose(x) {
            let mut point = x.to_vec();
            for (v, val) in assign {
                point[v.0] = val;
            }
            self.try_assignment(&point, warm);
        }
    }
}

pub(crate) fn branch_and_bound(model: &LinearModel, tol: &Tolerances, opts: &MilpOptions<'_>) -> Result<SolveResult> {
    model.validate()?;
    let start = Instant::now();
    let deadline = opts.limits.time_limit.map(|d| start + d);
    let sf = StandardForm::from_model(model);
    let (lb, ub) = sf.structural_bounds();
    let (lb0, ub0) = (lb.to_vec(), ub.to_vec());
    let mut sopts = tol.simplex();
    sopts.deadline = deadline;
    let mut s = Search {
        model,
        sf,
        lb0,
        ub0,
        binaries: model.binaries().map(|v| v.0).collect(),
        tol: *tol,
        sopts,
        incumbent: None,
        iterations: 0,
        lp_limit: None,
        gain: vec![[0.0; 2]; model.num_vars()],
        samples: vec![[0; 2]; model.num_vars()],
    };

    if let Some(x0) = opts.incumbent {
        if x0.len() != model.num_vars() {
            return Err(Error::Model("starting incumbent has the wrong length".into()));
        }
        let integral = s.binaries.iter().all(|&j| x0[j] == 0.0 || x0[j] == 1.0);
        if integral && model.max_violation(x0) <= tol.feas * 10.0 {
            s.incumbent = Some((model.objective_value(x0), x0.to_vec()));
        }
    }

    let root = s.solve_with(&[], None);
    match root.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(empty(SolveStatus::Infeasible, s.iterations)),
        LpStatus::Unbounded => return Ok(empty(SolveStatus::Unbounded, s.iterations)),
        other => {
            let mut r = empty(other.into(), s.iterations);
            if let Some((obj, x)) = s.incumbent {
                r.objective = obj;
                r.primal = x;
                r.bound = f64::NEG_INFINITY;
                r.gap = f64::INFINITY;
            }
            return Ok(r);
        }
    }
    if s.binaries.is_empty() {
        return Ok(SolveResult {
            status: SolveStatus::Optimal,
            objective: root.objective,
            bound: root.objective,
            primal: root.x,
            duals: Some(root.duals),
            gap: 0.0,
            iterations: s.iterations,
            nodes: 0,
            basis: Some(root.basis),
        });
    }

    if let Some(x0) = opts.incumbent {
        s.try_assignment(x0, Some(&root.basis));
    }
    let root_basis = Rc::new(root.basis.clone());
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    match s.choose_branch(&root.x) {
        None => s.try_assignment(&root.x, Some(&root_basis)),
        Some(branch) => {
            s.try_assignment(&root.x, Some(&root_basis));
            if let Some(h) = opts.heuristic {
                s.run_heuristic(h, &root.x, Some(&root_basis));
            }
            let value = root.x[branch];
            heap.push(Node { bound: root.objective, id: next_id, fixes: Rc::new(Vec::new()), basis: root_basis, branch, value });
            next_id += 1;
        }
    }

    let mut nodes = 0usize;
    let mut limit: Option<SolveStatus> = None;
    while let Some(node) = heap.peek() {
        if node.bound >= s.cutoff() {
            heap.clear();
            break;
        }
        if opts.limits.node_limit.is_some_and(|l| nodes >= l) {
            limit = Some(SolveStatus::IterationLimit);
            break;
        }
        if deadline.is_some_and(|d| Instant::now() > d) {
            limit = Some(SolveStatus::TimeLimit);
            break;
        }
        let node = heap.pop().unwrap();
        nodes += 1;
        if nodes % 25 == 0 {
            log::debug!(
                "node {nodes}: bound {:.6}, incumbent {:.6}, {} open, depth {}, {} simplex iterations, {:.1} s",
                node.bound,
                s.incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v),
                heap.len(),
                node.fixes.len(),
                s.iterations,
                start.elapsed().as_secs_f64()
            );
        }
        for val in [0.0, 1.0] {
            let mut fixes = (*node.fixes).clone();
            fixes.push((node.branch, val));
            let out = s.solve_with(&fixes, Some(&node.basis));
            if let Some(st) = s.lp_limit {
                limit = Some(st.into());
                break;
            }
            if out.status != LpStatus::Optimal {
                continue;
            }
            s.record(node.branch, val > 0.5, node.value, node.bound, out.objective);
            if out.objective >= s.cutoff() {
                continue;
            }
            let basis = Rc::new(out.basis.clone());
            if let Some(h) = opts.heuristic {
                if opts.heuristic_every > 0 && nodes % opts.heuristic_every == 0 {
                    s.run_heuristic(h, &out.x, Some(&basis));
                }
            }
            match s.choose_branch(&out.x) {
                None => s.try_assignment(&out.x, Some(&basis)),
                Some(branch) => {
                    let value = out.x[branch];
                    heap.push(Node { bound: out.objective, id: next_id, fixes: Rc::new(fixes), basis, branch, value });
                    next_id += 1;
                }
            }
        }
        if limit.is_some() {
            break;
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let status = match (limit, &s.incumbent) {
        (Some(st), _) => st,
        (None, Some(_)) => SolveStatus::Optimal,
        (None, None) => SolveStatus::Infeasible,
    };
    let mut result = empty(status, s.iterations);
    result.nodes = nodes;
    if let Some((obj, x)) = s.incumbent {
        let bound = if limit.is_some() { open_bound.min(obj) } else { obj.min(open_bound) };
        result.objective = obj;
        result.primal = x;
        result.bound = bound;
        result.gap = ((obj - bound) / obj.abs().max(1.0)).max(0.0);
    } else {
        result.bound = open_bound;
    }
    Ok(result)
}

fn empty(status: SolveStatus, iterations: usize) -> SolveResult {
    SolveResult {
        status,
        objective: f64::NAN,
        primal: Vec::new(),
        duals: None,
        bound: f64::NAN,
        gap: f64::NAN,
        iterations,
        nodes: 0,
        basis: None,
    }
}
