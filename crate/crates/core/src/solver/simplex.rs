//! Bounded-variable revised simplex.
//!
//! A dual phase runs first whenever the starting basis is dual feasible (or
//! can be made so by flipping boxed variables), which is the usual case when
//! re-solving after bound or right-hand-side changes. The primal loop below
//! then confirms or finishes the solve.
//!
//! Rows are equilibrated to unit max-norm. Every row gets a logical column so
//! the working system is `[A  -I] (x, r) = 0` with bounds on both `x` and the
//! row activities `r`. Phase one minimises the sum of bound infeasibilities of
//! the basic variables; phase two the true objective. Pricing is Devex with a
//! fallback to Bland's rule after a run of degenerate pivots.

use std::time::Instant;

use super::lu::{Factor, SparseCol};
use super::model::{LinearModel, Sense};

/// Problem data in the internal column-major scaled form.
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub n: usize,
    pub m: usize,
    cols: Vec<SparseCol>,
    cost: Vec<f64>,
    /// Bounds of structurals followed by scaled row bounds.
    lower: Vec<f64>,
    upper: Vec<f64>,
    row_scale: Vec<f64>,
    offset: f64,
}

impl StandardForm {
    /// Builds the scaled form; binary flags are ignored (treated as [0, 1]).
    pub fn from_model(model: &LinearModel) -> StandardForm {
        let n = model.num_vars();
        let m = model.num_rows();
        let mut row_scale = vec![1.0; m];
        for (i, c) in model.constraints.iter().enumerate() {
            let amax = c.coeffs.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
            if amax > 0.0 {
                row_scale[i] = 1.0 / amax;
            }
        }
        let mut cols: Vec<SparseCol> = vec![Vec::new(); n];
        for (i, c) in model.constraints.iter().enumerate() {
            for &(v, a) in &c.coeffs {
                if a != 0.0 {
                    cols[v.0].push((i, a * row_scale[i]));
                }
            }
        }
        // Merge duplicate entries of the same variable in one row.
        for col in &mut cols {
            col.sort_by_key(|e| e.0);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            col.retain(|e| e.1 != 0.0);
        }
        cols.extend((0..m).map(|i| vec![(i, -1.0)]));
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in &model.variables {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for (i, c) in model.constraints.iter().enumerate() {
            let b = c.rhs * row_scale[i];
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, b),
                Sense::Ge => (b, f64::INFINITY),
                Sense::Eq => (b, b),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut cost: Vec<f64> = model.variables.iter().map(|v| v.cost).collect();
        cost.extend(std::iter::repeat(0.0).take(m));
        StandardForm { n, m, cols, cost, lower, upper, row_scale, offset: model.objective_offset }
    }

    pub fn structural_bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower[..self.n], &self.upper[..self.n])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Simplex basis, reusable as a warm start for a problem with the same shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub head: Vec<usize>,
    pub state: Vec<VarState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub objective: f64,
    /// Structural values.
    pub x: Vec<f64>,
    /// Objective sensitivity to each row's right-hand side.
    pub duals: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub max_iterations: Option<usize>,
    pub deadline: Option<Instant>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { primal_tol: 1e-9, dual_tol: 1e-9, max_iterations: None, deadline: None }
    }
}

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 60;
const DEGENERATE_RUN: usize = 400;
const PERTURBATION: f64 = 1e-6;

struct Solver<'a> {
    sf: &'a StandardForm,
    lower: Vec<f64>,
    upper: Vec<f64>,
    head: Vec<usize>,
    state: Vec<VarState>,
    pos: Vec<usize>,
    x: Vec<f64>,
    factor: Factor,
    opts: SimplexOptions,
    /// Unperturbed bounds while a perturbation is active.
    saved: Option<(Vec<f64>, Vec<f64>)>,
    weights: Vec<f64>,
}

/// Solves the LP with the given structural bounds (overriding the model's).
pub fn solve(
    sf: &StandardForm,
    lower: &[f64],
    upper: &[f64],
    warm: Option<&Basis>,
    opts: &SimplexOptions,
) -> LpOutcome {
    let n = sf.n;
    let m = sf.m;
    let mut lb = sf.lower.clone();
    let mut ub = sf.upper.clone();
    lb[..n].copy_from_slice(lower);
    ub[..n].copy_from_slice(upper);
    for j in 0..n {
        if lb[j] > ub[j] {
            return LpOutcome {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                x: vec![f64::NAN; n],
                duals: vec![0.0; m],
                basis: cold_basis(sf, &lb, &ub),
                iterations: 0,
            };
        }
    }
    let basis = match warm {
        Some(b) if b.head.len() == m && b.state.len() == n + m => b.clone(),
        _ => cold_basis(sf, &lb, &ub),
    };
    let mut s = Solver::new(sf, lb, ub, basis, *opts);
    s.run()
}

fn cold_basis(sf: &StandardForm, lb: &[f64], ub: &[f64]) -> Basis {
    let (n, m) = (sf.n, sf.m);
    let mut state = Vec::with_capacity(n + m);
    for j in 0..n {
        let st = if lb[j].is_finite() && (sf.cost[j] >= 0.0 || !ub[j].is_finite()) {
            VarState::Lower
        } else if ub[j].is_finite() {
            VarState::Upper
        } else {
            VarState::Zero
        };
        state.push(st);
    }
    state.extend(std::iter::repeat(VarState::Basic).take(m));
    Basis { head: (n..n + m).collect(), state }
}

impl<'a> Solver<'a> {
    fn new(sf: &'a StandardForm, lower: Vec<f64>, upper: Vec<f64>, basis: Basis, opts: SimplexOptions) -> Self {
        let (n, m) = (sf.n, sf.m);
        let mut s = Solver {
            sf,
            lower,
            upper,
            head: basis.head,
            state: basis.state,
            pos: vec![usize::MAX; n + m],
            x: vec![0.0; n + m],
            factor: Factor::default(),
            opts,
            saved: None,
            weights: vec![1.0; n + m],
        };
        // Sanitise the warm start against the current bounds.
        for (p, &j) in s.head.iter().enumerate() {
            s.pos[j] = p;
        }
        for j in 0..n + m {
            if s.pos[j] != usize::MAX {
                s.state[j] = VarState::Basic;
                continue;
            }
            if s.state[j] == VarState::Basic {
                s.state[j] = VarState::Lower;
            }
            s.place_nonbasic(j);
        }
        s.refactor();
        s
    }

    /// Widens every non-fixed finite bound by a small pseudo-random amount.
    fn perturb(&mut self) {
        let (mut lo, mut hi) = (self.lower.clone(), self.upper.clone());
        for j in 0..lo.len() {
            if lo[j] == hi[j] {
                continue;
            }
            let mut h = (j as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            h ^= h >> 31;
            let r = 0.5 + 0.5 * ((h >> 11) as f64 / (1u64 << 53) as f64);
            if lo[j].is_finite() {
                lo[j] -= PERTURBATION * (1.0 + lo[j].abs()) * r;
            }
            if hi[j].is_finite() {
                hi[j] += PERTURBATION * (1.0 + hi[j].abs()) * r;
            }
        }
        self.saved = Some((std::mem::replace(&mut self.lower, lo), std::mem::replace(&mut self.upper, hi)));
        self.reposition();
    }

    fn unperturb(&mut self) {
        if let Some((lo, hi)) = self.saved.take() {
            self.lower = lo;
            self.upper = hi;
            self.reposition();
        }
    }

    fn reposition(&mut self) {
        for j in 0..self.x.len() {
            if self.pos[j] == usize::MAX {
                self.place_nonbasic(j);
            }
        }
        self.compute_basics();
    }

    fn place_nonbasic(&mut self, j: usize) {
        let (l, u) = (self.lower[j], self.upper[j]);
        let st = match self.state[j] {
            VarState::Upper if u.is_finite() => VarState::Upper,
            VarState::Lower if l.is_finite() => VarState::Lower,
            _ if l.is_finite() => VarState::Lower,
            _ if u.is_finite() => VarState::Upper,
            _ => VarState::Zero,
        };
        self.state[j] = st;
        self.x[j] = match st {
            VarState::Lower => l,
            VarState::Upper => u,
            _ => 0.0,
        };
    }

    fn column(&self, j: usize) -> &'a [(usize, f64)] {
        &self.sf.cols[j]
    }

    fn refactor(&mut self) {
        let m = self.sf.m;
        loop {
            let sf = self.sf;
            let cols: Vec<&[(usize, f64)]> = self.head.iter().map(|&j| sf.cols[j].as_slice()).collect();
            let mut factor = std::mem::take(&mut self.factor);
            let res = factor.refactor(m, &cols);
            self.factor = factor;
            match res {
                Ok(()) => break,
                Err(sing) => {
                    // Replace unpivotable columns by the logicals of uncovered rows.
                    for (&p, &r) in sing.positions.iter().zip(&sing.rows) {
                        let old = self.head[p];
                        let new = self.sf.n + r;
                        self.pos[old] = usize::MAX;
                        self.state[old] = VarState::Lower;
                        self.place_nonbasic(old);
                        if self.pos[new] != usize::MAX {
                            // Logical already basic elsewhere: cannot happen for an uncovered row.
                            continue;
                        }
                        self.head[p] = new;
                        self.pos[new] = p;
                        self.state[new] = VarState::Basic;
                    }
                }
            }
        }
        self.compute_basics();
    }

    fn compute_basics(&mut self) {
        let m = self.sf.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.sf.n + m {
            if self.pos[j] != usize::MAX {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.sf.n {
                for &(i, a) in &self.sf.cols[j] {
                    rhs[i] -= a * xj;
                }
            } else {
                rhs[j - self.sf.n] += xj;
            }
        }
        self.factor.ftran(&mut rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = rhs[p];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let tol = self.opts.primal_tol;
        let xj = self.x[j];
        if xj < self.lower[j] - tol {
            self.lower[j] - xj
        } else if xj > self.upper[j] + tol {
            xj - self.upper[j]
        } else {
            0.0
        }
    }

    fn run(&mut self) -> LpOutcome {
        let (n, m) = (self.sf.n, self.sf.m);
        let max_iter = self.opts.max_iterations.unwrap_or(50 * (n + m) + 10_000);
        let ptol = self.opts.primal_tol;
        let dtol = self.opts.dual_tol;
        let mut iterations = 0usize;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut cb = vec![0.0; m];
        let mut d = vec![0.0; n + m];
        let mut confirmations = 0usize;
        if m > 0 {
            match self.dual_phase(&mut iterations, max_iter) {
                Some(LpStatus::Optimal) => {}
                None => self.perturb(),
                Some(st) => return self.outcome(st, iterations),
            }
        }

        let status = loop {
            if iterations >= max_iter {
                break LpStatus::IterationLimit;
            }
            if let Some(dl) = self.opts.deadline {
                if iterations % 64 == 0 && Instant::now() > dl {
                    break LpStatus::TimeLimit;
                }
            }
            if self.factor.num_updates() >= REFACTOR_EVERY {
                self.refactor();
            }

            let phase_one = self.head.iter().any(|&j| self.infeasibility(j) > 0.0);
            for (p, &j) in self.head.iter().enumerate() {
                cb[p] = if phase_one {
                    let xj = self.x[j];
                    if xj < self.lower[j] - ptol {
                        -1.0
                    } else if xj > self.upper[j] + ptol {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.sf.cost[j]
                };
            }
            let mut y = cb.clone();
            self.factor.btran(&mut y);

            // Pricing.
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..n + m {
                if self.pos[j] != usize::MAX || self.lower[j] == self.upper[j] {
                    continue;
                }
                let cj = if phase_one { 0.0 } else { self.sf.cost[j] };
                let dj = if j < n {
                    cj - self.sf.cols[j].iter().map(|&(i, a)| a * y[i]).sum::<f64>()
                } else {
                    cj + y[j - n]
                };
                d[j] = dj;
                let dir = match self.state[j] {
                    VarState::Lower if dj < -dtol => 1.0,
                    VarState::Upper if dj > dtol => -1.0,
                    VarState::Zero if dj.abs() > dtol => -dj.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir));
                    break;
                }
                let score = dj * dj / self.weights[j];
                if score > best {
                    best = score;
                    entering = Some((j, dir));
                }
            }

            let Some((q, dir)) = entering else {
                // Confirm on a fresh factorisation before declaring the result.
                if self.factor.num_updates() > 0 && confirmations < 3 {
                    confirmations += 1;
                    self.refactor();
                    continue;
                }
                let still_infeasible = self.head.iter().any(|&j| self.infeasibility(j) > 0.0);
                if phase_one || still_infeasible {
                    if still_infeasible {
                        break LpStatus::Infeasible;
                    }
                    continue;
                }
                if self.saved.is_some() {
                    self.unperturb();
                    confirmations = 0;
                    continue;
                }
                break LpStatus::Optimal;
            };
            confirmations = 0;

            let mut w = vec![0.0; m];
            for &(i, a) in self.column(q) {
                w[i] = a;
            }
            self.factor.ftran(&mut w);

            // Harris two-pass ratio test.
            let htol = 0.5 * ptol;
            let mut theta_max = f64::INFINITY;
            for (p, &wp) in w.iter().enumerate() {
                if wp.abs() < PIVOT_TOL {
                    continue;
                }
                let j = self.head[p];
                let rate = -dir * wp;
                if let Some(b) = self.blocking_bound(j, rate) {
                    let t = if rate < 0.0 { (self.x[j] - (b - htol)) / -rate } else { ((b + htol) - self.x[j]) / rate };
                    theta_max = theta_max.min(t.max(0.0));
                }
            }
            let flip = self.upper[q] - self.lower[q];
            if theta_max.is_infinite() && !flip.is_finite() {
                if phase_one {
                    // Numerically lost; restart from a fresh factorisation under Bland's rule.
                    self.refactor();
                    bland = true;
                    iterations += 1;
                    continue;
                }
                if self.factor.num_updates() > 0 && confirmations < 3 {
                    confirmations += 1;
                    self.refactor();
                    continue;
                }
                if self.saved.is_some() {
                    self.unperturb();
                    continue;
                }
                break LpStatus::Unbounded;
            }
            let mut leave: Option<(usize, f64, f64)> = None;
            for (p, &wp) in w.iter().enumerate() {
                if wp.abs() < PIVOT_TOL {
                    continue;
                }
                let j = self.head[p];
                let rate = -dir * wp;
                if let Some(b) = self.blocking_bound(j, rate) {
                    let t = ((self.x[j] - b) / -rate).max(0.0);
                    if t <= theta_max {
                        let better = match leave {
                            None => true,
                            Some((lp, _, _)) => {
                                if bland {
                                    j < self.head[lp]
                                } else {
                                    wp.abs() > w[lp].abs()
                                }
                            }
                        };
                        if better {
                            leave = Some((p, t, b));
                        }
                    }
                }
            }

            iterations += 1;
            let step_flip = flip.is_finite() && leave.map_or(true, |(_, t, _)| flip <= t);
            if step_flip {
                self.x[q] += dir * flip;
                self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                for (p, &wp) in w.iter().enumerate() {
                    if wp != 0.0 {
                        let j = self.head[p];
                        self.x[j] -= flip * dir * wp;
                    }
                }
                degenerate = 0;
                bland = false;
                continue;
            }
            let (p, t, b) = leave.unwrap();
            if t < 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            self.x[q] += dir * t;
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    let j = self.head[i];
                    self.x[j] -= t * dir * wi;
                }
            }
            let leaving = self.head[p];
            self.update_weights(q, p, &w);
            self.x[leaving] = b;
            self.state[leaving] = if b == self.lower[leaving] { VarState::Lower } else { VarState::Upper };
            self.pos[leaving] = usize::MAX;
            self.head[p] = q;
            self.pos[q] = p;
            self.state[q] = VarState::Basic;
            self.factor.update(p, &w);
            if self.factor.eta_size() > 2 * (self.factor.factor_size() + m) {
                self.refactor();
            }
        };

        self.outcome(status, iterations)
    }

    fn reduced_costs(&self) -> Vec<f64> {
        let (n, m) = (self.sf.n, self.sf.m);
        let mut y: Vec<f64> = self.head.iter().map(|&j| self.sf.cost[j]).collect();
        self.factor.btran(&mut y);
        let mut d = vec![0.0; n + m];
        for j in 0..n + m {
            if self.pos[j] == usize::MAX {
                d[j] = if j < n { self.sf.cost[j] - self.sf.cols[j].iter().map(|&(i, a)| a * y[i]).sum::<f64>() } else { y[j - n] };
            }
        }
        d
    }

    /// Bounded dual simplex. Returns `None` if the basis cannot be made dual
    /// feasible by bound flips or the phase stalls; the primal loop then
    /// continues from the current basis. `Some(Optimal)` means primal
    /// feasibility was reached and still has to be confirmed by the primal loop.
    fn dual_phase(&mut self, iterations: &mut usize, max_iter: usize) -> Option<LpStatus> {
        let (n, m) = (self.sf.n, self.sf.m);
        let ptol = self.opts.primal_tol;
        let dtol = self.opts.dual_tol;
        let mut d = self.reduced_costs();
        let mut flipped = false;
        for j in 0..n + m {
            if self.pos[j] != usize::MAX || self.lower[j] == self.upper[j] {
                continue;
            }
            let bad = match self.state[j] {
                VarState::Lower => d[j] < -dtol,
                VarState::Upper => d[j] > dtol,
                VarState::Zero => d[j].abs() > dtol,
                VarState::Basic => false,
            };
            if bad {
                if !(self.lower[j].is_finite() && self.upper[j].is_finite()) {
                    return None;
                }
                let up = d[j] < 0.0;
                self.state[j] = if up { VarState::Upper } else { VarState::Lower };
                self.x[j] = if up { self.upper[j] } else { self.lower[j] };
                flipped = true;
            }
        }
        if flipped {
            self.compute_basics();
        }

        let budget = *iterations + 20 * (n + m) + 1000;
        let mut weights = vec![1.0; m];
        let mut rho = vec![0.0; m];
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut confirmed = false;
        loop {
            if *iterations >= max_iter {
                return Some(LpStatus::IterationLimit);
            }
            if *iterations >= budget {
                return None;
            }
            if let Some(dl) = self.opts.deadline {
                if *iterations % 64 == 0 && Instant::now() > dl {
                    return Some(LpStatus::TimeLimit);
                }
            }
            if self.factor.num_updates() >= REFACTOR_EVERY {
                self.refactor();
                d = self.reduced_costs();
            }

            let mut leave: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for (p, &j) in self.head.iter().enumerate() {
                let xj = self.x[j];
                let (infeas, sigma) = if xj < self.lower[j] - ptol {
                    (self.lower[j] - xj, -1.0)
                } else if xj > self.upper[j] + ptol {
                    (xj - self.upper[j], 1.0)
                } else {
                    continue;
                };
                let score = infeas * infeas / weights[p];
                if score > best {
                    best = score;
                    leave = Some((p, sigma));
                }
            }
            let Some((r, sigma)) = leave else {
                return Some(LpStatus::Optimal);
            };

            rho.iter_mut().for_each(|v| *v = 0.0);
            rho[r] = 1.0;
            self.factor.btran(&mut rho);
            row.clear();
            let mut theta_max = f64::INFINITY;
            for j in 0..n + m {
                if self.pos[j] != usize::MAX || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = if j < n { self.sf.cols[j].iter().map(|&(i, v)| v * rho[i]).sum::<f64>() } else { -rho[j - n] };
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                row.push((j, a));
                let s = sigma * a;
                let eligible = match self.state[j] {
                    VarState::Lower => s > 0.0,
                    VarState::Upper => s < 0.0,
                    VarState::Zero => true,
                    VarState::Basic => false,
                };
                if eligible {
                    theta_max = theta_max.min((d[j].abs() + dtol) / a.abs());
                }
            }
            let mut enter: Option<(usize, f64)> = None;
            for &(j, a) in &row {
                let s = sigma * a;
                let eligible = match self.state[j] {
                    VarState::Lower => s > 0.0,
                    VarState::Upper => s < 0.0,
                    VarState::Zero => true,
                    VarState::Basic => false,
                };
                if eligible && d[j].abs() / a.abs() <= theta_max && enter.is_none_or(|(_, b)| a.abs() > b.abs()) {
                    enter = Some((j, a));
                }
            }
            let Some((q, alpha)) = enter else {
                if !confirmed && self.factor.num_updates() > 0 {
                    confirmed = true;
                    self.refactor();
                    d = self.reduced_costs();
                    continue;
                }
                return Some(LpStatus::Infeasible);
            };

            let mut w = vec![0.0; m];
            for &(i, a) in self.column(q) {
                w[i] = a;
            }
            self.factor.ftran(&mut w);
            if (w[r] - alpha).abs() > 1e-6 * (1.0 + alpha.abs()) || w[r].abs() < PIVOT_TOL {
                if confirmed {
                    return None;
                }
                confirmed = true;
                self.refactor();
                d = self.reduced_costs();
                continue;
            }
            confirmed = false;

            // Wrong-signed reduced costs inside the tolerance count as zero.
            let dq = match self.state[q] {
                VarState::Lower => d[q].max(0.0),
                VarState::Upper => d[q].min(0.0),
                _ => d[q],
            };
            let t = dq / alpha;
            let jr = self.head[r];
            let bound = if sigma > 0.0 { self.upper[jr] } else { self.lower[jr] };
            let step = (self.x[jr] - bound) / w[r];
            self.x[q] += step;
            for (p, &wp) in w.iter().enumerate() {
                if wp != 0.0 {
                    let j = self.head[p];
                    self.x[j] -= step * wp;
                }
            }
            self.x[jr] = bound;
            for &(j, a) in &row {
                d[j] -= t * a;
            }
            d[q] = 0.0;
            d[jr] = -t;
            // Dual Devex-style row weights.
            let wr = w[r];
            let wref = weights[r].max(1.0);
            for (p, &wp) in w.iter().enumerate() {
                if p != r && wp != 0.0 {
                    let ratio = wp / wr;
                    weights[p] = weights[p].max(ratio * ratio * wref);
                }
            }
            weights[r] = (wref / (wr * wr)).max(1.0);
            if weights.iter().any(|&v| v > 1e8) {
                weights.iter_mut().for_each(|v| *v = 1.0);
            }

            self.state[jr] = if sigma > 0.0 { VarState::Upper } else { VarState::Lower };
            self.pos[jr] = usize::MAX;
            self.head[r] = q;
            self.pos[q] = r;
            self.state[q] = VarState::Basic;
            self.factor.update(r, &w);
            *iterations += 1;
            if self.factor.eta_size() > 2 * (self.factor.factor_size() + m) {
                self.refactor();
                d = self.reduced_costs();
            }
        }
    }

    /// Devex reference weights after `q` enters at basis position `p`.
    fn update_weights(&mut self, q: usize, p: usize, w: &[f64]) {
        let (n, m) = (self.sf.n, self.sf.m);
        let mut rho = vec![0.0; m];
        rho[p] = 1.0;
        self.factor.btran(&mut rho);
        let apq = w[p];
        let wq = self.weights[q].max(1.0);
        for j in 0..n + m {
            if self.pos[j] != usize::MAX || j == q || self.lower[j] == self.upper[j] {
                continue;
            }
            let apj = if j < n { self.sf.cols[j].iter().map(|&(i, a)| a * rho[i]).sum::<f64>() } else { -rho[j - n] };
            if apj != 0.0 {
                let r = apj / apq;
                self.weights[j] = self.weights[j].max(r * r * wq);
            }
        }
        self.weights[self.head[p]] = (wq / (apq * apq)).max(1.0);
        if self.weights.iter().any(|&v| v > 1e8) {
            self.weights.iter_mut().for_each(|v| *v = 1.0);
        }
    }

    /// Bound that stops basic variable `j` moving at `rate`, if any.
    fn blocking_bound(&self, j: usize, rate: f64) -> Option<f64> {
        let tol = self.opts.primal_tol;
        let xj = self.x[j];
        let (l, u) = (self.lower[j], self.upper[j]);
        let b = if rate < 0.0 {
            if xj > u + tol {
                u
            } else if xj < l - tol {
                return None;
            } else {
                l
            }
        } else if xj < l - tol {
            l
        } else if xj > u + tol {
            return None;
        } else {
            u
        };
        b.is_finite().then_some(b)
    }

    fn outcome(&mut self, status: LpStatus, iterations: usize) -> LpOutcome {
        let (n, m) = (self.sf.n, self.sf.m);
        let x: Vec<f64> = self.x[..n].to_vec();
        let objective = self.sf.offset + (0..n).map(|j| self.sf.cost[j] * x[j]).sum::<f64>();
        let mut y: Vec<f64> = self.head.iter().map(|&j| self.sf.cost[j]).collect();
        self.factor.btran(&mut y);
        // y is the multiplier of the scaled row; the logical r_i has reduced cost y_i.
        let duals = (0..m).map(|i| y[i] * self.sf.row_scale[i]).collect();
        LpOutcome {
            status,
            objective,
            x,
            duals,
            basis: Basis { head: self.head.clone(), state: self.state.clone() },
            iterations,
        }
    }
}
