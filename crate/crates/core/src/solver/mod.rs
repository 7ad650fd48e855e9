//! Linear and mixed-binary optimisation engine.
//!
//! [`solve_lp`] runs the bundled bounded-variable simplex; [`solve_milp`] adds
//! best-bound branch-and-bound over the binary variables. Formulation code goes
//! through the [`Backend`] trait so a different engine can be plugged in.

mod lu;
pub mod milp;
pub mod model;
pub mod mps;
pub mod simplex;

use std::fmt;
use std::time::Duration;

use crate::error::{Error, Result};
pub use milp::{MilpHeuristic, MilpOptions};
pub use simplex::Basis;
pub use model::{relax_binaries, Constraint, LinearModel, RowId, Sense, VarId, Variable};
use simplex::{LpStatus, SimplexOptions, StandardForm};

/// Every numerical tolerance used by the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility on the original (unscaled) rows.
    pub feas: f64,
    /// Objective accuracy.
    pub opt: f64,
    /// Distance from {0, 1} accepted as integral.
    pub int: f64,
    /// Relative optimality gap for branch-and-bound.
    pub gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { feas: 1e-7, opt: 1e-8, int: 1e-6, gap: 1e-9 }
    }
}

impl Tolerances {
    pub(crate) fn simplex(&self) -> SimplexOptions {
        SimplexOptions { primal_tol: self.feas * 1e-2, dual_tol: self.opt * 0.1, ..SimplexOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    TimeLimit,
}

impl SolveStatus {
    pub fn is_limit(self) -> bool {
        matches!(self, SolveStatus::IterationLimit | SolveStatus::TimeLimit)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::Unbounded => "Unbounded",
            SolveStatus::IterationLimit => "IterationLimit",
            SolveStatus::TimeLimit => "TimeLimit",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SolveStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Optimal" => SolveStatus::Optimal,
            "Infeasible" => SolveStatus::Infeasible,
            "Unbounded" => SolveStatus::Unbounded,
            "IterationLimit" => SolveStatus::IterationLimit,
            "TimeLimit" => SolveStatus::TimeLimit,
            other => return Err(Error::Solver(format!("unknown status {other}"))),
        })
    }
}

impl From<LpStatus> for SolveStatus {
    fn from(s: LpStatus) -> Self {
        match s {
            LpStatus::Optimal => SolveStatus::Optimal,
            LpStatus::Infeasible => SolveStatus::Infeasible,
            LpStatus::Unbounded => SolveStatus::Unbounded,
            LpStatus::IterationLimit => SolveStatus::IterationLimit,
            LpStatus::TimeLimit => SolveStatus::TimeLimit,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    /// Primal values indexed like [`LinearModel::variables`]; empty when no
    /// point is available.
    pub primal: Vec<f64>,
    /// Row duals (objective sensitivity to each right-hand side), LP only.
    pub duals: Option<Vec<f64>>,
    /// Best proven lower bound (MILP) or the objective (LP).
    pub bound: f64,
    /// Relative gap between incumbent and bound (0 for LP).
    pub gap: f64,
    pub iterations: usize,
    pub nodes: usize,
    /// Final simplex basis (LP only), reusable as a warm start.
    pub basis: Option<Basis>,
}

impl SolveResult {
    pub fn has_point(&self) -> bool {
        !self.primal.is_empty()
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.primal[var.0]
    }

    pub fn value_of(&self, model: &LinearModel, name: &str) -> Option<f64> {
        model.var(name).and_then(|v| self.primal.get(v.0).copied())
    }

    pub fn dual_of(&self, model: &LinearModel, name: &str) -> Option<f64> {
        let row = model.row(name)?;
        self.duals.as_ref().map(|d| d[row.0])
    }
}

/// Limits applied to a branch-and-bound run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MilpLimits {
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
}

/// An optimisation engine able to solve [`LinearModel`]s.
pub trait Backend: Sync {
    fn name(&self) -> &str;

    fn solve_lp(&self, model: &LinearModel, tol: &Tolerances) -> Result<SolveResult>;

    /// Like [`Backend::solve_lp`], starting from `warm` when the engine supports it.
    fn solve_lp_warm(&self, model: &LinearModel, tol: &Tolerances, warm: Option<&Basis>) -> Result<SolveResult> {
        let _ = warm;
        self.solve_lp(model, tol)
    }

    fn solve_milp(&self, model: &LinearModel, tol: &Tolerances, options: &MilpOptions<'_>) -> Result<SolveResult>;
}

/// The in-crate simplex and branch-and-bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct BundledSolver;

impl Backend for BundledSolver {
    fn name(&self) -> &str {
        "bundled-simplex"
    }

    fn solve_lp(&self, model: &LinearModel, tol: &Tolerances) -> Result<SolveResult> {
        solve_lp(model, tol)
    }

    fn solve_lp_warm(&self, model: &LinearModel, tol: &Tolerances, warm: Option<&Basis>) -> Result<SolveResult> {
        solve_lp_warm(model, tol, warm)
    }

    fn solve_milp(&self, model: &LinearModel, tol: &Tolerances, options: &MilpOptions<'_>) -> Result<SolveResult> {
        milp::branch_and_bound(model, tol, options)
    }
}

/// Solves a continuous model. Binary flags must have been relaxed.
pub fn solve_lp(model: &LinearModel, tol: &Tolerances) -> Result<SolveResult> {
    solve_lp_warm(model, tol, None)
}

/// Solves a continuous model starting from a previous basis of a model with
/// the same rows and columns.
pub fn solve_lp_warm(model: &LinearModel, tol: &Tolerances, warm: Option<&Basis>) -> Result<SolveResult> {
    model.validate()?;
    if model.has_binaries() {
        return Err(Error::Model("solve_lp called on a model with binary variables; relax it first".into()));
    }
    let sf = StandardForm::from_model(model);
    let (lb, ub) = sf.structural_bounds();
    let out = simplex::solve(&sf, lb, ub, warm, &tol.simplex());
    let status = SolveStatus::from(out.status);
    let has_point = matches!(status, SolveStatus::Optimal);
    Ok(SolveResult {
        status,
        objective: if has_point { out.objective } else { f64::NAN },
        bound: if has_point { out.objective } else { f64::NAN },
        primal: if has_point { out.x } else { Vec::new() },
        duals: has_point.then_some(out.duals),
        gap: 0.0,
        iterations: out.iterations,
        nodes: 0,
        basis: Some(out.basis),
    })
}

/// Solves a model with binaries through branch-and-bound.
pub fn solve_milp(model: &LinearModel, tol: &Tolerances, limits: MilpLimits) -> Result<SolveResult> {
    milp::branch_and_bound(model, tol, &MilpOptions { limits, ..MilpOptions::default() })
}
