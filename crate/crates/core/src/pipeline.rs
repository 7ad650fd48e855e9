//! Method dispatch and the repeated in-sample / out-of-sample experiment.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::alsox::{solve_budget_heuristic, HeuristicConfig, HeuristicOutcome, IterationLog};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate_with, EvaluationReport, DEFAULT_DEV_TOL};
use crate::formulations::{build, model_point, BigMPolicy, BuiltModel, DispatchSolution, Policy, RiskConfig, ScreeningReport};
use crate::grid::{GridCase, PtdfMatrix};
use crate::scenarios::{sample, DistributionSpec, ScenarioSet};
use crate::solver::{Backend, BundledSolver, MilpLimits, MilpOptions, SolveStatus, Tolerances};

pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(10 * 3600);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    AgcRobust,
    AgcJcc,
    Amgc,
    /// AMGC through the bisection heuristic.
    AmgcHeuristic,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::AgcRobust, Method::AgcJcc, Method::Amgc, Method::AmgcHeuristic];

    pub fn policy(self) -> Policy {
        match self {
            Method::AgcRobust => Policy::AgcRobust,
            Method::AgcJcc => Policy::AgcJcc,
            Method::Amgc | Method::AmgcHeuristic => Policy::Amgc,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::AgcRobust => "agc-robust",
            Method::AgcJcc => "agc-jcc",
            Method::Amgc => "amgc",
            Method::AmgcHeuristic => "amgc-h",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Model(format!("unknown method {s:?} (expected agc-robust, agc-jcc, amgc or amgc-h)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub epsilon: f64,
    pub screening: bool,
    pub cuts: bool,
    pub big_m: BigMPolicy,
    pub heuristic: HeuristicConfig,
    pub time_limit: Option<Duration>,
    /// Branch-and-bound node cap; keeps limited runs reproducible.
    pub node_limit: Option<usize>,
    pub tolerances: Tolerances,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            epsilon: 0.05,
            screening: true,
            cuts: true,
            big_m: BigMPolicy::Analytic,
            heuristic: HeuristicConfig::default(),
            time_limit: Some(DEFAULT_TIME_LIMIT),
            node_limit: None,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub method: Method,
    pub solution: DispatchSolution,
    pub status: SolveStatus,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub seconds: f64,
    pub rows: usize,
    pub columns: usize,
    pub screening: Option<ScreeningReport>,
    pub bisection: Vec<IterationLog>,
}

pub fn solve_method(
    method: Method,
    case: &GridCase,
    scenarios: &ScenarioSet,
    ptdf: &PtdfMatrix,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    solve_method_with(method, case, scenarios, ptdf, opts, &BundledSolver)
}

pub fn solve_method_with(
    method: Method,
    case: &GridCase,
    scenarios: &ScenarioSet,
    ptdf: &PtdfMatrix,
    opts: &SolveOptions,
    backend: &dyn Backend,
) -> Result<SolveOutcome> {
    solve_inner(method, case, scenarios, ptdf, opts, backend, None)
}

/// A finished bisection (`None` if it found no feasible point) and its wall-clock time.
type Warm = (Option<HeuristicOutcome>, f64);

fn risk_for(method: Method, scenarios: &ScenarioSet, opts: &SolveOptions) -> Result<RiskConfig> {
    let risk = match method {
        Method::AgcRobust => RiskConfig::robust(),
        _ => RiskConfig::new(opts.epsilon, scenarios.len())?,
    };
    Ok(RiskConfig { big_m_policy: opts.big_m, ..risk }.with_screening(opts.screening).with_cuts(opts.cuts))
}

fn bisect(built: &BuiltModel, risk: &RiskConfig, opts: &SolveOptions, backend: &dyn Backend) -> Result<Warm> {
    let start = Instant::now();
    let h = match solve_budget_heuristic(built.clone(), risk.epsilon, &opts.heuristic, backend, &opts.tolerances) {
        Ok(h) => Some(h),
        Err(Error::HeuristicFailed) => None,
        Err(e) => return Err(e),
    };
    Ok((h, start.elapsed().as_secs_f64()))
}

fn solve_inner(
    method: Method,
    case: &GridCase,
    scenarios: &ScenarioSet,
    ptdf: &PtdfMatrix,
    opts: &SolveOptions,
    backend: &dyn Backend,
    shared: Option<&Warm>,
) -> Result<SolveOutcome> {
    let start = Instant::now();
    let risk = risk_for(method, scenarios, opts)?;
    let built = build(method.policy(), case, scenarios, ptdf, &risk)?;
    let (rows, columns) = (built.model.num_rows(), built.model.num_vars());
    let screening = built.screening.clone();
    let tol = &opts.tolerances;
    log::info!("{method}: {rows} rows, {columns} columns, q = {}", built.layout.q);

    // time spent on a bisection shared with another method
    let mut borrowed = 0.0;
    let (solution, status, bound, gap, nodes, bisection) = match method {
        Method::AgcRobust => {
            let r = backend.solve_lp(&built.model, tol)?;
            if r.status != SolveStatus::Optimal {
                return Err(Error::Unsolved { method: method.to_string(), status: r.status });
            }
            let sol = crate::formulations::extract_solution(&built, &r, tol)?;
            (sol, r.status, r.bound, 0.0, 0, Vec::new())
        }
        Method::AmgcHeuristic => {
            let (h, secs) = match shared {
                Some(w) => w.clone(),
                None => bisect(&built, &risk, opts, backend)?,
            };
            borrowed = if shared.is_some() { secs } else { 0.0 };
            let h = h.ok_or(Error::HeuristicFailed)?;
            let obj = h.solution.objective;
            (h.solution, SolveStatus::Optimal, obj, f64::NAN, 0, h.iterations)
        }
        Method::AgcJcc | Method::Amgc => {
            let own;
            let warm = match shared {
                Some(w) => {
                    borrowed = w.1;
                    w
                }
                None => {
                    own = bisect(&built, &risk, opts, backend)?;
                    &own
                }
            };
            let (start_point, iterations) = match &warm.0 {
                Some(h) => (Some(model_point(&built, &h.solution)), h.iterations.clone()),
                None => (None, Vec::new()),
            };
            let spent = Duration::from_secs_f64(borrowed) + start.elapsed();
            let heuristic = built.budget_heuristic();
            let options = MilpOptions {
                limits: MilpLimits { node_limit: opts.node_limit, time_limit: opts.time_limit.map(|t| t.saturating_sub(spent)) },
                incumbent: start_point.as_deref(),
                heuristic: Some(&heuristic),
                heuristic_every: 10,
            };
            let r = backend.solve_milp(&built.model, tol, &options)?;
            if !r.has_point() {
                return Err(Error::Unsolved { method: method.to_string(), status: r.status });
            }
            let sol = crate::formulations::extract_solution(&built, &r, tol)?;
            (sol, r.status, r.bound, r.gap, r.nodes, iterations)
        }
    };
    let seconds = borrowed + start.elapsed().as_secs_f64();
    log::info!("{method}: {status}, objective {:.6}, {nodes} nodes, {seconds:.2} s", solution.objective);
    Ok(SolveOutcome { method, solution, status, bound, gap, nodes, seconds, rows, columns, screening, bisection })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub methods: Vec<Method>,
    pub in_samples: usize,
    pub out_samples: usize,
    pub seed: u64,
    pub reps: usize,
    pub penalty: Option<f64>,
    pub distribution: DistributionSpec,
    pub solve: SolveOptions,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.in_samples == 0 || self.out_samples == 0 || self.reps == 0 {
            return Err(Error::Model("sample counts and repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Model("no method selected".into()));
        }
        if !(0.0..1.0).contains(&self.solve.epsilon) {
            return Err(Error::Model(format!("epsilon {} outside [0, 1)", self.solve.epsilon)));
        }
        Ok(())
    }

    /// Seed of the in-sample draw of repetition `rep`.
    pub fn in_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(1 + rep as u64)
    }

    /// The out-of-sample set is shared by all repetitions.
    pub fn out_seed(&self) -> u64 {
        self.seed ^ 0x5eed_0f_0075_a3b1
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub rep: usize,
    pub outcome: SolveOutcome,
    pub report: EvaluationReport,
}

/// Runs every method on `reps` independent in-sample draws and evaluates
/// each solution on one common out-of-sample set.
pub fn run_experiment(case: &GridCase, spec: &ExperimentSpec) -> Result<Vec<RunResult>> {
    spec.validate()?;
    let ptdf = crate::grid::compute_ptdf(case)?;
    let penalty = spec.penalty.unwrap_or_else(|| crate::evaluator::default_penalty(case));
    let out = sample(case, &spec.distribution, spec.out_samples, spec.out_seed())?;
    let mut results = Vec::new();
    for rep in 0..spec.reps {
        let ins = sample(case, &spec.distribution, spec.in_samples, spec.in_seed(rep))?;
        // amgc and amgc-h run the same bisection
        let shared = if spec.methods.contains(&Method::Amgc) && spec.methods.contains(&Method::AmgcHeuristic) {
            let risk = risk_for(Method::Amgc, &ins, &spec.solve)?;
            let built = build(Policy::Amgc, case, &ins, &ptdf, &risk)?;
            Some(bisect(&built, &risk, &spec.solve, &BundledSolver)?)
        } else {
            None
        };
        let runs = spec
            .methods
            .par_iter()
            .map(|&m| -> Result<RunResult> {
                let warm = shared.as_ref().filter(|_| m.policy() == Policy::Amgc);
                let outcome = solve_inner(m, case, &ins, &ptdf, &spec.solve, &BundledSolver, warm)?;
                let report = evaluate_with(&outcome.solution.first_stage(), case, &ptdf, &out, penalty, DEFAULT_DEV_TOL)?;
                Ok(RunResult { rep, outcome, report })
            })
            .collect::<Result<Vec<_>>>()?;
        results.extend(runs);
    }
    Ok(results)
}
