//! Argument parsing and the subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{ArgAction, Args, Parser, Subcommand};
use log::LevelFilter;
use sopf::alsox::HeuristicConfig;
use sopf::cases;
use sopf::evaluator::{default_penalty, evaluate};
use sopf::grid::{compute_ptdf, read_case, write_case, GridCase};
use sopf::pipeline::{run_experiment, solve_method, ExperimentSpec, Method, SolveOptions};
use sopf::scenarios::{read_scenarios, sample, write_scenarios, DistributionSpec};

use crate::figure::{scatter_svg, Point};
use crate::files::{
    read_report, read_solution, summary_csv, write_report, write_solution, ReportFile, ReportMeta, SolutionFile,
};
use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "sopf", version, about = "Stochastic DC optimal power flow with automatic and manual reserves")]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn log_level(&self) -> LevelFilter {
        match self.verbose {
            0 => LevelFilter::Warn,
            1 => LevelFilter::Info,
            2 => LevelFilter::Debug,
            _ => LevelFilter::Trace,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a built-in case (three_bus, desk24) to a case file.
    ExportCase {
        #[arg(long)]
        case: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a forecast-error scenario file.
    GenScenarios(GenArgs),
    /// Solve one method on an in-sample scenario file.
    Solve(SolveArgs),
    /// Evaluate a solution file on an out-of-sample scenario file.
    Evaluate(EvaluateArgs),
    /// Summarize report files into a table and a scatter figure.
    Report(ReportArgs),
    /// Repeated in-sample solves of several methods on a shared out-of-sample set.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Case file or built-in case name.
    #[arg(long)]
    pub case: String,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long)]
    pub seed: u64,
    /// Standard deviation as a fraction of the forecast.
    #[arg(long, default_value_t = 0.15)]
    pub sigma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Violation (jcc) or activation (amgc) probability.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long)]
    pub no_screening: bool,
    #[arg(long)]
    pub no_cuts: bool,
    /// Bisection tolerance of the heuristic, in scenarios.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Per-solve wall-clock limit in seconds.
    #[arg(long, default_value_t = 36_000.0)]
    pub time_limit: f64,
}

impl SolverArgs {
    fn options(&self) -> CliResult<SolveOptions> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(CliError::Usage(format!("--epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if !(self.delta > 0.0) {
            return Err(CliError::Usage("--delta must be positive".into()));
        }
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return Err(CliError::Usage("--time-limit must be a positive number of seconds".into()));
        }
        Ok(SolveOptions {
            epsilon: self.epsilon,
            screening: !self.no_screening,
            cuts: !self.no_cuts,
            heuristic: HeuristicConfig { delta: self.delta, ..Default::default() },
            time_limit: Some(Duration::from_secs_f64(self.time_limit)),
            ..Default::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub case: String,
    #[arg(long)]
    pub scenarios: PathBuf,
    #[arg(long)]
    pub method: Method,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub case: String,
    #[arg(long)]
    pub solution: PathBuf,
    /// Out-of-sample scenario file.
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Deviation penalty; defaults to twice the highest energy cost.
    #[arg(long)]
    pub penalty: Option<f64>,
    /// Repetition index recorded in the report.
    #[arg(long, default_value_t = 0)]
    pub rep: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report files written by `evaluate` or `experiment`.
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub case: String,
    /// Methods to compare (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "agc-robust,agc-jcc,amgc,amgc-h")]
    pub method: Vec<Method>,
    #[arg(long, default_value_t = 1000)]
    pub in_samples: usize,
    #[arg(long, default_value_t = 100_000)]
    pub out_samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long, default_value_t = 0.15)]
    pub sigma: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Reads a case file, or falls back to a built-in case of that name.
pub fn load_case(spec: &str) -> CliResult<GridCase> {
    let path = Path::new(spec);
    let case = if path.exists() {
        read_case(path)?
    } else {
        cases::by_name(spec)
            .ok_or_else(|| CliError::Usage(format!("{spec}: no such file and no built-in case of that name")))?
    };
    case.ensure_valid()?;
    Ok(case)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| sopf::Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| sopf::Error::io(path, e).into())
}

fn penalty_for(case: &GridCase, p: Option<f64>) -> CliResult<f64> {
    match p {
        Some(p) if !(p >= 0.0 && p.is_finite()) => Err(CliError::Usage("--penalty must be non-negative".into())),
        Some(p) => Ok(p),
        None => Ok(default_penalty(case)),
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::ExportCase { case, out } => {
            let case = load_case(case)?;
            if let Some(dir) = out.parent() {
                fs::create_dir_all(dir).map_err(|e| sopf::Error::io(dir, e))?;
            }
            write_case(out, &case)?;
            Ok(())
        }
        Command::GenScenarios(a) => gen_scenarios(a),
        Command::Solve(a) => solve(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Report(a) => report(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn gen_scenarios(a: &GenArgs) -> CliResult<()> {
    let case = load_case(&a.case)?;
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(CliError::Usage("--sigma must be non-negative".into()));
    }
    let spec = DistributionSpec { sigma_factor: a.sigma, correlation: None };
    let set = sample(&case, &spec, a.count as usize, a.seed)?;
    if let Some(dir) = a.out.parent() {
        fs::create_dir_all(dir).map_err(|e| sopf::Error::io(dir, e))?;
    }
    write_scenarios(&a.out, &set, &case.content_hash())?;
    Ok(())
}

fn check_hash(what: &Path, found: &str, case: &GridCase) -> CliResult<()> {
    let expected = case.content_hash();
    if found != expected {
        return Err(CliError::Core(sopf::Error::Case(format!(
            "{} was made for case {found}, but the given case is {expected}",
            what.display()
        ))));
    }
    Ok(())
}

fn solve(a: &SolveArgs) -> CliResult<()> {
    let case = load_case(&a.case)?;
    let (set, hash) = read_scenarios(&a.scenarios)?;
    check_hash(&a.scenarios, &hash, &case)?;
    let opts = a.solver.options()?;
    let ptdf = compute_ptdf(&case)?;
    let outcome = solve_method(a.method, &case, &set, &ptdf, &opts)?;
    let file = SolutionFile::new(&outcome, opts.epsilon, &hash, set.len(), set.seed);
    write_solution(&a.out_dir.join("solution.toml"), &file)?;
    let mut log = String::from("method,status,objective,bound,gap,nodes,rows,columns,seconds\n");
    let _ = writeln!(
        log,
        "{},{},{},{},{},{},{},{},{:.3}",
        outcome.method,
        outcome.status,
        outcome.solution.objective,
        outcome.bound,
        outcome.gap,
        outcome.nodes,
        outcome.rows,
        outcome.columns,
        outcome.seconds
    );
    write_text(&a.out_dir.join("solve_log.csv"), &log)?;
    if let Some(s) = &outcome.screening {
        write_text(&a.out_dir.join("screening.csv"), &s.to_csv())?;
    }
    if !outcome.bisection.is_empty() {
        let mut text = String::from("iteration,q,passed,relaxed_objective\n");
        for it in &outcome.bisection {
            let _ = writeln!(text, "{},{},{},{}", it.iteration, it.q, it.passed, it.objective);
        }
        write_text(&a.out_dir.join("bisection.csv"), &text)?;
    }
    println!("{}: {} objective {} in {:.2} s", outcome.method, outcome.status, outcome.solution.objective, outcome.seconds);
    if outcome.status.is_limit() {
        return Err(CliError::Limit(format!("{} stopped at {} with gap {:.3e}", outcome.method, outcome.status, outcome.gap)));
    }
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> CliResult<()> {
    let case = load_case(&a.case)?;
    let sol = read_solution(&a.solution)?;
    check_hash(&a.solution, &sol.meta.case_hash, &case)?;
    let (out, hash) = read_scenarios(&a.scenarios)?;
    check_hash(&a.scenarios, &hash, &case)?;
    let fs = &sol.first_stage;
    let ng = case.generators.len();
    if [&fs.p, &fs.beta, &fs.r_cap_up, &fs.r_cap_down].iter().any(|v| v.len() != ng) {
        return Err(CliError::Core(sopf::Error::parse(&a.solution, format!("expected {ng} entries per vector"))));
    }
    let penalty = penalty_for(&case, a.penalty)?;
    let ptdf = compute_ptdf(&case)?;
    let report = evaluate(fs, &case, &ptdf, &out, penalty)?;
    let meta = ReportMeta::new(&sol.meta.method, &hash, a.rep, sol.meta.epsilon, &report);
    write_report(&a.out_dir.join("report.csv"), &meta, &report)?;
    println!(
        "{}: A {:.2}% M {:.2}% D {:.2}% E[C] {:.4}",
        meta.method,
        100.0 * meta.frac_a,
        100.0 * meta.frac_m,
        100.0 * meta.frac_d,
        meta.expected_cost
    );
    Ok(())
}

fn write_summary(dir: &Path, reports: &[ReportFile]) -> CliResult<()> {
    write_text(&dir.join("summary.csv"), &summary_csv(reports)?)?;
    let points: Vec<Point> = reports
        .iter()
        .map(|r| Point { method: r.meta.method.clone(), deviation: r.meta.top5_deviation, cost: r.meta.expected_cost })
        .collect();
    write_text(&dir.join("scatter.svg"), &scatter_svg(&points))
}

fn report(a: &ReportArgs) -> CliResult<()> {
    if a.reports.is_empty() {
        return Err(CliError::Usage("report needs at least one report file".into()));
    }
    let reports = a.reports.iter().map(|p| read_report(p)).collect::<CliResult<Vec<_>>>()?;
    write_summary(&a.out_dir, &reports)?;
    print!("{}", summary_csv(&reports)?);
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> CliResult<()> {
    let case = load_case(&a.case)?;
    if a.in_samples == 0 || a.out_samples == 0 || a.reps == 0 {
        return Err(CliError::Usage("--in-samples, --out-samples and --reps must be at least 1".into()));
    }
    if a.method.is_empty() {
        return Err(CliError::Usage("--method needs at least one method".into()));
    }
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(CliError::Usage("--sigma must be non-negative".into()));
    }
    let spec = ExperimentSpec {
        methods: a.method.clone(),
        in_samples: a.in_samples,
        out_samples: a.out_samples,
        seed: a.seed,
        reps: a.reps,
        penalty: Some(penalty_for(&case, a.penalty)?),
        distribution: DistributionSpec { sigma_factor: a.sigma, correlation: None },
        solve: a.solver.options()?,
    };
    let hash = case.content_hash();
    let runs = run_experiment(&case, &spec)?;
    let mut reports = Vec::new();
    let mut timing = String::from("rep,method,status,objective,gap,nodes,seconds\n");
    let mut limited = Vec::new();
    for r in &runs {
        let dir = a.out_dir.join(format!("rep{}", r.rep)).join(r.outcome.method.as_str());
        let sol = SolutionFile::new(&r.outcome, spec.solve.epsilon, &hash, spec.in_samples, Some(spec.in_seed(r.rep)));
        write_solution(&dir.join("solution.toml"), &sol)?;
        let meta = ReportMeta::new(r.outcome.method.as_str(), &hash, r.rep, sol.meta.epsilon, &r.report);
        write_report(&dir.join("report.csv"), &meta, &r.report)?;
        reports.push(ReportFile { meta, rows: Vec::new() });
        let o = &r.outcome;
        let _ = writeln!(timing, "{},{},{},{},{},{},{:.3}", r.rep, o.method, o.status, o.solution.objective, o.gap, o.nodes, o.seconds);
        if o.status.is_limit() {
            limited.push(format!("{} in repetition {}", o.method, r.rep));
        }
    }
    write_text(&a.out_dir.join("timing.csv"), &timing)?;
    write_summary(&a.out_dir, &reports)?;
    print!("{}", summary_csv(&reports)?);
    if !limited.is_empty() {
        return Err(CliError::Limit(format!("solver limit reached for {}", limited.join(", "))));
    }
    Ok(())
}
