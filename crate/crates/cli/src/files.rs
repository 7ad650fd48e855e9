//! Solution and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sopf::evaluator::{EvaluationReport, ScenarioClass};
use sopf::formulations::FirstStage;
use sopf::pipeline::{Method, SolveOutcome};

use crate::{CliError, CliResult};

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Core(sopf::Error::parse(path, e.to_string()))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| sopf::Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| sopf::Error::io(path, e).into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionMeta {
    pub method: String,
    pub status: String,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub epsilon: f64,
    pub case_hash: String,
    pub scenarios: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_seed: Option<u64>,
}

/// First-stage decisions plus enough metadata to evaluate them later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub meta: SolutionMeta,
    /// Scenarios in which manual adjustment or violation is allowed.
    pub activated: Vec<usize>,
    pub first_stage: FirstStage,
}

impl SolutionFile {
    pub fn new(outcome: &SolveOutcome, epsilon: f64, case_hash: &str, scenarios: usize, seed: Option<u64>) -> Self {
        let sol = &outcome.solution;
        SolutionFile {
            meta: SolutionMeta {
                method: outcome.method.to_string(),
                status: outcome.status.to_string(),
                objective: sol.objective,
                bound: outcome.bound,
                nodes: outcome.nodes,
                epsilon: if outcome.method == Method::AgcRobust { 0.0 } else { epsilon },
                case_hash: case_hash.to_string(),
                scenarios,
                scenario_seed: seed,
            },
            activated: sol.y.iter().enumerate().filter(|(_, &y)| y).map(|(s, _)| s).collect(),
            first_stage: sol.first_stage(),
        }
    }
}

pub fn write_solution(path: &Path, sol: &SolutionFile) -> CliResult<()> {
    let text = toml::to_string(sol).map_err(|e| io_err(path, e))?;
    write(path, &text)
}

pub fn read_solution(path: &Path) -> CliResult<SolutionFile> {
    let text = fs::read_to_string(path).map_err(|e| sopf::Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| io_err(path, e))
}

/// Header of a report file.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub method: String,
    pub case_hash: String,
    pub rep: usize,
    pub epsilon: f64,
    pub penalty: f64,
    pub frac_a: f64,
    pub frac_m: f64,
    pub frac_d: f64,
    pub expected_cost: f64,
    pub top5_deviation: f64,
}

impl ReportMeta {
    pub fn new(method: &str, case_hash: &str, rep: usize, epsilon: f64, report: &EvaluationReport) -> Self {
        ReportMeta {
            method: method.to_string(),
            case_hash: case_hash.to_string(),
            rep,
            epsilon,
            penalty: report.penalty,
            frac_a: report.frac_a,
            frac_m: report.frac_m,
            frac_d: report.frac_d,
            expected_cost: report.expected_cost,
            top5_deviation: report.top5_deviation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: usize,
    pub class: ScenarioClass,
    pub cost: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFile {
    pub meta: ReportMeta,
    pub rows: Vec<ReportRow>,
}

pub fn report_text(meta: &ReportMeta, report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# method = {}", meta.method);
    let _ = writeln!(out, "# case_hash = {}", meta.case_hash);
    let _ = writeln!(out, "# rep = {}", meta.rep);
    let _ = writeln!(out, "# epsilon = {}", meta.epsilon);
    let _ = writeln!(out, "# penalty = {}", meta.penalty);
    let _ = writeln!(out, "# frac_a = {}", meta.frac_a);
    let _ = writeln!(out, "# frac_m = {}", meta.frac_m);
    let _ = writeln!(out, "# frac_d = {}", meta.frac_d);
    let _ = writeln!(out, "# expected_cost = {}", meta.expected_cost);
    let _ = writeln!(out, "# top5_deviation = {}", meta.top5_deviation);
    out.push_str(&report.records_csv());
    out
}

pub fn write_report(path: &Path, meta: &ReportMeta, report: &EvaluationReport) -> CliResult<()> {
    write(path, &report_text(meta, report))
}

pub fn read_report(path: &Path) -> CliResult<ReportFile> {
    let text = fs::read_to_string(path).map_err(|e| sopf::Error::io(path, e))?;
    let mut kv = std::collections::HashMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.strip_prefix('#').and_then(|h| h.split_once('=')) {
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let get = |k: &str| kv.get(k).cloned().ok_or_else(|| io_err(path, format!("missing header field {k}")));
    let num = |k: &str| -> CliResult<f64> { get(k)?.parse().map_err(|e| io_err(path, format!("{k}: {e}"))) };
    let meta = ReportMeta {
        method: get("method")?,
        case_hash: get("case_hash")?,
        rep: get("rep")?.parse().map_err(|e| io_err(path, format!("rep: {e}")))?,
        epsilon: num("epsilon")?,
        penalty: num("penalty")?,
        frac_a: num("frac_a")?,
        frac_m: num("frac_m")?,
        frac_d: num("frac_d")?,
        expected_cost: num("expected_cost")?,
        top5_deviation: num("top5_deviation")?,
    };
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| io_err(path, "short row"));
        let class = match field(1)? {
            "A" => ScenarioClass::A,
            "M" => ScenarioClass::M,
            "D" => ScenarioClass::D,
            other => return Err(io_err(path, format!("unknown class {other:?}"))),
        };
        rows.push(ReportRow {
            scenario: field(0)?.parse().map_err(|e| io_err(path, e))?,
            class,
            cost: field(2)?.parse().map_err(|e| io_err(path, e))?,
            deviation: field(3)?.parse().map_err(|e| io_err(path, e))?,
        });
    }
    Ok(ReportFile { meta, rows })
}

/// Per-method averages over all given reports. Methods appear in their
/// canonical order, unknown names after them alphabetically.
pub fn summary_csv(reports: &[ReportFile]) -> CliResult<String> {
    let Some(first) = reports.first() else {
        return Err(CliError::Usage("no report files given".into()));
    };
    if let Some(bad) = reports.iter().find(|r| r.meta.case_hash != first.meta.case_hash) {
        return Err(CliError::Core(sopf::Error::Case(format!(
            "reports come from different cases ({} and {})",
            first.meta.case_hash, bad.meta.case_hash
        ))));
    }
    let rank = |m: &str| Method::ALL.iter().position(|x| x.as_str() == m).unwrap_or(Method::ALL.len());
    let mut methods: Vec<&str> = reports.iter().map(|r| r.meta.method.as_str()).collect();
    methods.sort_by(|a, b| rank(a).cmp(&rank(b)).then(a.cmp(b)));
    methods.dedup();
    let mut out = String::from("method,A%,M%,D%,E[C]\n");
    for m in methods {
        let group: Vec<&ReportMeta> = reports.iter().filter(|r| r.meta.method == m).map(|r| &r.meta).collect();
        let n = group.len() as f64;
        let mean = |f: fn(&ReportMeta) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / n;
        let _ = writeln!(
            out,
            "{m},{:.2},{:.2},{:.2},{:.2}",
            100.0 * mean(|r| r.frac_a),
            100.0 * mean(|r| r.frac_m),
            100.0 * mean(|r| r.frac_d),
            mean(|r| r.expected_cost)
        );
    }
    Ok(out)
}
