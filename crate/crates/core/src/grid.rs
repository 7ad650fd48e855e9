//! Static network data and DC power transfer distribution factors.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: usize,
    /// MW
    pub load: f64,
    /// MW
    pub wind_forecast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub node: usize,
    pub energy_cost: f64,
    pub res_cap_cost_up: f64,
    pub res_cap_cost_down: f64,
    pub deploy_cost_up: f64,
    pub deploy_cost_down: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub res_limit_up: f64,
    pub res_limit_down: f64,
}

impl Generator {
    pub fn provides_reserve(&self) -> bool {
        self.res_limit_up > 0.0 || self.res_limit_down > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub susceptance: f64,
    /// MW
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    pub nodes: Vec<Node>,
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
    pub slack_node: usize,
    pub mva_base: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn error(message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into() }
    }

    fn warning(message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

impl GridCase {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_load(&self) -> f64 {
        self.nodes.iter().map(|n| n.load).sum()
    }

    pub fn total_forecast(&self) -> f64 {
        self.nodes.iter().map(|n| n.wind_forecast).sum()
    }

    /// Indices of generators that can hold reserve capacity.
    pub fn reserve_generators(&self) -> Vec<usize> {
        (0..self.generators.len()).filter(|&g| self.generators[g].provides_reserve()).collect()
    }

    /// Fails with a message listing every error-level diagnostic.
    pub fn ensure_valid(&self) -> Result<()> {
        let errors: Vec<String> =
            validate_case(self).into_iter().filter(|d| d.severity == Severity::Error).map(|d| d.message).collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Case(errors.join("; ")))
        }
    }

    /// Stable digest of the case contents, used to tie scenario files to a case.
    pub fn content_hash(&self) -> String {
        let text = self.to_toml_string();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<GridCase, String> {
        let file: CaseFile = toml::from_str(text).map_err(|e| e.to_string())?;
        Ok(GridCase {
            nodes: file.nodes,
            generators: file.generators,
            lines: file.lines,
            slack_node: file.meta.slack_node,
            mva_base: file.meta.mva_base,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let file = CaseFile {
            meta: Meta { slack_node: self.slack_node, mva_base: self.mva_base },
            nodes: self.nodes.clone(),
            generators: self.generators.clone(),
            lines: self.lines.clone(),
        };
        toml::to_string(&file).expect("case serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    slack_node: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mva_base: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    meta: Meta,
    nodes: Vec<Node>,
    #[serde(default)]
    generators: Vec<Generator>,
    #[serde(default)]
    lines: Vec<Line>,
}

pub fn read_case(path: impl AsRef<Path>) -> Result<GridCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GridCase::from_toml_str(&text).map_err(|m| Error::parse(path, m))
}

pub fn write_case(path: impl AsRef<Path>, case: &GridCase) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, case.to_toml_string()).map_err(|e| Error::io(path, e))
}

fn check_ids(what: &str, ids: impl Iterator<Item = usize>, out: &mut Vec<Diagnostic>) {
    let ids: Vec<usize> = ids.collect();
    let mut sorted = ids.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        out.push(Diagnostic::error(format!("{what} ids unique: duplicated id")));
    } else if ids.iter().enumerate().any(|(i, &id)| i != id) {
        out.push(Diagnostic::error(format!("{what} ids contiguous: expected 0..{} in order", ids.len())));
    }
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Checks every case invariant. An empty list means the case is valid and
/// has enough generation capacity for the forecast net load.
pub fn validate_case(case: &GridCase) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = case.nodes.len();
    if n == 0 {
        out.push(Diagnostic::error("case has no nodes"));
        return out;
    }
    check_ids("node", case.nodes.iter().map(|x| x.id), &mut out);
    check_ids("line", case.lines.iter().map(|x| x.id), &mut out);
    for node in &case.nodes {
        if !finite_nonneg(node.load) {
            out.push(Diagnostic::error(format!("node {}: load must be finite and non-negative", node.id)));
        }
        if !finite_nonneg(node.wind_forecast) {
            out.push(Diagnostic::error(format!("node {}: wind forecast must be finite and non-negative", node.id)));
        }
    }
    if case.slack_node >= n {
        out.push(Diagnostic::error(format!("slack node {} does not exist", case.slack_node)));
    }
    for (g, gen) in case.generators.iter().enumerate() {
        if gen.node >= n {
            out.push(Diagnostic::error(format!("generator {g}: node {} does not exist", gen.node)));
        }
        let costs = [
            gen.energy_cost,
            gen.res_cap_cost_up,
            gen.res_cap_cost_down,
            gen.deploy_cost_up,
            gen.deploy_cost_down,
        ];
        if costs.iter().any(|c| !c.is_finite()) {
            out.push(Diagnostic::error(format!("generator {g}: costs must be finite")));
        }
        if !gen.p_min.is_finite() || !gen.p_max.is_finite() || gen.p_min > gen.p_max {
            out.push(Diagnostic::error(format!("generator {g}: p_min must not exceed p_max")));
        }
        if !finite_nonneg(gen.res_limit_up) || !finite_nonneg(gen.res_limit_down) {
            out.push(Diagnostic::error(format!("generator {g}: reserve limits must be finite and non-negative")));
        }
        if gen.deploy_cost_up < gen.deploy_cost_down {
            out.push(Diagnostic::warning(format!("generator {g}: deploy_cost_up below deploy_cost_down")));
        }
    }
    for line in &case.lines {
        if line.from >= n || line.to >= n {
            out.push(Diagnostic::error(format!("line {}: endpoint does not exist", line.id)));
        } else if line.from == line.to {
            out.push(Diagnostic::error(format!("line {}: from and to must differ", line.id)));
        }
        if !(line.susceptance > 0.0 && line.susceptance.is_finite()) {
            out.push(Diagnostic::error(format!("line {}: susceptance must be positive", line.id)));
        }
        if !(line.capacity > 0.0) {
            out.push(Diagnostic::error(format!("line {}: line capacity must be positive", line.id)));
        }
    }
    if out.iter().all(|d| d.severity != Severity::Error) && !is_connected(case) {
        out.push(Diagnostic::error("network not connected"));
    }
    let capacity: f64 = case.generators.iter().map(|g| g.p_max).sum();
    if capacity < case.total_load() - case.total_forecast() {
        out.push(Diagnostic::warning(format!(
            "total p_max {capacity} is below load minus forecast {}",
            case.total_load() - case.total_forecast()
        )));
    }
    out
}

fn is_connected(case: &GridCase) -> bool {
    let n = case.nodes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for l in &case.lines {
        if l.from < n && l.to < n {
            let (a, b) = (find(&mut parent, l.from), find(&mut parent, l.to));
            parent[a] = b;
        }
    }
    let root = find(&mut parent, 0);
    (0..n).all(|i| find(&mut parent, i) == root)
}

/// Dense line-by-node PTDF matrix (injection at a node, withdrawal at the slack).
#[derive(Debug, Clone, PartialEq)]
pub struct PtdfMatrix {
    lines: usize,
    nodes: usize,
    data: Vec<f64>,
}

impl PtdfMatrix {
    pub fn num_lines(&self) -> usize {
        self.lines
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    pub fn get(&self, line: usize, node: usize) -> f64 {
        self.data[line * self.nodes + node]
    }

    pub fn row(&self, line: usize) -> &[f64] {
        &self.data[line * self.nodes..(line + 1) * self.nodes]
    }

    /// Line flows for a vector of nodal injections.
    pub fn flows(&self, injection: &[f64]) -> Vec<f64> {
        (0..self.lines).map(|l| self.row(l).iter().zip(injection).map(|(b, x)| b * x).sum()).collect()
    }
}

pub fn compute_ptdf(case: &GridCase) -> Result<PtdfMatrix> {
    case.ensure_valid().or_else(|e| match e {
        Error::Case(msg) if msg == "network not connected" => Err(Error::Disconnected),
        other => Err(other),
    })?;
    let n = case.nodes.len();
    let slack = case.slack_node;
    let reduced = |i: usize| if i < slack { Some(i) } else if i > slack { Some(i - 1) } else { None };
    let mut bbus = DMatrix::<f64>::zeros(n - 1, n - 1);
    for l in &case.lines {
        let (a, b) = (reduced(l.from), reduced(l.to));
        if let Some(a) = a {
            bbus[(a, a)] += l.susceptance;
        }
        if let Some(b) = b {
            bbus[(b, b)] += l.susceptance;
        }
        if let (Some(a), Some(b)) = (a, b) {
            bbus[(a, b)] -= l.susceptance;
            bbus[(b, a)] -= l.susceptance;
        }
    }
    // X = reduced B^-1; angles per unit injection.
    let x = if n > 1 {
        bbus.lu().try_inverse().ok_or(Error::Disconnected)?
    } else {
        DMatrix::zeros(0, 0)
    };
    let angle = |bus: usize, inj: usize| match (reduced(bus), reduced(inj)) {
        (Some(i), Some(j)) => x[(i, j)],
        _ => 0.0,
    };
    let mut data = vec![0.0; case.lines.len() * n];
    for (li, l) in case.lines.iter().enumerate() {
        for k in 0..n {
            data[li * n + k] = l.susceptance * (angle(l.from, k) - angle(l.to, k));
        }
    }
    Ok(PtdfMatrix { lines: case.lines.len(), nodes: n, data })
}
