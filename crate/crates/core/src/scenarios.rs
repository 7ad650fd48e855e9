//! Wind forecast-error scenarios.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::GridCase;

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    /// Standard deviation as a fraction of each node's forecast.
    pub sigma_factor: f64,
    /// Node correlation matrix; `None` means independent nodes.
    pub correlation: Option<DMatrix<f64>>,
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec { sigma_factor: 0.15, correlation: None }
    }
}

impl DistributionSpec {
    pub fn describe(&self) -> String {
        match &self.correlation {
            None => format!("normal sigma_factor={} correlation=identity", self.sigma_factor),
            Some(_) => format!("normal sigma_factor={} correlation=custom", self.sigma_factor),
        }
    }
}

/// Equiprobable forecast-error atoms, stored scenario by scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    nodes: usize,
    omega: Vec<f64>,
    totals: Vec<f64>,
    probability: f64,
    pub seed: Option<u64>,
    pub sigma_factor: Option<f64>,
    pub covariance_spec: String,
}

impl ScenarioSet {
    fn from_columns(nodes: usize, omega: Vec<f64>) -> ScenarioSet {
        let count = omega.len() / nodes.max(1);
        let totals = if nodes == 0 { vec![0.0; count] } else { omega.chunks(nodes).map(|c| c.iter().sum()).collect() };
        ScenarioSet {
            nodes,
            omega,
            totals,
            probability: 1.0 / count as f64,
            seed: None,
            sigma_factor: None,
            covariance_spec: "explicit atoms".into(),
        }
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    /// Forecast errors of scenario `s`, one entry per node.
    pub fn scenario(&self, s: usize) -> &[f64] {
        &self.omega[s * self.nodes..(s + 1) * self.nodes]
    }

    pub fn error(&self, node: usize, s: usize) -> f64 {
        self.omega[s * self.nodes + node]
    }

    pub fn probability(&self, _s: usize) -> f64 {
        self.probability
    }

    pub fn probabilities(&self) -> Vec<f64> {
        vec![self.probability; self.len()]
    }

    /// Aggregate errors, one per scenario.
    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    /// First `count` scenarios as a new set.
    pub fn truncated(&self, count: usize) -> ScenarioSet {
        let count = count.min(self.len()).max(1);
        let mut out = ScenarioSet::from_columns(self.nodes, self.omega[..count * self.nodes].to_vec());
        out.seed = self.seed;
        out.sigma_factor = self.sigma_factor;
        out.covariance_spec = self.covariance_spec.clone();
        out
    }
}

pub fn aggregate(set: &ScenarioSet, s: usize) -> Result<f64> {
    set.totals.get(s).copied().ok_or(Error::ScenarioIndex { index: s, count: set.len() })
}

/// Wraps explicit atoms `errors[n][s]` with uniform probabilities.
pub fn fixed_set(errors: &[Vec<f64>]) -> Result<ScenarioSet> {
    let nodes = errors.len();
    let count = errors.first().map_or(0, Vec::len);
    if nodes == 0 || count == 0 {
        return Err(Error::Scenarios("scenario matrix is empty".into()));
    }
    if errors.iter().any(|r| r.len() != count) {
        return Err(Error::Scenarios("scenario matrix is ragged".into()));
    }
    if errors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Scenarios("scenario errors must be finite".into()));
    }
    let mut omega = Vec::with_capacity(nodes * count);
    for s in 0..count {
        omega.extend(errors.iter().map(|row| row[s]));
    }
    Ok(ScenarioSet::from_columns(nodes, omega))
}

/// Factor `F` with `F F' = C`, from the eigen decomposition so that
/// semidefinite matrices are accepted.
fn correlation_factor(c: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::Scenarios(format!("correlation must be {n}x{n}")));
    }
    for i in 0..n {
        if (c[(i, i)] - 1.0).abs() > 1e-9 {
            return Err(Error::Scenarios("correlation diagonal must be 1".into()));
        }
        for j in 0..i {
            if (c[(i, j)] - c[(j, i)]).abs() > 1e-9 {
                return Err(Error::Scenarios("correlation must be symmetric".into()));
            }
        }
    }
    let eig = SymmetricEigen::new(c.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-9 {
        return Err(Error::NotPsd(min));
    }
    let mut f = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        f.column_mut(k).scale_mut(s);
    }
    Ok(f)
}

/// Draws `count` scenarios of zero-mean normal errors with standard deviation
/// `sigma_factor * forecast` per node (ChaCha8 stream seeded by `seed`).
pub fn sample(case: &GridCase, spec: &DistributionSpec, count: usize, seed: u64) -> Result<ScenarioSet> {
    if count == 0 {
        return Err(Error::Scenarios("scenario count must be at least 1".into()));
    }
    if !(spec.sigma_factor >= 0.0 && spec.sigma_factor.is_finite()) {
        return Err(Error::Scenarios("sigma_factor must be finite and non-negative".into()));
    }
    let n = case.num_nodes();
    let sigma: Vec<f64> = case.nodes.iter().map(|x| spec.sigma_factor * x.wind_forecast).collect();
    let factor = spec.correlation.as_ref().map(|c| correlation_factor(c, n)).transpose()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut omega = Vec::with_capacity(n * count);
    let mut z = vec![0.0; n];
    for _ in 0..count {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        match &factor {
            None => omega.extend(z.iter().zip(&sigma).map(|(z, s)| z * s)),
            Some(f) => {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (k, zk) in z.iter().enumerate() {
                        acc += f[(i, k)] * zk;
                    }
                    omega.push(sigma[i] * acc);
                }
            }
        }
    }
    let mut set = ScenarioSet::from_columns(n, omega);
    set.seed = Some(seed);
    set.sigma_factor = Some(spec.sigma_factor);
    set.covariance_spec = spec.describe();
    Ok(set)
}

/// Header-prefixed text: comment lines, then one comma-separated row per node.
pub fn to_text(set: &ScenarioSet, case_hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# case_hash = {case_hash}");
    let _ = writeln!(out, "# seed = {}", set.seed.map_or("none".to_string(), |s| s.to_string()));
    let _ = writeln!(out, "# count = {}", set.len());
    let _ = writeln!(out, "# sigma_factor = {}", set.sigma_factor.map_or("none".to_string(), |s| s.to_string()));
    let _ = writeln!(out, "# covariance = {}", set.covariance_spec);
    for n in 0..set.nodes {
        let row: Vec<String> = (0..set.len()).map(|s| format!("{:.16e}", set.error(n, s))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parsed scenario file: the set and the case hash from its header.
pub fn from_text(text: &str) -> std::result::Result<(ScenarioSet, String), String> {
    let mut hash = String::new();
    let mut seed = None;
    let mut sigma = None;
    let mut count = None;
    let mut cov = String::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(h) = line.strip_prefix('#') {
            let Some((k, v)) = h.split_once('=') else { continue };
            let v = v.trim();
            match k.trim() {
                "case_hash" => hash = v.to_string(),
                "seed" if v != "none" => seed = Some(v.parse::<u64>().map_err(|e| format!("line {}: {e}", i + 1))?),
                "sigma_factor" if v != "none" => {
                    sigma = Some(v.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1))?)
                }
                "count" => count = Some(v.parse::<usize>().map_err(|e| format!("line {}: {e}", i + 1))?),
                "covariance" => cov = v.to_string(),
                _ => {}
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let mut set = fixed_set(&rows).map_err(|e| e.to_string())?;
    if let Some(c) = count {
        if c != set.len() {
            return Err(format!("header count {c} but {} columns", set.len()));
        }
    }
    set.seed = seed;
    set.sigma_factor = sigma;
    if !cov.is_empty() {
        set.covariance_spec = cov;
    }
    Ok((set, hash))
}

pub fn write_scenarios(path: impl AsRef<Path>, set: &ScenarioSet, case_hash: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_text(set, case_hash)).map_err(|e| Error::io(path, e))
}

pub fn read_scenarios(path: impl AsRef<Path>) -> Result<(ScenarioSet, String)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text).map_err(|m| Error::parse(path, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridCase, Node};

    fn flat(n: usize, forecast: f64) -> GridCase {
        GridCase {
            nodes: (0..n).map(|id| Node { id, load: 0.0, wind_forecast: forecast }).collect(),
            generators: vec![],
            lines: vec![],
            slack_node: 0,
            mva_base: None,
        }
    }

    #[test]
    fn zero_forecast_or_sigma_gives_zero_errors() {
        let s = sample(&flat(3, 0.0), &DistributionSpec::default(), 50, 1).unwrap();
        assert!(s.omega.iter().all(|&v| v == 0.0));
        let spec = DistributionSpec { sigma_factor: 0.0, correlation: None };
        let s = sample(&flat(3, 20.0), &spec, 50, 1).unwrap();
        assert!(s.omega.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregates_of_small_columns() {
        let s = fixed_set(&[vec![20.0, 10.0], vec![0.0, -10.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(aggregate(&s, 0).unwrap(), 20.0);
        assert_eq!(aggregate(&s, 1).unwrap(), 0.0);
        assert!(matches!(aggregate(&s, 2), Err(Error::ScenarioIndex { index: 2, count: 2 })));
    }

    #[test]
    fn fixed_set_probabilities_and_errors() {
        let s = fixed_set(&[vec![0.0; 3], vec![0.0; 3], vec![20.0, 10.0, -20.0]]).unwrap();
        assert_eq!(s.probabilities(), vec![1.0 / 3.0; 3]);
        assert_eq!(aggregate(&s, 2).unwrap(), -20.0);
        assert_eq!(fixed_set(&[vec![4.0]]).unwrap().probability(0), 1.0);
        assert!(fixed_set(&[]).is_err());
        assert!(fixed_set(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn non_psd_correlation_is_rejected() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 1.0]);
        let spec = DistributionSpec { sigma_factor: 0.15, correlation: Some(c) };
        assert!(matches!(sample(&flat(2, 10.0), &spec, 5, 0), Err(Error::NotPsd(_))));
    }

    #[test]
    fn perfect_correlation_is_accepted() {
        let c = DMatrix::from_element(2, 2, 1.0);
        let spec = DistributionSpec { sigma_factor: 0.1, correlation: Some(c) };
        let s = sample(&flat(2, 10.0), &spec, 20, 3).unwrap();
        for k in 0..20 {
            assert!((s.error(0, k) - s.error(1, k)).abs() < 1e-9);
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let s = sample(&flat(3, 17.0), &DistributionSpec::default(), 40, 9).unwrap();
        let (back, hash) = from_text(&to_text(&s, "abc")).unwrap();
        assert_eq!(hash, "abc");
        assert_eq!(back, s);
    }
}
