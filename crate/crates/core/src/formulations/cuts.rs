//! Order-statistic reserve-capacity inequalities.

use crate::scenarios::ScenarioSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutDirection {
    /// `beta_k * v <= r_up_k`
    Up,
    /// `beta_k * v <= r_down_k`
    Down,
}

/// Inequality `coefficient * beta_k <= r_k` applied to every reserve generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileCut {
    pub direction: CutDirection,
    pub coefficient: f64,
}

/// With at most `q` scenarios allowed to leave AGC, the `(q+1)`-th largest
/// upward requirement `-Omega_s` bounds `r_up / beta` from below (and
/// likewise `Omega_s` for `r_down`). Requires `q < |S|`.
pub fn reserve_quantile_cuts(scenarios: &ScenarioSet, q: usize) -> Vec<QuantileCut> {
    assert!(q < scenarios.len(), "cuts need q < |S|");
    let kth_largest = |mut v: Vec<f64>| {
        v.sort_by(|a, b| b.total_cmp(a));
        v[q]
    };
    let totals = scenarios.totals();
    vec![
        QuantileCut { direction: CutDirection::Up, coefficient: kth_largest(totals.iter().map(|o| -o).collect()) },
        QuantileCut { direction: CutDirection::Down, coefficient: kth_largest(totals.to_vec()) },
    ]
}
