use std::collections::HashMap;

use crate::error::{Error, Result};

/// Index of a variable inside a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Index of a constraint inside a [`LinearModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimisation problem over continuous and binary variables.
///
/// Names are checked for uniqueness on insertion so that solution lookups by
/// name are unambiguous.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Constant added to the objective value.
    pub objective_offset: f64,
    var_index: HashMap<String, usize>,
    row_index: HashMap<String, usize>,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> Result<VarId> {
        self.push_var(name.into(), lower, upper, cost, false)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> Result<VarId> {
        self.push_var(name.into(), 0.0, 1.0, cost, true)
    }

    fn push_var(&mut self, name: String, lower: f64, upper: f64, cost: f64, binary: bool) -> Result<VarId> {
        if lower > upper || lower.is_nan() || upper.is_nan() {
            return Err(Error::Model(format!("variable {name}: bounds [{lower}, {upper}] are inconsistent")));
        }
        if binary && (lower < 0.0 || upper > 1.0) {
            return Err(Error::Model(format!("binary variable {name} must have bounds within [0, 1]")));
        }
        if !cost.is_finite() {
            return Err(Error::Model(format!("variable {name}: objective coefficient must be finite")));
        }
        if self.var_index.contains_key(&name) {
            return Err(Error::Model(format!("duplicate variable name {name}")));
        }
        let id = self.variables.len();
        self.var_index.insert(name.clone(), id);
        self.variables.push(Variable { name, lower, upper, binary, cost });
        Ok(VarId(id))
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<RowId> {
        let name = name.into();
        if self.row_index.contains_key(&name) {
            return Err(Error::Model(format!("duplicate constraint name {name}")));
        }
        if !rhs.is_finite() {
            return Err(Error::Model(format!("constraint {name}: right-hand side must be finite")));
        }
        let id = self.constraints.len();
        self.row_index.insert(name.clone(), id);
        self.constraints.push(Constraint { name, coeffs, sense, rhs });
        Ok(RowId(id))
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.var_index.get(name).copied().map(VarId)
    }

    pub fn row(&self, name: &str) -> Option<RowId> {
        self.row_index.get(name).copied().map(RowId)
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn has_binaries(&self) -> bool {
        self.variables.iter().any(|v| v.binary)
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables.iter().enumerate().filter(|(_, v)| v.binary).map(|(i, _)| VarId(i))
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) {
        self.constraints[row.0].rhs = rhs;
    }

    /// Drops the constraints for which `keep` returns false.
    pub fn retain_constraints(&mut self, mut keep: impl FnMut(&Constraint) -> bool) {
        self.constraints.retain(|c| keep(c));
        self.row_index = self.constraints.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
    }

    /// Rejects references to unknown variables and non-finite coefficients.
    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        for c in &self.constraints {
            for &(v, a) in &c.coeffs {
                if v.0 >= n {
                    return Err(Error::Model(format!("constraint {} references unknown variable #{}", c.name, v.0)));
                }
                if !a.is_finite() {
                    return Err(Error::Model(format!("constraint {} has a non-finite coefficient", c.name)));
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.variables.iter().zip(x).map(|(v, xi)| v.cost * xi).sum::<f64>()
    }

    pub fn row_activity(&self, row: &Constraint, x: &[f64]) -> f64 {
        row.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xi) in self.variables.iter().zip(x) {
            worst = worst.max(v.lower - xi).max(xi - v.upper);
        }
        for c in &self.constraints {
            let act = self.row_activity(c, x);
            let viol = match c.sense {
                Sense::Le => act - c.rhs,
                Sense::Ge => c.rhs - act,
                Sense::Eq => (act - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Name and size of the most violated bound or row, if any exceeds `tol`.
    pub fn worst_violation(&self, x: &[f64], tol: f64) -> Option<(String, f64)> {
        let mut worst: Option<(String, f64)> = None;
        let mut note = |name: &str, viol: f64| {
            if viol > tol && worst.as_ref().is_none_or(|w| viol > w.1) {
                worst = Some((name.to_string(), viol));
            }
        };
        for (v, &xi) in self.variables.iter().zip(x) {
            note(&v.name, (v.lower - xi).max(xi - v.upper));
        }
        for c in &self.constraints {
            let act = self.row_activity(c, x);
            let viol = match c.sense {
                Sense::Le => act - c.rhs,
                Sense::Ge => c.rhs - act,
                Sense::Eq => (act - c.rhs).abs(),
            };
            note(&c.name, viol);
        }
        worst
    }

    /// Copy of the model with every binary flag cleared; bounds stay in [0, 1].
    pub fn relax_binaries(&self) -> LinearModel {
        let mut relaxed = self.clone();
        for v in &mut relaxed.variables {
            v.binary = false;
        }
        relaxed
    }
}

/// Clears integrality on every binary variable.
pub fn relax_binaries(model: &LinearModel) -> LinearModel {
    model.relax_binaries()
}
