//! Sparse LU factorisation of simplex basis matrices.
//!
//! Markowitz-style elimination: singleton columns and rows are pivoted first
//! (no fill), the remaining bump is eliminated with threshold partial pivoting
//! choosing sparse columns first. A product-form eta file records basis
//! updates between refactorisations. Storage is flat and reused across
//! refactorisations.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Sparse column: (row, value) pairs.
pub type SparseCol = Vec<(usize, f64)>;

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;

/// Result of a failed factorisation: basis positions that could not be
/// pivoted and the rows left uncovered.
#[derive(Debug, Clone)]
pub struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
struct Workspace {
    rows: Vec<Vec<(usize, f64)>>,
    col_rows: Vec<Vec<usize>>,
    col_count: Vec<usize>,
    row_done: Vec<bool>,
    col_done: Vec<bool>,
    mark: Vec<usize>,
    seen: Vec<usize>,
    heap: BinaryHeap<Reverse<(usize, usize)>>,
    col_stack: Vec<usize>,
    row_stack: Vec<usize>,
    pivot_row: Vec<(usize, f64)>,
    entries: Vec<(usize, f64)>,
    examined: Vec<usize>,
}

impl Workspace {
    fn reset(&mut self, m: usize) {
        self.rows.resize_with(m, Vec::new);
        self.col_rows.resize_with(m, Vec::new);
        self.rows.iter_mut().for_each(Vec::clear);
        self.col_rows.iter_mut().for_each(Vec::clear);
        for v in [&mut self.row_done, &mut self.col_done] {
            v.clear();
            v.resize(m, false);
        }
        for v in [&mut self.mark, &mut self.seen] {
            v.clear();
            v.resize(m, usize::MAX);
        }
        self.col_count.clear();
        self.heap.clear();
        self.col_stack.clear();
        self.row_stack.clear();
    }

    /// Removes the entry of column `j` from row `r`, returning its value.
    fn take(&mut self, r: usize, j: usize) -> Option<f64> {
        let k = self.rows[r].iter().position(|e| e.0 == j)?;
        Some(self.rows[r].swap_remove(k).1)
    }

    fn decrement(&mut self, c: usize) {
        self.col_count[c] -= 1;
        self.heap.push(Reverse((self.col_count[c], c)));
        if self.col_count[c] == 1 {
            self.col_stack.push(c);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Factor {
    m: usize,
    // Elimination order k: pivot row, basis position, pivot value.
    piv_row: Vec<usize>,
    piv_pos: Vec<usize>,
    piv_val: Vec<f64>,
    // L multipliers of step k (row_i -= l * row_{piv_row[k]}), flat.
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    // Off-diagonal U entries of pivot row k, keyed by basis position, flat.
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    // Eta file.
    eta_pos: Vec<usize>,
    eta_pivot: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
    work: Workspace,
    scratch: RefCell<Vec<f64>>,
}

impl Factor {
    /// Factorises the m x m matrix whose j-th column is `cols[j]`.
    #[cfg(test)]
    pub fn new(m: usize, cols: &[SparseCol]) -> Result<Factor, Singular> {
        let mut f = Factor::default();
        let refs: Vec<&[(usize, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        f.refactor(m, &refs)?;
        Ok(f)
    }

    /// Refactorises in place, reusing storage.
    pub fn refactor(&mut self, m: usize, cols: &[&[(usize, f64)]]) -> Result<(), Singular> {
        assert_eq!(cols.len(), m);
        self.m = m;
        for v in [&mut self.piv_row, &mut self.piv_pos, &mut self.l_idx, &mut self.u_idx, &mut self.eta_pos, &mut self.eta_idx] {
            v.clear();
        }
        for v in [&mut self.piv_val, &mut self.l_val, &mut self.u_val, &mut self.eta_pivot, &mut self.eta_val] {
            v.clear();
        }
        self.l_start.clear();
        self.u_start.clear();
        self.eta_start.clear();
        self.l_start.push(0);
        self.u_start.push(0);
        self.eta_start.push(0);
        let mut scratch = self.scratch.borrow_mut();
        scratch.clear();
        scratch.resize(m, 0.0);
        drop(scratch);

        let mut w = std::mem::take(&mut self.work);
        let result = self.eliminate(m, cols, &mut w);
        self.work = w;
        result
    }

    fn push_step(&mut self, i: usize, j: usize, v: f64) {
        self.piv_row.push(i);
        self.piv_pos.push(j);
        self.piv_val.push(v);
        self.l_start.push(self.l_idx.len());
        self.u_start.push(self.u_idx.len());
    }

    fn eliminate(&mut self, m: usize, cols: &[&[(usize, f64)]], w: &mut Workspace) -> Result<(), Singular> {
        w.reset(m);
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col.iter() {
                if v != 0.0 {
                    w.rows[i].push((j, v));
                    w.col_rows[j].push(i);
                }
            }
            w.col_count.push(w.col_rows[j].len());
        }
        for j in 0..m {
            if w.col_count[j] == 1 {
                w.col_stack.push(j);
            }
            w.heap.push(Reverse((w.col_count[j], j)));
        }
        for i in 0..m {
            if w.rows[i].len() == 1 {
                w.row_stack.push(i);
            }
        }
        let mut step = 0usize;

        loop {
            // Column singletons: the pivot row becomes a U row, no elimination needed.
            if let Some(j) = w.col_stack.pop() {
                if w.col_done[j] || w.col_count[j] != 1 {
                    continue;
                }
                let Some(&i) = w.col_rows[j].iter().find(|&&i| !w.row_done[i] && w.rows[i].iter().any(|e| e.0 == j)) else {
                    continue;
                };
                let v = w.rows[i].iter().find(|e| e.0 == j).map(|e| e.1).unwrap();
                if v.abs() < SINGULAR_TOL {
                    continue;
                }
                let row = std::mem::take(&mut w.rows[i]);
                for &(c, u) in &row {
                    if c != j {
                        self.u_idx.push(c);
                        self.u_val.push(u);
                        w.decrement(c);
                    }
                }
                w.rows[i] = row;
                w.rows[i].clear();
                w.row_done[i] = true;
                w.col_done[j] = true;
                self.push_step(i, j, v);
                continue;
            }
            // Row singletons: eliminate the pivot column from the other rows without fill.
            if let Some(i) = w.row_stack.pop() {
                if w.row_done[i] || w.rows[i].len() != 1 {
                    continue;
                }
                let (j, v) = w.rows[i][0];
                if v.abs() < SINGULAR_TOL {
                    continue;
                }
                let targets = std::mem::take(&mut w.col_rows[j]);
                for &r in &targets {
                    if r == i || w.row_done[r] {
                        continue;
                    }
                    if let Some(a) = w.take(r, j) {
                        self.l_idx.push(r);
                        self.l_val.push(a / v);
                        if w.rows[r].len() == 1 {
                            w.row_stack.push(r);
                        }
                    }
                }
                w.col_rows[j] = targets;
                w.row_done[i] = true;
                w.col_done[j] = true;
                w.rows[i].clear();
                self.push_step(i, j, v);
                continue;
            }
            // General Markowitz step on the remaining bump.
            let Some((i, j, v)) = select_pivot(w) else {
                break;
            };
            step += 1;
            w.pivot_row.clear();
            w.pivot_row.extend(w.rows[i].iter().copied().filter(|e| e.0 != j));
            let targets = std::mem::take(&mut w.col_rows[j]);
            for &r in &targets {
                if r == i || w.row_done[r] || w.seen[r] == step {
                    continue;
                }
                w.seen[r] = step;
                let Some(a) = w.take(r, j) else { continue };
                let l = a / v;
                self.l_idx.push(r);
                self.l_val.push(l);
                for (idx, &(c, _)) in w.rows[r].iter().enumerate() {
                    w.mark[c] = idx;
                }
                for k in 0..w.pivot_row.len() {
                    let (c, u) = w.pivot_row[k];
                    let delta = -l * u;
                    let mk = w.mark[c];
                    if mk != usize::MAX && mk < w.rows[r].len() && w.rows[r][mk].0 == c {
                        w.rows[r][mk].1 += delta;
                    } else {
                        w.rows[r].push((c, delta));
                        w.col_rows[c].push(r);
                        w.col_count[c] += 1;
                        w.heap.push(Reverse((w.col_count[c], c)));
                    }
                }
                for &(c, _) in w.rows[r].iter() {
                    w.mark[c] = usize::MAX;
                }
                if w.rows[r].len() == 1 {
                    w.row_stack.push(r);
                }
            }
            w.col_rows[j] = targets;
            for k in 0..w.pivot_row.len() {
                let (c, u) = w.pivot_row[k];
                self.u_idx.push(c);
                self.u_val.push(u);
                w.decrement(c);
            }
            w.row_done[i] = true;
            w.col_done[j] = true;
            w.rows[i].clear();
            self.push_step(i, j, v);
        }

        if self.piv_row.len() < m {
            let positions = (0..m).filter(|&j| !w.col_done[j]).collect();
            let rows_left = (0..m).filter(|&i| !w.row_done[i]).collect();
            return Err(Singular { positions, rows: rows_left });
        }
        Ok(())
    }

    pub fn num_updates(&self) -> usize {
        self.eta_pos.len()
    }

    /// Nonzeros of the L and U factors.
    pub fn factor_size(&self) -> usize {
        self.l_idx.len() + self.u_idx.len()
    }

    /// Nonzeros accumulated by basis updates.
    pub fn eta_size(&self) -> usize {
        self.eta_idx.len()
    }

    /// Solves B x = b in place; on entry `b` is indexed by row, on exit by basis position.
    pub fn ftran(&self, b: &mut [f64]) {
        let mut x = self.scratch.borrow_mut();
        let steps = self.piv_row.len();
        for k in 0..steps {
            let br = b[self.piv_row[k]];
            if br != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_idx[e]] -= self.l_val[e] * br;
                }
            }
        }
        for k in (0..steps).rev() {
            let mut s = b[self.piv_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[e] * x[self.u_idx[e]];
            }
            x[self.piv_pos[k]] = s / self.piv_val[k];
        }
        for t in 0..self.eta_pos.len() {
            let pos = self.eta_pos[t];
            let xp = x[pos] / self.eta_pivot[t];
            x[pos] = xp;
            if xp != 0.0 {
                for e in self.eta_start[t]..self.eta_start[t + 1] {
                    x[self.eta_idx[e]] -= self.eta_val[e] * xp;
                }
            }
        }
        b.copy_from_slice(&x);
    }

    /// Solves B^T y = c in place; on entry `c` is indexed by basis position, on exit by row.
    pub fn btran(&self, c: &mut [f64]) {
        for t in (0..self.eta_pos.len()).rev() {
            let pos = self.eta_pos[t];
            let mut s = c[pos];
            for e in self.eta_start[t]..self.eta_start[t + 1] {
                s -= self.eta_val[e] * c[self.eta_idx[e]];
            }
            c[pos] = s / self.eta_pivot[t];
        }
        let mut z = self.scratch.borrow_mut();
        let steps = self.piv_row.len();
        for k in 0..steps {
            let zr = c[self.piv_pos[k]] / self.piv_val[k];
            z[self.piv_row[k]] = zr;
            if zr != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[e]] -= self.u_val[e] * zr;
                }
            }
        }
        for k in (0..steps).rev() {
            let mut s = 0.0;
            for e in self.l_start[k]..self.l_start[k + 1] {
                s += self.l_val[e] * z[self.l_idx[e]];
            }
            z[self.piv_row[k]] -= s;
        }
        c.copy_from_slice(&z);
    }

    /// Records the replacement of basis position `pos` by a column whose
    /// FTRAN image is `w`.
    pub fn update(&mut self, pos: usize, w: &[f64]) {
        for (i, &v) in w.iter().enumerate() {
            if i != pos && v != 0.0 {
                self.eta_idx.push(i);
                self.eta_val.push(v);
            }
        }
        self.eta_pos.push(pos);
        self.eta_pivot.push(w[pos]);
        self.eta_start.push(self.eta_idx.len());
    }
}

fn select_pivot(w: &mut Workspace) -> Option<(usize, usize, f64)> {
    // Few sparsest columns, threshold partial pivoting within each.
    let mut best: Option<(usize, usize, usize, f64)> = None;
    w.examined.clear();
    while let Some(Reverse((count, j))) = w.heap.pop() {
        if w.col_done[j] || w.col_count[j] != count || count == 0 {
            continue;
        }
        w.examined.push(j);
        w.entries.clear();
        for &r in &w.col_rows[j] {
            if w.row_done[r] || w.entries.iter().any(|&(rr, _)| rr == r) {
                continue;
            }
            if let Some(e) = w.rows[r].iter().find(|e| e.0 == j) {
                w.entries.push((r, e.1));
            }
        }
        let amax = w.entries.iter().fold(0.0f64, |a, e| a.max(e.1.abs()));
        if amax >= SINGULAR_TOL {
            for &(r, v) in &w.entries {
                if v.abs() < PIVOT_THRESHOLD * amax {
                    continue;
                }
                let cost = (w.rows[r].len() - 1) * (w.entries.len() - 1);
                let better = match best {
                    None => true,
                    Some((bc, _, _, bv)) => cost < bc || (cost == bc && v.abs() > bv.abs()),
                };
                if better {
                    best = Some((cost, r, j, v));
                }
            }
        }
        if w.examined.len() >= 4 && best.is_some() {
            break;
        }
    }
    for k in 0..w.examined.len() {
        let j = w.examined[k];
        w.heap.push(Reverse((w.col_count[j], j)));
    }
    best.map(|(_, r, j, v)| (r, j, v))
}
