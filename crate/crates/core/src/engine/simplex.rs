//! Dense bounded-variable primal simplex with two phases.
//!
//! Every row `a x (sense) b` gets a slack `s` with `a x + s = b`; the slack
//! bounds encode the sense. Rows whose slack starts outside its bounds get
//! an artificial variable, and phase 1 minimizes their sum.

use crate::model::{ModelIR, Sense};

const PIVOT_TOL: f64 = 1e-11;
const DUAL_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { objective: f64, values: Vec<f64> },
    Infeasible,
    Unbounded,
    IterationCap,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

struct Tableau {
    m: usize,
    ncol: usize,
    /// Original `[A | I | art]`, row-major, used for refactoring.
    orig: Vec<f64>,
    orig_rhs: Vec<f64>,
    t: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    /// Row of each basic column.
    row_of: Vec<Option<usize>>,
    iterations: usize,
    pivots_since_refactor: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncol + j]
    }

    fn compute_duals(&mut self) {
        let mut d = self.cost.clone();
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = self.cost[bj];
            if cb != 0.0 {
                let row = &self.t[i * self.ncol..(i + 1) * self.ncol];
                for (dj, &tij) in d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for &bj in &self.basis {
            d[bj] = 0.0;
        }
        self.d = d;
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.ncol;
        let p = self.t[r * n + j];
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[j] = 1.0;
        }
        let pivot_row: Vec<f64> = self.t[r * n..(r + 1) * n].to_vec();
        let nz: Vec<usize> = (0..n).filter(|&k| pivot_row[k] != 0.0).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for &k in &nz {
                let v = row[k] - f * pivot_row[k];
                row[k] = if v.abs() < 1e-14 { 0.0 } else { v };
            }
            row[j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for &k in &nz {
                self.d[k] -= f * pivot_row[k];
            }
            self.d[j] = 0.0;
        }
        let leaving = self.basis[r];
        self.row_of[leaving] = None;
        self.basis[r] = j;
        self.row_of[j] = Some(r);
        self.pivots_since_refactor += 1;
    }

    /// Rebuilds `B^-1 [A | I | art]` and the basic values from the original
    /// data. Returns false if the basis looks singular.
    fn refactor(&mut self) -> bool {
        let n = self.ncol;
        let m = self.m;
        let mut t = self.orig.clone();
        let mut rhs = self.orig_rhs.clone();
        let cols: Vec<usize> = self.basis.clone();
        let mut assigned = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        for &j in &cols {
            let mut best = None;
            let mut best_v = 1e-12;
            for i in 0..m {
                if !assigned[i] && t[i * n + j].abs() > best_v {
                    best_v = t[i * n + j].abs();
                    best = Some(i);
                }
            }
            let Some(r) = best else { return false };
            assigned[r] = true;
            new_basis[r] = j;
            let p = t[r * n + j];
            for k in 0..n {
                t[r * n + k] /= p;
            }
            rhs[r] /= p;
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = t[i * n + j];
                if f == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let v = t[i * n + k] - f * t[r * n + k];
                    t[i * n + k] = if v.abs() < 1e-14 { 0.0 } else { v };
                }
                t[i * n + j] = 0.0;
                rhs[i] -= f * rhs[r];
            }
        }
        self.t = t;
        self.basis = new_basis;
        self.row_of = vec![None; n];
        for (i, &j) in self.basis.iter().enumerate() {
            self.row_of[j] = Some(i);
        }
        for i in 0..m {
            let mut v = rhs[i];
            for k in 0..n {
                if self.row_of[k].is_none() && self.x[k] != 0.0 {
                    v -= self.t[i * n + k] * self.x[k];
                }
            }
            self.x[self.basis[i]] = v;
        }
        self.compute_duals();
        self.pivots_since_refactor = 0;
        true
    }

    fn can_increase(&self, j: usize) -> bool {
        self.x[j] < self.ub[j] - PRIMAL_TOL
    }

    fn can_decrease(&self, j: usize) -> bool {
        self.x[j] > self.lb[j] + PRIMAL_TOL
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncol {
            if self.row_of[j].is_some() {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -DUAL_TOL && self.can_increase(j) {
                1.0
            } else if dj > DUAL_TOL && self.can_decrease(j) {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(b, _)| dj.abs() > self.d[b].abs()) {
                best = Some((j, dir));
            }
        }
        best
    }

    /// Runs the simplex loop on the current cost vector.
    fn optimize(&mut self, iter_cap: usize) -> Result<(), LpOutcome> {
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= iter_cap {
                return Err(LpOutcome::IterationCap);
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate >= DEGENERATE_LIMIT;
            let Some((j, dir)) = self.choose_entering(bland) else {
                return Ok(());
            };
            self.iterations += 1;

            let t_max = self.ub[j] - self.lb[j];
            let mut leave: Option<(usize, f64, bool)> = None;
            for i in 0..self.m {
                let alpha = dir * self.at(i, j);
                if alpha.abs() < PIVOT_TOL {
                    continue;
                }
                let bi = self.basis[i];
                let (limit, to_upper) = if alpha > 0.0 {
                    if self.lb[bi] == f64::NEG_INFINITY {
                        continue;
                    }
                    ((self.x[bi] - self.lb[bi]) / alpha, false)
                } else {
                    if self.ub[bi] == f64::INFINITY {
                        continue;
                    }
                    ((self.ub[bi] - self.x[bi]) / -alpha, true)
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < t_max || t_max.is_infinite(),
                    Some((r, l, _)) => {
                        if limit < l - 1e-12 {
                            true
                        } else if limit <= l + 1e-12 {
                            if bland {
                                bi < self.basis[r]
                            } else {
                                alpha.abs() > self.at(r, j).abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better && (limit <= t_max) {
                    leave = Some((i, limit, to_upper));
                }
            }

            let step = match leave {
                Some((_, l, _)) => l,
                None => t_max,
            };
            if step.is_infinite() {
                return Err(LpOutcome::Unbounded);
            }
            if step > 1e-12 {
                degenerate = 0;
            } else {
                degenerate += 1;
            }
            if step != 0.0 {
                for i in 0..self.m {
                    let a = self.at(i, j);
                    if a != 0.0 {
                        let bi = self.basis[i];
                        self.x[bi] -= dir * a * step;
                    }
                }
                self.x[j] += dir * step;
            }
            match leave {
                None => {
                    self.x[j] = if dir > 0.0 { self.ub[j] } else { self.lb[j] };
                }
                Some((r, _, to_upper)) => {
                    let bi = self.basis[r];
                    self.x[bi] = if to_upper { self.ub[bi] } else { self.lb[bi] };
                    self.pivot(r, j);
                }
            }
        }
    }
}

/// Solves the linear relaxation of `model` under the given bounds.
/// Integrality and quadratic rows are ignored.
pub(crate) fn solve_bounded(model: &ModelIR, lb: &[f64], ub: &[f64], iter_cap: usize) -> (LpOutcome, usize) {
    let nv = model.vars.len();
    let mut fixed = vec![None; nv];
    let mut col_of = vec![usize::MAX; nv];
    let mut cols = Vec::new();
    for j in 0..nv {
        if lb[j] > ub[j] + PRIMAL_TOL {
            return (LpOutcome::Infeasible, 0);
        }
        if ub[j] - lb[j] <= 1e-12 {
            fixed[j] = Some(lb[j]);
        } else {
            col_of[j] = cols.len();
            cols.push(j);
        }
    }
    let n = cols.len();

    let mut rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::new();
    for row in &model.rows {
        let mut rhs = row.rhs;
        let mut coefs = Vec::new();
        for &(v, c) in &row.coefs {
            match fixed[v.0] {
                Some(val) => rhs -= c * val,
                None => coefs.push((col_of[v.0], c)),
            }
        }
        if coefs.is_empty() {
            let tol = PRIMAL_TOL * (1.0 + rhs.abs());
            let ok = match row.sense {
                Sense::Le => rhs >= -tol,
                Sense::Ge => rhs <= tol,
                Sense::Eq => rhs.abs() <= tol,
            };
            if !ok {
                return (LpOutcome::Infeasible, 0);
            }
            continue;
        }
        rows.push((coefs, row.sense, rhs));
    }
    let m = rows.len();

    let mut obj_const = model.objective_constant;
    let mut cost_struct = vec![0.0; n];
    for &(v, c) in &model.objective {
        match fixed[v.0] {
            Some(val) => obj_const += c * val,
            None => cost_struct[col_of[v.0]] += c,
        }
    }

    let mut xs = vec![0.0; n];
    for (c, &j) in cols.iter().enumerate() {
        xs[c] = if lb[j].is_finite() {
            lb[j]
        } else if ub[j].is_finite() {
            ub[j]
        } else {
            0.0
        };
    }

    // decide which rows need an artificial
    let mut art_rows = Vec::new();
    let mut slack_val = vec![0.0; m];
    let mut art_sign = vec![0.0; m];
    let mut slack_bounds = Vec::with_capacity(m);
    for (i, (coefs, sense, rhs)) in rows.iter().enumerate() {
        let r = rhs - coefs.iter().map(|&(c, a)| a * xs[c]).sum::<f64>();
        let (slb, sub) = match sense {
            Sense::Le => (0.0, f64::INFINITY),
            Sense::Ge => (f64::NEG_INFINITY, 0.0),
            Sense::Eq => (0.0, 0.0),
        };
        slack_bounds.push((slb, sub));
        if r >= slb - PRIMAL_TOL && r <= sub + PRIMAL_TOL {
            slack_val[i] = r;
        } else {
            let s = r.clamp(slb, sub);
            slack_val[i] = s;
            art_sign[i] = if r - s > 0.0 { 1.0 } else { -1.0 };
            art_rows.push(i);
        }
    }
    let na = art_rows.len();
    let ncol = n + m + na;
    let first_art = n + m;

    let mut orig = vec![0.0; m * ncol];
    let mut orig_rhs = vec![0.0; m];
    for (i, (coefs, _, rhs)) in rows.iter().enumerate() {
        for &(c, a) in coefs {
            orig[i * ncol + c] += a;
        }
        orig[i * ncol + n + i] = 1.0;
        orig_rhs[i] = *rhs;
    }
    for (a, &i) in art_rows.iter().enumerate() {
        orig[i * ncol + first_art + a] = art_sign[i];
    }

    let mut lbv = Vec::with_capacity(ncol);
    let mut ubv = Vec::with_capacity(ncol);
    for &j in &cols {
        lbv.push(lb[j]);
        ubv.push(ub[j]);
    }
    for &(l, u) in &slack_bounds {
        lbv.push(l);
        ubv.push(u);
    }
    for _ in 0..na {
        lbv.push(0.0);
        ubv.push(f64::INFINITY);
    }

    let mut x = xs;
    x.extend_from_slice(&slack_val);
    x.extend(std::iter::repeat_n(0.0, na));
    let mut basis = vec![0; m];
    let mut art_of_row = vec![None; m];
    for (a, &i) in art_rows.iter().enumerate() {
        art_of_row[i] = Some(first_art + a);
    }
    let mut t = orig.clone();
    for i in 0..m {
        match art_of_row[i] {
            Some(aj) => {
                basis[i] = aj;
                let s = art_sign[i];
                if s < 0.0 {
                    for v in &mut t[i * ncol..(i + 1) * ncol] {
                        *v = -*v;
                    }
                }
                let r = rows[i].2 - rows[i].0.iter().map(|&(c, a)| a * x[c]).sum::<f64>() - slack_val[i];
                x[aj] = r.abs();
            }
            None => basis[i] = n + i,
        }
    }
    let mut row_of = vec![None; ncol];
    for (i, &j) in basis.iter().enumerate() {
        row_of[j] = Some(i);
    }

    let mut cost = vec![0.0; ncol];
    for c in first_art..ncol {
        cost[c] = 1.0;
    }
    let mut tab = Tableau {
        m,
        ncol,
        orig,
        orig_rhs,
        t,
        lb: lbv,
        ub: ubv,
        cost,
        x,
        d: vec![],
        basis,
        row_of,
        iterations: 0,
        pivots_since_refactor: 0,
    };
    tab.compute_duals();

    let mut phase = Phase::One;
    if na == 0 {
        phase = Phase::Two;
    }
    loop {
        if phase == Phase::Two {
            let mut cost = vec![0.0; ncol];
            cost[..n].copy_from_slice(&cost_struct);
            tab.cost = cost;
            tab.compute_duals();
        }
        if let Err(out) = tab.optimize(iter_cap) {
            return (out, tab.iterations);
        }
        tab.refactor();
        // re-check optimality after refactoring removes drift
        if let Err(out) = tab.optimize(iter_cap) {
            return (out, tab.iterations);
        }
        if phase == Phase::Two {
            break;
        }
        let infeas: f64 = (first_art..ncol).map(|j| tab.x[j]).sum();
        let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        if infeas > 1e-9 * scale {
            return (LpOutcome::Infeasible, tab.iterations);
        }
        for j in first_art..ncol {
            tab.ub[j] = 0.0;
            tab.x[j] = 0.0;
        }
        // drive basic artificials out where possible
        for r in 0..m {
            let bj = tab.basis[r];
            if bj < first_art {
                continue;
            }
            let mut best = None;
            let mut best_v = 1e-9;
            for j in 0..first_art {
                if tab.row_of[j].is_none() && tab.at(r, j).abs() > best_v {
                    best_v = tab.at(r, j).abs();
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                tab.pivot(r, j);
            }
        }
        tab.refactor();
        phase = Phase::Two;
    }

    let mut values = vec![0.0; nv];
    for j in 0..nv {
        values[j] = match fixed[j] {
            Some(v) => v,
            None => tab.x[col_of[j]].clamp(lb[j], ub[j]),
        };
    }
    let objective = obj_const + (0..n).map(|c| cost_struct[c] * tab.x[c]).sum::<f64>();
    (LpOutcome::Optimal { objective, values }, tab.iterations)
}
