//! Solver-agnostic optimization model: bounded continuous and binary
//! variables, sparse linear rows, convex quadratic rows and a linear
//! objective to minimize.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Role of a variable, used to pull solution values back out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VarGroup {
    X,
    Chi,
    Alpha,
    Beta,
    Delta,
    PGen,
    QGen,
    POver,
    PFlow,
    QFlow,
    Theta,
    Sin,
    Cos,
    Phi,
    Epigraph,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
    pub group: VarGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    pub coefs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coefs.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row, zero when satisfied.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// `sum c_i y_i + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn var(v: VarId) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: vec![], constant: c }
    }

    pub fn term(mut self, v: VarId, c: f64) -> Self {
        self.terms.push((v, c));
        self
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(), constant: self.constant * s }
    }

    pub fn add(&mut self, other: &LinExpr) {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
    }
}

/// Convex quadratic constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum QuadConstraint {
    /// `p^2 + q^2 <= radius^2 * scale`, with `scale` a 0/1 status.
    Disc { name: String, p: VarId, q: VarId, radius: f64, scale: LinExpr },
    /// `sum_i t_i^2 <= rhs`.
    SumSquares { name: String, terms: Vec<LinExpr>, rhs: LinExpr },
}

impl QuadConstraint {
    pub fn name(&self) -> &str {
        match self {
            QuadConstraint::Disc { name, .. } | QuadConstraint::SumSquares { name, .. } => name,
        }
    }

    /// Left side minus right side; positive when violated.
    pub fn excess(&self, values: &[f64]) -> f64 {
        match self {
            QuadConstraint::Disc { p, q, radius, scale, .. } => {
                let (p, q) = (values[p.0], values[q.0]);
                p * p + q * q - radius * radius * scale.eval(values)
            }
            QuadConstraint::SumSquares { terms, rhs, .. } => {
                terms.iter().map(|t| t.eval(values).powi(2)).sum::<f64>() - rhs.eval(values)
            }
        }
    }

    /// Linear cut valid for every point satisfying the constraint with a
    /// 0/1 scale, and violated by `values` when they violate it.
    pub fn cut(&self, values: &[f64]) -> Row {
        match self {
            QuadConstraint::Disc { name, p, q, radius, scale } => {
                let (p0, q0) = (values[p.0], values[q.0]);
                let norm = (p0 * p0 + q0 * q0).sqrt();
                let mut coefs = vec![(*p, p0), (*q, q0)];
                coefs.extend(scale.terms.iter().map(|&(v, c)| (v, -norm * radius * c)));
                Row { name: format!("{name}_oa"), coefs, sense: Sense::Le, rhs: norm * radius * scale.constant }
            }
            QuadConstraint::SumSquares { name, terms, rhs } => {
                // t^2 >= 2 t0 t - t0^2
                let mut coefs = Vec::new();
                let mut constant = 0.0;
                for t in terms {
                    let t0 = t.eval(values);
                    coefs.extend(t.terms.iter().map(|&(v, c)| (v, 2.0 * t0 * c)));
                    constant += 2.0 * t0 * t.constant - t0 * t0;
                }
                coefs.extend(rhs.terms.iter().map(|&(v, c)| (v, -c)));
                Row { name: format!("{name}_oa"), coefs, sense: Sense::Le, rhs: rhs.constant - constant }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ModelIR {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    pub quads: Vec<QuadConstraint>,
    pub objective: Vec<(VarId, f64)>,
    pub objective_constant: f64,
}

impl ModelIR {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lb: f64, ub: f64, group: VarGroup) -> VarId {
        let (lb, ub) = if kind == VarKind::Binary { (lb.max(0.0), ub.min(1.0)) } else { (lb, ub) };
        self.vars.push(Variable { name: name.into(), kind, lb, ub, group });
        VarId(self.vars.len() - 1)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lb: f64, ub: f64, group: VarGroup) -> VarId {
        self.add_var(name, VarKind::Continuous, lb, ub, group)
    }

    pub fn binary(&mut self, name: impl Into<String>, group: VarGroup) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0, group)
    }

    pub fn fix(&mut self, v: VarId, value: f64) {
        self.vars[v.0].lb = value;
        self.vars[v.0].ub = value;
    }

    /// Adds a row; repeated variables are merged and zero terms dropped.
    pub fn add_row(&mut self, name: impl Into<String>, coefs: Vec<(VarId, f64)>, sense: Sense, rhs: f64) {
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(coefs.len());
        for (v, c) in coefs {
            match merged.iter_mut().find(|(u, _)| *u == v) {
                Some(e) => e.1 += c,
                None => merged.push((v, c)),
            }
        }
        let coefs: Vec<_> = merged.into_iter().filter(|&(_, c)| c != 0.0).collect();
        self.rows.push(Row { name: name.into(), coefs, sense, rhs });
    }

    /// `lhs (sense) rhs` with both sides affine.
    pub fn add_constraint(&mut self, name: impl Into<String>, lhs: &LinExpr, sense: Sense, rhs: &LinExpr) {
        let mut coefs = lhs.terms.clone();
        coefs.extend(rhs.terms.iter().map(|&(v, c)| (v, -c)));
        self.add_row(name, coefs, sense, rhs.constant - lhs.constant);
    }

    pub fn add_quad(&mut self, q: QuadConstraint) {
        self.quads.push(q);
    }

    pub fn set_objective(&mut self, expr: &LinExpr) {
        self.objective = expr.terms.clone();
        self.objective_constant = expr.constant;
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn eval_objective(&self, values: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Largest violation of bounds, integrality, rows and quadratic rows.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lb - x).max(x - v.ub);
            if v.kind == VarKind::Binary {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for r in &self.rows {
            worst = worst.max(r.violation(values));
        }
        for q in &self.quads {
            worst = worst.max(q.excess(values));
        }
        worst
    }

    /// Index of the worst row and its violation, if any row is violated.
    pub fn worst_row(&self, values: &[f64]) -> Option<(usize, f64)> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.violation(values)))
            .filter(|&(_, v)| v > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }
}
