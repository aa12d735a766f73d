//! Embedded solver: LP relaxations by [`solve_lp`], binaries by
//! best-bound branch-and-bound in [`solve_milp`], and convex quadratic rows
//! by outer approximation in [`oa_refine`]. [`solve`] picks the right one.

mod bnb;
mod lpfile;
mod oa;
mod simplex;

use serde::Serialize;

use crate::model::ModelIR;

pub use bnb::solve_milp;
pub use lpfile::{export_lp, write_lp};
pub use oa::oa_refine;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngineConfig {
    pub integrality_tol: f64,
    pub feasibility_tol: f64,
    pub oa_tol: f64,
    pub node_cap: usize,
    /// Simplex iterations per LP.
    pub iteration_cap: usize,
    pub cut_cap: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            integrality_tol: 1e-6,
            feasibility_tol: 1e-7,
            oa_tol: 1e-6,
            node_cap: 200_000,
            iteration_cap: 200_000,
            cut_cap: 5_000,
        }
    }
}

impl EngineConfig {
    pub fn from_grid(config: &crate::grid::Config) -> Self {
        Self {
            integrality_tol: config.integrality_tol,
            feasibility_tol: config.feasibility_tol,
            oa_tol: config.oa_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    CapReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub node: usize,
    pub bound: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Incumbent objective; infinite when none was found.
    pub objective: f64,
    pub values: Vec<f64>,
    pub nodes: usize,
    pub bound: f64,
    pub trace: Vec<TracePoint>,
    pub lp_iterations: usize,
    pub cuts: usize,
}

impl SolveResult {
    fn infeasible(nodes: usize, lp_iterations: usize) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            objective: f64::INFINITY,
            values: vec![],
            nodes,
            bound: f64::INFINITY,
            trace: vec![],
            lp_iterations,
            cuts: 0,
        }
    }

    pub fn gap(&self) -> f64 {
        (self.objective - self.bound).abs()
    }

    pub fn has_incumbent(&self) -> bool {
        !self.values.is_empty()
    }
}

pub(crate) fn gap_tol(incumbent: f64) -> f64 {
    1e-9 * (1.0 + incumbent.abs())
}

/// Linear relaxation: integrality and quadratic rows are dropped.
pub fn solve_lp(model: &ModelIR, config: &EngineConfig) -> crate::Result<SolveResult> {
    let lb: Vec<f64> = model.vars.iter().map(|v| v.lb).collect();
    let ub: Vec<f64> = model.vars.iter().map(|v| v.ub).collect();
    let (out, iters) = simplex::solve_bounded(model, &lb, &ub, config.iteration_cap);
    match out {
        simplex::LpOutcome::Optimal { objective, values } => Ok(SolveResult {
            status: SolveStatus::Optimal,
            objective,
            values,
            nodes: 1,
            bound: objective,
            trace: vec![],
            lp_iterations: iters,
            cuts: 0,
        }),
        simplex::LpOutcome::Infeasible => Ok(SolveResult::infeasible(1, iters)),
        simplex::LpOutcome::IterationCap => Ok(SolveResult {
            status: SolveStatus::CapReached,
            objective: f64::INFINITY,
            values: vec![],
            nodes: 1,
            bound: f64::NEG_INFINITY,
            trace: vec![],
            lp_iterations: iters,
            cuts: 0,
        }),
        simplex::LpOutcome::Unbounded => Err(crate::Error::solver("LP relaxation is unbounded", None)),
    }
}

/// Solves `model` to certified optimality: branch-and-bound when it has no
/// quadratic rows, outer approximation otherwise.
pub fn solve(model: &ModelIR, config: &EngineConfig, warmstart: Option<&[f64]>) -> crate::Result<SolveResult> {
    if model.quads.is_empty() {
        solve_milp(model, config, warmstart)
    } else {
        oa_refine(model, config, warmstart)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinExpr, Sense, VarGroup};

    #[test]
    fn maximize_bounded_variable() {
        let mut m = ModelIR::new();
        let x = m.continuous("x", f64::NEG_INFINITY, f64::INFINITY, VarGroup::Other);
        m.add_row("c", vec![(x, 1.0)], Sense::Le, 1.0);
        m.set_objective(&LinExpr::var(x).scaled(-1.0));
        let r = solve_lp(&m, &EngineConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut m = ModelIR::new();
        let x = m.continuous("x", f64::NEG_INFINITY, f64::INFINITY, VarGroup::Other);
        m.add_row("lo", vec![(x, 1.0)], Sense::Ge, 2.0);
        m.add_row("hi", vec![(x, 1.0)], Sense::Le, 1.0);
        assert_eq!(solve_lp(&m, &EngineConfig::default()).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_an_error() {
        let mut m = ModelIR::new();
        let x = m.continuous("x", 0.0, f64::INFINITY, VarGroup::Other);
        m.set_objective(&LinExpr::var(x).scaled(-1.0));
        assert!(solve_lp(&m, &EngineConfig::default()).is_err());
    }

    #[test]
    fn equality_rows_and_free_variables() {
        // min x + 2y, x + y = 3, x - y >= -1, x <= 1.5
        let mut m = ModelIR::new();
        let x = m.continuous("x", f64::NEG_INFINITY, 1.5, VarGroup::Other);
        let y = m.continuous("y", f64::NEG_INFINITY, f64::INFINITY, VarGroup::Other);
        m.add_row("s", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 3.0);
        m.add_row("d", vec![(x, 1.0), (y, -1.0)], Sense::Ge, -1.0);
        m.set_objective(&LinExpr::var(x).term(y, 2.0));
        let r = solve_lp(&m, &EngineConfig::default()).unwrap();
        assert!((r.objective - 4.5).abs() < 1e-12, "{}", r.objective);
    }
}
