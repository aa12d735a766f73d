use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::simplex::{solve_bounded, LpOutcome};
use super::{gap_tol, EngineConfig, SolveResult, SolveStatus, TracePoint};
use crate::model::{ModelIR, VarKind};

struct Node {
    bound: f64,
    seq: usize,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: the smallest bound, then the oldest node, comes out first
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Re-solves with every binary fixed to its rounded value so that the
/// reported incumbent is exactly integral.
fn polish(model: &ModelIR, lb: &[f64], ub: &[f64], values: &[f64], config: &EngineConfig) -> Option<(f64, Vec<f64>)> {
    let mut lb = lb.to_vec();
    let mut ub = ub.to_vec();
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind == VarKind::Binary {
            let r = values[j].round();
            lb[j] = r;
            ub[j] = r;
        }
    }
    match solve_bounded(model, &lb, &ub, config.iteration_cap).0 {
        LpOutcome::Optimal { objective, values } => Some((objective, values)),
        _ => None,
    }
}

fn most_fractional(model: &ModelIR, values: &[f64], tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind != VarKind::Binary {
            continue;
        }
        let f = (values[j] - values[j].floor()).min(values[j].ceil() - values[j]);
        if f > tol && best.is_none_or(|(_, bf)| f > bf + 1e-12) {
            best = Some((j, f));
        }
    }
    best.map(|(j, _)| j)
}

/// Best-bound branch-and-bound over the binaries of `model`, ignoring any
/// quadratic rows. `warmstart`, if feasible, becomes the first incumbent.
pub fn solve_milp(model: &ModelIR, config: &EngineConfig, warmstart: Option<&[f64]>) -> crate::Result<SolveResult> {
    let base_lb: Vec<f64> = model.vars.iter().map(|v| v.lb).collect();
    let base_ub: Vec<f64> = model.vars.iter().map(|v| v.ub).collect();

    let mut incumbent = f64::INFINITY;
    let mut best_values: Vec<f64> = Vec::new();
    if let Some(w) = warmstart {
        let integral = model
            .vars
            .iter()
            .zip(w)
            .all(|(v, x)| v.kind != VarKind::Binary || (x - x.round()).abs() <= config.integrality_tol);
        let linear_ok = w.len() == model.vars.len()
            && model.rows.iter().all(|r| r.violation(w) <= config.feasibility_tol)
            && model.vars.iter().zip(w).all(|(v, &x)| x >= v.lb - config.feasibility_tol && x <= v.ub + config.feasibility_tol);
        if integral && linear_ok {
            incumbent = model.eval_objective(w);
            best_values = w.to_vec();
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node { bound: f64::NEG_INFINITY, seq, fixings: vec![] });
    seq += 1;
    let mut nodes = 0usize;
    let mut lp_iterations = 0usize;
    let mut trace = Vec::new();
    let mut lb = base_lb.clone();
    let mut ub = base_ub.clone();

    while let Some(node) = heap.pop() {
        if node.bound >= incumbent - gap_tol(incumbent) {
            continue;
        }
        if nodes >= config.node_cap {
            let bound = heap.iter().map(|n| n.bound).fold(node.bound, f64::min);
            return Ok(SolveResult {
                status: SolveStatus::CapReached,
                objective: incumbent,
                values: best_values,
                nodes,
                bound,
                trace,
                lp_iterations,
                cuts: 0,
            });
        }
        nodes += 1;
        lb.copy_from_slice(&base_lb);
        ub.copy_from_slice(&base_ub);
        for &(j, v) in &node.fixings {
            lb[j] = v;
            ub[j] = v;
        }
        let (out, iters) = solve_bounded(model, &lb, &ub, config.iteration_cap);
        lp_iterations += iters;
        let (obj, values) = match out {
            LpOutcome::Optimal { objective, values } => (objective, values),
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => return Err(crate::Error::solver("LP relaxation is unbounded", None)),
            LpOutcome::IterationCap => {
                return Err(crate::Error::solver(
                    format!("simplex iteration cap {} reached at node {nodes}", config.iteration_cap),
                    incumbent.is_finite().then_some(incumbent),
                ))
            }
        };
        if obj >= incumbent - gap_tol(incumbent) {
            continue;
        }
        match most_fractional(model, &values, config.integrality_tol) {
            None => {
                if let Some((pobj, pvals)) = polish(model, &lb, &ub, &values, config) {
                    if pobj < incumbent {
                        incumbent = pobj;
                        best_values = pvals;
                        let open = heap.iter().map(|n| n.bound).fold(incumbent, f64::min);
                        trace.push(TracePoint { node: nodes, bound: open.min(obj), incumbent });
                    }
                }
            }
            Some(j) => {
                for v in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Node { bound: obj, seq, fixings });
                    seq += 1;
                }
            }
        }
    }

    if best_values.is_empty() {
        return Ok(SolveResult::infeasible(nodes, lp_iterations));
    }
    trace.push(TracePoint { node: nodes, bound: incumbent, incumbent });
    Ok(SolveResult {
        status: SolveStatus::Optimal,
        objective: incumbent,
        values: best_values,
        nodes,
        bound: incumbent,
        trace,
        lp_iterations,
        cuts: 0,
    })
}
