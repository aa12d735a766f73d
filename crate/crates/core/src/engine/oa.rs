use super::{solve_milp, EngineConfig, SolveResult, SolveStatus};
use crate::model::ModelIR;

/// Outer approximation: solve the polyhedral MILP, add a gradient cut for
/// every quadratic row violated by more than `oa_tol`, and repeat.
pub fn oa_refine(model: &ModelIR, config: &EngineConfig, warmstart: Option<&[f64]>) -> crate::Result<SolveResult> {
    let mut work = model.clone();
    work.quads.clear();
    let mut cuts = 0usize;
    let mut nodes = 0usize;
    let mut lp_iterations = 0usize;
    // a warm start is only a valid incumbent for the relaxation if it
    // satisfies the quadratic rows too
    let warm = warmstart.filter(|w| model.quads.iter().all(|q| q.excess(w) <= config.oa_tol));
    loop {
        let mut res = solve_milp(&work, config, warm)?;
        nodes += res.nodes;
        lp_iterations += res.lp_iterations;
        res.nodes = nodes;
        res.lp_iterations = lp_iterations;
        res.cuts = cuts;
        if res.status != SolveStatus::Optimal {
            return Ok(res);
        }
        let violated: Vec<_> = model.quads.iter().filter(|q| q.excess(&res.values) > config.oa_tol).collect();
        if violated.is_empty() {
            return Ok(res);
        }
        if cuts + violated.len() > config.cut_cap {
            return Err(crate::Error::solver(
                format!("outer approximation hit the cut cap {} with {} violated rows", config.cut_cap, violated.len()),
                None,
            ));
        }
        for q in violated {
            work.rows.push(q.cut(&res.values));
            cuts += 1;
        }
    }
}
