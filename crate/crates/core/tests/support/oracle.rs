//! Exhaustive reference solutions: every plan of X, every scenario, each
//! recourse problem solved as two LPs (chi = 0 and chi = 1).

#![allow(dead_code)]

use std::collections::HashMap;

use gridflood::engine::{solve_lp, EngineConfig, SolveStatus};
use gridflood::geometry::PfVariant;
use gridflood::grid::{component_status, GridCase, ScenarioSet};
use gridflood::mitigation::{enumerate_plans, plan_cost, CostTable, MitigationPlan};
use gridflood::recourse::{FirstStageSpec, RecourseContext};

pub struct Oracle {
    pub probs: Vec<f64>,
    /// (plan, cost, loss per scenario)
    pub plans: Vec<(MitigationPlan, u64, Vec<f64>)>,
}

/// `L(plan, xi)` as the better of the two LPs with `chi` fixed.
pub fn lp_loss(ctx: &RecourseContext, plan: &MitigationPlan, xi: &gridflood::grid::IndicatorMatrix) -> f64 {
    let rm = ctx.build(FirstStageSpec::Plan(plan), xi).unwrap();
    let cfg = EngineConfig::default();
    let mut best = f64::INFINITY;
    for chi in [0.0, 1.0] {
        let mut m = rm.model.clone();
        m.fix(rm.block.chi, chi);
        let r = solve_lp(&m, &cfg).unwrap();
        if r.status == SolveStatus::Optimal {
            best = best.min(r.objective);
        }
    }
    assert!(best.is_finite(), "both chi branches infeasible");
    best
}

impl Oracle {
    pub fn new(case: &GridCase, set: &ScenarioSet, variant: PfVariant, max_budget: u64) -> Self {
        assert!(matches!(variant, PfVariant::Dc | PfVariant::LpacC), "the LP oracle needs a polyhedral variant");
        let ctx = RecourseContext::new(case, variant).unwrap();
        let costs = CostTable::from_case(case, set.levels());
        let xis = set.indicators(case).unwrap();
        // the loss only depends on which buses are live
        let mut cache: HashMap<(usize, Vec<bool>), f64> = HashMap::new();
        let plans = enumerate_plans(&costs, max_budget)
            .into_iter()
            .map(|p| {
                let losses = xis
                    .iter()
                    .enumerate()
                    .map(|(w, xi)| {
                        let key = (w, component_status(&p, xi, case).alpha);
                        *cache.entry(key).or_insert_with(|| lp_loss(&ctx, &p, xi))
                    })
                    .collect();
                let c = plan_cost(&p, &costs);
                (p, c, losses)
            })
            .collect();
        Self { probs: set.probabilities(), plans }
    }

    fn best(&self, budget: u64, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.plans.iter().filter(|(_, c, _)| *c <= budget).map(|(_, _, l)| f(l)).fold(f64::INFINITY, f64::min)
    }

    pub fn expected(&self, l: &[f64]) -> f64 {
        self.probs.iter().zip(l).map(|(p, v)| p * v).sum()
    }

    pub fn sp(&self, budget: u64) -> f64 {
        self.best(budget, |l| self.expected(l))
    }

    pub fn ro(&self, budget: u64) -> f64 {
        self.best(budget, |l| l.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn scenario_best(&self, budget: u64, w: usize) -> f64 {
        self.best(budget, |l| l[w])
    }

    pub fn ews(&self, budget: u64) -> f64 {
        (0..self.probs.len()).map(|w| self.probs[w] * self.scenario_best(budget, w)).sum()
    }

    pub fn mws(&self, budget: u64) -> f64 {
        (0..self.probs.len()).map(|w| self.scenario_best(budget, w)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Plans attaining `target` under `f` within `tol`.
    pub fn optimal_plans(&self, budget: u64, target: f64, tol: f64, f: impl Fn(&[f64]) -> f64) -> Vec<&MitigationPlan> {
        self.plans.iter().filter(|(_, c, l)| *c <= budget && f(l) <= target + tol).map(|(p, _, _)| p).collect()
    }
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}
